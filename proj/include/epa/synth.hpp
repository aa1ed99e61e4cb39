#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "epa/core.hpp"
#include "epa/error.hpp"
#include "epa/tensor.hpp"

namespace epa::synth {

// Parameters of a synthetic dataset with exact Neural-Collapse geometry.
struct SynthSpec {
  std::size_t classes = 10;
  std::size_t feature_dim = 32;
  double etf_radius = 5.0;   // alpha: distance of each class mean from the global mean
  double within_noise = 0.0;  // sigma of the isotropic Gaussian around each class mean
  double offset_norm = 2.0;   // |mu_g - o'|
  std::size_t samples_per_class = 100;
  std::uint64_t seed = 0;
  double weight_norm = 1.0;  // |w_c| shared by every class column of W

  friend bool operator==(const SynthSpec&, const SynthSpec&) = default;
};

struct SynthDataset {
  DenseMatrix id_features;  // class-major: all rows of class 0, then class 1, ...
  std::vector<std::size_t> labels;
  ClassifierHead head;
  DenseMatrix true_means;  // C×n, absolute class means mu_c
  DenseVector global_mean;
  DenseVector true_origin_shift;
};

enum class OodKind { OffSubspace, NearCenter };

// Ranges (uniform) used to place OOD samples.
struct OodShape {
  // OffSubspace: f = o' + a·(mu_c − o') + r·v with v orthogonal to the ID subspace,
  // a in [in_subspace_min, in_subspace_max], r/d in [orth_min, orth_max], d = sqrt(alpha² + offset²).
  double in_subspace_min = 0.75;
  double in_subspace_max = 1.25;
  double orth_min = 1.0;
  double orth_max = 2.0;
  // NearCenter: f = mu_g + rho·alpha·u with u a unit vector in the ETF span, rho in [0, near_radius_max].
  double near_radius_max = 0.25;
};

struct NcDiagnostics {
  double nc1_ratio = 0.0;     // trace(S_within) / trace(S_between)
  double nc2_cos_dev = 0.0;   // max |cos(mu_c − mu_g, mu_c' − mu_g) + 1/(C−1)|
  double nc3_align = 0.0;     // max angle (radians) between w_c and mu_c − mu_g
  double within_trace = 0.0;  // (1/N) Σ |f − mu_y|²
  double between_trace = 0.0; // (1/C) Σ_c |mu_c − mu_g|²
};

namespace detail {

// Orthonormal frame of the synthetic geometry, fully determined by the seed.
struct Geometry {
  std::vector<std::vector<double>> etf_axes;  // C−1 unit vectors spanning the ETF
  std::vector<double> offset_axis;            // unit vector orthogonal to the ETF span
  DenseMatrix centered_means;                 // C×n, rows of norm alpha
  DenseVector origin_shift;                   // lies inside the ETF span
  DenseVector global_mean;
};

inline void validate(const SynthSpec& spec) {
  if (spec.classes < 2) throw Error(ErrorCode::InvalidArgument, "synthetic data needs at least 2 classes");
  if (spec.feature_dim < spec.classes) {
    throw Error(ErrorCode::DimTooSmall, "feature_dim " + std::to_string(spec.feature_dim) +
                                            " must be at least the class count " + std::to_string(spec.classes));
  }
  if (!(spec.etf_radius > 0.0) || !std::isfinite(spec.etf_radius))
    throw Error(ErrorCode::InvalidArgument, "etf_radius must be positive");
  if (!(spec.within_noise >= 0.0) || !std::isfinite(spec.within_noise))
    throw Error(ErrorCode::InvalidArgument, "within_noise must be non-negative");
  if (!(spec.offset_norm >= 0.0) || !std::isfinite(spec.offset_norm))
    throw Error(ErrorCode::InvalidArgument, "offset_norm must be non-negative");
  if (!(spec.weight_norm > 0.0) || !std::isfinite(spec.weight_norm))
    throw Error(ErrorCode::InvalidArgument, "weight_norm must be positive");
}

// Modified Gram-Schmidt against `frame`, repeated once for stability. Returns false if v collapses.
inline bool orthonormalize_against(std::vector<double>& v, const std::vector<std::vector<double>>& frame) {
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto& q : frame) {
      const double proj = dot(v, q);
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= proj * q[i];
    }
  }
  const double len = norm2(v);
  if (len < 1e-8) return false;
  for (double& x : v) x /= len;
  return true;
}

inline std::vector<double> random_unit_orthogonal(std::mt19937_64& rng, std::size_t n,
                                                  const std::vector<std::vector<double>>& frame) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(n);
  do {
    for (double& x : v) x = normal(rng);
  } while (!orthonormalize_against(v, frame));
  return v;
}

// Helmert basis of the complement of the all-ones vector in R^C (columns orthonormal).
inline std::vector<std::vector<double>> helmert_basis(std::size_t classes) {
  std::vector<std::vector<double>> basis;
  for (std::size_t j = 1; j < classes; ++j) {
    std::vector<double> h(classes, 0.0);
    const double scale = 1.0 / std::sqrt(static_cast<double>(j * (j + 1)));
    for (std::size_t i = 0; i < j; ++i) h[i] = scale;
    h[j] = -static_cast<double>(j) * scale;
    basis.push_back(std::move(h));
  }
  return basis;
}

inline DenseMatrix etf_in_frame(std::size_t classes, double radius, const std::vector<std::vector<double>>& axes,
                                std::size_t n) {
  // Simplex ETF sqrt(C/(C−1))·(I − 11ᵀ/C), expressed in Helmert coordinates then mapped onto `axes`.
  const double c = static_cast<double>(classes);
  const double scale = radius * std::sqrt(c / (c - 1.0));
  const auto helmert = helmert_basis(classes);
  DenseMatrix out(classes, n);
  for (std::size_t k = 0; k < classes; ++k) {
    for (std::size_t j = 0; j + 1 < classes; ++j) {
      // Row k of (I − 11ᵀ/C) dotted with Helmert column j equals helmert[j][k], since helmert ⟂ 1.
      const double coord = scale * helmert[j][k];
      for (std::size_t i = 0; i < n; ++i) out(k, i) += coord * axes[j][i];
    }
  }
  return out;
}

inline Geometry build_geometry(const SynthSpec& spec, std::mt19937_64& rng) {
  validate(spec);
  const std::size_t n = spec.feature_dim;
  const std::size_t classes = spec.classes;

  Geometry g;
  for (std::size_t j = 0; j + 1 < classes; ++j) g.etf_axes.push_back(random_unit_orthogonal(rng, n, g.etf_axes));
  g.offset_axis = random_unit_orthogonal(rng, n, g.etf_axes);
  g.centered_means = etf_in_frame(classes, spec.etf_radius, g.etf_axes, n);

  std::normal_distribution<double> normal(0.0, 1.0);
  g.origin_shift = DenseVector(n);
  for (const auto& axis : g.etf_axes) {
    const double coef = normal(rng);
    for (std::size_t i = 0; i < n; ++i) g.origin_shift[i] += coef * axis[i];
  }
  g.global_mean = DenseVector(n);
  for (std::size_t i = 0; i < n; ++i) g.global_mean[i] = g.origin_shift[i] + spec.offset_norm * g.offset_axis[i];
  return g;
}

inline ClassifierHead build_head(const SynthSpec& spec, const Geometry& g) {
  const std::size_t n = spec.feature_dim;
  DenseMatrix weights(n, spec.classes);
  for (std::size_t c = 0; c < spec.classes; ++c)
    for (std::size_t i = 0; i < n; ++i) weights(i, c) = spec.weight_norm * g.centered_means(c, i) / spec.etf_radius;
  // b = −Wᵀo' so that Wᵀz + b = Wᵀ(z − o') exactly.
  DenseVector bias = matvec_transposed(weights, g.origin_shift.values());
  for (std::size_t c = 0; c < bias.size(); ++c) bias[c] = -bias[c];
  return ClassifierHead(std::move(weights), std::move(bias));
}

inline DenseMatrix sample_classes(const SynthSpec& spec, const Geometry& g, std::size_t per_class,
                                  std::mt19937_64& rng) {
  const std::size_t n = spec.feature_dim;
  std::normal_distribution<double> normal(0.0, 1.0);
  DenseMatrix out(per_class * spec.classes, n);
  std::size_t r = 0;
  for (std::size_t c = 0; c < spec.classes; ++c) {
    for (std::size_t s = 0; s < per_class; ++s, ++r) {
      for (std::size_t i = 0; i < n; ++i) {
        const double noise = spec.within_noise > 0.0 ? spec.within_noise * normal(rng) : 0.0;
        out(r, i) = g.global_mean[i] + g.centered_means(c, i) + noise;
      }
    }
  }
  return out;
}

// Robust angle between two non-zero vectors: 2·atan2(|â − b̂|, |â + b̂|).
inline double vector_angle(std::span<const double> a, std::span<const double> b) {
  const double na = norm2(a);
  const double nb = norm2(b);
  std::vector<double> diff(a.size());
  std::vector<double> sum(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff[i] = a[i] / na - b[i] / nb;
    sum[i] = a[i] / na + b[i] / nb;
  }
  return 2.0 * std::atan2(norm2(diff), norm2(sum));
}

}  // namespace detail

/// Centered simplex-ETF class means (C×n): rows of norm `radius`, pairwise cosine −1/(C−1).
inline DenseMatrix make_etf(std::size_t classes, std::size_t feature_dim, double radius, std::uint64_t seed) {
  if (classes < 2) throw Error(ErrorCode::InvalidArgument, "ETF needs at least 2 vertices");
  if (feature_dim < classes) {
    throw Error(ErrorCode::DimTooSmall, "ETF with " + std::to_string(classes) + " vertices needs feature_dim >= " +
                                            std::to_string(classes));
  }
  if (!(radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "ETF radius must be positive");
  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> axes;
  for (std::size_t j = 0; j + 1 < classes; ++j) axes.push_back(detail::random_unit_orthogonal(rng, feature_dim, axes));
  return detail::etf_in_frame(classes, radius, axes, feature_dim);
}

inline SynthDataset generate(const SynthSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  const detail::Geometry g = detail::build_geometry(spec, rng);
  ClassifierHead head = detail::build_head(spec, g);
  DenseMatrix features = detail::sample_classes(spec, g, spec.samples_per_class, rng);

  std::vector<std::size_t> labels;
  labels.reserve(features.rows());
  for (std::size_t c = 0; c < spec.classes; ++c) labels.insert(labels.end(), spec.samples_per_class, c);

  DenseMatrix means(spec.classes, spec.feature_dim);
  for (std::size_t c = 0; c < spec.classes; ++c)
    for (std::size_t i = 0; i < spec.feature_dim; ++i) means(c, i) = g.global_mean[i] + g.centered_means(c, i);

  return SynthDataset{std::move(features), std::move(labels), std::move(head), std::move(means), g.global_mean,
                      g.origin_shift};
}

/// Fresh ID samples from the same geometry as generate(spec), drawn with an independent seed.
inline DenseMatrix draw_id(const SynthSpec& spec, std::size_t per_class, std::uint64_t seed) {
  std::mt19937_64 geometry_rng(spec.seed);
  const detail::Geometry g = detail::build_geometry(spec, geometry_rng);
  std::mt19937_64 rng(seed);
  return detail::sample_classes(spec, g, per_class, rng);
}

inline DenseMatrix make_ood(const SynthSpec& spec, OodKind kind, std::size_t count, std::uint64_t seed,
                            const OodShape& shape = {}) {
  std::mt19937_64 geometry_rng(spec.seed);
  const detail::Geometry g = detail::build_geometry(spec, geometry_rng);
  const std::size_t n = spec.feature_dim;
  if (kind == OodKind::OffSubspace && n < spec.classes + 1) {
    throw Error(ErrorCode::DimTooSmall, "off-subspace OOD needs feature_dim > class count");
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick_class(0, spec.classes - 1);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  std::vector<std::vector<double>> id_frame = g.etf_axes;
  id_frame.push_back(g.offset_axis);
  const double d = std::hypot(spec.etf_radius, spec.offset_norm);

  DenseMatrix out(count, n);
  for (std::size_t r = 0; r < count; ++r) {
    auto row = out.row(r);
    if (kind == OodKind::OffSubspace) {
      const std::size_t c = pick_class(rng);
      const double a = uniform(shape.in_subspace_min, shape.in_subspace_max);
      const double radius = d * uniform(shape.orth_min, shape.orth_max);
      const auto v = detail::random_unit_orthogonal(rng, n, id_frame);
      for (std::size_t i = 0; i < n; ++i) {
        const double to_mean = g.global_mean[i] + g.centered_means(c, i) - g.origin_shift[i];
        row[i] = g.origin_shift[i] + a * to_mean + radius * v[i];
      }
    } else {
      const double rho = uniform(0.0, shape.near_radius_max);
      std::normal_distribution<double> normal(0.0, 1.0);
      std::vector<double> u(n, 0.0);
      for (const auto& axis : g.etf_axes) {
        const double coef = normal(rng);
        for (std::size_t i = 0; i < n; ++i) u[i] += coef * axis[i];
      }
      const double len = norm2(u);
      for (std::size_t i = 0; i < n; ++i) {
        row[i] = g.global_mean[i] + (len > 0.0 ? rho * spec.etf_radius * u[i] / len : 0.0);
      }
    }
  }
  return out;
}

inline DenseMatrix vstack(const DenseMatrix& top, const DenseMatrix& bottom) {
  if (top.rows() > 0 && bottom.rows() > 0 && top.cols() != bottom.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "vstack of different widths");
  }
  const std::size_t cols = top.rows() > 0 ? top.cols() : bottom.cols();
  std::vector<double> data(top.values().begin(), top.values().end());
  data.insert(data.end(), bottom.values().begin(), bottom.values().end());
  return DenseMatrix(top.rows() + bottom.rows(), cols, std::move(data));
}

/// NC1–NC3 measurements from empirical class means.
///
/// Between-class scatter weights every class equally: (1/C)·Σ (mu_c − mu_g)(mu_c − mu_g)ᵀ,
/// with mu_g the mean of all samples. Within-class scatter averages over samples.
inline NcDiagnostics nc_diagnostics(const SynthDataset& data) {
  const std::size_t n = data.id_features.cols();
  const std::size_t classes = data.head.class_count();
  const std::size_t rows = data.id_features.rows();
  if (rows == 0) throw Error(ErrorCode::EmptyInput, "diagnostics need samples");
  if (data.labels.size() != rows) throw Error(ErrorCode::ShapeMismatch, "labels do not match feature rows");

  DenseMatrix means(classes, n);
  std::vector<std::size_t> counts(classes, 0);
  std::vector<double> global(n, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t c = data.labels[r];
    if (c >= classes) throw Error(ErrorCode::InvalidArgument, "label out of range");
    ++counts[c];
    auto row = data.id_features.row(r);
    for (std::size_t i = 0; i < n; ++i) {
      means(c, i) += row[i];
      global[i] += row[i];
    }
  }
  for (std::size_t c = 0; c < classes; ++c) {
    if (counts[c] == 0) throw Error(ErrorCode::EmptyInput, "class " + std::to_string(c) + " has no samples");
    for (std::size_t i = 0; i < n; ++i) means(c, i) /= static_cast<double>(counts[c]);
  }
  for (double& v : global) v /= static_cast<double>(rows);

  NcDiagnostics out;
  for (std::size_t r = 0; r < rows; ++r) {
    auto row = data.id_features.row(r);
    auto mean = means.row(data.labels[r]);
    for (std::size_t i = 0; i < n; ++i) out.within_trace += (row[i] - mean[i]) * (row[i] - mean[i]);
  }
  out.within_trace /= static_cast<double>(rows);

  std::vector<std::vector<double>> centered(classes, std::vector<double>(n));
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < n; ++i) centered[c][i] = means(c, i) - global[i];
    out.between_trace += dot(centered[c], centered[c]);
  }
  out.between_trace /= static_cast<double>(classes);
  out.nc1_ratio = out.within_trace / out.between_trace;

  const double target = -1.0 / static_cast<double>(classes - 1);
  for (std::size_t a = 0; a < classes; ++a) {
    for (std::size_t b = a + 1; b < classes; ++b) {
      const double cosine = dot(centered[a], centered[b]) / (norm2(centered[a]) * norm2(centered[b]));
      out.nc2_cos_dev = std::max(out.nc2_cos_dev, std::abs(cosine - target));
    }
  }

  for (std::size_t c = 0; c < classes; ++c) {
    const DenseVector w = data.head.weights().col_vector(c);
    out.nc3_align = std::max(out.nc3_align, detail::vector_angle(w.values(), centered[c]));
  }
  return out;
}

}  // namespace epa::synth
