#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "epa/error.hpp"
#include "epa/linalg.hpp"
#include "epa/tensor.hpp"

namespace epa {

/// Last linear layer of a classifier: logits = Wᵀz + b with W of shape n×C.
class ClassifierHead {
 public:
  ClassifierHead(DenseMatrix weights, DenseVector bias) : weights_(std::move(weights)), bias_(std::move(bias)) {
    if (weights_.cols() < 2) throw Error(ErrorCode::InvalidArgument, "classifier head needs at least 2 classes");
    if (weights_.rows() < 1) throw Error(ErrorCode::InvalidArgument, "classifier head needs feature dim >= 1");
    if (bias_.size() != weights_.cols()) {
      throw Error(ErrorCode::ShapeMismatch, "bias length " + std::to_string(bias_.size()) +
                                                " does not match class count " + std::to_string(weights_.cols()));
    }
  }

  const DenseMatrix& weights() const noexcept { return weights_; }
  const DenseVector& bias() const noexcept { return bias_; }
  std::size_t feature_dim() const noexcept { return weights_.rows(); }
  std::size_t class_count() const noexcept { return weights_.cols(); }

  friend bool operator==(const ClassifierHead&, const ClassifierHead&) = default;

 private:
  DenseMatrix weights_;
  DenseVector bias_;
};

enum class CenterMode { OPrime, GlobalMean };

constexpr std::string_view to_string(CenterMode mode) {
  return mode == CenterMode::OPrime ? "oprime" : "mean";
}

inline CenterMode parse_center_mode(std::string_view text) {
  if (text == "oprime") return CenterMode::OPrime;
  if (text == "mean") return CenterMode::GlobalMean;
  throw Error(ErrorCode::InvalidArgument, "center mode must be 'oprime' or 'mean', got '" + std::string(text) + "'");
}

/// Fitted ID subspace: origin shift, orthonormal basis (n×D) and the fusion weight β.
///
/// With CenterMode::GlobalMean the origin shift holds the training mean instead of o′.
struct SubspaceModel {
  DenseVector origin_shift;
  DenseMatrix basis;
  double beta = 0.0;
  CenterMode center_mode = CenterMode::OPrime;
  ClassifierHead head;
  std::vector<double> eigenvalues;  // full spectrum of the shifted second moment

  std::size_t dim() const noexcept { return basis.cols(); }
  std::size_t feature_dim() const noexcept { return basis.rows(); }
  std::size_t class_count() const noexcept { return head.class_count(); }
};

struct ScoredSample {
  double theta = 0.0;    // radians, [0, π/2]
  double entropy = 0.0;  // nats, [0, ln C]
  double epa = 0.0;      // beta * theta + entropy

  friend bool operator==(const ScoredSample&, const ScoredSample&) = default;
};

enum class Decision { ID, OOD };

inline constexpr double kThetaFloor = 1e-6;
inline constexpr double kZeroFeatureNorm = 1e-12;

namespace detail {

inline void require_width(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw Error(ErrorCode::DimMismatch, std::string(what) + " has width " + std::to_string(got) +
                                            ", expected " + std::to_string(want));
  }
}

inline double angle_to_subspace(const DenseMatrix& basis, std::span<const double> shifted) {
  const double full = norm2(shifted);
  if (full < kZeroFeatureNorm) {
    throw Error(ErrorCode::ZeroFeature, "shifted feature norm " + std::to_string(full) + " is below 1e-12");
  }
  if (basis.cols() == basis.rows()) return 0.0;  // the subspace is the whole space
  const DenseVector coords = matvec_transposed(basis, shifted);
  const double parallel = norm2(coords);
  // θ = arccos(parallel / full), evaluated as atan2(residual, parallel): same
  // angle, but keeps full precision near 0 where arccos loses half the digits.
  std::vector<double> residual(shifted.begin(), shifted.end());
  for (std::size_t i = 0; i < residual.size(); ++i) residual[i] -= dot(basis.row(i), coords.values());
  return std::atan2(norm2(residual), parallel);
}

// The arccos form, kept for the projection-bound check.
inline double cosine_to_subspace(const DenseMatrix& basis, std::span<const double> shifted) {
  return norm2(matvec_transposed(basis, shifted)) / norm2(shifted);
}

}  // namespace detail

/// o′ = −(Wᵀ)† b: the point whose image under the head is (approximately) zero logits.
inline DenseVector compute_origin_shift(const ClassifierHead& head, double rank_tol = kDefaultRankTolerance) {
  const DenseMatrix pinv = pseudo_inverse(transpose(head.weights()), rank_tol);
  DenseVector shift = matvec(pinv, head.bias());
  for (std::size_t i = 0; i < shift.size(); ++i) shift[i] = -shift[i];
  return shift;
}

inline DenseVector logits(const ClassifierHead& head, std::span<const double> feature) {
  detail::require_width(feature.size(), head.feature_dim(), "feature");
  DenseVector y = matvec_transposed(head.weights(), feature);
  for (std::size_t c = 0; c < y.size(); ++c) y[c] += head.bias()[c];
  return y;
}

inline double log_sum_exp(std::span<const double> y) {
  const double peak = *std::max_element(y.begin(), y.end());
  double z = 0.0;
  for (double v : y) z += std::exp(v - peak);
  return peak + std::log(z);
}

inline std::vector<double> softmax(std::span<const double> y) {
  const double peak = *std::max_element(y.begin(), y.end());
  std::vector<double> p(y.size());
  double z = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) z += (p[i] = std::exp(y[i] - peak));
  for (double& v : p) v /= z;
  return p;
}

// H = ln Z − Σ pᵢ (yᵢ − max y); underflowed probabilities contribute exactly zero.
inline double entropy_from_logits(std::span<const double> y) {
  if (y.empty()) throw Error(ErrorCode::EmptyInput, "entropy of empty logit vector");
  const double peak = *std::max_element(y.begin(), y.end());
  std::vector<double> e(y.size());
  double z = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) z += (e[i] = std::exp(y[i] - peak));
  double weighted = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (e[i] > 0.0) weighted += e[i] * (y[i] - peak);
  const double h = std::log(z) - weighted / z;
  return std::clamp(h, 0.0, std::log(static_cast<double>(y.size())));
}

/// Softmax entropy of the head's prediction on the raw (unshifted) feature.
inline double softmax_entropy(const ClassifierHead& head, std::span<const double> feature) {
  return entropy_from_logits(logits(head, feature).values());
}

inline double softmax_entropy(const ClassifierHead& head, const DenseVector& feature) {
  return softmax_entropy(head, feature.values());
}

/// Principal angle between (feature − origin_shift) and span(basis).
inline double principal_angle(const SubspaceModel& model, std::span<const double> feature) {
  detail::require_width(feature.size(), model.feature_dim(), "feature");
  std::vector<double> shifted(feature.begin(), feature.end());
  for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] -= model.origin_shift[i];
  return detail::angle_to_subspace(model.basis, shifted);
}

inline double principal_angle(const SubspaceModel& model, const DenseVector& feature) {
  return principal_angle(model, feature.values());
}

/// β = max H / max(min θ, θ_floor) over the fitting subset.
inline double scaling_factor(std::span<const double> entropies, std::span<const double> angles) {
  if (entropies.empty() || angles.empty()) throw Error(ErrorCode::EmptyInput, "scaling factor needs samples");
  const double max_h = *std::max_element(entropies.begin(), entropies.end());
  const double min_theta = *std::min_element(angles.begin(), angles.end());
  return max_h / std::max(min_theta, kThetaFloor);
}

/// Fits origin shift, top-D eigenbasis of the uncentered second moment of the
/// shifted features, and β, all on the same feature rows.
inline SubspaceModel fit_subspace(const DenseMatrix& train_features, const ClassifierHead& head, std::size_t dim,
                                  CenterMode center_mode = CenterMode::OPrime) {
  const std::size_t n = head.feature_dim();
  const std::size_t rows = train_features.rows();
  detail::require_width(train_features.cols(), n, "training features");
  if (dim < 1 || dim > n) {
    throw Error(ErrorCode::InvalidArgument,
                "subspace dimension " + std::to_string(dim) + " must lie in [1, " + std::to_string(n) + "]");
  }
  if (rows < dim) {
    throw Error(ErrorCode::InsufficientSamples,
                std::to_string(rows) + " training rows for subspace dimension " + std::to_string(dim));
  }

  DenseVector shift(n);
  if (center_mode == CenterMode::OPrime) {
    shift = compute_origin_shift(head);
  } else {
    for (std::size_t r = 0; r < rows; ++r) {
      auto row = train_features.row(r);
      for (std::size_t i = 0; i < n; ++i) shift[i] += row[i];
    }
    for (std::size_t i = 0; i < n; ++i) shift[i] /= static_cast<double>(rows);
  }

  DenseMatrix moment(n, n);
  std::vector<double> g(n);
  for (std::size_t r = 0; r < rows; ++r) {
    auto row = train_features.row(r);
    for (std::size_t i = 0; i < n; ++i) g[i] = row[i] - shift[i];
    for (std::size_t i = 0; i < n; ++i) {
      const double gi = g[i];
      for (std::size_t j = i; j < n; ++j) moment(i, j) += gi * g[j];
    }
  }
  const double inv_rows = 1.0 / static_cast<double>(rows);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      moment(i, j) *= inv_rows;
      moment(j, i) = moment(i, j);
    }
  }

  EigenDecomposition eig = sym_eigen(moment);
  DenseMatrix basis(n, dim);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < dim; ++j) basis(i, j) = eig.eigenvectors(i, j);

  SubspaceModel model{std::move(shift), std::move(basis), 0.0, center_mode, head, std::move(eig.eigenvalues)};

  std::vector<double> angles(rows);
  std::vector<double> entropies(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    try {
      angles[r] = principal_angle(model, train_features.row(r));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ZeroFeature) throw;
      throw Error(ErrorCode::ZeroFeature, "training row " + std::to_string(r) + " sits at the shifted origin");
    }
    entropies[r] = softmax_entropy(head, train_features.row(r));
  }
  model.beta = scaling_factor(entropies, angles);
  return model;
}

/// Same model with a different fusion weight (β sweeps and ablations).
inline SubspaceModel with_beta(SubspaceModel model, double beta) {
  if (!std::isfinite(beta) || beta < 0.0) throw Error(ErrorCode::InvalidArgument, "beta must be finite and >= 0");
  model.beta = beta;
  return model;
}

inline ScoredSample epa_score(const SubspaceModel& model, std::span<const double> feature) {
  ScoredSample s;
  s.theta = principal_angle(model, feature);
  s.entropy = softmax_entropy(model.head, feature);
  s.epa = model.beta * s.theta + s.entropy;
  return s;
}

inline ScoredSample epa_score(const SubspaceModel& model, const DenseVector& feature) {
  return epa_score(model, feature.values());
}

// Larger scores are more OOD; the threshold itself is classified OOD.
inline constexpr Decision classify(double score, double gamma) noexcept {
  return score >= gamma ? Decision::OOD : Decision::ID;
}

struct BatchScores {
  std::vector<std::optional<ScoredSample>> samples;  // one slot per input row
  std::vector<std::size_t> degenerate_rows;          // rows rejected with ZeroFeature

  bool complete() const noexcept { return degenerate_rows.empty(); }
};

/// Scores every row; rows sitting at the shifted origin are listed instead of scored.
/// Each row is computed independently, so the result does not depend on `threads`.
inline BatchScores score_batch(const SubspaceModel& model, const DenseMatrix& features, unsigned threads = 1) {
  detail::require_width(features.cols(), model.feature_dim(), "feature batch");
  const std::size_t rows = features.rows();
  BatchScores out;
  out.samples.resize(rows);

  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      try {
        out.samples[r] = epa_score(model, features.row(r));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::ZeroFeature) throw;
      }
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(rows, 1));
  if (workers == 1) {
    run(0, rows);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    const std::size_t chunk = (rows + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = std::min(rows, w * chunk);
      const std::size_t end = std::min(rows, begin + chunk);
      pool.emplace_back([&, w, begin, end] {
        try {
          run(begin, end);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  for (std::size_t r = 0; r < rows; ++r)
    if (!out.samples[r]) out.degenerate_rows.push_back(r);
  return out;
}

}  // namespace epa
