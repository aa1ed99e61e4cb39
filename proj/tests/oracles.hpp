#pragma once

// Independent reference computations used only by the tests. None of these
// call into the library paths they are used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "epa/tensor.hpp"

namespace epa::oracle {

// P(ood > id) + ½·P(ood == id) by enumerating every pair.
inline double pairwise_auroc(std::span<const double> id, std::span<const double> ood) {
  double wins = 0.0;
  for (double o : ood)
    for (double i : id) wins += o > i ? 1.0 : (o == i ? 0.5 : 0.0);
  return wins / (static_cast<double>(id.size()) * static_cast<double>(ood.size()));
}

// Plain triple loop, no skipping of zeros.
inline DenseMatrix naive_matmul(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  return out;
}

inline DenseMatrix naive_transpose(const DenseMatrix& a) {
  DenseMatrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

inline double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.values().size(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

inline double frobenius(const DenseMatrix& a) {
  double s = 0.0;
  for (double v : a.values()) s += v * v;
  return std::sqrt(s);
}

struct PenroseErrors {
  double a_pinv_a = 0.0;     // |A A† A − A|
  double pinv_a_pinv = 0.0;  // |A† A A† − A†|
  double sym_left = 0.0;     // |(A A†)ᵀ − A A†|
  double sym_right = 0.0;    // |(A† A)ᵀ − A† A|

  double worst() const { return std::max({a_pinv_a, pinv_a_pinv, sym_left, sym_right}); }
};

inline PenroseErrors penrose(const DenseMatrix& a, const DenseMatrix& pinv) {
  const DenseMatrix left = naive_matmul(a, pinv);
  const DenseMatrix right = naive_matmul(pinv, a);
  return {max_abs_diff(naive_matmul(left, a), a), max_abs_diff(naive_matmul(right, pinv), pinv),
          max_abs_diff(naive_transpose(left), left), max_abs_diff(naive_transpose(right), right)};
}

inline DenseMatrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  DenseMatrix m(rows, cols);
  for (double& v : m.values()) v = normal(rng);
  return m;
}

inline DenseMatrix random_symmetric(std::mt19937_64& rng, std::size_t n) {
  DenseMatrix m = random_matrix(rng, n, n);
  DenseMatrix s(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) s(i, j) = 0.5 * (m(i, j) + m(j, i));
  return s;
}

// rows×cols matrix of the given rank, as a product of Gaussian factors.
inline DenseMatrix random_of_rank(std::mt19937_64& rng, std::size_t rows, std::size_t cols, std::size_t rank) {
  return naive_matmul(random_matrix(rng, rows, rank), random_matrix(rng, rank, cols));
}

// θ through the explicit projector Q = R Rᵀ; also returns |Q ḡ| and |Rᵀ ḡ| for the
// projector identity check.
struct ProjectorAngle {
  double theta = 0.0;
  double projected_norm = 0.0;    // |Q ḡ|
  double coordinate_norm = 0.0;   // |Rᵀ ḡ|
};

inline ProjectorAngle projector_angle(const DenseMatrix& basis, std::span<const double> shift,
                                      std::span<const double> feature) {
  const std::size_t n = basis.rows();
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = feature[i] - shift[i];
  const DenseMatrix q = naive_matmul(basis, naive_transpose(basis));
  double qg2 = 0.0;
  double g2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += q(i, j) * g[j];
    qg2 += s * s;
    g2 += g[i] * g[i];
  }
  double rg2 = 0.0;
  for (std::size_t c = 0; c < basis.cols(); ++c) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += basis(i, c) * g[i];
    rg2 += s * s;
  }
  ProjectorAngle out;
  out.projected_norm = std::sqrt(qg2);
  out.coordinate_norm = std::sqrt(rg2);
  out.theta = std::acos(std::clamp(out.projected_norm / std::sqrt(g2), 0.0, 1.0));
  return out;
}

// Textbook softmax entropy without max-shifting; only valid for moderate logits.
inline double naive_entropy(std::span<const double> logits) {
  double z = 0.0;
  for (double y : logits) z += std::exp(y);
  double h = 0.0;
  for (double y : logits) {
    const double p = std::exp(y) / z;
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

}  // namespace epa::oracle
