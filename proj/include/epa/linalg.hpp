#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "epa/error.hpp"
#include "epa/tensor.hpp"

namespace epa {

struct EigenDecomposition {
  std::vector<double> eigenvalues;  // non-increasing
  DenseMatrix eigenvectors;         // column j pairs with eigenvalues[j]
};

inline constexpr double kSymmetryTolerance = 1e-9;
inline constexpr int kMaxJacobiSweeps = 100;
inline constexpr double kDefaultRankTolerance = 1e-10;

namespace detail {

inline double off_diagonal_norm(const DenseMatrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

// Applies the rotation that annihilates a(p, q), accumulating it into v.
inline void jacobi_rotate(DenseMatrix& a, DenseMatrix& v, std::size_t p, std::size_t q) {
  const double apq = a(p, q);
  if (apq == 0.0) return;
  const std::size_t n = a.rows();

  const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
  double t;
  if (std::abs(theta) > 1e150) {
    t = 0.5 / theta;
  } else {
    t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
  }
  const double c = 1.0 / std::sqrt(t * t + 1.0);
  const double s = t * c;

  for (std::size_t k = 0; k < n; ++k) {
    const double akp = a(k, p);
    const double akq = a(k, q);
    a(k, p) = c * akp - s * akq;
    a(k, q) = s * akp + c * akq;
  }
  for (std::size_t k = 0; k < n; ++k) {
    const double apk = a(p, k);
    const double aqk = a(q, k);
    a(p, k) = c * apk - s * aqk;
    a(q, k) = s * apk + c * aqk;
  }
  a(p, q) = 0.0;
  a(q, p) = 0.0;

  for (std::size_t k = 0; k < n; ++k) {
    const double vkp = v(k, p);
    const double vkq = v(k, q);
    v(k, p) = c * vkp - s * vkq;
    v(k, q) = s * vkp + c * vkq;
  }
}

}  // namespace detail

/// Eigendecomposition of a real symmetric matrix by cyclic Jacobi rotations.
///
/// Sweeps visit pairs (p, q) in row-major order and stop once the off-diagonal
/// Frobenius mass falls below `tol * ||A||_F`. Eigenvalues come back in
/// non-increasing order (equal values keep their diagonal position order) and
/// each eigenvector is flipped so its largest-magnitude entry is positive, the
/// lowest index winning ties. Output is fully determined by the input bytes.
inline EigenDecomposition sym_eigen(const DenseMatrix& a, double tol = 1e-13, int max_sweeps = kMaxJacobiSweeps) {
  if (!a.square()) {
    throw Error(ErrorCode::NonSymmetric, "matrix is " + std::to_string(a.rows()) + "x" +
                                             std::to_string(a.cols()) + ", not square");
  }
  detail::require_finite(a.values(), "sym_eigen input");
  if (!(tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "sym_eigen tolerance must be positive");

  const std::size_t n = a.rows();
  DenseMatrix work = a;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (std::abs(a(i, j) - a(j, i)) > kSymmetryTolerance) {
        throw Error(ErrorCode::NonSymmetric, "entries (" + std::to_string(i) + "," + std::to_string(j) +
                                                 ") and (" + std::to_string(j) + "," + std::to_string(i) +
                                                 ") differ");
      }
      const double mean = 0.5 * (a(i, j) + a(j, i));
      work(i, j) = mean;
      work(j, i) = mean;
    }
  }

  DenseMatrix vectors = DenseMatrix::identity(n);
  const double threshold = tol * frobenius_norm(work);

  int sweep = 0;
  while (detail::off_diagonal_norm(work) > threshold) {
    if (sweep == max_sweeps) {
      throw Error(ErrorCode::NoConvergence,
                  "off-diagonal mass still above tolerance after " + std::to_string(max_sweeps) +
                      " sweeps");
    }
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) detail::jacobi_rotate(work, vectors, p, q);
    ++sweep;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return work(i, i) > work(j, j); });

  EigenDecomposition out{std::vector<double>(n), DenseMatrix(n, n)};
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t src = order[j];
    out.eigenvalues[j] = work(src, src);

    // Entries within a relative 1e-12 of the largest magnitude count as tied.
    double largest = 0.0;
    for (std::size_t k = 0; k < n; ++k) largest = std::max(largest, std::abs(vectors(k, src)));
    std::size_t pivot = 0;
    while (std::abs(vectors(pivot, src)) < largest * (1.0 - 1e-12)) ++pivot;
    const double sign = vectors(pivot, src) < 0.0 ? -1.0 : 1.0;
    for (std::size_t k = 0; k < n; ++k) out.eigenvectors(k, j) = sign * vectors(k, src);
  }
  return out;
}

/// Moore-Penrose pseudoinverse via the spectral decomposition of the smaller
/// Gram matrix (AᵀA or AAᵀ).
///
/// Singular values below `rank_tol * sigma_max` are treated as zero. Because the
/// Gram route squares the spectrum, eigenvalues below a rounding floor of
/// `10 * dim * eps * lambda_max` are also dropped; they cannot be told apart
/// from zero once AᵀA has been formed.
inline DenseMatrix pseudo_inverse(const DenseMatrix& a, double rank_tol = kDefaultRankTolerance) {
  detail::require_finite(a.values(), "pseudo_inverse input");
  if (!(rank_tol >= 0.0)) throw Error(ErrorCode::InvalidArgument, "rank tolerance must be non-negative");

  const std::size_t m = a.rows();
  const std::size_t k = a.cols();
  if (m == 0 || k == 0) return DenseMatrix(k, m);

  const bool tall = k <= m;
  const std::size_t dim = tall ? k : m;

  DenseMatrix gram(dim, dim);
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = i; j < dim; ++j) {
      double s = 0.0;
      if (tall) {
        for (std::size_t r = 0; r < m; ++r) s += a(r, i) * a(r, j);
      } else {
        s = dot(a.row(i), a.row(j));
      }
      gram(i, j) = s;
      gram(j, i) = s;
    }
  }

  const EigenDecomposition eig = sym_eigen(gram);
  const double lambda_max = eig.eigenvalues.empty() ? 0.0 : eig.eigenvalues.front();
  if (!(lambda_max > 0.0)) return DenseMatrix(k, m);

  const double rounding_floor = 10.0 * static_cast<double>(dim) * std::numeric_limits<double>::epsilon();
  const double cutoff = lambda_max * std::max(rank_tol * rank_tol, rounding_floor);

  // inner = V diag(1/lambda) Vᵀ over the retained part of the spectrum.
  DenseMatrix inner(dim, dim);
  for (std::size_t e = 0; e < dim; ++e) {
    const double lambda = eig.eigenvalues[e];
    if (!(lambda > cutoff)) break;  // sorted descending
    const double inv = 1.0 / lambda;
    for (std::size_t i = 0; i < dim; ++i) {
      const double vi = eig.eigenvectors(i, e) * inv;
      if (vi == 0.0) continue;
      for (std::size_t j = 0; j < dim; ++j) inner(i, j) += vi * eig.eigenvectors(j, e);
    }
  }

  // Tall: A† = (AᵀA)† Aᵀ. Wide: A† = Aᵀ (AAᵀ)†.
  return tall ? matmul(inner, transpose(a)) : matmul(transpose(a), inner);
}

}  // namespace epa
