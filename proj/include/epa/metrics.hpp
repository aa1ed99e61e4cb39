#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "epa/baselines.hpp"
#include "epa/core.hpp"
#include "epa/error.hpp"

namespace epa {

// Stated in every report so the threshold rule is never implicit.
inline constexpr std::string_view kFprConvention =
    "ID positive; accept iff score <= gamma; gamma = ceil(tpr*n_id)-th smallest ID score, no interpolation; "
    "ties at gamma accepted";

struct EvalResult {
  MethodId method = MethodId::EPA;
  double auroc = 0.0;
  double fpr_at_95 = 0.0;
  std::size_t n_id = 0;
  std::size_t n_ood = 0;
  double gamma_used = 0.0;

  friend bool operator==(const EvalResult&, const EvalResult&) = default;
};

struct FprResult {
  double fpr = 0.0;
  double gamma = 0.0;
};

namespace detail {

inline void require_scores(std::span<const double> id_scores, std::span<const double> ood_scores) {
  if (id_scores.empty() || ood_scores.empty()) {
    throw Error(ErrorCode::EmptyInput, "need at least one ID and one OOD score (got " +
                                           std::to_string(id_scores.size()) + " and " +
                                           std::to_string(ood_scores.size()) + ")");
  }
  detail::require_finite(id_scores, "ID scores");
  detail::require_finite(ood_scores, "OOD scores");
}

}  // namespace detail

/// AUROC with OOD as the positive class: P(ood > id) + ½·P(ood == id).
///
/// Mann-Whitney U from mid-ranks of the pooled sample. All rank sums are
/// half-integers, so the statistic is exact before the final division.
inline double auroc(std::span<const double> id_scores, std::span<const double> ood_scores) {
  detail::require_scores(id_scores, ood_scores);
  const std::size_t m = id_scores.size();
  const std::size_t k = ood_scores.size();

  struct Entry {
    double value;
    bool ood;
  };
  std::vector<Entry> pooled;
  pooled.reserve(m + k);
  for (double v : id_scores) pooled.push_back({v, false});
  for (double v : ood_scores) pooled.push_back({v, true});
  std::sort(pooled.begin(), pooled.end(), [](const Entry& a, const Entry& b) { return a.value < b.value; });

  // Work in doubled ranks so tie groups stay integral.
  unsigned long long doubled_rank_sum = 0;
  std::size_t i = 0;
  while (i < pooled.size()) {
    std::size_t j = i;
    std::size_t ood_in_group = 0;
    while (j < pooled.size() && pooled[j].value == pooled[i].value) {
      ood_in_group += pooled[j].ood ? 1 : 0;
      ++j;
    }
    // ranks i+1 .. j, mid-rank (i+1+j)/2
    doubled_rank_sum += static_cast<unsigned long long>(ood_in_group) * (i + 1 + j);
    i = j;
  }
  const unsigned long long doubled_u = doubled_rank_sum - static_cast<unsigned long long>(k) * (k + 1);
  return static_cast<double>(doubled_u) / (2.0 * static_cast<double>(m) * static_cast<double>(k));
}

/// FPR at a target TPR, with ID treated as positive and accepted when score <= γ.
inline FprResult fpr_at_tpr(std::span<const double> id_scores, std::span<const double> ood_scores,
                            double tpr_target = 0.95) {
  detail::require_scores(id_scores, ood_scores);
  if (!(tpr_target > 0.0 && tpr_target <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "TPR target must lie in (0, 1]");
  }
  std::vector<double> sorted(id_scores.begin(), id_scores.end());
  std::sort(sorted.begin(), sorted.end());

  const double n_id = static_cast<double>(sorted.size());
  // The small slack keeps products like 0.95 * 20 from rounding up past an integer.
  auto needed = static_cast<std::size_t>(std::ceil(tpr_target * n_id - 1e-9));
  needed = std::clamp<std::size_t>(needed, 1, sorted.size());
  const double gamma = sorted[needed - 1];

  const auto accepted = std::count_if(ood_scores.begin(), ood_scores.end(), [&](double s) { return s <= gamma; });
  return {static_cast<double>(accepted) / static_cast<double>(ood_scores.size()), gamma};
}

inline EvalResult evaluate_scores(MethodId method, std::span<const double> id_scores,
                                  std::span<const double> ood_scores) {
  EvalResult r;
  r.method = method;
  r.auroc = auroc(id_scores, ood_scores);
  const FprResult fpr = fpr_at_tpr(id_scores, ood_scores, 0.95);
  r.fpr_at_95 = fpr.fpr;
  r.gamma_used = fpr.gamma;
  r.n_id = id_scores.size();
  r.n_ood = ood_scores.size();
  return r;
}

/// One result per requested method, in request order.
inline std::vector<EvalResult> evaluate(const SubspaceModel& model, std::span<const MethodId> methods,
                                        const DenseMatrix& id_features, const DenseMatrix& ood_features,
                                        unsigned threads = 1) {
  std::vector<EvalResult> out;
  out.reserve(methods.size());
  for (MethodId method : methods) {
    std::vector<double> id_scores;
    std::vector<double> ood_scores;
    try {
      id_scores = score_rows(method, model, id_features, threads);
    } catch (const Error& e) {
      throw Error(e.code(), std::string("ID set, method ") + std::string(to_string(method)) + ": " + e.what());
    }
    try {
      ood_scores = score_rows(method, model, ood_features, threads);
    } catch (const Error& e) {
      throw Error(e.code(), std::string("OOD set, method ") + std::string(to_string(method)) + ": " + e.what());
    }
    out.push_back(evaluate_scores(method, id_scores, ood_scores));
  }
  return out;
}

}  // namespace epa
