#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "epa/core.hpp"
#include "epa/error.hpp"

namespace epa {

// Every method is oriented so that a larger score means "more OOD".
enum class MethodId { EPA, PA, Entropy, MSP, Energy, MaxLogit };

inline constexpr std::array<MethodId, 6> kAllMethods = {MethodId::EPA, MethodId::PA,     MethodId::Entropy,
                                                        MethodId::MSP, MethodId::Energy, MethodId::MaxLogit};

constexpr std::string_view to_string(MethodId m) {
  switch (m) {
    case MethodId::EPA: return "epa";
    case MethodId::PA: return "pa";
    case MethodId::Entropy: return "entropy";
    case MethodId::MSP: return "msp";
    case MethodId::Energy: return "energy";
    case MethodId::MaxLogit: return "maxlogit";
  }
  return "?";
}

inline std::string valid_method_names() {
  std::string out;
  for (MethodId m : kAllMethods) {
    if (!out.empty()) out += ", ";
    out += to_string(m);
  }
  return out;
}

inline MethodId parse_method(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  for (MethodId m : kAllMethods)
    if (lower == to_string(m)) return m;
  throw Error(ErrorCode::UnknownMethod,
              "unknown method '" + std::string(name) + "'; valid methods: " + valid_method_names());
}

// Comma-separated list, e.g. "epa,pa,entropy". Empty entries are rejected.
inline std::vector<MethodId> parse_method_list(std::string_view list) {
  std::vector<MethodId> out;
  if (list.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = list.find(',', start);
    const std::string_view item = list.substr(start, comma == std::string_view::npos ? comma : comma - start);
    out.push_back(parse_method(item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

// Negated maximum softmax probability.
inline double msp_score(const ClassifierHead& head, std::span<const double> feature) {
  const auto p = softmax(logits(head, feature).values());
  return -*std::max_element(p.begin(), p.end());
}

// Negated free energy: −logsumexp(y).
inline double energy_score(const ClassifierHead& head, std::span<const double> feature) {
  return -log_sum_exp(logits(head, feature).values());
}

inline double maxlogit_score(const ClassifierHead& head, std::span<const double> feature) {
  const DenseVector y = logits(head, feature);
  return -*std::max_element(y.values().begin(), y.values().end());
}

inline double pa_only(const SubspaceModel& model, std::span<const double> feature) {
  return principal_angle(model, feature);
}

inline double entropy_only(const SubspaceModel& model, std::span<const double> feature) {
  return softmax_entropy(model.head, feature);
}

inline double score(MethodId method, const SubspaceModel& model, std::span<const double> feature) {
  switch (method) {
    case MethodId::EPA: return epa_score(model, feature).epa;
    case MethodId::PA: return pa_only(model, feature);
    case MethodId::Entropy: return entropy_only(model, feature);
    case MethodId::MSP: return msp_score(model.head, feature);
    case MethodId::Energy: return energy_score(model.head, feature);
    case MethodId::MaxLogit: return maxlogit_score(model.head, feature);
  }
  throw Error(ErrorCode::UnknownMethod, "unhandled method");
}

inline double score(MethodId method, const SubspaceModel& model, const DenseVector& feature) {
  return score(method, model, feature.values());
}

/// Scores each row with `method`. Rows rejected as degenerate are reported
/// together, by index, in a single ZeroFeature error.
inline std::vector<double> score_rows(MethodId method, const SubspaceModel& model, const DenseMatrix& features,
                                      unsigned threads = 1) {
  detail::require_width(features.cols(), model.feature_dim(), "feature batch");
  std::vector<double> out(features.rows());
  const bool uses_angle = method == MethodId::EPA || method == MethodId::PA;
  if (uses_angle) {
    const BatchScores batch = score_batch(model, features, threads);
    if (!batch.complete()) {
      std::string rows;
      for (std::size_t r : batch.degenerate_rows) rows += (rows.empty() ? "" : ",") + std::to_string(r);
      throw Error(ErrorCode::ZeroFeature, "degenerate rows at the shifted origin: " + rows);
    }
    for (std::size_t r = 0; r < out.size(); ++r) {
      const ScoredSample& s = *batch.samples[r];
      out[r] = method == MethodId::EPA ? s.epa : s.theta;
    }
    return out;
  }
  for (std::size_t r = 0; r < out.size(); ++r) out[r] = score(method, model, features.row(r));
  return out;
}

}  // namespace epa
