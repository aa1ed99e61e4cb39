#pragma once

#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include "epa/baselines.hpp"
#include "epa/error.hpp"
#include "epa/metrics.hpp"
#include "json.hpp"

namespace epa::io {

struct SweepRow {
  double beta = 0.0;
  double auroc = 0.0;
  double fpr_at_95 = 0.0;
  bool adaptive = false;  // the fitted β rather than a grid point

  friend bool operator==(const SweepRow&, const SweepRow&) = default;
};

inline nlohmann::ordered_json to_json(const EvalResult& r) {
  nlohmann::ordered_json j;
  j["method"] = std::string(to_string(r.method));
  j["auroc"] = r.auroc;
  j["fpr_at_95"] = r.fpr_at_95;
  j["gamma"] = r.gamma_used;
  j["n_id"] = r.n_id;
  j["n_ood"] = r.n_ood;
  j["convention"] = std::string(kFprConvention);
  return j;
}

inline EvalResult eval_result_from_json(const nlohmann::json& j) {
  EvalResult r;
  r.method = parse_method(j.at("method").get<std::string>());
  r.auroc = j.at("auroc").get<double>();
  r.fpr_at_95 = j.at("fpr_at_95").get<double>();
  r.gamma_used = j.at("gamma").get<double>();
  r.n_id = j.at("n_id").get<std::size_t>();
  r.n_ood = j.at("n_ood").get<std::size_t>();
  return r;
}

inline nlohmann::ordered_json eval_report_json(const std::vector<EvalResult>& results) {
  nlohmann::ordered_json j;
  j["kind"] = "eval";
  j["tpr_target"] = 0.95;
  j["results"] = nlohmann::ordered_json::array();
  for (const auto& r : results) j["results"].push_back(to_json(r));
  return j;
}

/// Parses the "results" array of an eval report back into EvalResults.
inline std::vector<EvalResult> parse_eval_report(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    std::vector<EvalResult> out;
    for (const auto& item : j.at("results")) out.push_back(eval_result_from_json(item));
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed report: ") + e.what());
  }
}

inline nlohmann::ordered_json sweep_report_json(const std::vector<SweepRow>& rows) {
  nlohmann::ordered_json j;
  j["kind"] = "sweep-beta";
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    j["rows"].push_back({{"beta", r.beta}, {"auroc", r.auroc}, {"fpr_at_95", r.fpr_at_95}, {"adaptive", r.adaptive}});
  }
  return j;
}

inline std::vector<SweepRow> parse_sweep_report(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    std::vector<SweepRow> out;
    for (const auto& item : j.at("rows")) {
      out.push_back({item.at("beta").get<double>(), item.at("auroc").get<double>(),
                     item.at("fpr_at_95").get<double>(), item.at("adaptive").get<bool>()});
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed sweep report: ") + e.what());
  }
}

// Column header used in tables: the ablation layout labels PA and Entropy as θ and H.
inline std::string column_label(MethodId m) {
  switch (m) {
    case MethodId::EPA: return "EPA";
    case MethodId::PA: return "θ";
    case MethodId::Entropy: return "H";
    case MethodId::MSP: return "MSP";
    case MethodId::Energy: return "Energy";
    case MethodId::MaxLogit: return "MaxLogit";
  }
  return "?";
}

namespace detail {

inline std::string percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * fraction);
  return buf;
}

inline std::string pad(const std::string& s, std::size_t width) {
  // Byte length overcounts multi-byte labels such as θ; count code points instead.
  std::size_t visible = 0;
  for (unsigned char c : s)
    if ((c & 0xC0) != 0x80) ++visible;
  return visible >= width ? s : std::string(width - visible, ' ') + s;
}

}  // namespace detail

struct TableColumn {
  std::string label;
  double auroc = 0.0;
  double fpr_at_95 = 0.0;
};

/// Metrics as rows, methods as columns, values in percent.
inline std::string format_table(const std::vector<TableColumn>& columns) {
  constexpr std::size_t kLabelWidth = 10;
  constexpr std::size_t kCellWidth = 10;
  std::string out = std::string("Metrics") + std::string(kLabelWidth - 7, ' ');
  for (const auto& c : columns) out += detail::pad(c.label, kCellWidth);
  out += "\n";
  out += "AUROC↑" + std::string(kLabelWidth - 6, ' ');
  for (const auto& c : columns) out += detail::pad(detail::percent(c.auroc), kCellWidth);
  out += "\n";
  out += "FPR95↓" + std::string(kLabelWidth - 6, ' ');
  for (const auto& c : columns) out += detail::pad(detail::percent(c.fpr_at_95), kCellWidth);
  out += "\n";
  return out;
}

inline std::string format_eval_table(const std::vector<EvalResult>& results) {
  std::vector<TableColumn> cols;
  for (const auto& r : results) cols.push_back({column_label(r.method), r.auroc, r.fpr_at_95});
  return format_table(cols);
}

inline std::string format_sweep_table(const std::vector<SweepRow>& rows) {
  std::string out = "          beta     AUROC%    FPR95%\n";
  char buf[96];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%14.6g %10.2f %9.2f%s\n", r.beta, 100.0 * r.auroc, 100.0 * r.fpr_at_95,
                  r.adaptive ? "  (adaptive)" : "");
    out += buf;
  }
  return out;
}

}  // namespace epa::io
