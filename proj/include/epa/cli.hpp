#pragma once

// Command-line front end: fit, score, eval, ablate, sweep-beta, synth.
//
// Exit codes: 0 success, 1 usage error, 2 data error.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "epa/baselines.hpp"
#include "epa/bundle.hpp"
#include "epa/core.hpp"
#include "epa/error.hpp"
#include "epa/metrics.hpp"
#include "epa/report.hpp"
#include "epa/synth.hpp"
#include "epa/tensor_file.hpp"
#include "json.hpp"

namespace epa::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Worker count for scoring: hardware concurrency, capped by EPA_THREADS when set.
inline unsigned scoring_threads() {
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("EPA_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && cap >= 1) threads = std::min<unsigned>(threads, static_cast<unsigned>(cap));
  }
  return threads;
}

/// Row indices of a uniform sample without replacement, in ascending order.
/// A size of 0, or one at least `rows`, selects every row.
inline std::vector<std::size_t> sample_subset(std::size_t rows, std::size_t size, std::uint64_t seed) {
  std::vector<std::size_t> idx(rows);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (size == 0 || size >= rows) return idx;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < size; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, rows - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(size);
  std::sort(idx.begin(), idx.end());
  return idx;
}

inline DenseMatrix select_rows(const DenseMatrix& m, const std::vector<std::size_t>& rows) {
  std::vector<double> data;
  data.reserve(rows.size() * m.cols());
  for (std::size_t r : rows) data.insert(data.end(), m.row(r).begin(), m.row(r).end());
  return DenseMatrix(rows.size(), m.cols(), std::move(data));
}

/// Parses "start:stop:step" into start, start+step, ... up to stop inclusive.
inline std::vector<double> parse_beta_grid(const std::string& text) {
  const auto first = text.find(':');
  const auto second = first == std::string::npos ? std::string::npos : text.find(':', first + 1);
  if (second == std::string::npos || text.find(':', second + 1) != std::string::npos) {
    throw UsageError("--beta-grid must look like start:stop:step, got '" + text + "'");
  }
  double start, stop, step;
  try {
    start = std::stod(text.substr(0, first));
    stop = std::stod(text.substr(first + 1, second - first - 1));
    step = std::stod(text.substr(second + 1));
  } catch (const std::exception&) {
    throw UsageError("--beta-grid has a non-numeric field: '" + text + "'");
  }
  if (!(step > 0.0) || !(start >= 0.0) || !(stop >= start) || !std::isfinite(stop)) {
    throw UsageError("--beta-grid needs 0 <= start <= stop and step > 0");
  }
  std::vector<double> grid;
  for (std::size_t i = 0;; ++i) {
    const double beta = start + static_cast<double>(i) * step;
    if (beta > stop + 1e-9 * step) break;
    grid.push_back(beta);
  }
  return grid;
}

/// EPA AUROC/FPR@95 for every grid β, followed by one row for the model's own β.
inline std::vector<io::SweepRow> sweep_beta(const SubspaceModel& model, const DenseMatrix& id_features,
                                            const DenseMatrix& ood_features, const std::vector<double>& grid,
                                            unsigned threads = 1) {
  auto components = [&](const DenseMatrix& features, const char* which) {
    BatchScores batch = score_batch(model, features, threads);
    if (!batch.complete()) {
      throw Error(ErrorCode::ZeroFeature, std::string(which) + " set has " +
                                              std::to_string(batch.degenerate_rows.size()) +
                                              " rows at the shifted origin (first: " +
                                              std::to_string(batch.degenerate_rows.front()) + ")");
    }
    std::vector<ScoredSample> out;
    out.reserve(batch.samples.size());
    for (auto& s : batch.samples) out.push_back(*s);
    return out;
  };
  const auto id = components(id_features, "ID");
  const auto ood = components(ood_features, "OOD");

  auto row_for = [&](double beta, bool adaptive) {
    std::vector<double> id_scores(id.size());
    std::vector<double> ood_scores(ood.size());
    for (std::size_t i = 0; i < id.size(); ++i) id_scores[i] = beta * id[i].theta + id[i].entropy;
    for (std::size_t i = 0; i < ood.size(); ++i) ood_scores[i] = beta * ood[i].theta + ood[i].entropy;
    const EvalResult r = evaluate_scores(MethodId::EPA, id_scores, ood_scores);
    return io::SweepRow{beta, r.auroc, r.fpr_at_95, adaptive};
  };

  std::vector<io::SweepRow> rows;
  rows.reserve(grid.size() + 1);
  for (double beta : grid) rows.push_back(row_for(beta, false));
  rows.push_back(row_for(model.beta, true));
  return rows;
}

namespace detail {

inline void write_text(const std::string& path, const std::string& text) {
  io::write_file(path, text);
}

inline std::string spectrum_summary(const SubspaceModel& model) {
  const auto& ev = model.eigenvalues;
  double total = 0.0;
  double kept = 0.0;
  for (std::size_t i = 0; i < ev.size(); ++i) {
    total += ev[i];
    if (i < model.dim()) kept += ev[i];
  }
  std::string out = "eigenvalues (top):";
  char buf[64];
  for (std::size_t i = 0; i < std::min<std::size_t>(ev.size(), 5); ++i) {
    std::snprintf(buf, sizeof buf, " %.6g", ev[i]);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "\nlambda_D = %.6g", ev[model.dim() - 1]);
  out += buf;
  if (model.dim() < ev.size()) {
    std::snprintf(buf, sizeof buf, ", lambda_{D+1} = %.6g", ev[model.dim()]);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "\nsecond-moment mass in top D: %.6f\n", total > 0.0 ? kept / total : 1.0);
  out += buf;
  return out;
}

struct FitArgs {
  std::string features, weights, bias, out;
  std::size_t dim = 0;  // 0 = class count
  std::string center = "oprime";
  std::size_t subset_size = 0;
  std::uint64_t seed = 0;
};

inline void run_fit(const FitArgs& a, std::ostream& out) {
  const DenseMatrix features = io::read_matrix(a.features);
  ClassifierHead head(io::read_matrix(a.weights), io::read_vector(a.bias));
  const std::size_t dim = a.dim == 0 ? head.class_count() : a.dim;
  const CenterMode mode = parse_center_mode(a.center);

  const auto rows = sample_subset(features.rows(), a.subset_size, a.seed);
  const DenseMatrix subset = rows.size() == features.rows() ? features : select_rows(features, rows);
  const SubspaceModel model = fit_subspace(subset, head, dim, mode);
  io::save_bundle(a.out, model, io::FitProvenance{a.seed, rows.size(), features.rows()});

  char buf[160];
  std::snprintf(buf, sizeof buf, "beta = %.17g\nD = %zu (n = %zu, C = %zu, center = %s, subset = %zu of %zu)\n",
                model.beta, model.dim(), model.feature_dim(), model.class_count(),
                std::string(to_string(mode)).c_str(), rows.size(), features.rows());
  out << buf << spectrum_summary(model);
}

struct ScoreArgs {
  std::string model, features, out;
};

inline void run_score(const ScoreArgs& a, std::ostream& out) {
  const io::Bundle bundle = io::load_bundle(a.model);
  const DenseMatrix features = io::read_matrix(a.features);
  const BatchScores batch = score_batch(bundle.model, features, scoring_threads());

  std::string text = "row\ttheta\tentropy\tepa\n";
  char buf[128];
  for (std::size_t r = 0; r < batch.samples.size(); ++r) {
    if (batch.samples[r]) {
      const auto& s = *batch.samples[r];
      std::snprintf(buf, sizeof buf, "%zu\t%.17g\t%.17g\t%.17g\n", r, s.theta, s.entropy, s.epa);
    } else {
      std::snprintf(buf, sizeof buf, "%zu\tdegenerate\tdegenerate\tdegenerate\n", r);
    }
    text += buf;
  }
  write_text(a.out, text);
  out << "scored " << batch.samples.size() - batch.degenerate_rows.size() << " of " << batch.samples.size()
      << " rows";
  if (!batch.complete()) out << " (" << batch.degenerate_rows.size() << " degenerate at the shifted origin)";
  out << "\n";
}

struct EvalArgs {
  std::string model, id, ood, out;
  std::string methods = "epa";
};

inline void run_eval(const EvalArgs& a, std::ostream& out) {
  const auto methods = parse_method_list(a.methods);
  const io::Bundle bundle = io::load_bundle(a.model);
  const DenseMatrix id = io::read_matrix(a.id);
  const DenseMatrix ood = io::read_matrix(a.ood);
  const auto results = evaluate(bundle.model, methods, id, ood, scoring_threads());
  out << io::format_eval_table(results);
  out << "FPR@95 convention: " << kFprConvention << "\n";
  if (!a.out.empty()) write_text(a.out, io::eval_report_json(results).dump(2) + "\n");
}

struct AblateArgs {
  std::string model_oprime, model_mean, id, ood, out;
  std::string methods = "epa,pa,entropy";
};

inline double mean_angle(const SubspaceModel& model, const DenseMatrix& features) {
  const auto angles = score_rows(MethodId::PA, model, features, scoring_threads());
  return std::accumulate(angles.begin(), angles.end(), 0.0) / static_cast<double>(angles.size());
}

inline void run_ablate(const AblateArgs& a, std::ostream& out) {
  const auto methods = parse_method_list(a.methods);
  const io::Bundle with_shift = io::load_bundle(a.model_oprime);
  const io::Bundle with_mean = io::load_bundle(a.model_mean);
  if (with_shift.model.center_mode != CenterMode::OPrime || with_mean.model.center_mode != CenterMode::GlobalMean) {
    throw Error(ErrorCode::BadBundle, "ablate expects an oprime-centered and a mean-centered bundle");
  }
  const DenseMatrix id = io::read_matrix(a.id);
  const DenseMatrix ood = io::read_matrix(a.ood);

  const auto shifted = evaluate(with_shift.model, methods, id, ood, scoring_threads());
  const MethodId epa_only[] = {MethodId::EPA};
  const auto centered = evaluate(with_mean.model, epa_only, id, ood, scoring_threads());

  std::vector<io::TableColumn> cols;
  for (const auto& r : shifted) cols.push_back({io::column_label(r.method), r.auroc, r.fpr_at_95});
  cols.push_back({"w/o o′", centered.front().auroc, centered.front().fpr_at_95});
  out << io::format_table(cols);

  const double theta_shift = mean_angle(with_shift.model, id);
  const double theta_mean = mean_angle(with_mean.model, id);
  char buf[160];
  std::snprintf(buf, sizeof buf, "mean ID angle: o′ origin %.6g rad, global-mean origin %.6g rad\n", theta_shift,
                theta_mean);
  out << buf;

  if (!a.out.empty()) {
    nlohmann::ordered_json j;
    j["kind"] = "ablate";
    j["oprime"] = io::eval_report_json(shifted)["results"];
    j["mean"] = io::eval_report_json(centered)["results"];
    j["mean_id_theta"] = {{"oprime", theta_shift}, {"mean", theta_mean}};
    write_text(a.out, j.dump(2) + "\n");
  }
}

struct SweepArgs {
  std::string model, id, ood, grid = "0:150:5", out;
};

inline void run_sweep(const SweepArgs& a, std::ostream& out) {
  const auto grid = parse_beta_grid(a.grid);
  const io::Bundle bundle = io::load_bundle(a.model);
  const DenseMatrix id = io::read_matrix(a.id);
  const DenseMatrix ood = io::read_matrix(a.ood);
  const auto rows = sweep_beta(bundle.model, id, ood, grid, scoring_threads());
  out << io::format_sweep_table(rows);
  if (!a.out.empty()) write_text(a.out, io::sweep_report_json(rows).dump(2) + "\n");
}

struct SynthArgs {
  synth::SynthSpec spec;
  std::size_t test_per_class = 50;
  std::uint64_t test_seed = 1;
  std::string ood_kind = "mixed";
  std::size_t ood_count = 500;
  std::uint64_t ood_seed = 2;
  std::string out;
};

inline void run_synth(const SynthArgs& a, std::ostream& out) {
  const synth::SynthDataset data = synth::generate(a.spec);
  const DenseMatrix test = synth::draw_id(a.spec, a.test_per_class, a.test_seed);

  DenseMatrix ood;
  if (a.ood_kind == "off") {
    ood = synth::make_ood(a.spec, synth::OodKind::OffSubspace, a.ood_count, a.ood_seed);
  } else if (a.ood_kind == "near") {
    ood = synth::make_ood(a.spec, synth::OodKind::NearCenter, a.ood_count, a.ood_seed);
  } else if (a.ood_kind == "mixed") {
    const std::size_t half = a.ood_count / 2;
    ood = synth::vstack(synth::make_ood(a.spec, synth::OodKind::OffSubspace, half, a.ood_seed),
                        synth::make_ood(a.spec, synth::OodKind::NearCenter, a.ood_count - half, a.ood_seed + 1));
  } else {
    throw UsageError("--ood-kind must be off, near or mixed");
  }

  const std::filesystem::path dir(a.out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());

  io::write_tensor(dir / "train.epat", data.id_features);
  io::write_tensor(dir / "id.epat", test);
  io::write_tensor(dir / "ood.epat", ood);
  io::write_tensor(dir / "weights.epat", data.head.weights());
  io::write_tensor(dir / "bias.epat", data.head.bias());
  io::write_tensor(dir / "true_origin_shift.epat", data.true_origin_shift);
  std::vector<double> labels(data.labels.begin(), data.labels.end());
  io::write_tensor(dir / "labels.epat", DenseVector(std::move(labels)));

  const auto diag = synth::nc_diagnostics(data);
  nlohmann::ordered_json j;
  j["classes"] = a.spec.classes;
  j["feature_dim"] = a.spec.feature_dim;
  j["etf_radius"] = a.spec.etf_radius;
  j["within_noise"] = a.spec.within_noise;
  j["offset_norm"] = a.spec.offset_norm;
  j["samples_per_class"] = a.spec.samples_per_class;
  j["seed"] = a.spec.seed;
  j["weight_norm"] = a.spec.weight_norm;
  j["test_per_class"] = a.test_per_class;
  j["test_seed"] = a.test_seed;
  j["ood_kind"] = a.ood_kind;
  j["ood_count"] = a.ood_count;
  j["ood_seed"] = a.ood_seed;
  j["diagnostics"] = {{"nc1_ratio", diag.nc1_ratio}, {"nc2_cos_dev", diag.nc2_cos_dev}, {"nc3_align", diag.nc3_align}};
  write_text((dir / "synth.json").string(), j.dump(2) + "\n");

  out << "wrote " << data.id_features.rows() << " train, " << test.rows() << " ID test, " << ood.rows()
      << " OOD rows to " << dir.string() << "\n";
  char buf[160];
  std::snprintf(buf, sizeof buf, "nc1_ratio = %.6g, nc2_cos_dev = %.3g, nc3_align = %.3g rad\n", diag.nc1_ratio,
                diag.nc2_cos_dev, diag.nc3_align);
  out << buf;
}

}  // namespace detail

/// Runs one CLI invocation. `args` excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Entropy-enhanced principal angle OOD scoring"};
  app.require_subcommand(1);

  detail::FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit the ID subspace and beta; writes a model bundle");
  fit_cmd->add_option("--features", fit.features, "Training features (N x n EPAT)")->required();
  fit_cmd->add_option("--weights", fit.weights, "Classifier weights W (n x C EPAT)")->required();
  fit_cmd->add_option("--bias", fit.bias, "Classifier bias b (C EPAT)")->required();
  fit_cmd->add_option("--dim", fit.dim, "Subspace dimension D (default: class count)");
  fit_cmd->add_option("--center", fit.center, "Origin: oprime or mean")->check(CLI::IsMember({"oprime", "mean"}));
  fit_cmd->add_option("--subset-size", fit.subset_size, "Rows sampled for the fit (0 = all)");
  fit_cmd->add_option("--seed", fit.seed, "Subset sampling seed");
  fit_cmd->add_option("--out", fit.out, "Bundle directory")->required();

  detail::ScoreArgs score;
  auto* score_cmd = app.add_subcommand("score", "Per-row theta, entropy and EPA");
  score_cmd->add_option("--model", score.model, "Bundle directory")->required();
  score_cmd->add_option("--features", score.features, "Features to score (EPAT)")->required();
  score_cmd->add_option("--out", score.out, "Output TSV")->required();

  detail::EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "AUROC and FPR@95 per method");
  eval_cmd->add_option("--model", eval.model, "Bundle directory")->required();
  eval_cmd->add_option("--id", eval.id, "ID test features (EPAT)")->required();
  eval_cmd->add_option("--ood", eval.ood, "OOD test features (EPAT)")->required();
  eval_cmd->add_option("--methods", eval.methods, "Comma list of " + valid_method_names());
  eval_cmd->add_option("--out", eval.out, "JSON report path");

  detail::AblateArgs ablate;
  auto* ablate_cmd = app.add_subcommand("ablate", "Compare o′-centered and mean-centered models");
  ablate_cmd->add_option("--model-oprime", ablate.model_oprime, "Bundle fitted with --center oprime")->required();
  ablate_cmd->add_option("--model-mean", ablate.model_mean, "Bundle fitted with --center mean")->required();
  ablate_cmd->add_option("--id", ablate.id, "ID test features (EPAT)")->required();
  ablate_cmd->add_option("--ood", ablate.ood, "OOD test features (EPAT)")->required();
  ablate_cmd->add_option("--methods", ablate.methods, "Methods for the o′ model");
  ablate_cmd->add_option("--out", ablate.out, "JSON report path");

  detail::SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep-beta", "EPA metrics across a grid of beta values");
  sweep_cmd->add_option("--model", sweep.model, "Bundle directory")->required();
  sweep_cmd->add_option("--id", sweep.id, "ID test features (EPAT)")->required();
  sweep_cmd->add_option("--ood", sweep.ood, "OOD test features (EPAT)")->required();
  sweep_cmd->add_option("--beta-grid", sweep.grid, "start:stop:step");
  sweep_cmd->add_option("--out", sweep.out, "JSON report path");

  detail::SynthArgs syn;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic Neural-Collapse dataset");
  synth_cmd->add_option("--classes", syn.spec.classes, "Class count C");
  synth_cmd->add_option("--dim", syn.spec.feature_dim, "Feature dimension n");
  synth_cmd->add_option("--alpha", syn.spec.etf_radius, "ETF radius");
  synth_cmd->add_option("--sigma", syn.spec.within_noise, "Within-class noise");
  synth_cmd->add_option("--offset", syn.spec.offset_norm, "|mu_g - o'|");
  synth_cmd->add_option("--per-class", syn.spec.samples_per_class, "Training samples per class");
  synth_cmd->add_option("--seed", syn.spec.seed, "Geometry and training-sample seed");
  synth_cmd->add_option("--weight-norm", syn.spec.weight_norm, "Norm of each classifier column");
  synth_cmd->add_option("--test-per-class", syn.test_per_class, "ID test samples per class");
  synth_cmd->add_option("--test-seed", syn.test_seed, "ID test sample seed");
  synth_cmd->add_option("--ood-kind", syn.ood_kind, "off, near or mixed");
  synth_cmd->add_option("--ood-count", syn.ood_count, "OOD sample count");
  synth_cmd->add_option("--ood-seed", syn.ood_seed, "OOD sample seed");
  synth_cmd->add_option("--out", syn.out, "Output directory")->required();

  std::vector<const char*> argv{"epa"};
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*fit_cmd) detail::run_fit(fit, out);
    else if (*score_cmd) detail::run_score(score, out);
    else if (*eval_cmd) detail::run_eval(eval, out);
    else if (*ablate_cmd) detail::run_ablate(ablate, out);
    else if (*sweep_cmd) detail::run_sweep(sweep, out);
    else if (*synth_cmd) detail::run_synth(syn, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::UnknownMethod ? kExitUsage : kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}

}  // namespace epa::cli
