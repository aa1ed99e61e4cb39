#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "epa/core.hpp"
#include "epa/error.hpp"
#include "epa/tensor_file.hpp"
#include "json.hpp"

namespace epa::io {

inline constexpr std::string_view kBundleFormat = "epa-subspace-bundle";
inline constexpr int kBundleVersion = 1;
inline constexpr std::string_view kManifestName = "manifest.json";

// How the fitting subset was drawn; recorded alongside the model.
struct FitProvenance {
  std::uint64_t seed = 0;
  std::size_t subset_size = 0;    // rows actually used for the fit
  std::size_t training_rows = 0;  // rows available before subsetting
  std::string sampling = "uniform without replacement";

  friend bool operator==(const FitProvenance&, const FitProvenance&) = default;
};

struct Bundle {
  SubspaceModel model;
  FitProvenance provenance;
};

/// Writes manifest.json plus one EPAT file per tensor into `dir` (created if needed).
inline void save_bundle(const std::filesystem::path& dir, const SubspaceModel& model, const FitProvenance& prov) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create bundle directory " + dir.string() + ": " + ec.message());

  write_tensor(dir / "origin_shift.epat", model.origin_shift, Dtype::Real64);
  write_tensor(dir / "basis.epat", model.basis, Dtype::Real64);
  write_tensor(dir / "weights.epat", model.head.weights(), Dtype::Real64);
  write_tensor(dir / "bias.epat", model.head.bias(), Dtype::Real64);
  write_tensor(dir / "eigenvalues.epat", DenseVector(model.eigenvalues), Dtype::Real64);

  nlohmann::ordered_json manifest;
  manifest["format"] = kBundleFormat;
  manifest["version"] = kBundleVersion;
  manifest["n"] = model.feature_dim();
  manifest["C"] = model.class_count();
  manifest["D"] = model.dim();
  manifest["beta"] = model.beta;
  manifest["center_mode"] = std::string(to_string(model.center_mode));
  manifest["seed"] = prov.seed;
  manifest["subset_size"] = prov.subset_size;
  manifest["training_rows"] = prov.training_rows;
  manifest["subset_sampling"] = prov.sampling;
  manifest["files"] = {{"origin_shift", "origin_shift.epat"},
                       {"basis", "basis.epat"},
                       {"weights", "weights.epat"},
                       {"bias", "bias.epat"},
                       {"eigenvalues", "eigenvalues.epat"}};
  write_file(dir / kManifestName, manifest.dump(2) + "\n");
}

inline Bundle load_bundle(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file(dir / kManifestName));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadBundle, (dir / kManifestName).string() + ": " + e.what());
  }

  try {
    if (manifest.at("format").get<std::string>() != kBundleFormat)
      throw Error(ErrorCode::BadBundle, dir.string() + ": not an EPA bundle");
    if (manifest.at("version").get<int>() != kBundleVersion)
      throw Error(ErrorCode::UnsupportedVersion, dir.string() + ": bundle version " + manifest.at("version").dump());

    const auto& files = manifest.at("files");
    auto path_of = [&](const char* key) { return dir / files.at(key).get<std::string>(); };

    ClassifierHead head(read_matrix(path_of("weights")), read_vector(path_of("bias")));
    DenseVector shift = read_vector(path_of("origin_shift"));
    DenseMatrix basis = read_matrix(path_of("basis"));
    DenseVector eigenvalues = read_vector(path_of("eigenvalues"));

    const auto n = manifest.at("n").get<std::size_t>();
    const auto classes = manifest.at("C").get<std::size_t>();
    const auto dim = manifest.at("D").get<std::size_t>();
    if (head.feature_dim() != n || head.class_count() != classes || shift.size() != n || basis.rows() != n ||
        basis.cols() != dim) {
      throw Error(ErrorCode::BadBundle, dir.string() + ": tensor shapes disagree with the manifest");
    }

    Bundle b{SubspaceModel{std::move(shift), std::move(basis), manifest.at("beta").get<double>(),
                           parse_center_mode(manifest.at("center_mode").get<std::string>()), std::move(head),
                           eigenvalues.storage()},
             FitProvenance{manifest.at("seed").get<std::uint64_t>(), manifest.at("subset_size").get<std::size_t>(),
                           manifest.at("training_rows").get<std::size_t>(),
                           manifest.at("subset_sampling").get<std::string>()}};
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadBundle, (dir / kManifestName).string() + ": " + e.what());
  }
}

}  // namespace epa::io
