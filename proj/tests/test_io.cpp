#include <gtest/gtest.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <random>

#include "epa/bundle.hpp"
#include "epa/report.hpp"
#include "epa/tensor_file.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using epa::DenseMatrix;
using epa::DenseVector;
using epa::Error;
using epa::ErrorCode;
using epa::io::Dtype;

namespace {

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() / (std::string("epa_io_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

ErrorCode decode_error(std::string_view bytes) {
  try {
    epa::io::decode_tensor(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "decode succeeded";
  return ErrorCode::Io;
}

}  // namespace

TEST(TensorFile, RoundTripTwoByThree) {
  TempDir dir;
  const DenseMatrix m{{1.5, -2, 3.25}, {0, 1e-3f, 7}};
  epa::io::write_tensor(dir.path() / "m.epat", m);
  EXPECT_EQ(epa::io::read_matrix(dir.path() / "m.epat"), m);
}

TEST(TensorFile, Real32RoundTripIsBitExact) {
  std::mt19937_64 rng(1);
  std::normal_distribution<float> normal(0.0f, 10.0f);
  std::vector<double> values(60);
  for (double& v : values) v = static_cast<double>(normal(rng));
  const std::uint64_t dims[] = {3, 4, 5};
  const std::string bytes = epa::io::encode_tensor(dims, values, Dtype::Real32);
  EXPECT_EQ(bytes.size(), 4u + 4 + 1 + 1 + 3 * 8 + 60 * 4);
  const auto t = epa::io::decode_tensor(bytes);
  EXPECT_EQ(t.dims, (std::vector<std::uint64_t>{3, 4, 5}));
  EXPECT_EQ(0, std::memcmp(t.values.data(), values.data(), values.size() * sizeof(double)));
  EXPECT_EQ(epa::io::encode_tensor(t.dims, t.values, t.dtype), bytes);
}

TEST(TensorFile, Real64KeepsFullPrecision) {
  const std::vector<double> values{0.1, 1.0 / 3.0, -2e-300};
  const std::uint64_t dims[] = {3};
  const auto t = epa::io::decode_tensor(epa::io::encode_tensor(dims, values, Dtype::Real64));
  EXPECT_EQ(t.values, values);
  EXPECT_EQ(t.dtype, Dtype::Real64);
}

TEST(TensorFile, LittleEndianLayout) {
  const std::uint64_t dims[] = {1};
  const std::vector<double> values{1.0};
  const std::string bytes = epa::io::encode_tensor(dims, values, Dtype::Real32);
  EXPECT_EQ(bytes.substr(0, 4), "EPAT");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 1u);  // version, low byte first
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 0u);  // dtype real32
  EXPECT_EQ(static_cast<unsigned char>(bytes[9]), 1u);  // ndim
  EXPECT_EQ(static_cast<unsigned char>(bytes[10]), 1u); // dims[0]
  // 1.0f = 0x3F800000 little-endian.
  EXPECT_EQ(static_cast<unsigned char>(bytes[18]), 0x00);
  EXPECT_EQ(static_cast<unsigned char>(bytes[21]), 0x3F);
}

TEST(TensorFile, BadMagic) {
  const std::uint64_t dims[] = {2};
  std::string bytes = epa::io::encode_tensor(dims, std::vector<double>{1, 2}, Dtype::Real32);
  bytes.replace(0, 4, "XXXX");
  EXPECT_EQ(decode_error(bytes), ErrorCode::BadMagic);
}

TEST(TensorFile, TruncatedPayloadNamesOffset) {
  const std::uint64_t dims[] = {4, 4};
  std::string bytes = epa::io::encode_tensor(dims, std::vector<double>(16, 1.0), Dtype::Real32);
  bytes.resize(bytes.size() - 4);  // 15 values left
  try {
    epa::io::decode_tensor(bytes, "probe.epat");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TruncatedPayload);
    EXPECT_NE(std::string(e.what()).find("probe.epat"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("offset"), std::string::npos);
  }
}

TEST(TensorFile, HeaderErrors) {
  const std::uint64_t dims[] = {2};
  const std::string good = epa::io::encode_tensor(dims, std::vector<double>{1, 2}, Dtype::Real32);
  EXPECT_EQ(decode_error(good.substr(0, 7)), ErrorCode::TruncatedHeader);
  EXPECT_EQ(decode_error(good.substr(0, 14)), ErrorCode::TruncatedHeader);

  std::string version = good;
  version[4] = 2;
  EXPECT_EQ(decode_error(version), ErrorCode::UnsupportedVersion);

  std::string dtype = good;
  dtype[8] = 9;
  EXPECT_EQ(decode_error(dtype), ErrorCode::UnsupportedDtype);

  EXPECT_EQ(decode_error(good + "x"), ErrorCode::ShapeMismatch);
}

TEST(TensorFile, NonFinitePayloadRejected) {
  const std::uint64_t dims[] = {1};
  std::string bytes = epa::io::encode_tensor(dims, std::vector<double>{1.0}, Dtype::Real32);
  const auto nan_bits = std::bit_cast<std::uint32_t>(std::numeric_limits<float>::quiet_NaN());
  for (int i = 0; i < 4; ++i) bytes[18 + i] = static_cast<char>((nan_bits >> (8 * i)) & 0xFF);
  EXPECT_EQ(decode_error(bytes), ErrorCode::NonFinite);
}

TEST(TensorFile, ShapeConversions) {
  TempDir dir;
  epa::io::write_tensor(dir.path() / "v.epat", DenseVector{1, 2, 3});
  EXPECT_EQ(epa::io::read_vector(dir.path() / "v.epat"), (DenseVector{1, 2, 3}));
  EXPECT_THROW(epa::io::read_matrix(dir.path() / "v.epat"), Error);
  try {
    epa::io::read_matrix(dir.path() / "missing.epat");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Io);
  }
}

TEST(Bundle, LoadSaveReproducesScoresBitExactly) {
  TempDir dir;
  std::mt19937_64 rng(3);
  const DenseMatrix train = epa::oracle::random_matrix(rng, 40, 7);
  const epa::ClassifierHead head(epa::oracle::random_matrix(rng, 7, 3), DenseVector{0.5, -1, 0.25});
  const auto model = epa::fit_subspace(train, head, 3, epa::CenterMode::GlobalMean);
  const epa::io::FitProvenance prov{42, 40, 55};
  epa::io::save_bundle(dir.path(), model, prov);

  const auto loaded = epa::io::load_bundle(dir.path());
  EXPECT_EQ(loaded.provenance, prov);
  EXPECT_EQ(loaded.model.center_mode, epa::CenterMode::GlobalMean);
  EXPECT_EQ(loaded.model.beta, model.beta);
  EXPECT_EQ(loaded.model.eigenvalues, model.eigenvalues);

  const DenseMatrix probe = epa::oracle::random_matrix(rng, 30, 7);
  for (std::size_t r = 0; r < probe.rows(); ++r) {
    const auto a = epa::epa_score(model, probe.row(r));
    const auto b = epa::epa_score(loaded.model, probe.row(r));
    EXPECT_EQ(0, std::memcmp(&a, &b, sizeof a));
  }
}

TEST(Bundle, SavingTwiceIsByteIdentical) {
  TempDir dir;
  std::mt19937_64 rng(4);
  const auto model = epa::fit_subspace(epa::oracle::random_matrix(rng, 20, 5),
                                       epa::ClassifierHead(epa::oracle::random_matrix(rng, 5, 2), DenseVector(2)), 2);
  epa::io::save_bundle(dir.path() / "a", model, {});
  epa::io::save_bundle(dir.path() / "b", model, {});
  for (const auto& entry : fs::directory_iterator(dir.path() / "a")) {
    const auto name = entry.path().filename();
    EXPECT_EQ(epa::io::read_file(entry.path()), epa::io::read_file(dir.path() / "b" / name)) << name;
  }
}

TEST(Bundle, RejectsInconsistentManifest) {
  TempDir dir;
  std::mt19937_64 rng(5);
  const auto model = epa::fit_subspace(epa::oracle::random_matrix(rng, 20, 5),
                                       epa::ClassifierHead(epa::oracle::random_matrix(rng, 5, 2), DenseVector(2)), 2);
  epa::io::save_bundle(dir.path(), model, {});
  epa::io::write_tensor(dir.path() / "basis.epat", DenseMatrix(5, 3), Dtype::Real64);
  try {
    epa::io::load_bundle(dir.path());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BadBundle);
  }
  EXPECT_THROW(epa::io::load_bundle(dir.path() / "nope"), Error);
}

TEST(Report, EvalReportRoundTrips) {
  std::vector<epa::EvalResult> results(2);
  results[0] = {epa::MethodId::EPA, 0.987654321012345, 0.0123, 500, 250, 1.0 / 3.0};
  results[1] = {epa::MethodId::MaxLogit, 0.5, 1.0, 1, 1, -7.25};
  const std::string text = epa::io::eval_report_json(results).dump(2);
  const auto parsed = epa::io::parse_eval_report(text);
  ASSERT_EQ(parsed.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(parsed[i].method, results[i].method);
    EXPECT_EQ(parsed[i].auroc, results[i].auroc);
    EXPECT_EQ(parsed[i].fpr_at_95, results[i].fpr_at_95);
    EXPECT_EQ(parsed[i].n_id, results[i].n_id);
    EXPECT_EQ(parsed[i].n_ood, results[i].n_ood);
    EXPECT_EQ(parsed[i].gamma_used, results[i].gamma_used);
  }
  EXPECT_NE(text.find(epa::kFprConvention), std::string::npos);
}

TEST(Report, SweepReportRoundTrips) {
  const std::vector<epa::io::SweepRow> rows{{0.0, 0.75, 0.5, false}, {10.123456789, 0.99, 0.01, true}};
  const auto parsed = epa::io::parse_sweep_report(epa::io::sweep_report_json(rows).dump());
  ASSERT_EQ(parsed.size(), 2u);
  EXPECT_EQ(parsed[1].beta, rows[1].beta);
  EXPECT_TRUE(parsed[1].adaptive);
  EXPECT_FALSE(parsed[0].adaptive);
  EXPECT_THROW(epa::io::parse_eval_report("{not json"), Error);
}

TEST(Report, AblationTableLayout) {
  std::vector<epa::EvalResult> results(3);
  results[0].method = epa::MethodId::EPA;
  results[1].method = epa::MethodId::PA;
  results[2].method = epa::MethodId::Entropy;
  results[0].auroc = 0.9512;
  const std::string table = epa::io::format_eval_table(results);
  const auto epa_at = table.find("EPA");
  const auto theta_at = table.find("θ");
  const auto h_at = table.find(" H");
  ASSERT_NE(epa_at, std::string::npos);
  ASSERT_NE(theta_at, std::string::npos);
  ASSERT_NE(h_at, std::string::npos);
  EXPECT_LT(epa_at, theta_at);
  EXPECT_LT(theta_at, h_at);
  EXPECT_NE(table.find("AUROC"), std::string::npos);
  EXPECT_NE(table.find("FPR95"), std::string::npos);
  EXPECT_NE(table.find("95.12"), std::string::npos);
}
