#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "epa/baselines.hpp"
#include "oracles.hpp"

using epa::ClassifierHead;
using epa::DenseMatrix;
using epa::DenseVector;
using epa::Error;
using epa::ErrorCode;
using epa::MethodId;

namespace {

// With W = I and b = 0 the logits are the feature itself.
const ClassifierHead kIdentityHead(DenseMatrix::identity(2), DenseVector(2));

std::vector<std::size_t> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  return order;
}

}  // namespace

TEST(Msp, Examples) {
  EXPECT_DOUBLE_EQ(epa::msp_score(kIdentityHead, DenseVector{0, 0}.values()), -0.5);
  EXPECT_NEAR(epa::msp_score(kIdentityHead, DenseVector{1000, 0}.values()), -1.0, 1e-12);
  EXPECT_NEAR(epa::msp_score(kIdentityHead, DenseVector{1, 0}.values()), -0.7310585786300049, 1e-15);
}

TEST(Energy, Examples) {
  EXPECT_NEAR(epa::energy_score(kIdentityHead, DenseVector{0, 0}.values()), -std::log(2.0), 1e-15);
  for (double t : {-700.0, -3.0, 5.0, 900.0})
    EXPECT_NEAR(epa::energy_score(kIdentityHead, DenseVector{t, t}.values()), -(t + std::log(2.0)),
                1e-12 * std::max(1.0, std::abs(t)));
  EXPECT_NEAR(epa::energy_score(kIdentityHead, DenseVector{1, 0}.values()), -1.3132616875182228, 1e-15);
}

TEST(MaxLogit, Examples) {
  EXPECT_EQ(epa::maxlogit_score(kIdentityHead, DenseVector{3, 1}.values()), -3.0);
  EXPECT_EQ(epa::maxlogit_score(kIdentityHead, DenseVector{0, 0}.values()), 0.0);
  EXPECT_EQ(epa::maxlogit_score(kIdentityHead, DenseVector{-2, -5}.values()), 2.0);
}

TEST(Baselines, ShapeMismatch) {
  EXPECT_THROW(epa::msp_score(kIdentityHead, DenseVector{1, 2, 3}.values()), Error);
  EXPECT_THROW(epa::energy_score(kIdentityHead, DenseVector{1}.values()), Error);
}

TEST(Baselines, RankInvariantUnderLogitShift) {
  // A bias shared by every class adds the same constant to every logit.
  std::mt19937_64 rng(6);
  const DenseMatrix w = epa::oracle::random_matrix(rng, 5, 4);
  const ClassifierHead plain(w, DenseVector(4));
  const ClassifierHead shifted(w, DenseVector{7.5, 7.5, 7.5, 7.5});
  const DenseMatrix rows = epa::oracle::random_matrix(rng, 60, 5);

  std::vector<double> msp_a, msp_b, energy_a, energy_b;
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    msp_a.push_back(epa::msp_score(plain, rows.row(r)));
    msp_b.push_back(epa::msp_score(shifted, rows.row(r)));
    energy_a.push_back(epa::energy_score(plain, rows.row(r)));
    energy_b.push_back(epa::energy_score(shifted, rows.row(r)));
  }
  EXPECT_EQ(ranks(msp_a), ranks(msp_b));
  EXPECT_EQ(ranks(energy_a), ranks(energy_b));
}

TEST(Baselines, AblationTermsReconstructEpa) {
  std::mt19937_64 rng(9);
  const DenseMatrix train = epa::oracle::random_matrix(rng, 40, 8);
  const ClassifierHead head(epa::oracle::random_matrix(rng, 8, 3), DenseVector{0.2, -0.1, 0.4});
  const epa::SubspaceModel model = epa::fit_subspace(train, head, 3);
  const DenseMatrix probe = epa::oracle::random_matrix(rng, 50, 8);
  for (std::size_t r = 0; r < probe.rows(); ++r) {
    const double fused = epa::score(MethodId::EPA, model, probe.row(r));
    const double parts = model.beta * epa::pa_only(model, probe.row(r)) + epa::entropy_only(model, probe.row(r));
    EXPECT_NEAR(parts, fused, 1e-12 * std::max(1.0, std::abs(fused)));
  }
}

TEST(Baselines, ScoreRowsMatchesPerRowScore) {
  std::mt19937_64 rng(10);
  const DenseMatrix train = epa::oracle::random_matrix(rng, 30, 6);
  const ClassifierHead head(epa::oracle::random_matrix(rng, 6, 3), DenseVector{0, 1, 0});
  const epa::SubspaceModel model = epa::fit_subspace(train, head, 2);
  const DenseMatrix rows = epa::oracle::random_matrix(rng, 25, 6);
  for (MethodId m : epa::kAllMethods) {
    const auto batch = epa::score_rows(m, model, rows, 3);
    ASSERT_EQ(batch.size(), rows.rows());
    for (std::size_t r = 0; r < rows.rows(); ++r) EXPECT_EQ(batch[r], epa::score(m, model, rows.row(r)));
  }
}

TEST(Baselines, EntropyOnlyToleratesZeroShiftedFeature) {
  const epa::SubspaceModel model = epa::fit_subspace(DenseMatrix{{1, 0}, {0, 1}}, kIdentityHead, 1);
  const DenseMatrix rows{{0, 0}, {1, 2}};
  EXPECT_EQ(epa::score_rows(MethodId::Entropy, model, rows).size(), 2u);
  try {
    epa::score_rows(MethodId::PA, model, rows);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroFeature);
    EXPECT_NE(std::string(e.what()).find('0'), std::string::npos);
  }
}

TEST(MethodNames, ParseRoundTripAndErrors) {
  for (MethodId m : epa::kAllMethods) EXPECT_EQ(epa::parse_method(epa::to_string(m)), m);
  EXPECT_EQ(epa::parse_method("MaxLogit"), MethodId::MaxLogit);
  EXPECT_EQ(epa::parse_method_list("epa,pa,entropy"),
            (std::vector<MethodId>{MethodId::EPA, MethodId::PA, MethodId::Entropy}));
  EXPECT_TRUE(epa::parse_method_list("").empty());
  try {
    epa::parse_method("vim");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownMethod);
    const std::string what = e.what();
    for (MethodId m : epa::kAllMethods) EXPECT_NE(what.find(epa::to_string(m)), std::string::npos);
  }
  EXPECT_THROW(epa::parse_method_list("epa,,msp"), Error);
}
