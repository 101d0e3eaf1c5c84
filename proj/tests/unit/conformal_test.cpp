#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "mfcp/conformal.hpp"
#include "mfcp/errors.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace mfcp;
using namespace mfcp::conformal;
using linalg::Matrix;

TEST(Modulation, MatchesTwoPassStd) {
  const Matrix r = synth::random_matrix(37, 9, 3, -5.0, 5.0);
  const auto s = modulation(r);
  const auto want = oracle::column_std(r);
  for (std::size_t j = 0; j < 9; ++j) EXPECT_NEAR(s[j], want[j], 1e-13 * want[j]);
}

TEST(Modulation, ConstantColumnIsFloored) {
  Matrix r(4, 2, 3.0);
  r(0, 1) = 1.0;
  const auto s = modulation(r, 1e-6);
  EXPECT_EQ(s[0], 1e-6);
  EXPECT_GT(s[1], 1e-6);
}

TEST(Modulation, NeedsTwoRows) {
  EXPECT_THROW(modulation(Matrix(1, 3)), ValidationError);
}

TEST(Scores, HandValues) {
  const Matrix e = Matrix::from_rows({{1, -4}, {0, 2}});
  const std::vector<double> s{1, 2};
  EXPECT_EQ(scores(e, s, ScoreKind::LInf), (std::vector<double>{2.0, 1.0}));
  const auto l2 = scores(e, s, ScoreKind::NormalizedL2);
  EXPECT_DOUBLE_EQ(l2[0], std::sqrt((1.0 + 4.0) / 2.0));
  EXPECT_DOUBLE_EQ(l2[1], std::sqrt(0.5));
}

TEST(Scores, NormalizedL2NeverExceedsLInf) {
  const Matrix e = synth::random_matrix(50, 7, 11);
  const auto s = modulation(e);
  const auto a = scores(e, s, ScoreKind::LInf);
  const auto b = scores(e, s, ScoreKind::NormalizedL2);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_LE(b[i], a[i] * (1 + 1e-15));
}

TEST(Scores, ScaleInvariantUnderJointRescaling) {
  const Matrix e = synth::random_matrix(20, 5, 2);
  Matrix e2 = e;
  for (double& v : e2.data()) v *= 8.0;
  const auto a = scores(e, modulation(e), ScoreKind::LInf);
  const auto b = scores(e2, modulation(e2), ScoreKind::LInf);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12 * a[i]);
}

TEST(CriticalRank, KnownValues) {
  EXPECT_EQ(critical_rank(9, 0.1), 9u);
  EXPECT_EQ(critical_rank(19, 0.1), 18u);
  EXPECT_EQ(critical_rank(99, 0.05), 95u);
  EXPECT_EQ(critical_rank(14, 0.1), 14u);
  EXPECT_THROW(critical_rank(8, 0.1), InsufficientCalibrationError);
  EXPECT_EQ(min_calibration_size(0.1), 9u);
  EXPECT_EQ(min_calibration_size(0.05), 19u);
}

TEST(CriticalRank, AgreesWithExactRational) {
  // delta = num / 100 across sizes; the snapped float rank must agree with
  // integer arithmetic.
  for (std::int64_t num = 1; num < 100; ++num) {
    const double delta = static_cast<double>(num) / 100.0;
    for (std::size_t n = 1; n <= 250; ++n) {
      std::vector<double> v(n);
      std::iota(v.begin(), v.end(), 1.0);
      const auto want = oracle::quantile_rational(v, num, 100);
      if (!want) {
        EXPECT_THROW(critical_quantile(v, delta), InsufficientCalibrationError) << n << " " << delta;
      } else {
        EXPECT_EQ(critical_quantile(v, delta), *want) << n << " " << delta;
      }
    }
  }
}

TEST(CriticalQuantile, MinimumFeasibleSizeIsMaximum) {
  const std::vector<double> v{5, 1, 4, 2, 3, 9, 7, 8, 6};
  EXPECT_EQ(critical_quantile(v, 0.1), 9.0);
}

TEST(CriticalQuantile, MonotoneInDelta) {
  const Matrix r = synth::random_matrix(1, 200, 7);
  const std::vector<double> v(r.data().begin(), r.data().end());
  double prev = std::numeric_limits<double>::infinity();
  for (double delta = 0.01; delta < 0.99; delta += 0.01) {
    const double q = critical_quantile(v, delta);
    EXPECT_LE(q, prev);
    prev = q;
  }
}

TEST(Band, SymmetricAroundPrediction) {
  const std::vector<double> p{1, -2};
  const std::vector<double> r{0.5, 1};
  const auto b = band(p, r);
  EXPECT_EQ(b.lower, (std::vector<double>{0.5, -3}));
  EXPECT_EQ(b.upper, (std::vector<double>{1.5, -1}));
}

TEST(Calibrate, RadiusIsKTimesModulation) {
  const Matrix m = synth::random_matrix(30, 4, 1);
  const Matrix c = synth::random_matrix(19, 4, 2);
  const auto cal = calibrate(m, c, 0.1, ScoreKind::LInf);
  const auto s = oracle::column_std(m);
  const auto sc = scores(c, cal.s, ScoreKind::LInf);
  EXPECT_EQ(cal.k_s, *oracle::quantile_rational(sc, 1, 10));
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_NEAR(cal.s[j], s[j], 1e-13);
    EXPECT_DOUBLE_EQ(cal.radius[j], cal.k_s * cal.s[j]);
  }
}

TEST(Coverage, BoundaryIsInclusive) {
  const Matrix pred = Matrix::from_rows({{0, 0}, {0, 0}});
  const Matrix truth = Matrix::from_rows({{1, -1}, {1, 1.5}});
  const std::vector<double> r{1, 1};
  const auto c = coverage(pred, r, truth);
  EXPECT_EQ(c.nominal, 0.5);
  EXPECT_EQ(c.pointwise, 0.75);
  EXPECT_EQ(c.width_mean, 2.0);
  EXPECT_EQ(c.width_std, 0.0);
}

TEST(Coverage, EmpiricalMatchesNominalLevel) {
  // Exchangeable scalar residuals: marginal coverage lies in
  // [1 - delta, 1 - delta + 1/(n+1)] on average.
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  const std::size_t n_cal = 19;
  std::size_t covered = 0, total = 0;
  for (int trial = 0; trial < 4000; ++trial) {
    Matrix mod(20, 1), cal(n_cal, 1), test(1, 1);
    for (double& v : mod.data()) v = g(rng);
    for (double& v : cal.data()) v = g(rng);
    test(0, 0) = g(rng);
    const auto c = calibrate(mod, cal, 0.1, ScoreKind::LInf);
    covered += std::abs(test(0, 0)) <= c.radius[0];
    ++total;
  }
  const double rate = static_cast<double>(covered) / static_cast<double>(total);
  EXPECT_GT(rate, 0.9 - 0.015);
  EXPECT_LT(rate, 0.95 + 0.015);
}

TEST(Median, OddEvenAndEpochs) {
  EXPECT_EQ(median({3, 1, 2}), 2.0);
  EXPECT_EQ(median({4, 1, 3, 2}), 2.5);
  const std::vector<std::size_t> e{10, 11};
  EXPECT_EQ(median_epoch(e), 11u);
  const std::vector<std::size_t> e2{10, 12, 40};
  EXPECT_EQ(median_epoch(e2), 12u);
  const Matrix r = synth::random_matrix(1, 31, 4);
  const std::vector<double> v(r.data().begin(), r.data().end());
  EXPECT_EQ(median(v), oracle::median(v));
}

namespace {

// Trainer whose residuals are fixed rows of a table, independent of the
// training subset.
SplitTrainer table_trainer(const Matrix& table, std::atomic<int>* calls = nullptr) {
  return [&table, calls](const SplitTask& task) {
    if (calls) ++*calls;
    SplitFit fit;
    fit.cal_residuals = table.select_rows(task.cal_idx);
    fit.epochs = 10 + task.index;
    return fit;
  };
}

}  // namespace

TEST(Mscp, SplitsPartitionTheSamples) {
  const Matrix table = synth::random_matrix(40, 3, 1);
  MscpOptions o;
  o.splits = 5;
  o.workers = 1;
  const auto res = run_mscp(40, o, table_trainer(table));
  ASSERT_EQ(res.splits.size(), 5u);
  for (const auto& r : res.splits) {
    EXPECT_EQ(r.cal_idx.size(), 12u);
    EXPECT_EQ(r.train_idx.size(), 28u);
    std::set<std::size_t> all(r.cal_idx.begin(), r.cal_idx.end());
    all.insert(r.train_idx.begin(), r.train_idx.end());
    EXPECT_EQ(all.size(), 40u);
    EXPECT_TRUE(std::is_sorted(r.cal_idx.begin(), r.cal_idx.end()));
  }
  EXPECT_NE(res.splits[0].cal_idx, res.splits[1].cal_idx);
  EXPECT_EQ(res.e_star, 12u);
}

TEST(Mscp, AggregatesByComponentMedian) {
  const Matrix table = synth::random_matrix(30, 4, 2);
  MscpOptions o;
  o.splits = 7;
  const auto res = run_mscp(30, o, table_trainer(table));
  for (std::size_t j = 0; j < 4; ++j) {
    std::vector<double> col;
    for (const auto& r : res.splits) col.push_back(r.radius[j]);
    EXPECT_EQ(res.r_star[j], oracle::median(col));
  }
  for (const auto& r : res.splits) {
    const Matrix cal = table.select_rows(r.cal_idx);
    const auto s = oracle::column_std(cal);
    const auto sc = scores(cal, r.s, o.kind);
    EXPECT_EQ(r.k_s, *oracle::quantile_rational(sc, 1, 10));
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(r.s[j], s[j], 1e-13);
  }
}

TEST(Mscp, SingleSplitEqualsThatSplit) {
  const Matrix table = synth::random_matrix(30, 2, 3);
  MscpOptions o;
  o.splits = 1;
  const auto res = run_mscp(30, o, table_trainer(table));
  EXPECT_EQ(res.r_star, res.splits[0].radius);
  EXPECT_EQ(res.e_star, res.splits[0].epochs);
}

TEST(Mscp, WorkerCountDoesNotChangeResult) {
  const Matrix table = synth::random_matrix(50, 3, 4);
  MscpOptions o;
  o.splits = 9;
  o.seed = 77;
  o.workers = 1;
  const auto a = run_mscp(50, o, table_trainer(table));
  o.workers = 4;
  const auto b = run_mscp(50, o, table_trainer(table));
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
  EXPECT_EQ(a.r_star, b.r_star);
}

TEST(Mscp, InfeasibleBeforeTraining) {
  const Matrix table = synth::random_matrix(20, 2, 1);
  std::atomic<int> calls{0};
  MscpOptions o;
  o.delta = 0.1;
  o.cal_fraction = 0.3;   // 6 < 9
  EXPECT_THROW(run_mscp(20, o, table_trainer(table, &calls)), InsufficientCalibrationError);
  EXPECT_EQ(calls.load(), 0);
  try {
    run_mscp(20, o, table_trainer(table));
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("9"), std::string::npos);
  }
}

TEST(Mscp, TrainerErrorNamesSplit) {
  MscpOptions o;
  o.splits = 4;
  o.workers = 2;
  const SplitTrainer bad = [](const SplitTask& t) -> SplitFit {
    if (t.index >= 2) throw NumericError("diverged");
    SplitFit f;
    f.cal_residuals = Matrix(t.cal_idx.size(), 2, 1.0);
    return f;
  };
  try {
    run_mscp(40, o, bad);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("split 2"), std::string::npos) << e.what();
  }
}

TEST(Mscp, JsonRoundTrip) {
  const Matrix table = synth::random_matrix(30, 3, 5);
  MscpOptions o;
  o.splits = 3;
  o.kind = ScoreKind::NormalizedL2;
  o.seed = 5;
  const auto res = run_mscp(30, o, table_trainer(table));
  const auto back = mscp_from_json(nlohmann::json::parse(to_json(res).dump()));
  EXPECT_EQ(back.r_star, res.r_star);
  EXPECT_EQ(back.e_star, res.e_star);
  EXPECT_EQ(back.options.kind, ScoreKind::NormalizedL2);
  EXPECT_EQ(back.splits.size(), 3u);
  EXPECT_EQ(back.splits[1].cal_idx, res.splits[1].cal_idx);
  EXPECT_EQ(to_json(back).dump(), to_json(res).dump());
}
