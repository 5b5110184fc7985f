#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fixtures.h"
#include "netwm/design.h"
#include "netwm/errors.h"
#include "netwm/stats.h"

namespace netwm {
namespace {

PlantModel scalar_plant() {
  PlantModel m;
  m.a = Matrix::Constant(1, 1, 0.5);
  m.b_blocks = {Matrix::Constant(1, 1, 1.0)};
  m.c_blocks = {Matrix::Constant(1, 1, 1.0)};
  m.sigma_w = Matrix::Constant(1, 1, 0.15);
  m.sigma_z_blocks = {Matrix::Constant(1, 1, 0.16)};
  return m;
}

GainSet scalar_gains(double sigma_e) {
  GainSet g;
  g.k_blocks = {Matrix::Constant(1, 1, -0.25)};
  g.l_blocks = {Matrix::Constant(1, 1, -0.25)};
  g.sigma_e_blocks = {Matrix::Constant(1, 1, sigma_e)};
  return g;
}

LagTable platoon_lags() {
  const PlantModel m = testing::platoon_plant();
  return compute_watermark_lags(m.a, m.b_blocks, m.c_blocks,
                                testing::platoon_gains().stacked_k());
}

DetectorModel platoon_detector(int window_len = 100) {
  DetectorOptions o;
  o.window_len = window_len;
  return build_detector(testing::platoon_plant(), testing::platoon_gains(), platoon_lags(), o);
}

/// 1 x 1 inputs and outputs, R = I, for direct arithmetic on the likelihood.
DetectorModel toy_detector(int window_len) {
  DetectorModel d;
  d.lags.k_prime = {{0}};
  d.r = {{Matrix::Identity(2, 2)}};
  d.q = {1};
  d.m = {1};
  d.window_len = window_len;
  return d;
}

TEST(DeltaCovariance, ScalarClosedForm) {
  for (double sigma_e : {0.0, 1.0, 7.0}) {
    const DeltaStationaryCov c = stationary_delta_covariance(scalar_plant(), scalar_gains(sigma_e));
    EXPECT_NEAR(c.sigma_delta(0, 0), 0.16 / 0.9375, 1e-14);
    ASSERT_EQ(c.d_blocks.size(), 1u);
    EXPECT_EQ(c.d_blocks[0](0, 0), c.sigma_delta(0, 0));
  }
}

TEST(DeltaCovariance, NoStochasticInputGivesZero) {
  PlantModel m = testing::platoon_plant();
  GainSet g = testing::platoon_gains();
  m.sigma_w.setZero();
  for (auto& s : m.sigma_z_blocks) s.setZero();
  for (auto& s : g.sigma_e_blocks) s.setZero();
  EXPECT_TRUE(stationary_delta_covariance(m, g).sigma_delta.isZero(1e-15));
}

TEST(DeltaCovariance, SatisfiesStationarityEquation) {
  const PlantModel m = testing::platoon_plant();
  const GainSet g = testing::platoon_gains();
  const Matrix abar = delta_dynamics_matrix(m, g);
  const Matrix q = delta_noise_covariance(m, g);
  const Matrix s = stationary_delta_covariance(m, g).sigma_delta;
  EXPECT_LE((s - abar * s * abar.transpose() - q).norm(), 1e-10 * s.norm());
  EXPECT_TRUE(is_symmetric(s, 1e-12));
  EXPECT_GT(min_symmetric_eigenvalue(s), 0.0);
}

TEST(DeltaCovariance, TransitionMatchesClosedLoopAlgebra) {
  const PlantModel m = testing::platoon_plant();
  const GainSet g = testing::platoon_gains();
  const Matrix abar = delta_dynamics_matrix(m, g);
  const Matrix f = m.a + m.stacked_b() * g.stacked_k() + g.stacked_l() * m.stacked_c();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      Matrix expected = -m.b_blocks[c] * g.k_blocks[c];
      if (r == c) expected += f;
      EXPECT_TRUE(abar.block(5 * r, 5 * c, 5, 5).isApprox(expected, 1e-14));
    }
  }
}

TEST(CrossCovariance, SingleSubcontrollerCancels) {
  for (int k = 0; k < 5; ++k) {
    EXPECT_TRUE(delta_excitation_cross_covariance(scalar_plant(), scalar_gains(2.0), 0, k)
                    .sigma.isZero(0.0));
  }
}

TEST(CrossCovariance, ZeroLagIsInjectionPattern) {
  const PlantModel m = testing::platoon_plant();
  const GainSet g = testing::platoon_gains();
  for (int i = 0; i < 3; ++i) {
    const ExcitationCrossCov c = delta_excitation_cross_covariance(m, g, i, 0);
    const Matrix bs = m.b_blocks[i] * g.sigma_e_blocks[i];
    for (int j = 0; j < 3; ++j) {
      if (j == i) {
        EXPECT_TRUE(c.q_blocks[j].isZero(0.0));
      } else {
        EXPECT_TRUE(c.q_blocks[j].isApprox(-bs, 1e-15));
      }
    }
  }
}

TEST(CrossCovariance, PropagatesThroughTransition) {
  const PlantModel m = testing::platoon_plant();
  const GainSet g = testing::platoon_gains();
  const Matrix abar = delta_dynamics_matrix(m, g);
  const Matrix c0 = delta_excitation_cross_covariance(m, g, 1, 0).sigma;
  const Matrix c3 = delta_excitation_cross_covariance(m, g, 1, 3).sigma;
  EXPECT_LE((c3 - abar * abar * abar * c0).norm(), 1e-12 * (1 + c3.norm()));
}

TEST(BuildDetector, BlockStructure) {
  const PlantModel m = testing::platoon_plant();
  const GainSet g = testing::platoon_gains();
  const DetectorModel d = platoon_detector();
  const DeltaStationaryCov sd = stationary_delta_covariance(m, g);
  for (int i = 0; i < 3; ++i) {
    const int q = m.inputs(i);
    for (int j = 0; j < 3; ++j) {
      const Matrix& r = d.r[i][j];
      ASSERT_EQ(r.rows(), q + m.outputs(j));
      EXPECT_TRUE(r.topLeftCorner(q, q) == g.sigma_e_blocks[i]);
      const Matrix lower = m.c_blocks[j] * sd.d_blocks[i] * m.c_blocks[j].transpose() +
                           m.sigma_z_blocks[j];
      EXPECT_TRUE(r.bottomRightCorner(m.outputs(j), m.outputs(j)).isApprox(lower, 1e-12));
      EXPECT_TRUE(is_symmetric(r, 1e-12));
      EXPECT_GT(min_symmetric_eigenvalue(r), 0.0);
    }
  }
  EXPECT_FALSE(d.calibrated());
}

TEST(BuildDetector, SingleSubcontrollerHasNoCrossTerm) {
  const PlantModel m = scalar_plant();
  const GainSet g = scalar_gains(1.0);
  const LagTable lags = compute_watermark_lags(m.a, m.b_blocks, m.c_blocks, g.stacked_k());
  const DetectorModel d = build_detector(m, g, lags, {});
  EXPECT_EQ(d.r[0][0](0, 1), 0.0);
  EXPECT_EQ(d.r[0][0](1, 0), 0.0);
  EXPECT_NEAR(d.r[0][0](1, 1), 0.16 / 0.9375 + 0.16, 1e-14);
}

TEST(BuildDetector, Errors) {
  const PlantModel m = testing::platoon_plant();
  const GainSet g = testing::platoon_gains();
  DetectorOptions o;
  o.window_len = 1;
  EXPECT_THROW(build_detector(m, g, platoon_lags(), o), InputError);
  o.window_len = 100;
  o.alpha = 1.0;
  EXPECT_THROW(build_detector(m, g, platoon_lags(), o), InputError);
  o.alpha = 0.05;
  LagTable bad = platoon_lags();
  bad.k_prime[0][0] = -1;
  EXPECT_THROW(build_detector(m, g, bad, o), InputError);
}

TEST(WishartNll, ScalarToy) {
  const DetectorModel d = toy_detector(10);
  const double nll = wishart_nll({2.0 * Matrix::Identity(2, 2)}, d, 0);
  EXPECT_NEAR(nll, -7.0 * std::log(4.0) + 4.0, 1e-13);
}

TEST(WishartNll, ScatterEqualToScale) {
  const DetectorModel d = platoon_detector();
  for (int i = 0; i < 3; ++i) {
    double expected = 0.0;
    for (int j = 0; j < 3; ++j) {
      expected += d.log_det_coefficient(i, j) * std::log(d.r[i][j].determinant()) +
                  static_cast<double>(d.r[i][j].rows());
    }
    EXPECT_NEAR(wishart_nll(d.r[i], d, i), expected, 1e-9 * std::abs(expected));
  }
}

TEST(WishartNll, DoublingIdentity) {
  const DetectorModel d = platoon_detector();
  std::mt19937_64 rng(3);
  for (int i = 0; i < 3; ++i) {
    std::vector<Matrix> s, s2;
    double shift = 0.0;
    for (int j = 0; j < 3; ++j) {
      const Eigen::Index n = d.r[i][j].rows();
      const Matrix g = testing::random_matrix(rng, n, n);
      s.push_back(g * g.transpose() + 0.1 * Matrix::Identity(n, n));
      s2.push_back(2.0 * s.back());
      shift += d.log_det_coefficient(i, j) * static_cast<double>(n) * std::log(2.0) +
               (d.r[i][j].inverse() * s.back()).trace();
    }
    const double base = wishart_nll(s, d, i);
    EXPECT_NEAR(wishart_nll(s2, d, i) - base, shift, 1e-9 * (1 + std::abs(base)));
  }
}

TEST(WishartNll, CoefficientVariants) {
  DetectorModel d;
  d.lags.k_prime = {{0, 0}, {0, 0}};
  d.r = {{Matrix::Identity(2, 2), Matrix::Identity(3, 3)},
         {Matrix::Identity(3, 3), Matrix::Identity(4, 4)}};
  d.q = {1, 2};
  d.m = {1, 2};
  d.window_len = 10;
  EXPECT_EQ(d.log_det_coefficient(0, 1), 1 - 10 + 1 + 1);
  d.coefficient = CoefficientVariant::kDimensionConsistent;
  EXPECT_EQ(d.log_det_coefficient(0, 1), 1 - 10 + 2 + 1);
  EXPECT_EQ(d.log_det_coefficient(1, 0), 1 - 10 + 1 + 2);
}

TEST(WishartNll, Errors) {
  const DetectorModel d = toy_detector(10);
  EXPECT_THROW(wishart_nll({Matrix::Zero(2, 2)}, d, 0), DegenerateWindowError);
  DetectorModel singular = d;
  singular.r[0][0] = Matrix::Zero(2, 2);
  EXPECT_THROW(wishart_nll({Matrix::Identity(2, 2)}, singular, 0), ModelError);
  EXPECT_THROW(wishart_nll({Matrix::Identity(3, 3)}, d, 0), DimensionError);
}

class PlatoonTrace : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    SimulationOptions o;
    o.noise.seed = 77;
    trace_ = new SimulationTrace(
        simulate(testing::platoon_plant(), testing::platoon_gains(), {}, 900, o));
  }
  static void TearDownTestSuite() {
    delete trace_;
    trace_ = nullptr;
  }
  static SimulationTrace* trace_;
};
SimulationTrace* PlatoonTrace::trace_ = nullptr;

TEST_F(PlatoonTrace, PsiConcatenatesTraceEntries) {
  const PlantModel m = testing::platoon_plant();
  const LagTable lags = platoon_lags();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const long n = 50 + i + j;
      const Vector psi = psi_vector(*trace_, m, n, i, j, lags);
      const long lagged = n - lags.at(i, j) - 1;
      ASSERT_EQ(psi.size(), m.inputs(i) + m.outputs(j));
      EXPECT_TRUE(psi.head(m.inputs(i)) == trace_->e[i].col(lagged));
      const Vector residual = m.c_blocks[j] * trace_->xhat[i].col(n) - trace_->s[i][j].col(n);
      EXPECT_LE((psi.tail(m.outputs(j)) - residual).norm(), 1e-15 * (1 + residual.norm()));
      // Without attack the residual is C_j delta_i - z_j.
      const Vector via_delta =
          m.c_blocks[j] * (trace_->xhat[i].col(n) - trace_->x.col(n)) - trace_->z[j].col(n);
      EXPECT_LE((residual - via_delta).norm(), 1e-12);
    }
  }
}

TEST_F(PlatoonTrace, PsiRangeErrors) {
  const PlantModel m = testing::platoon_plant();
  const LagTable lags = platoon_lags();
  EXPECT_THROW(psi_vector(*trace_, m, lags.at(2, 0), 2, 0, lags), RangeError);
  EXPECT_THROW(psi_vector(*trace_, m, 900, 0, 0, lags), RangeError);
  EXPECT_NO_THROW(psi_vector(*trace_, m, 899, 0, 0, lags));
}

TEST_F(PlatoonTrace, WindowScatterMatchesBruteForce) {
  const PlantModel m = testing::platoon_plant();
  const LagTable lags = platoon_lags();
  const Vector one = psi_vector(*trace_, m, 40, 1, 2, lags);
  EXPECT_TRUE(window_scatter(*trace_, m, 40, 1, 1, 2, lags)
                  .isApprox(one * one.transpose(), 1e-15));
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      Matrix sum = Matrix::Zero(m.inputs(i) + m.outputs(j), m.inputs(i) + m.outputs(j));
      for (long n = 100; n < 173; ++n) {
        const Vector p = psi_vector(*trace_, m, n, i, j, lags);
        sum += p * p.transpose();
      }
      const Matrix s = window_scatter(*trace_, m, 100, 73, i, j, lags);
      EXPECT_LE((s - sum / 73.0).norm(), 1e-13 * sum.norm() / 73.0);
      EXPECT_TRUE(s == s.transpose());
    }
  }
}

TEST_F(PlatoonTrace, WindowStatisticAppliesScaling) {
  const PlantModel m = testing::platoon_plant();
  DetectorModel sum_d = platoon_detector(100);
  DetectorModel mean_d = sum_d;
  mean_d.scaling = ScatterScaling::kWindowMean;
  for (int i = 0; i < 3; ++i) {
    std::vector<Matrix> means;
    for (int j = 0; j < 3; ++j) means.push_back(window_scatter(*trace_, m, 500, 100, i, j, sum_d.lags));
    std::vector<Matrix> sums = means;
    for (auto& s : sums) s *= 100.0;
    EXPECT_NEAR(window_statistic(*trace_, m, 500, i, mean_d), wishart_nll(means, mean_d, i), 1e-8);
    EXPECT_NEAR(window_statistic(*trace_, m, 500, i, sum_d), wishart_nll(sums, sum_d, i), 1e-8);
  }
}

TEST_F(PlatoonTrace, StreamIsBitIdenticalToTracePath) {
  const PlantModel m = testing::platoon_plant();
  const DetectorModel d = platoon_detector(100);
  SimulationOptions o;
  o.noise.seed = 77;
  Simulator sim(m, testing::platoon_gains(), {}, o);
  WindowStatisticStream stream(m, d, 300);
  int closed = 0;
  for (long n = 0; n < 900; ++n) {
    if (stream.push(sim.step())) {
      const long start = stream.last_window_start();
      EXPECT_EQ(start, 300 + 100 * closed);
      for (int i = 0; i < 3; ++i) {
        EXPECT_EQ(stream.last()[i], window_statistic(*trace_, m, start, i, d)) << "i = " << i;
      }
      ++closed;
    }
  }
  EXPECT_EQ(closed, 6);
  EXPECT_THROW(WindowStatisticStream(m, d, 0), RangeError);
}

TEST(PsiMean, StatisticallyZero) {
  const PlantModel m = testing::platoon_plant();
  const DetectorModel d = platoon_detector();
  SimulationOptions o;
  o.noise.seed = 5;
  Simulator sim(m, testing::platoon_gains(), {}, o);
  const long burn = 500, samples = 100000;
  // Track e history explicitly to form psi_{0,j} for every j.
  const int lag_cap = d.lags.max_lag() + 1;
  std::vector<Vector> e_hist;
  std::vector<Vector> sums(3);
  for (int j = 0; j < 3; ++j) sums[j] = Vector::Zero(m.inputs(0) + m.outputs(j));
  for (long n = 0; n < burn + samples; ++n) {
    const StepRecord& r = sim.step();
    e_hist.push_back(r.e[0]);
    if (static_cast<int>(e_hist.size()) > lag_cap + 1) e_hist.erase(e_hist.begin());
    if (n < burn) continue;
    for (int j = 0; j < 3; ++j) {
      const int back = d.lags.at(0, j) + 1;
      sums[j].head(m.inputs(0)) += e_hist[e_hist.size() - 1 - back];
      sums[j].tail(m.outputs(j)) += m.c_blocks[j] * r.xhat[0] - r.s[0][j];
    }
  }
  for (int j = 0; j < 3; ++j) {
    const Vector mean = sums[j] / static_cast<double>(samples);
    const double bound = 4.0 * std::sqrt(d.r[0][j].diagonal().maxCoeff()) /
                         std::sqrt(static_cast<double>(samples));
    EXPECT_LE(mean.norm(), bound) << "j = " << j;
  }
}

TEST(Quantile, Definition) {
  std::vector<double> v;
  for (int k = 10; k >= 1; --k) v.push_back(k);
  EXPECT_EQ(empirical_quantile(v, 0.5), 5.0);
  EXPECT_EQ(empirical_quantile(v, 0.95), 10.0);
  EXPECT_EQ(empirical_quantile(v, 0.9), 9.0);
  EXPECT_EQ(empirical_quantile(v, 1.0 - 1e-12), 10.0);
  EXPECT_EQ(empirical_quantile(v, 0.01), 1.0);
  EXPECT_THROW(empirical_quantile({}, 0.5), InputError);
  EXPECT_THROW(empirical_quantile(v, 0.0), InputError);
}

TEST(Decide, Boundary) {
  DetectorModel d = toy_detector(10);
  EXPECT_THROW(decide(0.0, d, 0), StateError);
  d.tau = {3.5};
  EXPECT_EQ(decide(3.5, d, 0), Decision::kAccept);
  EXPECT_EQ(decide(4.5, d, 0), Decision::kReject);
  EXPECT_EQ(decide(-1e300, d, 0), Decision::kAccept);
  EXPECT_EQ(decide(std::nextafter(3.5, 4.0), d, 0), Decision::kReject);
}

TEST(Decide, MonotoneInStatistic) {
  DetectorModel d = toy_detector(10);
  d.tau = {0.0};
  bool rejected = false;
  for (double x = -5; x <= 5; x += 0.25) {
    const bool r = decide(x, d, 0) == Decision::kReject;
    EXPECT_TRUE(r || !rejected);
    rejected = r;
  }
}

double binomial_tail(int n, double p, int c) {
  double tail = 0.0;
  for (int k = c; k <= n; ++k) {
    tail += std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) +
                     k * std::log(p) + (n - k) * std::log1p(-p));
  }
  return tail;
}

TEST(RunRejectionLimit, MatchesBinomialTail) {
  EXPECT_EQ(run_rejection_limit(20, 0.05, 3), 4);
  for (int n : {1, 5, 20, 100}) {
    for (double a : {0.01, 0.05, 0.2}) {
      for (int family : {1, 3}) {
        const int c = run_rejection_limit(n, a, family);
        if (c <= n) EXPECT_LE(binomial_tail(n, a, c), a / family * (1 + 1e-12));
        if (c >= 1) EXPECT_GT(binomial_tail(n, a, c - 1), a / family);
      }
    }
  }
}

TEST(Calibration, MedianAndDeterminism) {
  const PlantModel m = testing::platoon_plant();
  const GainSet g = testing::platoon_gains();
  DetectorModel d = platoon_detector(100);
  d.alpha = 0.5;
  CalibrationOptions serial;
  serial.threads = 1;
  serial.chunk_windows = 40;
  const Calibration a = calibrate_threshold(m, g, d, 120, 8, serial);
  CalibrationOptions parallel = serial;
  parallel.threads = 3;
  const Calibration b = calibrate_threshold(m, g, d, 120, 8, parallel);
  ASSERT_EQ(a.tau.size(), 3u);
  for (int i = 0; i < 3; ++i) {
    ASSERT_EQ(a.samples[i].size(), 120u);
    EXPECT_EQ(a.samples[i], b.samples[i]);
    std::vector<double> sorted = a.samples[i];
    std::sort(sorted.begin(), sorted.end());
    EXPECT_EQ(a.tau[i], sorted[59]);
  }
  EXPECT_THROW(calibrate_threshold(m, g, d, 99, 8, serial), InputError);
}

TEST(Calibration, TinyAlphaGivesMaximum) {
  const PlantModel m = testing::platoon_plant();
  DetectorModel d = platoon_detector(100);
  d.alpha = 1e-9;
  const Calibration c = calibrate_threshold(m, testing::platoon_gains(), d, 100, 2);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(c.tau[i], *std::max_element(c.samples[i].begin(), c.samples[i].end()));
  }
}

}  // namespace
}  // namespace netwm
