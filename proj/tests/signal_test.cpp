#include <gazeintent/signal.hpp>

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace gazeintent;

namespace {

std::vector<GazeSample> yaw_sweep(std::size_t n, double rate_dps, double dt_ms) {
  std::vector<GazeSample> s(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i].t = static_cast<double>(i) * dt_ms;
    s[i].dir = direction_from_angles(-20.0 + rate_dps * s[i].t / 1000.0, 0.0);
  }
  return s;
}

std::vector<GazeSample> random_walk(std::mt19937_64& rng, std::size_t n, double spike_prob) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> step(0.0, 0.4);
  std::vector<GazeSample> s(n);
  double az = 0.0, el = 0.0, t = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    t += 12.0 + 6.0 * u(rng);
    az += step(rng);
    el = std::clamp(el + step(rng), -40.0, 40.0);
    double a = az, e = el;
    if (u(rng) < spike_prob) a += 60.0;  // single-sample glitch
    s[i].t = t;
    s[i].dir = direction_from_angles(a, e);
  }
  return s;
}

}  // namespace

TEST(AngularDisplacement, KnownAngles) {
  EXPECT_DOUBLE_EQ(angular_displacement({1, 0, 0}, {1, 0, 0}), 0.0);
  EXPECT_NEAR(angular_displacement({1, 0, 0}, {0, 1, 0}), 90.0, 1e-12);
  const double a = 10.0 * kDegToRad;
  EXPECT_NEAR(angular_displacement({1, 0, 0}, {std::cos(a), std::sin(a), 0}), 10.0, 1e-9);
}

TEST(AngularDisplacement, RejectsNonUnit) {
  try {
    angular_displacement({0.5, 0, 0}, {1, 0, 0});
    FAIL() << "expected error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidInput);
  }
}

TEST(AngularDisplacement, SymmetricAndBounded) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 2000; ++i) {
    const Vec3 a = oracle::random_unit(rng), b = oracle::random_unit(rng);
    const double ab = angular_displacement(a, b);
    EXPECT_EQ(ab, angular_displacement(b, a));
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 180.0);
  }
}

TEST(AxisComponents, YawAndPitch) {
  const Vec3 fwd{0, 0, 1};
  auto same = axis_components(fwd, fwd);
  EXPECT_EQ(same.h, 0.0);
  EXPECT_EQ(same.v, 0.0);

  const Vec3 base = direction_from_angles(13.0, 4.0);
  auto yawed = axis_components(base, oracle::yaw(base, 10.0));
  EXPECT_NEAR(yawed.h, 10.0, 1e-9);
  EXPECT_NEAR(yawed.v, 0.0, 1e-9);

  auto pitched = axis_components(fwd, oracle::pitch(fwd, 5.0));
  EXPECT_NEAR(pitched.h, 0.0, 1e-9);
  EXPECT_NEAR(pitched.v, 5.0, 1e-9);
}

TEST(AxisComponents, WrapsAcrossBackDirection) {
  const Vec3 a = direction_from_angles(175.0, 0.0), b = direction_from_angles(-175.0, 0.0);
  EXPECT_NEAR(axis_components(a, b).h, 10.0, 1e-9);
  EXPECT_NEAR(axis_components(b, a).h, -10.0, 1e-9);
}

TEST(AxisComponents, DegenerateElevation) {
  try {
    axis_components({0, 1, 0}, {0, 0, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateElevation);
  }
}

TEST(Differentiate, VelocityFromTrueDt) {
  const double one = 1.0 * kDegToRad;
  std::vector<GazeSample> s(2);
  s[0].t = 100.0;
  s[1].t = 115.0;
  s[1].dir = {std::sin(one), 0, std::cos(one)};
  auto v = differentiate(s);
  EXPECT_EQ(v[0].abs, 0.0);
  EXPECT_NEAR(v[1].abs, 1.0 / 0.015, 1e-6);

  s[1].dir = s[0].dir;
  EXPECT_EQ(differentiate(s)[1].abs, 0.0);

  s[1].dir = {1, 0, 0};
  EXPECT_NEAR(differentiate(s)[1].abs, 90.0 / 0.015, 1e-6);
}

TEST(Differentiate, RejectsNonIncreasingTime) {
  std::vector<GazeSample> s(2);
  s[0].t = s[1].t = 5.0;
  try {
    differentiate(s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedStream);
  }
}

TEST(SgFilter, ReproducesConstantsAndLines) {
  std::vector<double> c(40, 3.25);
  for (int w : {7, 9, 11})
    for (int o : {1, 2})
      for (double x : sg_filter(c, w, o)) EXPECT_NEAR(x, 3.25, 1e-12);

  std::vector<double> ramp(50);
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = 0.5 * static_cast<double>(i) - 3.0;
  auto f = sg_filter(ramp, 11, 1);
  for (std::size_t i = 5; i + 5 < ramp.size(); ++i) EXPECT_NEAR(f[i], ramp[i], 1e-9);
}

TEST(SgFilter, MatchesLeastSquaresOracle) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::vector<double> x(120);
  for (auto& v : x) v = u(rng);
  auto f = sg_filter(x, 7, 2);
  for (std::size_t i = 3; i + 3 < x.size(); ++i) EXPECT_NEAR(f[i], oracle::local_poly_fit(x, i, 7, 2), 1e-9);
}

TEST(SgFilter, MirrorPaddedEdgesAndLength) {
  std::vector<double> x{1, 4, 2, 8, 5, 7, 3, 6, 0};
  auto f = sg_filter(x, 5, 1);
  ASSERT_EQ(f.size(), x.size());
  // mirror: x[-2], x[-1] = x[2], x[1]
  EXPECT_NEAR(f[0], (2 + 4 + 1 + 4 + 2) / 5.0, 1e-12);
  EXPECT_NEAR(f[8], (3 + 6 + 0 + 6 + 3) / 5.0, 1e-12);
}

TEST(SgFilter, ShortSeriesIsInsufficient) {
  std::vector<double> x(6, 1.0);
  try {
    sg_filter(x, 7, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientData);
  }
}

TEST(RemoveOutliers, Examples) {
  EXPECT_EQ(remove_outliers(std::vector<double>{100, 6000, 100}, 800), (std::vector<double>{100, 100, 100}));
  EXPECT_EQ(remove_outliers(std::vector<double>{100, 200, 300}, 800), (std::vector<double>{100, 200, 300}));
  EXPECT_EQ(remove_outliers(std::vector<double>{6000, 100, 200}, 800), (std::vector<double>{100, 100, 200}));
  EXPECT_EQ(remove_outliers(std::vector<double>{10, 900, 900, 40}, 800), (std::vector<double>{10, 20, 30, 40}));
  EXPECT_EQ(remove_outliers(std::vector<double>{10, 20, 900}, 800), (std::vector<double>{10, 20, 20}));
}

TEST(RemoveOutliers, AllOutliers) {
  try {
    remove_outliers(std::vector<double>{900, 1000}, 800);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AllOutliers);
  }
}

TEST(RemoveOutliers, IdempotentAndBounded) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1500.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x(50);
    for (auto& v : x) v = u(rng);
    x[17] = 10.0;  // at least one valid sample
    const auto once = remove_outliers(x, 800.0);
    EXPECT_EQ(remove_outliers(once, 800.0), once);
    for (double v : once) EXPECT_LE(v, 800.0);
  }
}

TEST(ProcessStream, StationaryGaze) {
  std::vector<GazeSample> s(60);
  for (std::size_t i = 0; i < s.size(); ++i) s[i].t = 15.0 * static_cast<double>(i);
  for (const auto& f : process_stream(s, {})) {
    EXPECT_NEAR(f.vel_abs, 0.0, 1e-9);
    EXPECT_NEAR(f.acc_abs, 0.0, 1e-9);
  }
}

TEST(ProcessStream, SpikeIsRemoved) {
  auto s = yaw_sweep(80, 0.0, 15.0);
  s[40].dir = direction_from_angles(-20.0 + 90.0, 0.0);  // 6000 deg/s in and out
  const auto frames = process_stream(s, {});
  for (const auto& f : frames) {
    EXPECT_LE(f.vel_abs, 800.0);
    EXPECT_NEAR(f.vel_abs, 0.0, 1e-6);
  }
}

TEST(ProcessStream, ConstantYawSweep) {
  const auto frames = process_stream(yaw_sweep(120, 50.0, 15.0), {});
  for (std::size_t i = 10; i + 10 < frames.size(); ++i) {
    EXPECT_NEAR(frames[i].vel_abs, 50.0, 1e-6);
    EXPECT_NEAR(frames[i].vel_h, 50.0, 1e-6);
    EXPECT_NEAR(frames[i].vel_v, 0.0, 1e-6);
    EXPECT_NEAR(frames[i].acc_abs, 0.0, 1e-3);
  }
}

TEST(ProcessStream, FramesFiniteAndNonNegativeSpeed) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto frames = process_stream(random_walk(rng, 300, 0.02), {9, 2});
    for (const auto& f : frames) {
      EXPECT_GE(f.vel_abs, 0.0);
      EXPECT_GE(f.disp_abs, 0.0);
      EXPECT_LE(f.vel_abs, 800.0);
      for (double x : {f.disp_abs, f.disp_h, f.disp_v, f.vel_abs, f.vel_h, f.vel_v, f.acc_abs, f.acc_h, f.acc_v})
        EXPECT_TRUE(std::isfinite(x));
    }
  }
}

TEST(StreamProcessor, EqualsBatchOnRandomStreams) {
  std::mt19937_64 rng(21);
  const SignalConfig configs[] = {{11, 1}, {7, 2}, {9, 1}, {11, 2}};
  for (int trial = 0; trial < 40; ++trial) {
    const SignalConfig cfg = configs[trial % 4];
    const auto samples = random_walk(rng, 50 + static_cast<std::size_t>(trial) * 7, 0.05);
    const auto batch = process_stream(samples, cfg);
    StreamProcessor sp(cfg);
    std::vector<KinematicsFrame> streamed;
    std::size_t max_lag = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      for (auto& f : sp.push(samples[i])) streamed.push_back(f);
      max_lag = std::max(max_lag, i + 1 - streamed.size());
    }
    for (auto& f : sp.flush()) streamed.push_back(f);
    ASSERT_EQ(streamed.size(), batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) ASSERT_EQ(streamed[i], batch[i]) << "trial " << trial << " frame " << i;
    EXPECT_GE(max_lag, sp.delay());
  }
}

TEST(StreamProcessor, DelayWithoutOutliers) {
  const auto samples = yaw_sweep(40, 20.0, 15.0);
  StreamProcessor sp({11, 1});
  std::size_t emitted = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    emitted += sp.push(samples[i]).size();
    if (i >= sp.delay()) {
      EXPECT_EQ(emitted, i + 1 - sp.delay());
    }
  }
}
