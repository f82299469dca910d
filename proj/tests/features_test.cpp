#include <gazeintent/features.hpp>
#include <gazeintent/stats.hpp>

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <set>

using namespace gazeintent;

namespace {

std::vector<KinematicsFrame> still_frames(std::size_t n) {
  std::vector<KinematicsFrame> f(n);
  for (std::size_t i = 0; i < n; ++i) f[i].t = 15.0 * static_cast<double>(i);
  return f;
}

GazeEvent event_over(EventKind kind, const std::vector<KinematicsFrame>& f, std::size_t a, std::size_t b) {
  GazeEvent e;
  e.kind = kind;
  e.start_idx = a;
  e.end_idx = b;
  e.start_t = f[a].t;
  e.end_t = f[b].t;
  e.duration = e.end_t - e.start_t;
  return e;
}

// Frames through the real signal/event pipeline on a synthetic random walk.
std::vector<KinematicsFrame> walk_frames(std::mt19937_64& rng, std::size_t n) {
  std::vector<GazeSample> s(n);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double az = 0.0, t = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    t += 15.0;
    if (u(rng) < 0.08) az += 6.0;  // abrupt shift
    s[i].t = t;
    s[i].dir = direction_from_angles(az + 0.05 * u(rng), 0.05 * u(rng));
  }
  return process_stream(s, {7, 2});
}

}  // namespace

TEST(Stats, ConstantSequence) {
  const auto s = stats_m3s2dk(std::vector<double>{5, 5, 5, 5});
  EXPECT_EQ(s.mean, 5.0);
  EXPECT_EQ(s.median, 5.0);
  EXPECT_EQ(s.mode, 5.0);
  EXPECT_EQ(s.std_dev, 0.0);
  EXPECT_EQ(s.skewness, 0.0);
  EXPECT_EQ(s.kurtosis, 0.0);
}

TEST(Stats, HandArithmetic) {
  const auto s = stats_m3s2dk(std::vector<double>{1, 2, 3, 4, 5});
  EXPECT_DOUBLE_EQ(s.mean, 3.0);
  EXPECT_DOUBLE_EQ(s.median, 3.0);
  EXPECT_NEAR(s.std_dev, std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(s.skewness, 0.0, 1e-12);
  // m4 = (16+1+0+1+16)/5 = 6.8, m2 = 2 -> 6.8/4 - 3
  EXPECT_NEAR(s.kurtosis, 6.8 / 4.0 - 3.0, 1e-12);
  EXPECT_NEAR(stats_m3s2dk(std::vector<double>{4, 1, 2, 3, 2, 3}).skewness, 0.0, 1e-12);
}

TEST(Stats, ShortSequencesAndMode) {
  const auto two = stats_m3s2dk(std::vector<double>{1, 3});
  EXPECT_EQ(two.skewness, 0.0);
  EXPECT_EQ(two.kurtosis, 0.0);
  const auto three = stats_m3s2dk(std::vector<double>{1, 2, 9});
  EXPECT_EQ(three.kurtosis, 0.0);
  EXPECT_NE(three.skewness, 0.0);
  // dense cluster near 10 dominates the half-sample mode
  const auto m = stats_m3s2dk(std::vector<double>{1, 4, 9.9, 10, 10.1, 10.05, 20, 35});
  EXPECT_NEAR(m.mode, 10.025, 0.06);
  EXPECT_THROW(stats_m3s2dk(std::vector<double>{}), Error);
}

TEST(Schema, Counts) {
  const auto full = make_schema(FeatureSet::Full98);
  EXPECT_EQ(full.count(), 98u);
  EXPECT_EQ(std::set<std::string>(full.names.begin(), full.names.end()).size(), 98u);
  EXPECT_EQ(features::event_names(EventKind::Fixation).size(), 45u);
  EXPECT_EQ(features::event_names(EventKind::Saccade).size(), 44u);

  const auto set2 = make_schema(FeatureSet::Set2_ContinuousPlusBooleans11);
  ASSERT_EQ(set2.count(), 11u);
  EXPECT_EQ(set2.names[9], "fix_bool");
  EXPECT_EQ(set2.names[10], "sac_bool");

  const auto set1 = make_schema(FeatureSet::Set1_Continuous9);
  EXPECT_EQ(set1.count(), 9u);
  for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(set1.names[i], features::kContinuousNames[i]);

  const auto set4 = make_schema(FeatureSet::Set4_EventOnly89);
  EXPECT_EQ(set4.count(), 89u);
  for (const auto& n : set4.names)
    for (const char* c : features::kContinuousNames) EXPECT_NE(n, c);
}

TEST(Schema, Set3NeedsRanking) {
  try {
    make_schema(FeatureSet::Set3_Top30);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingRanking);
  }
  const auto& full = features::full_names();
  std::vector<std::string> ranking(full.rbegin(), full.rbegin() + 40);
  const auto s3 = make_schema(FeatureSet::Set3_Top30, ranking);
  EXPECT_EQ(s3.count(), 30u);
  EXPECT_EQ(s3.names.front(), full.back());
}

TEST(Schema, ManifestRoundTripAndHash) {
  const auto set2 = make_schema(FeatureSet::Set2_ContinuousPlusBooleans11);
  const auto path = (std::filesystem::temp_directory_path() / "gazeintent_schema_test.txt").string();
  save_schema(set2, path);
  const auto back = load_schema(path);
  EXPECT_EQ(back, set2);
  EXPECT_EQ(back.hash(), set2.hash());
  EXPECT_NE(set2.hash(), make_schema(FeatureSet::Set1_Continuous9).hash());
  std::filesystem::remove(path);
}

TEST(EventFeatures, StationaryFixation) {
  const auto f = still_frames(10);
  const auto v = event_features(event_over(EventKind::Fixation, f, 0, 9), f);
  ASSERT_EQ(v.size(), 45u);
  EXPECT_EQ(v[0], 1.0);
  EXPECT_NEAR(v[1], 0.135, 1e-12);  // duration in seconds
  EXPECT_EQ(v[2], 0.0);             // path length
  EXPECT_EQ(v[4], 0.0);             // dispersion
  EXPECT_EQ(v[5], 0.0);             // peak velocity
}

TEST(EventFeatures, GreatCircleSaccade) {
  auto f = still_frames(9);
  const Vec3 start = direction_from_angles(-3.0, 2.0);
  const Vec3 axis{0.6, 0.0, 0.8};  // unit, not aligned with the world axes
  const Vec3 k = [&] {
    const Vec3 c{axis[1] * start[2] - axis[2] * start[1], axis[2] * start[0] - axis[0] * start[2],
                 axis[0] * start[1] - axis[1] * start[0]};
    const double l = norm(c);
    return Vec3{c[0] / l, c[1] / l, c[2] / l};
  }();
  for (std::size_t i = 0; i < f.size(); ++i) f[i].dir = oracle::rotate(start, k, static_cast<double>(i));
  const auto v = event_features(event_over(EventKind::Saccade, f, 0, 8), f);
  ASSERT_EQ(v.size(), 44u);
  EXPECT_NEAR(v[3], 8.0, 1e-9);  // amplitude
  EXPECT_NEAR(v[2], 8.0, 1e-9);  // path length
  EXPECT_GE(v[2], v[3] - 1e-12);
}

TEST(EventFeatures, VelocityScalars) {
  auto f = still_frames(3);
  f[0].vel_abs = 10, f[1].vel_abs = 20, f[2].vel_abs = 10;
  const auto v = event_features(event_over(EventKind::Fixation, f, 0, 2), f);
  EXPECT_EQ(v[5], 20.0);
  EXPECT_NEAR(v[6], 40.0 / 3.0, 1e-12);
  EXPECT_NEAR(v[9], 40.0 / 3.0, 1e-12);  // M3S2DK mean of vel_abs
}

TEST(EventFeatures, SpanMismatch) {
  const auto f = still_frames(4);
  auto e = event_over(EventKind::Fixation, f, 0, 3);
  e.end_idx = 9;
  EXPECT_THROW(event_features(e, f), Error);
}

TEST(Fuse, NoEventsMeansZeroDiscreteColumns) {
  const auto f = still_frames(20);
  const auto full = make_schema(FeatureSet::Full98);
  for (const auto& fr : fuse(f, {}, full)) {
    ASSERT_EQ(fr.values.size(), 98u);
    for (std::size_t c = 9; c < 98; ++c) EXPECT_EQ(fr.values[c], 0.0);
  }
}

TEST(Fuse, PlacementAfterEventEnd) {
  const auto f = still_frames(60);
  const std::vector<GazeEvent> ev{event_over(EventKind::Fixation, f, 20, 40)};
  const auto full = make_schema(FeatureSet::Full98);
  const auto fused = fuse(f, ev, full);
  const auto expected = event_features(ev[0], f);
  for (std::size_t c = 0; c < 45; ++c) {
    EXPECT_EQ(fused[41].values[9 + c], expected[c]);
    EXPECT_EQ(fused[40].values[9 + c], 0.0);
    EXPECT_EQ(fused[42].values[9 + c], 0.0);
  }
  for (std::size_t c = 54; c < 98; ++c) EXPECT_EQ(fused[41].values[c], 0.0);

  const auto set2 = fuse(f, ev, make_schema(FeatureSet::Set2_ContinuousPlusBooleans11));
  ASSERT_EQ(set2[41].values.size(), 11u);
  EXPECT_EQ(set2[41].values[9], 1.0);
  EXPECT_EQ(set2[41].values[10], 0.0);
}

TEST(Fuse, EventAtFinalSampleDropped) {
  const auto f = still_frames(10);
  const std::vector<GazeEvent> ev{event_over(EventKind::Fixation, f, 2, 9)};
  for (const auto& fr : fuse(f, ev, make_schema(FeatureSet::Set2_ContinuousPlusBooleans11)))
    EXPECT_EQ(fr.values[9], 0.0);
}

TEST(Fuse, ProjectionCommutesAndBooleanCounts) {
  std::mt19937_64 rng(4);
  const auto frames = walk_frames(rng, 800);
  const auto events = detect_events(frames, {});
  ASSERT_FALSE(events.empty());
  const auto full = make_schema(FeatureSet::Full98);
  const auto fused = fuse(frames, events, full);

  std::vector<std::string> ranking(full.names.rbegin(), full.names.rend());
  for (FeatureSet set : {FeatureSet::Set1_Continuous9, FeatureSet::Set2_ContinuousPlusBooleans11,
                         FeatureSet::Set3_Top30, FeatureSet::Set4_EventOnly89, FeatureSet::Full98}) {
    const auto schema = make_schema(set, ranking);
    const auto projected = select_feature_set(fused, full, set, ranking);
    const auto direct = fuse(frames, events, schema);
    ASSERT_EQ(projected.size(), direct.size());
    for (std::size_t i = 0; i < direct.size(); ++i) ASSERT_EQ(projected[i].values, direct[i].values);
    // projecting again onto the same set is the identity
    const auto again = project(projected, schema, schema);
    for (std::size_t i = 0; i < direct.size(); ++i) ASSERT_EQ(again[i].values, projected[i].values);
  }

  std::size_t fix = 0, sac = 0;
  for (const auto& e : events)
    if (e.end_idx + 1 < frames.size()) (e.kind == EventKind::Fixation ? fix : sac)++;
  double fix_sum = 0, sac_sum = 0;
  for (const auto& fr : fused) {
    fix_sum += fr.values[features::full_index("fix_bool")];
    sac_sum += fr.values[features::full_index("sac_bool")];
    for (double x : fr.values) ASSERT_TRUE(std::isfinite(x));
  }
  EXPECT_EQ(fix_sum, static_cast<double>(fix));
  EXPECT_EQ(sac_sum, static_cast<double>(sac));
}

TEST(OnlineFuser, MatchesBatchFuse) {
  std::mt19937_64 rng(12);
  const auto frames = walk_frames(rng, 3000);
  const auto events = detect_events(frames, {});
  const auto& full = features::full_names();
  const std::vector<std::string> ranking(full.begin() + 20, full.begin() + 60);
  for (FeatureSet set : {FeatureSet::Full98, FeatureSet::Set2_ContinuousPlusBooleans11, FeatureSet::Set3_Top30}) {
    const auto schema = make_schema(set, ranking);
    const auto batch = fuse(frames, events, schema);
    OnlineFuser online(schema);
    std::vector<double> row(schema.count());
    std::size_t max_history = 0;
    for (std::size_t i = 0; i < frames.size(); ++i) {
      online.push(frames[i], row);
      ASSERT_EQ(row, batch[i].values) << to_string(set) << " frame " << i;
      max_history = std::max(max_history, online.history_size());
    }
    EXPECT_LT(max_history, 200u);
  }
}
