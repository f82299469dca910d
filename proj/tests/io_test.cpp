#include <gazeintent/config_io.hpp>
#include <gazeintent/dataset.hpp>
#include <gazeintent/features.hpp>
#include <gazeintent/windows_io.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace gi = gazeintent;
namespace fs = std::filesystem;

namespace {

gi::WindowSet random_set(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 3.0);
  gi::WindowSet set;
  set.schema = gi::make_schema(gi::FeatureSet::Set2_ContinuousPlusBooleans11);
  set.rows = 5;
  set.window = {5, 1, 0.75};
  set.signal.sg_window = 9;
  set.signal.sg_order = 2;
  for (std::size_t i = 0; i < n; ++i) {
    gi::LabeledWindow w;
    w.rows = set.rows;
    w.cols = set.schema.count();
    for (std::size_t k = 0; k < w.rows * w.cols; ++k) w.data.push_back(nd(rng) * 1e-3 + nd(rng));
    w.start = i * 4;
    w.end_t = 1234.5 + static_cast<double>(i) * 60.6;
    w.label = static_cast<int>(i % 3 == 0);
    w.user_id = "u" + std::to_string(i % 2);
    w.session = i % 4;
    w.task_tag = i % 2 ? gi::TaskTag::Circle : gi::TaskTag::Puzzle;
    if (i % 3 == 1) w.load_tags = {gi::LoadTag::MathLoad, gi::LoadTag::MemoryLoad};
    set.windows.push_back(std::move(w));
  }
  return set;
}

TEST(WindowsFile, RoundTripIsLossless) {
  const auto set = random_set(30, 3);
  std::stringstream ss;
  gi::write_windows(set, ss);
  const auto back = gi::read_windows(ss);
  EXPECT_EQ(back.schema.hash(), set.schema.hash());
  EXPECT_EQ(back.rows, set.rows);
  EXPECT_EQ(back.window.overlap, 1u);
  EXPECT_EQ(back.window.label_interval, 0.75);
  EXPECT_EQ(back.signal.sg_window, 9);
  EXPECT_EQ(back.signal.sg_order, 2);
  ASSERT_EQ(back.windows.size(), set.windows.size());
  for (std::size_t i = 0; i < set.windows.size(); ++i) {
    const auto &a = set.windows[i], &b = back.windows[i];
    EXPECT_EQ(a.data, b.data) << i;  // bit-exact
    EXPECT_EQ(a.end_t, b.end_t);
    EXPECT_EQ(a.start, b.start);
    EXPECT_EQ(a.label, b.label);
    EXPECT_EQ(a.user_id, b.user_id);
    EXPECT_EQ(a.session, b.session);
    EXPECT_EQ(a.task_tag, b.task_tag);
    EXPECT_EQ(a.load_tags, b.load_tags);
  }
}

TEST(WindowsFile, RejectsTamperedSchemaAndBadRows) {
  const auto set = random_set(4, 1);
  std::stringstream ss;
  gi::write_windows(set, ss);
  std::string text = ss.str();

  auto tampered = text;
  const auto pos = tampered.find("disp_h");
  ASSERT_NE(pos, std::string::npos);
  tampered.replace(pos, 6, "disp_v");
  tampered.replace(tampered.find("disp_v", pos + 6), 6, "disp_h");  // swapped order, same names
  std::istringstream t1(tampered);
  try {
    gi::read_windows(t1);
    FAIL() << "expected a schema mismatch";
  } catch (const gi::Error& e) {
    EXPECT_EQ(e.code(), gi::ErrorCode::SchemaMismatch);
  }

  std::istringstream t2(text.substr(0, text.rfind(',')) + "\n");  // last row loses a field
  EXPECT_THROW(gi::read_windows(t2), gi::Error);
  std::istringstream t3("# gazeintent-windows 2\n");
  EXPECT_THROW(gi::read_windows(t3), gi::Error);
}

TEST(EngineConfigFile, RoundTripAndModelPath) {
  const auto dir = fs::path(::testing::TempDir()) / "gazeintent_io_engine";
  fs::create_directories(dir);
  gi::EngineFile f;
  f.engine.method = gi::Method::GazeIntentGeneral;
  f.engine.task = gi::Task::Puzzle;
  f.engine.static_dwell = 0.45;
  f.engine.thresholds = {0.1, 0.2, 0.3, 0.4};
  f.engine.binarize_thresh = 0.6;
  f.engine.cap_factor = 3.0;
  f.model_path = "models/general.gzm";
  gi::save_engine_file(f, (dir / "engine.json").string());

  const auto back = gi::load_engine_file((dir / "engine.json").string());
  EXPECT_EQ(back.engine.method, gi::Method::GazeIntentGeneral);
  EXPECT_EQ(back.engine.task, gi::Task::Puzzle);
  EXPECT_EQ(back.engine.dwell(), 0.45);
  EXPECT_EQ(back.engine.thresholds.t_n2, 0.3);
  EXPECT_EQ(back.engine.binarize_thresh, 0.6);
  EXPECT_EQ(back.engine.cap_factor, 3.0);
  ASSERT_TRUE(back.model_path);
  EXPECT_EQ(fs::path(*back.model_path), dir / "models/general.gzm");
}

gi::ErrorCode code_of(const std::string& text) {
  try {
    gi::engine_file_from_json(nlohmann::json::parse(text));
  } catch (const gi::Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "accepted: " << text;
  return gi::ErrorCode::InvalidInput;
}

TEST(EngineConfigFile, Rejections) {
  EXPECT_EQ(code_of(R"({"method":"static"})"), gi::ErrorCode::Config);
  EXPECT_EQ(code_of(R"({"version":2})"), gi::ErrorCode::Version);
  EXPECT_EQ(code_of(R"({"version":1,"methd":"static"})"), gi::ErrorCode::Config);
  EXPECT_EQ(code_of(R"({"version":1,"thresholds":[0.1,0.2]})"), gi::ErrorCode::Config);
  EXPECT_EQ(code_of(R"({"version":1,"static_dwell":-1})"), gi::ErrorCode::Config);
  EXPECT_EQ(code_of(R"({"version":1,"task":7})"), gi::ErrorCode::Config);
  EXPECT_EQ(code_of(R"([1,2])"), gi::ErrorCode::Config);

  const auto minimal = gi::engine_file_from_json(nlohmann::json::parse(R"({"version":1})"));
  EXPECT_EQ(minimal.engine.method, gi::Method::Static);
  EXPECT_FALSE(minimal.model_path);
}

}  // namespace
