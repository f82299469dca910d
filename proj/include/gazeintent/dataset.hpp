#pragma once

// Gaze logs on disk, labeled sliding windows, temporal splits, per-user
// normalization, walk-forward blocks and class weights.

#include <gazeintent/error.hpp>
#include <gazeintent/features.hpp>
#include <gazeintent/signal.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace gazeintent {

enum class TaskTag { Division, Circle, Puzzle, Synthetic };
enum class LoadTag { MathLoad, MemoryLoad };

inline const char* to_string(TaskTag t) {
  switch (t) {
    case TaskTag::Division: return "division";
    case TaskTag::Circle: return "circle";
    case TaskTag::Puzzle: return "puzzle";
    case TaskTag::Synthetic: return "synthetic";
  }
  return "unknown";
}

inline TaskTag parse_task_tag(std::string_view s) {
  if (s == "division") return TaskTag::Division;
  if (s == "circle") return TaskTag::Circle;
  if (s == "puzzle") return TaskTag::Puzzle;
  if (s == "synthetic") return TaskTag::Synthetic;
  fail(ErrorCode::Parse, "unknown task tag '" + std::string(s) + "'");
}

inline const char* to_string(LoadTag t) { return t == LoadTag::MathLoad ? "math_load" : "memory_load"; }

inline LoadTag parse_load_tag(std::string_view s) {
  if (s == "math_load") return LoadTag::MathLoad;
  if (s == "memory_load") return LoadTag::MemoryLoad;
  fail(ErrorCode::Parse, "unknown load tag '" + std::string(s) + "'");
}

struct Session {
  std::string user_id = "user";
  TaskTag task_tag = TaskTag::Synthetic;
  std::set<LoadTag> load_tags;
  std::vector<GazeSample> samples;
  std::vector<double> triggers;  // ms, ascending
};

// ---------------------------------------------------------------------------
// Gaze log text format

inline constexpr std::string_view kGazeLogHeader = "t_ms,gx,gy,gz,trigger,object_id,segment";

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline double parse_double(std::string_view s, const std::string& where) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size() || s.empty())
    fail(ErrorCode::Parse, where + ": bad number '" + std::string(s) + "'");
  return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace detail

inline void write_gaze_log(const Session& session, std::ostream& os) {
  os << kGazeLogHeader << '\n';
  for (const auto& s : session.samples) {
    os << detail::format_double(s.t) << ',' << detail::format_double(s.dir[0]) << ','
       << detail::format_double(s.dir[1]) << ',' << detail::format_double(s.dir[2]) << ',' << (s.trigger ? 1 : 0)
       << ',' << s.object_id << ',' << (s.segment == Segment::Task ? "task" : "other") << '\n';
  }
}

inline void save_gaze_log(const Session& session, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorCode::Io, "cannot write gaze log " + path);
  write_gaze_log(session, os);
  os.flush();
  if (!os) fail(ErrorCode::Io, "failed writing gaze log " + path);
}

inline Session read_gaze_log(std::istream& is, const std::string& name = "<stream>") {
  Session session;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(is, line)) fail(ErrorCode::Parse, name + ": empty file");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kGazeLogHeader) fail(ErrorCode::Parse, name + ":1: unexpected header '" + line + "'");
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = name + ":" + std::to_string(line_no);
    const auto cols = detail::split(line, ',');
    if (cols.size() != 7) fail(ErrorCode::Parse, where + ": expected 7 columns, got " + std::to_string(cols.size()));
    GazeSample s;
    s.t = detail::parse_double(cols[0], where);
    s.dir = {detail::parse_double(cols[1], where), detail::parse_double(cols[2], where),
             detail::parse_double(cols[3], where)};
    if (cols[4] == "1")
      s.trigger = true;
    else if (cols[4] != "0")
      fail(ErrorCode::Parse, where + ": trigger must be 0 or 1");
    s.object_id = std::string(cols[5]);
    if (cols[6] == "task")
      s.segment = Segment::Task;
    else if (cols[6] == "other")
      s.segment = Segment::Other;
    else
      fail(ErrorCode::Parse, where + ": segment must be 'task' or 'other'");

    if (!std::isfinite(s.t) || s.t < 0.0) fail(ErrorCode::Validation, where + ": timestamp must be non-negative");
    const double n = norm(s.dir);
    if (!(std::abs(n - 1.0) <= 1e-6))
      fail(ErrorCode::Validation, where + ": gaze direction is not unit length (norm " + detail::format_double(n) + ")");
    if (!session.samples.empty() && !(s.t > session.samples.back().t))
      fail(ErrorCode::Validation, where + ": timestamps must be strictly increasing");
    if (s.trigger) session.triggers.push_back(s.t);
    session.samples.push_back(std::move(s));
  }
  return session;
}

inline Session load_gaze_log(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::Io, "cannot open gaze log " + path);
  return read_gaze_log(is, path);
}

// ---------------------------------------------------------------------------
// Dataset manifest: lists gaze-log files with their user and tags.

struct ManifestEntry {
  std::string path;  // relative to the manifest's directory unless absolute
  std::string user_id;
  TaskTag task_tag = TaskTag::Synthetic;
  std::set<LoadTag> load_tags;
};

inline constexpr std::string_view kManifestVersionLine = "# gazeintent-dataset 1";
inline constexpr std::string_view kManifestHeader = "path,user_id,task_tag,load_tags";

inline void save_manifest(std::span<const ManifestEntry> entries, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorCode::Io, "cannot write manifest " + path);
  os << kManifestVersionLine << '\n' << kManifestHeader << '\n';
  for (const auto& e : entries) {
    os << e.path << ',' << e.user_id << ',' << to_string(e.task_tag) << ',';
    bool first = true;
    for (LoadTag t : e.load_tags) {
      os << (first ? "" : "+") << to_string(t);
      first = false;
    }
    os << '\n';
  }
  if (!os) fail(ErrorCode::Io, "failed writing manifest " + path);
}

inline std::vector<ManifestEntry> load_manifest(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::Io, "cannot open manifest " + path);
  std::string line;
  if (!std::getline(is, line) || line != kManifestVersionLine)
    fail(ErrorCode::Version, path + ": not a version-1 dataset manifest");
  if (!std::getline(is, line) || line != kManifestHeader) fail(ErrorCode::Parse, path + ":2: bad header");
  std::vector<ManifestEntry> out;
  std::size_t line_no = 2;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cols = detail::split(line, ',');
    const std::string where = path + ":" + std::to_string(line_no);
    if (cols.size() != 4) fail(ErrorCode::Parse, where + ": expected 4 columns");
    ManifestEntry e;
    e.path = std::string(cols[0]);
    e.user_id = std::string(cols[1]);
    e.task_tag = parse_task_tag(cols[2]);
    if (!cols[3].empty())
      for (auto tag : detail::split(cols[3], '+')) e.load_tags.insert(parse_load_tag(tag));
    out.push_back(std::move(e));
  }
  return out;
}

inline std::vector<Session> load_dataset(const std::string& manifest_path) {
  const auto base = std::filesystem::path(manifest_path).parent_path();
  std::vector<Session> sessions;
  for (const auto& e : load_manifest(manifest_path)) {
    std::filesystem::path p(e.path);
    if (p.is_relative()) p = base / p;
    Session s = load_gaze_log(p.string());
    s.user_id = e.user_id;
    s.task_tag = e.task_tag;
    s.load_tags = e.load_tags;
    sessions.push_back(std::move(s));
  }
  return sessions;
}

// Contiguous runs of samples in the task segment.
inline std::vector<std::span<const GazeSample>> task_segments(const Session& session) {
  std::vector<std::span<const GazeSample>> out;
  const auto& s = session.samples;
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i].segment != Segment::Task) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && s[j].segment == Segment::Task) ++j;
    out.emplace_back(s.data() + i, j - i);
    i = j;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Windows

struct WindowConfig {
  std::size_t window_size = 17;
  std::size_t overlap = 2;
  double label_interval = 1.0;  // s

  std::size_t stride() const { return window_size - overlap; }

  void validate() const {
    if (window_size == 0) fail(ErrorCode::Config, "window_size must be positive");
    if (overlap >= window_size) fail(ErrorCode::Config, "overlap must be < window_size");
    if (!(label_interval > 0.0)) fail(ErrorCode::Config, "label_interval must be positive");
  }
};

// rows x cols, row-major; one row per frame.
struct Window {
  std::size_t start = 0;
  double end_t = 0.0;
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;

  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
};

struct LabeledWindow : Window {
  int label = 0;
  std::string user_id;
  std::size_t session = 0;  // chronological ordinal of the session within its user
  TaskTag task_tag = TaskTag::Synthetic;
  std::set<LoadTag> load_tags;
};

// Temporal ordering key within one user.
inline bool time_before(const LabeledWindow& a, const LabeledWindow& b) {
  return a.session != b.session ? a.session < b.session : a.end_t < b.end_t;
}

inline std::size_t window_count(std::size_t n, const WindowConfig& config) {
  return n < config.window_size ? 0 : (n - config.window_size) / config.stride() + 1;
}

inline std::vector<Window> make_windows(std::span<const FeatureFrame> frames, const WindowConfig& config) {
  config.validate();
  if (frames.size() < config.window_size)
    fail(ErrorCode::InsufficientData, std::to_string(frames.size()) + " frames cannot fill a window of " +
                                          std::to_string(config.window_size));
  const std::size_t cols = frames.front().values.size();
  std::vector<Window> out;
  out.reserve(window_count(frames.size(), config));
  for (std::size_t start = 0; start + config.window_size <= frames.size(); start += config.stride()) {
    Window w;
    w.start = start;
    w.rows = config.window_size;
    w.cols = cols;
    w.end_t = frames[start + config.window_size - 1].t;
    w.data.reserve(w.rows * cols);
    for (std::size_t r = 0; r < w.rows; ++r) {
      const auto& v = frames[start + r].values;
      if (v.size() != cols) fail(ErrorCode::Shape, "feature frames differ in width");
      w.data.insert(w.data.end(), v.begin(), v.end());
    }
    out.push_back(std::move(w));
  }
  return out;
}

// Positive iff some trigger follows the window end by at most the interval.
inline int label_for(double end_t, std::span<const double> triggers, double label_interval) {
  const auto it = std::lower_bound(triggers.begin(), triggers.end(), end_t);
  return it != triggers.end() && *it - end_t <= label_interval * 1000.0 ? 1 : 0;
}

inline std::vector<LabeledWindow> label_windows(std::vector<Window> windows, std::span<const double> triggers,
                                                double label_interval) {
  std::vector<LabeledWindow> out;
  out.reserve(windows.size());
  for (auto& w : windows) {
    LabeledWindow lw;
    static_cast<Window&>(lw) = std::move(w);
    lw.label = label_for(lw.end_t, triggers, label_interval);
    out.push_back(std::move(lw));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Splits

struct SplitSpec {
  double train_frac = 0.70;
  double val_frac = 0.15;
  double test_frac = 0.15;

  void validate() const {
    if (train_frac <= 0 || val_frac <= 0 || test_frac <= 0 || std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
      fail(ErrorCode::Config, "split fractions must be positive and sum to one");
  }
};

struct Splits {
  std::vector<LabeledWindow> train, val, test;
};

namespace detail {

inline std::map<std::string, std::vector<LabeledWindow>> by_user(std::vector<LabeledWindow> windows) {
  std::map<std::string, std::vector<LabeledWindow>> users;
  for (auto& w : windows) users[w.user_id].push_back(std::move(w));
  for (auto& [_, ws] : users) std::stable_sort(ws.begin(), ws.end(), time_before);
  return users;
}

}  // namespace detail

inline Splits temporal_split(std::vector<LabeledWindow> windows, const SplitSpec& spec = {}) {
  spec.validate();
  Splits out;
  for (auto& [user, ws] : detail::by_user(std::move(windows))) {
    const std::size_t n = ws.size();
    if (n < 10)
      fail(ErrorCode::InsufficientData, "user " + user + " has " + std::to_string(n) + " windows; need at least 10");
    const auto n_train = static_cast<std::size_t>(std::lround(spec.train_frac * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(std::lround(spec.val_frac * static_cast<double>(n)));
    for (std::size_t i = 0; i < n; ++i) {
      auto& dst = i < n_train ? out.train : (i < n_train + n_val ? out.val : out.test);
      dst.push_back(std::move(ws[i]));
    }
  }
  return out;
}

// Five chronological blocks per user (earliest blocks take the remainder),
// merged across users block by block.
inline std::array<std::vector<LabeledWindow>, 5> walk_forward_blocks(std::vector<LabeledWindow> train) {
  std::array<std::vector<LabeledWindow>, 5> blocks;
  for (auto& [user, ws] : detail::by_user(std::move(train))) {
    const std::size_t n = ws.size();
    if (n < 5) fail(ErrorCode::InsufficientData, "user " + user + " has fewer than 5 training windows");
    std::size_t pos = 0;
    for (std::size_t b = 0; b < 5; ++b) {
      const std::size_t len = n / 5 + (b < n % 5 ? 1 : 0);
      for (std::size_t k = 0; k < len; ++k) blocks[b].push_back(std::move(ws[pos + k]));
      pos += len;
    }
  }
  return blocks;
}

// ---------------------------------------------------------------------------
// Normalization

struct NormStats {
  std::string user_id;  // provenance; "*" for pooled statistics
  std::string split;
  std::vector<double> mean;
  std::vector<double> scale;  // 1 where the column is constant

  bool empty() const { return mean.empty(); }

  void apply(Window& w) const {
    if (w.cols != mean.size()) fail(ErrorCode::Shape, "normalization width does not match window");
    for (std::size_t r = 0; r < w.rows; ++r)
      for (std::size_t c = 0; c < w.cols; ++c) w.at(r, c) = (w.at(r, c) - mean[c]) / scale[c];
  }

  void apply(std::span<double> row) const {
    for (std::size_t c = 0; c < row.size(); ++c) row[c] = (row[c] - mean[c]) / scale[c];
  }
};

namespace detail {

inline NormStats stats_over(std::span<const Window* const> windows, std::string user_id, std::string split) {
  NormStats s;
  s.user_id = std::move(user_id);
  s.split = std::move(split);
  if (windows.empty()) return s;
  const std::size_t cols = windows.front()->cols;
  std::vector<double> sum(cols, 0.0), sq(cols, 0.0);
  double count = 0.0;
  for (const Window* w : windows) {
    if (w->cols != cols) fail(ErrorCode::Shape, "windows differ in width");
    for (std::size_t r = 0; r < w->rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) sum[c] += w->at(r, c);
    count += static_cast<double>(w->rows);
  }
  s.mean.resize(cols);
  for (std::size_t c = 0; c < cols; ++c) s.mean[c] = sum[c] / count;
  for (const Window* w : windows)
    for (std::size_t r = 0; r < w->rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) {
        const double d = w->at(r, c) - s.mean[c];
        sq[c] += d * d;
      }
  s.scale.resize(cols);
  for (std::size_t c = 0; c < cols; ++c) {
    const double sd = std::sqrt(sq[c] / count);
    s.scale[c] = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

}  // namespace detail

template <typename W>
NormStats compute_stats(std::span<const W> windows, std::string user_id = "*", std::string split = "") {
  std::vector<const Window*> ptrs;
  ptrs.reserve(windows.size());
  for (const auto& w : windows) ptrs.push_back(&w);
  return detail::stats_over(ptrs, std::move(user_id), std::move(split));
}

// Z-scores each user's windows with statistics of that user's windows only.
inline std::map<std::string, NormStats> normalize(std::vector<LabeledWindow>& windows, const std::string& split = "") {
  std::map<std::string, std::vector<Window*>> members;
  for (auto& w : windows) members[w.user_id].push_back(&w);
  std::map<std::string, NormStats> stats;
  for (const auto& [user, ws] : members) {
    const std::vector<const Window*> view(ws.begin(), ws.end());
    NormStats s = detail::stats_over(view, user, split);
    for (Window* w : ws) s.apply(*w);
    stats.emplace(user, std::move(s));
  }
  return stats;
}

struct SplitStats {
  std::map<std::string, NormStats> train, val, test;
};

inline SplitStats normalize(Splits& splits) {
  return {normalize(splits.train, "train"), normalize(splits.val, "val"), normalize(splits.test, "test")};
}

// ---------------------------------------------------------------------------

struct ClassWeights {
  double neg = 1.0;
  double pos = 1.0;

  double operator()(int label) const { return label ? pos : neg; }
};

inline ClassWeights class_weights(std::span<const int> labels) {
  std::size_t pos = 0;
  for (int l : labels) pos += l ? 1 : 0;
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) fail(ErrorCode::MissingClass, pos == 0 ? "no positive windows" : "no negative windows");
  const auto n = static_cast<double>(labels.size());
  return {n / (2.0 * static_cast<double>(neg)), n / (2.0 * static_cast<double>(pos))};
}

inline std::vector<int> labels_of(std::span<const LabeledWindow> windows) {
  std::vector<int> out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back(w.label);
  return out;
}

using LoadPredicate = std::function<bool(const std::set<LoadTag>&)>;

inline LoadPredicate has_load(LoadTag tag) {
  return [tag](const std::set<LoadTag>& tags) { return tags.count(tag) > 0; };
}

inline LoadPredicate lacks_load(LoadTag tag) {
  return [tag](const std::set<LoadTag>& tags) { return tags.count(tag) == 0; };
}

inline std::vector<LabeledWindow> filter_by_load(std::span<const LabeledWindow> windows, const LoadPredicate& pred) {
  std::vector<LabeledWindow> out;
  for (const auto& w : windows)
    if (pred(w.load_tags)) out.push_back(w);
  return out;
}

}  // namespace gazeintent
