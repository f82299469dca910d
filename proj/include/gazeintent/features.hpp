#pragma once

// Per-sample feature frames: nine continuous kinematics plus fixation and
// saccade descriptors written at the sample after each event ends.

#include <gazeintent/error.hpp>
#include <gazeintent/events.hpp>
#include <gazeintent/signal.hpp>
#include <gazeintent/stats.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

namespace gazeintent {

enum class FeatureSet { Full98, Set1_Continuous9, Set2_ContinuousPlusBooleans11, Set3_Top30, Set4_EventOnly89 };

inline const char* to_string(FeatureSet s) {
  switch (s) {
    case FeatureSet::Full98: return "full98";
    case FeatureSet::Set1_Continuous9: return "set1";
    case FeatureSet::Set2_ContinuousPlusBooleans11: return "set2";
    case FeatureSet::Set3_Top30: return "set3";
    case FeatureSet::Set4_EventOnly89: return "set4";
  }
  return "unknown";
}

inline FeatureSet parse_feature_set(const std::string& s) {
  if (s == "full98" || s == "full") return FeatureSet::Full98;
  if (s == "set1") return FeatureSet::Set1_Continuous9;
  if (s == "set2") return FeatureSet::Set2_ContinuousPlusBooleans11;
  if (s == "set3") return FeatureSet::Set3_Top30;
  if (s == "set4") return FeatureSet::Set4_EventOnly89;
  fail(ErrorCode::InvalidInput, "unknown feature set '" + s + "'");
}

namespace features {

inline constexpr std::size_t kContinuousCount = 9;
inline constexpr std::size_t kFixationCount = 45;
inline constexpr std::size_t kSaccadeCount = 44;
inline constexpr std::size_t kFullCount = kContinuousCount + kFixationCount + kSaccadeCount;
inline constexpr std::size_t kFixationOffset = kContinuousCount;
inline constexpr std::size_t kSaccadeOffset = kContinuousCount + kFixationCount;
inline constexpr std::size_t kTop30 = 30;

inline const std::array<const char*, kContinuousCount> kContinuousNames = {
    "disp_abs", "disp_h", "disp_v", "vel_abs", "vel_h", "vel_v", "acc_abs", "acc_h", "acc_v"};

inline const std::array<const char*, 6> kStatSignals = {"vel_abs", "vel_h", "vel_v", "acc_abs", "acc_h", "acc_v"};
inline const std::array<const char*, 6> kStatNames = {"mean", "median", "mode", "std", "skew", "kurt"};

// Per-event scalars ahead of the 36 statistics; saccades omit dispersion.
inline std::vector<std::string> event_scalar_names(EventKind kind) {
  std::vector<std::string> s = {"bool", "duration", "path_length", "amplitude"};
  if (kind == EventKind::Fixation) s.push_back("dispersion");
  for (const char* x : {"vel_peak", "vel_mean", "acc_peak", "acc_mean"}) s.emplace_back(x);
  return s;
}

inline std::vector<std::string> event_names(EventKind kind) {
  const std::string prefix = kind == EventKind::Fixation ? "fix_" : "sac_";
  std::vector<std::string> names;
  for (const auto& s : event_scalar_names(kind)) names.push_back(prefix + s);
  for (const char* sig : kStatSignals)
    for (const char* st : kStatNames) names.push_back(prefix + sig + "_" + st);
  return names;
}

inline const std::vector<std::string>& full_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n(kContinuousNames.begin(), kContinuousNames.end());
    for (auto& x : event_names(EventKind::Fixation)) n.push_back(x);
    for (auto& x : event_names(EventKind::Saccade)) n.push_back(x);
    return n;
  }();
  return names;
}

inline std::size_t full_index(const std::string& name) {
  static const std::unordered_map<std::string, std::size_t> index = [] {
    std::unordered_map<std::string, std::size_t> m;
    const auto& n = full_names();
    for (std::size_t i = 0; i < n.size(); ++i) m.emplace(n[i], i);
    return m;
  }();
  const auto it = index.find(name);
  if (it == index.end()) fail(ErrorCode::InvalidInput, "unknown feature name '" + name + "'");
  return it->second;
}

}  // namespace features

struct FeatureSchema {
  FeatureSet set_id = FeatureSet::Full98;
  std::vector<std::string> names;
  std::vector<std::size_t> source;  // column in the full 98-feature layout

  std::size_t count() const { return names.size(); }

  // Canonical textual manifest; the hash of this text identifies the schema.
  std::string manifest() const {
    std::ostringstream os;
    os << "gazeintent-schema 1\n" << "set " << to_string(set_id) << "\n" << "count " << names.size() << "\n";
    for (const auto& n : names) os << n << "\n";
    return os.str();
  }

  std::uint64_t hash() const {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (unsigned char c : manifest()) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    return h;
  }

  bool operator==(const FeatureSchema& o) const { return set_id == o.set_id && names == o.names; }
};

inline FeatureSchema schema_from_names(FeatureSet set_id, std::vector<std::string> names) {
  FeatureSchema s;
  s.set_id = set_id;
  for (const auto& n : names) {
    const std::size_t idx = features::full_index(n);
    for (std::size_t prev : s.source)
      if (prev == idx) fail(ErrorCode::InvalidInput, "duplicate feature name '" + n + "'");
    s.source.push_back(idx);
  }
  s.names = std::move(names);
  return s;
}

// Set3 requires the 30 top-ranked names.
inline FeatureSchema make_schema(FeatureSet set_id, std::span<const std::string> ranking = {}) {
  using namespace features;
  const auto& full = full_names();
  std::vector<std::string> names;
  switch (set_id) {
    case FeatureSet::Full98:
      names = full;
      break;
    case FeatureSet::Set1_Continuous9:
      names.assign(full.begin(), full.begin() + kContinuousCount);
      break;
    case FeatureSet::Set2_ContinuousPlusBooleans11:
      names.assign(full.begin(), full.begin() + kContinuousCount);
      names.push_back("fix_bool");
      names.push_back("sac_bool");
      break;
    case FeatureSet::Set3_Top30:
      if (ranking.empty()) fail(ErrorCode::MissingRanking, "Set3 needs a ranked feature list");
      if (ranking.size() < kTop30)
        fail(ErrorCode::MissingRanking, "Set3 needs 30 ranked names, got " + std::to_string(ranking.size()));
      names.assign(ranking.begin(), ranking.begin() + kTop30);
      break;
    case FeatureSet::Set4_EventOnly89:
      names.assign(full.begin() + kContinuousCount, full.end());
      break;
  }
  return schema_from_names(set_id, std::move(names));
}

inline void save_schema(const FeatureSchema& schema, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorCode::Io, "cannot write schema manifest " + path);
  os << schema.manifest();
  if (!os) fail(ErrorCode::Io, "failed writing " + path);
}

inline FeatureSchema read_schema(std::istream& is, const std::string& name = "<schema>") {
  std::string line;
  if (!std::getline(is, line) || line != "gazeintent-schema 1")
    fail(ErrorCode::Version, name + ": not a version-1 schema manifest");
  std::string set_line, count_line;
  if (!std::getline(is, set_line) || set_line.rfind("set ", 0) != 0) fail(ErrorCode::Parse, name + ": missing set line");
  if (!std::getline(is, count_line) || count_line.rfind("count ", 0) != 0)
    fail(ErrorCode::Parse, name + ": missing count line");
  const FeatureSet set_id = parse_feature_set(set_line.substr(4));
  std::size_t count = 0;
  try {
    count = std::stoul(count_line.substr(6));
  } catch (const std::exception&) {
    fail(ErrorCode::Parse, name + ": bad count");
  }
  std::vector<std::string> names;
  while (std::getline(is, line))
    if (!line.empty()) names.push_back(line);
  if (names.size() != count) fail(ErrorCode::Parse, name + ": count does not match names");
  return schema_from_names(set_id, std::move(names));
}

inline FeatureSchema load_schema(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::Io, "cannot read schema manifest " + path);
  return read_schema(is, path);
}

struct FeatureFrame {
  double t = 0.0;
  std::vector<double> values;
};

namespace detail {

inline void append_stats(std::vector<double>& out, std::span<const double> xs) {
  const M3S2DK s = stats_m3s2dk(xs);
  out.insert(out.end(), {s.mean, s.median, s.mode, s.std_dev, s.skewness, s.kurtosis});
}

}  // namespace detail

// 45 values for a fixation, 44 for a saccade, in event_names() order.
// frames[0] is the frame with absolute index `base`.
inline std::vector<double> event_features(const GazeEvent& event, std::span<const KinematicsFrame> frames,
                                          std::size_t base = 0) {
  if (event.end_idx < event.start_idx || event.start_idx < base || event.end_idx - base >= frames.size())
    fail(ErrorCode::InvalidInput, "event span lies outside the frame sequence");
  const std::size_t first = event.start_idx - base, last = event.end_idx - base;
  if (frames[first].t != event.start_t || frames[last].t != event.end_t)
    fail(ErrorCode::InvalidInput, "event timestamps do not match the frames");
  const auto span = frames.subspan(first, last - first + 1);

  double path = 0.0;
  for (std::size_t i = 1; i < span.size(); ++i) path += angular_displacement(span[i - 1].dir, span[i].dir);
  const double amplitude = angular_displacement(span.front().dir, span.back().dir);

  std::vector<double> out;
  out.reserve(event.kind == EventKind::Fixation ? features::kFixationCount : features::kSaccadeCount);
  out.push_back(1.0);
  out.push_back(event.duration / 1000.0);
  out.push_back(path);
  out.push_back(amplitude);
  if (event.kind == EventKind::Fixation) {
    double dispersion = 0.0;
    for (std::size_t i = 0; i < span.size(); ++i)
      for (std::size_t j = i + 1; j < span.size(); ++j)
        dispersion = std::max(dispersion, angular_displacement(span[i].dir, span[j].dir));
    out.push_back(dispersion);
  }

  std::array<std::vector<double>, 6> sig;
  for (auto& s : sig) s.reserve(span.size());
  for (const auto& f : span) {
    sig[0].push_back(f.vel_abs), sig[1].push_back(f.vel_h), sig[2].push_back(f.vel_v);
    sig[3].push_back(f.acc_abs), sig[4].push_back(f.acc_h), sig[5].push_back(f.acc_v);
  }
  double vel_peak = 0.0, vel_sum = 0.0, acc_peak = 0.0, acc_sum = 0.0;
  for (const auto& f : span) {
    vel_peak = std::max(vel_peak, f.vel_abs);
    vel_sum += f.vel_abs;
    acc_peak = std::max(acc_peak, std::abs(f.acc_abs));
    acc_sum += std::abs(f.acc_abs);
  }
  const auto n = static_cast<double>(span.size());
  out.insert(out.end(), {vel_peak, vel_sum / n, acc_peak, acc_sum / n});
  for (const auto& s : sig) detail::append_stats(out, s);
  return out;
}

namespace detail {

inline void continuous_values(const KinematicsFrame& f, std::array<double, features::kContinuousCount>& c) {
  c = {f.disp_abs, f.disp_h, f.disp_v, f.vel_abs, f.vel_h, f.vel_v, f.acc_abs, f.acc_h, f.acc_v};
}

}  // namespace detail

namespace detail {

struct DetailNeeds {
  bool fixation = false, saccade = false;
};

inline DetailNeeds detail_needs(const FeatureSchema& schema) {
  if (schema.source.size() != schema.names.size() || schema.names.empty())
    fail(ErrorCode::InvalidInput, "malformed feature schema");
  DetailNeeds n;
  for (std::size_t src : schema.source) {
    n.fixation |= src > features::kFixationOffset && src < features::kSaccadeOffset;
    n.saccade |= src > features::kSaccadeOffset;
  }
  return n;
}

// Event vector, computed in full only when the schema reads past the boolean.
inline std::vector<double> placed_values(const GazeEvent& ev, std::span<const KinematicsFrame> frames, std::size_t base,
                                         const DetailNeeds& needs) {
  const bool fix = ev.kind == EventKind::Fixation;
  if (fix ? needs.fixation : needs.saccade) return event_features(ev, frames, base);
  std::vector<double> v(fix ? features::kFixationCount : features::kSaccadeCount, 0.0);
  v[0] = 1.0;
  return v;
}

inline void fill_row(const KinematicsFrame& frame, const GazeEvent* ev, std::span<const double> ev_values,
                     const FeatureSchema& schema, std::span<double> row) {
  using namespace features;
  std::array<double, kContinuousCount> cont{};
  continuous_values(frame, cont);
  for (std::size_t c = 0; c < schema.count(); ++c) {
    const std::size_t src = schema.source[c];
    if (src < kContinuousCount) {
      row[c] = cont[src];
    } else if (ev) {
      const bool in_fix = src < kSaccadeOffset;
      row[c] = in_fix == (ev->kind == EventKind::Fixation) ? ev_values[src - (in_fix ? kFixationOffset : kSaccadeOffset)]
                                                          : 0.0;
    } else {
      row[c] = 0.0;
    }
  }
}

}  // namespace detail

// Writes only the schema's columns. Each event's vector lands on the frame
// after its last sample; an event ending on the final frame is dropped.
inline std::vector<FeatureFrame> fuse(std::span<const KinematicsFrame> frames, std::span<const GazeEvent> events,
                                      const FeatureSchema& schema) {
  const auto needs = detail::detail_needs(schema);

  // frame index -> event whose vector is placed there
  std::unordered_map<std::size_t, std::size_t> placed;
  for (std::size_t e = 0; e < events.size(); ++e)
    if (events[e].end_idx + 1 < frames.size()) placed.emplace(events[e].end_idx + 1, e);

  std::vector<FeatureFrame> out(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    out[i].t = frames[i].t;
    out[i].values.resize(schema.count());
    const GazeEvent* ev = nullptr;
    std::vector<double> ev_values;
    if (auto it = placed.find(i); it != placed.end()) {
      ev = &events[it->second];
      ev_values = detail::placed_values(*ev, frames, 0, needs);
    }
    detail::fill_row(frames[i], ev, ev_values, schema, out[i].values);
  }
  return out;
}

// Streaming counterpart of detect_events + fuse: one feature row per frame,
// identical to the batch rows. Keeps only the frames of the open run.
class OnlineFuser {
 public:
  OnlineFuser(FeatureSchema schema, IvtConfig ivt = {})
      : schema_(std::move(schema)), needs_(detail::detail_needs(schema_)), detector_(ivt) {}

  void push(const KinematicsFrame& frame, std::span<double> row) {
    if (row.size() != schema_.count()) fail(ErrorCode::Shape, "feature row width does not match the schema");
    const std::size_t idx = detector_.frames_seen();
    const auto ev = detector_.push(frame);
    const SampleClass cls = classify_sample(frame.vel_abs, detector_.config());
    if (idx == 0 || cls != run_class_) {
      run_class_ = cls;
      run_start_ = idx;
    }
    std::vector<double> ev_values;
    if (ev) ev_values = detail::placed_values(*ev, history_, history_base_, needs_);
    // drop frames that precede the run the new frame belongs to
    if (history_base_ < run_start_) {
      const std::size_t drop = std::min(run_start_ - history_base_, history_.size());
      history_.erase(history_.begin(), history_.begin() + static_cast<std::ptrdiff_t>(drop));
      history_base_ = history_.empty() ? idx : history_base_ + drop;
    }
    history_.push_back(frame);
    detail::fill_row(frame, ev ? &*ev : nullptr, ev_values, schema_, row);
  }

  void reset() {
    detector_ = OnlineDetector(detector_.config());
    history_.clear();
    history_base_ = 0;
    run_start_ = 0;
  }

  const FeatureSchema& schema() const { return schema_; }
  std::size_t history_size() const { return history_.size(); }

 private:
  FeatureSchema schema_;
  detail::DetailNeeds needs_;
  OnlineDetector detector_;
  SampleClass run_class_ = SampleClass::Neither;
  std::size_t run_start_ = 0;
  std::vector<KinematicsFrame> history_;
  std::size_t history_base_ = 0;
};

// Column projection between schemas; every target name must exist in `from`.
inline std::vector<FeatureFrame> project(std::span<const FeatureFrame> frames, const FeatureSchema& from,
                                         const FeatureSchema& to) {
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < from.names.size(); ++i) pos.emplace(from.names[i], i);
  std::vector<std::size_t> cols;
  for (const auto& n : to.names) {
    auto it = pos.find(n);
    if (it == pos.end()) fail(ErrorCode::InvalidInput, "feature '" + n + "' is not present in the source schema");
    cols.push_back(it->second);
  }
  std::vector<FeatureFrame> out(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].values.size() != from.count()) fail(ErrorCode::Shape, "frame width does not match its schema");
    out[i].t = frames[i].t;
    out[i].values.resize(cols.size());
    for (std::size_t c = 0; c < cols.size(); ++c) out[i].values[c] = frames[i].values[cols[c]];
  }
  return out;
}

inline std::vector<FeatureFrame> select_feature_set(std::span<const FeatureFrame> frames, const FeatureSchema& from,
                                                    FeatureSet set_id, std::span<const std::string> ranking = {}) {
  return project(frames, from, make_schema(set_id, ranking));
}

}  // namespace gazeintent
