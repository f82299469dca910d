#pragma once

// Gaze-in-world kinematics: angular displacement, velocity, Savitzky-Golay
// smoothing, outlier repair and acceleration, in batch and streaming form.

#include <gazeintent/error.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <deque>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gazeintent {

using Vec3 = std::array<double, 3>;

inline constexpr double kRadToDeg = 180.0 / std::numbers::pi;
inline constexpr double kDegToRad = std::numbers::pi / 180.0;

inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

// Unit direction from azimuth (about +y, measured from +z toward +x) and
// elevation (toward +y), both in degrees.
inline Vec3 direction_from_angles(double azimuth_deg, double elevation_deg) {
  const double az = azimuth_deg * kDegToRad;
  const double el = elevation_deg * kDegToRad;
  return {std::cos(el) * std::sin(az), std::sin(el), std::cos(el) * std::cos(az)};
}

enum class Segment { Task, Other };

struct GazeSample {
  double t = 0.0;  // ms since session start
  Vec3 dir{0.0, 0.0, 1.0};
  bool trigger = false;
  std::string object_id;  // empty: no object under gaze
  Segment segment = Segment::Task;
};

struct KinematicsFrame {
  double t = 0.0;
  Vec3 dir{0.0, 0.0, 1.0};
  double disp_abs = 0.0, disp_h = 0.0, disp_v = 0.0;  // deg
  double vel_abs = 0.0, vel_h = 0.0, vel_v = 0.0;     // deg/s
  double acc_abs = 0.0, acc_h = 0.0, acc_v = 0.0;     // deg/s^2

  bool operator==(const KinematicsFrame&) const = default;
};

struct SignalConfig {
  int sg_window = 11;
  int sg_order = 1;
  double outlier_thresh = 800.0;  // deg/s
  double nominal_rate = 66.0;     // Hz

  void validate() const {
    if (sg_window < 1 || sg_window % 2 == 0) fail(ErrorCode::Config, "sg_window must be odd and positive");
    if (sg_order < 0 || sg_order >= sg_window) fail(ErrorCode::Config, "sg_order must be < sg_window");
    if (!(outlier_thresh > 0.0)) fail(ErrorCode::Config, "outlier_thresh must be positive");
    if (!(nominal_rate > 0.0)) fail(ErrorCode::Config, "nominal_rate must be positive");
  }
};

namespace detail {

inline void require_unit(const Vec3& v, const char* which) {
  const double n = norm(v);
  if (!std::isfinite(n) || std::abs(n - 1.0) > 1e-3)
    fail(ErrorCode::InvalidInput, std::string(which) + " is not a unit vector (norm " + std::to_string(n) + ")");
}

inline double wrap_degrees(double d) {
  // into (-180, 180]
  d = std::fmod(d, 360.0);
  if (d <= -180.0) d += 360.0;
  if (d > 180.0) d -= 360.0;
  return d;
}

}  // namespace detail

inline double angular_displacement(const Vec3& a, const Vec3& b) {
  detail::require_unit(a, "first direction");
  detail::require_unit(b, "second direction");
  return std::acos(std::clamp(dot(a, b), -1.0, 1.0)) * kRadToDeg;
}

struct AxisDisplacement {
  double h = 0.0;
  double v = 0.0;
};

// Signed world-frame azimuth/elevation difference from a to b.
inline AxisDisplacement axis_components(const Vec3& a, const Vec3& b) {
  detail::require_unit(a, "first direction");
  detail::require_unit(b, "second direction");
  constexpr double kLimit = 1.0 - 1e-9;
  if (std::abs(a[1]) > kLimit || std::abs(b[1]) > kLimit)
    fail(ErrorCode::DegenerateElevation, "gaze direction too close to the vertical axis");
  const double az_a = std::atan2(a[0], a[2]) * kRadToDeg;
  const double az_b = std::atan2(b[0], b[2]) * kRadToDeg;
  const double el_a = std::asin(std::clamp(a[1], -1.0, 1.0)) * kRadToDeg;
  const double el_b = std::asin(std::clamp(b[1], -1.0, 1.0)) * kRadToDeg;
  return {detail::wrap_degrees(az_b - az_a), el_b - el_a};
}

struct VelocityTriple {
  double abs = 0.0, h = 0.0, v = 0.0;
};

namespace detail {

// Unfiltered kinematics between consecutive samples. Index 0 is all zero.
struct RawRecord {
  double t = 0.0;
  double dt_s = 0.0;
  Vec3 dir{0.0, 0.0, 1.0};
  double disp_abs = 0.0, disp_h = 0.0, disp_v = 0.0;
  double vel_abs = 0.0, vel_h = 0.0, vel_v = 0.0;
};

inline RawRecord first_record(const GazeSample& s) {
  require_unit(s.dir, "gaze direction");
  RawRecord r;
  r.t = s.t;
  r.dir = s.dir;
  return r;
}

inline RawRecord next_record(const GazeSample& prev, const GazeSample& cur) {
  const double dt_ms = cur.t - prev.t;
  if (!(dt_ms > 0.0))
    fail(ErrorCode::MalformedStream, "non-increasing timestamp at t=" + std::to_string(cur.t) + " ms");
  RawRecord r;
  r.t = cur.t;
  r.dt_s = dt_ms / 1000.0;
  r.dir = cur.dir;
  r.disp_abs = angular_displacement(prev.dir, cur.dir);
  const AxisDisplacement hv = axis_components(prev.dir, cur.dir);
  r.disp_h = hv.h;
  r.disp_v = hv.v;
  r.vel_abs = r.disp_abs / r.dt_s;
  r.vel_h = r.disp_h / r.dt_s;
  r.vel_v = r.disp_v / r.dt_s;
  return r;
}

inline std::vector<RawRecord> raw_records(std::span<const GazeSample> samples) {
  std::vector<RawRecord> out;
  out.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    out.push_back(i == 0 ? first_record(samples[0]) : next_record(samples[i - 1], samples[i]));
  return out;
}

// Linear fill for the k-th (1-based) of `len` missing points between a and b.
// Batch and streaming repair share this so their output is bit-identical.
inline double lerp_fill(double a, double b, std::size_t k, std::size_t len) {
  return a + (b - a) * (static_cast<double>(k) / static_cast<double>(len + 1));
}

}  // namespace detail

inline std::vector<VelocityTriple> differentiate(std::span<const GazeSample> samples) {
  if (samples.size() < 2) fail(ErrorCode::InsufficientData, "differentiate needs at least 2 samples");
  std::vector<VelocityTriple> out;
  out.reserve(samples.size());
  for (const auto& r : detail::raw_records(samples)) out.push_back({r.vel_abs, r.vel_h, r.vel_v});
  return out;
}

// Central-point smoothing weights of a least-squares polynomial fit over a
// window of 2m+1 points, computed from Gram polynomials.
inline std::vector<double> sg_coefficients(int window, int order) {
  if (window < 1 || window % 2 == 0) fail(ErrorCode::Config, "SG window must be odd");
  if (order < 0 || order >= window) fail(ErrorCode::Config, "SG order must be < window");
  const int m = window / 2;
  auto gram = [m](int k, int t) {
    // P_k^m(t), evaluated by the three-term recurrence
    double p_prev = 0.0, p = 1.0;
    for (int j = 1; j <= k; ++j) {
      const double a = 2.0 * (2 * j - 1) / (j * (2.0 * m - j + 1));
      const double b = ((j - 1) * (2.0 * m + j)) / (j * (2.0 * m - j + 1));
      const double next = a * t * p - b * p_prev;
      p_prev = p;
      p = next;
    }
    return p;
  };
  auto gen_fact = [](int a, int b) {
    double f = 1.0;
    for (int j = a - b + 1; j <= a; ++j) f *= j;
    return f;
  };
  std::vector<double> c(static_cast<std::size_t>(window), 0.0);
  for (int t = -m; t <= m; ++t) {
    double sum = 0.0;
    for (int k = 0; k <= order; ++k)
      sum += (2 * k + 1) * (gen_fact(2 * m, k) / gen_fact(2 * m + k + 1, k + 1)) * gram(k, t) * gram(k, 0);
    c[static_cast<std::size_t>(t + m)] = sum;
  }
  return c;
}

namespace detail {

// Mirror (reflect-without-repeat) index into [0, n).
inline std::size_t mirror_index(std::ptrdiff_t i, std::ptrdiff_t n) {
  if (i < 0) i = -i;
  if (i >= n) i = 2 * (n - 1) - i;
  return static_cast<std::size_t>(i);
}

}  // namespace detail

inline std::vector<double> sg_filter(std::span<const double> series, int window, int order) {
  const auto coeffs = sg_coefficients(window, order);
  const auto n = static_cast<std::ptrdiff_t>(series.size());
  if (n < window)
    fail(ErrorCode::InsufficientData,
         "series of length " + std::to_string(n) + " is shorter than SG window " + std::to_string(window));
  const std::ptrdiff_t m = window / 2;
  std::vector<double> out(series.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::ptrdiff_t j = -m; j <= m; ++j)
      acc += coeffs[static_cast<std::size_t>(j + m)] * series[detail::mirror_index(i + j, n)];
    out[static_cast<std::size_t>(i)] = acc;
  }
  return out;
}

// Indices whose value exceeds the threshold.
inline std::vector<bool> outlier_mask(std::span<const double> values, double thresh) {
  std::vector<bool> mask(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) mask[i] = values[i] > thresh;
  return mask;
}

// Replaces masked entries by linear interpolation between the nearest valid
// neighbours; leading and trailing runs take the nearest valid value.
inline void repair_masked(std::span<double> values, const std::vector<bool>& mask) {
  const std::size_t n = values.size();
  std::optional<std::size_t> last_valid;
  std::size_t i = 0;
  while (i < n) {
    if (!mask[i]) {
      last_valid = i;
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && mask[j]) ++j;
    const std::size_t len = j - i;
    if (!last_valid && j == n) fail(ErrorCode::AllOutliers, "every sample is an outlier");
    for (std::size_t k = 0; k < len; ++k) {
      if (!last_valid)
        values[i + k] = values[j];
      else if (j == n)
        values[i + k] = values[*last_valid];
      else
        values[i + k] = detail::lerp_fill(values[*last_valid], values[j], k + 1, len);
    }
    i = j;
  }
}

inline std::vector<double> remove_outliers(std::span<const double> velocity, double thresh) {
  if (!(thresh > 0.0)) fail(ErrorCode::Config, "outlier threshold must be positive");
  std::vector<double> out(velocity.begin(), velocity.end());
  if (out.empty()) return out;
  repair_masked(out, outlier_mask(out, thresh));
  return out;
}

namespace detail {

inline void fill_acceleration(std::vector<KinematicsFrame>& frames, std::span<const RawRecord> raw) {
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (i == 0) continue;
    const double dt = raw[i].dt_s;
    frames[i].acc_abs = (frames[i].vel_abs - frames[i - 1].vel_abs) / dt;
    frames[i].acc_h = (frames[i].vel_h - frames[i - 1].vel_h) / dt;
    frames[i].acc_v = (frames[i].vel_v - frames[i - 1].vel_v) / dt;
  }
}

}  // namespace detail

// Batch pipeline: differentiate, repair raw outliers, smooth velocity, repair
// again on the smoothed signal, then differentiate for acceleration.
inline std::vector<KinematicsFrame> process_stream(std::span<const GazeSample> samples, const SignalConfig& config) {
  config.validate();
  if (samples.size() < static_cast<std::size_t>(config.sg_window) + 1)
    fail(ErrorCode::InsufficientData, "stream needs at least sg_window + 1 samples");
  auto raw = detail::raw_records(samples);
  const std::size_t n = raw.size();

  std::vector<double> va(n), vh(n), vv(n), da(n), dh(n), dv(n);
  for (std::size_t i = 0; i < n; ++i) {
    va[i] = raw[i].vel_abs, vh[i] = raw[i].vel_h, vv[i] = raw[i].vel_v;
    da[i] = raw[i].disp_abs, dh[i] = raw[i].disp_h, dv[i] = raw[i].disp_v;
  }
  const auto raw_mask = outlier_mask(va, config.outlier_thresh);
  for (auto* s : {&va, &vh, &vv, &da, &dh, &dv}) repair_masked(*s, raw_mask);

  auto fa = sg_filter(va, config.sg_window, config.sg_order);
  auto fh = sg_filter(vh, config.sg_window, config.sg_order);
  auto fv = sg_filter(vv, config.sg_window, config.sg_order);
  // higher-order fits can undershoot zero; speed is a magnitude
  for (auto& x : fa) x = std::max(x, 0.0);
  const auto smooth_mask = outlier_mask(fa, config.outlier_thresh);
  for (auto* s : {&fa, &fh, &fv}) repair_masked(*s, smooth_mask);

  std::vector<KinematicsFrame> frames(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& f = frames[i];
    f.t = raw[i].t;
    f.dir = raw[i].dir;
    f.disp_abs = da[i], f.disp_h = dh[i], f.disp_v = dv[i];
    f.vel_abs = fa[i], f.vel_h = fh[i], f.vel_v = fv[i];
  }
  detail::fill_acceleration(frames, raw);
  return frames;
}

namespace detail {

// Streaming counterpart of repair_masked. Values are held back while an
// outlier run is open; `Fields` lists the members repaired together.
template <typename Rec, typename Policy>
class OutlierRepairStage {
 public:
  explicit OutlierRepairStage(double thresh) : thresh_(thresh) {}

  void push(const Rec& r, std::vector<Rec>& out) {
    if (Policy::key(r) > thresh_) {
      pending_.push_back(r);
      return;
    }
    const std::size_t len = pending_.size();
    for (std::size_t k = 0; k < len; ++k) {
      Rec& p = pending_[k];
      if (last_valid_)
        Policy::fill(p, *last_valid_, r, k + 1, len);
      else
        Policy::copy(p, r);
      out.push_back(p);
    }
    pending_.clear();
    last_valid_ = r;
    out.push_back(r);
  }

  void flush(std::vector<Rec>& out) {
    if (pending_.empty()) return;
    if (!last_valid_) fail(ErrorCode::AllOutliers, "every sample is an outlier");
    for (Rec& p : pending_) {
      Policy::copy(p, *last_valid_);
      out.push_back(p);
    }
    pending_.clear();
  }

  std::size_t pending() const { return pending_.size(); }

 private:
  double thresh_;
  std::optional<Rec> last_valid_;
  std::vector<Rec> pending_;
};

struct RawRepairPolicy {
  static double key(const RawRecord& r) { return r.vel_abs; }
  static void fill(RawRecord& p, const RawRecord& a, const RawRecord& b, std::size_t k, std::size_t len) {
    p.vel_abs = lerp_fill(a.vel_abs, b.vel_abs, k, len);
    p.vel_h = lerp_fill(a.vel_h, b.vel_h, k, len);
    p.vel_v = lerp_fill(a.vel_v, b.vel_v, k, len);
    p.disp_abs = lerp_fill(a.disp_abs, b.disp_abs, k, len);
    p.disp_h = lerp_fill(a.disp_h, b.disp_h, k, len);
    p.disp_v = lerp_fill(a.disp_v, b.disp_v, k, len);
  }
  static void copy(RawRecord& p, const RawRecord& src) {
    p.vel_abs = src.vel_abs, p.vel_h = src.vel_h, p.vel_v = src.vel_v;
    p.disp_abs = src.disp_abs, p.disp_h = src.disp_h, p.disp_v = src.disp_v;
  }
};

struct SmoothRecord {
  KinematicsFrame frame;
  double dt_s = 0.0;
};

struct SmoothRepairPolicy {
  static double key(const SmoothRecord& r) { return r.frame.vel_abs; }
  static void fill(SmoothRecord& p, const SmoothRecord& a, const SmoothRecord& b, std::size_t k, std::size_t len) {
    p.frame.vel_abs = lerp_fill(a.frame.vel_abs, b.frame.vel_abs, k, len);
    p.frame.vel_h = lerp_fill(a.frame.vel_h, b.frame.vel_h, k, len);
    p.frame.vel_v = lerp_fill(a.frame.vel_v, b.frame.vel_v, k, len);
  }
  static void copy(SmoothRecord& p, const SmoothRecord& src) {
    p.frame.vel_abs = src.frame.vel_abs, p.frame.vel_h = src.frame.vel_h, p.frame.vel_v = src.frame.vel_v;
  }
};

}  // namespace detail

// Incremental version of process_stream. Frames come out in order, delayed
// by half the SG window (plus any open outlier run); flush() emits the tail
// with the same edge handling as the batch path, so the concatenated output
// equals process_stream() exactly.
class StreamProcessor {
 public:
  explicit StreamProcessor(SignalConfig config = {})
      : config_(config),
        coeffs_((config_.validate(), sg_coefficients(config_.sg_window, config_.sg_order))),
        raw_repair_(config_.outlier_thresh),
        smooth_repair_(config_.outlier_thresh) {}

  const SignalConfig& config() const { return config_; }

  // Nominal output delay in samples.
  std::size_t delay() const { return static_cast<std::size_t>(config_.sg_window / 2); }

  std::vector<KinematicsFrame> push(const GazeSample& s) {
    if (flushed_) fail(ErrorCode::MalformedStream, "push after flush");
    detail::RawRecord rec = prev_ ? detail::next_record(*prev_, s) : detail::first_record(s);
    prev_ = s;
    ++received_;
    std::vector<detail::RawRecord> cleaned;
    raw_repair_.push(rec, cleaned);
    std::vector<KinematicsFrame> out;
    for (const auto& r : cleaned) accept_clean(r, out);
    return out;
  }

  std::vector<KinematicsFrame> flush() {
    if (flushed_) return {};
    flushed_ = true;
    if (received_ < static_cast<std::size_t>(config_.sg_window) + 1)
      fail(ErrorCode::InsufficientData, "stream needs at least sg_window + 1 samples");
    std::vector<detail::RawRecord> cleaned;
    raw_repair_.flush(cleaned);
    std::vector<KinematicsFrame> out;
    for (const auto& r : cleaned) accept_clean(r, out);
    // smooth the tail using mirrored right edge
    const auto n = static_cast<std::ptrdiff_t>(clean_count_);
    while (next_smooth_ < clean_count_) emit_smoothed(n, out);
    std::vector<detail::SmoothRecord> repaired;
    smooth_repair_.flush(repaired);
    for (auto& r : repaired) finish(r, out);
    return out;
  }

  void reset() { *this = StreamProcessor(config_); }

 private:
  void accept_clean(const detail::RawRecord& r, std::vector<KinematicsFrame>& out) {
    buffer_.push_back(r);
    ++clean_count_;
    const std::size_t m = static_cast<std::size_t>(config_.sg_window / 2);
    while (next_smooth_ + m < clean_count_) emit_smoothed(-1, out);
  }

  // n < 0: right edge not yet known (interior point)
  void emit_smoothed(std::ptrdiff_t n, std::vector<KinematicsFrame>& out) {
    const auto m = static_cast<std::ptrdiff_t>(config_.sg_window / 2);
    const auto i = static_cast<std::ptrdiff_t>(next_smooth_);
    auto at = [&](std::ptrdiff_t idx) -> const detail::RawRecord& {
      if (idx < 0) idx = -idx;
      if (n >= 0 && idx >= n) idx = 2 * (n - 1) - idx;
      return buffer_[static_cast<std::size_t>(idx) - buffer_base_];
    };
    double a = 0.0, h = 0.0, v = 0.0;
    for (std::ptrdiff_t j = -m; j <= m; ++j) {
      const auto& r = at(i + j);
      const double c = coeffs_[static_cast<std::size_t>(j + m)];
      a += c * r.vel_abs;
      h += c * r.vel_h;
      v += c * r.vel_v;
    }
    const auto& centre = at(i);
    detail::SmoothRecord rec;
    rec.dt_s = centre.dt_s;
    rec.frame.t = centre.t;
    rec.frame.dir = centre.dir;
    rec.frame.disp_abs = centre.disp_abs, rec.frame.disp_h = centre.disp_h, rec.frame.disp_v = centre.disp_v;
    rec.frame.vel_abs = std::max(a, 0.0), rec.frame.vel_h = h, rec.frame.vel_v = v;
    ++next_smooth_;
    // the next output needs indices from next_smooth_ - m (0 while the
    // left mirror is still in use)
    const std::size_t keep_from = next_smooth_ >= static_cast<std::size_t>(m) ? next_smooth_ - m : 0;
    while (buffer_base_ < keep_from) {
      buffer_.pop_front();
      ++buffer_base_;
    }
    std::vector<detail::SmoothRecord> repaired;
    smooth_repair_.push(rec, repaired);
    for (auto& r : repaired) finish(r, out);
  }

  void finish(detail::SmoothRecord& r, std::vector<KinematicsFrame>& out) {
    if (last_out_) {
      r.frame.acc_abs = (r.frame.vel_abs - last_out_->vel_abs) / r.dt_s;
      r.frame.acc_h = (r.frame.vel_h - last_out_->vel_h) / r.dt_s;
      r.frame.acc_v = (r.frame.vel_v - last_out_->vel_v) / r.dt_s;
    }
    last_out_ = r.frame;
    out.push_back(r.frame);
  }

  SignalConfig config_;
  std::vector<double> coeffs_;
  std::optional<GazeSample> prev_;
  std::size_t received_ = 0;
  bool flushed_ = false;

  detail::OutlierRepairStage<detail::RawRecord, detail::RawRepairPolicy> raw_repair_;
  std::deque<detail::RawRecord> buffer_;
  std::size_t buffer_base_ = 0;  // absolute index of buffer_.front()
  std::size_t clean_count_ = 0;
  std::size_t next_smooth_ = 0;
  detail::OutlierRepairStage<detail::SmoothRecord, detail::SmoothRepairPolicy> smooth_repair_;
  std::optional<KinematicsFrame> last_out_;
};

}  // namespace gazeintent
