#pragma once

// Velocity-threshold (I-VT) segmentation into fixations and saccades.

#include <gazeintent/error.hpp>
#include <gazeintent/signal.hpp>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gazeintent {

struct IvtConfig {
  double fixation_max_vel = 30.0;                // deg/s
  double saccade_min_vel = 70.0;                 // deg/s
  double fixation_min_dur = 30.0;                // ms
  std::optional<double> fixation_max_dur;        // ms, unbounded by default
  double saccade_min_dur = 20.0;                 // ms
  double saccade_max_dur = 200.0;                // ms

  void validate() const {
    if (!(fixation_max_vel > 0.0 && saccade_min_vel > 0.0 && fixation_min_dur > 0.0 && saccade_min_dur > 0.0 &&
          saccade_max_dur > 0.0))
      fail(ErrorCode::Config, "I-VT thresholds must be positive");
    if (!(fixation_max_vel < saccade_min_vel)) fail(ErrorCode::Config, "fixation_max_vel must be < saccade_min_vel");
    if (!(saccade_min_dur < saccade_max_dur)) fail(ErrorCode::Config, "saccade_min_dur must be < saccade_max_dur");
    if (fixation_max_dur && !(*fixation_max_dur > fixation_min_dur))
      fail(ErrorCode::Config, "fixation_max_dur must exceed fixation_min_dur");
  }
};

enum class SampleClass { FixationCandidate, SaccadeCandidate, Neither };
enum class EventKind { Fixation, Saccade };

inline const char* to_string(EventKind k) { return k == EventKind::Fixation ? "fixation" : "saccade"; }

struct GazeEvent {
  EventKind kind = EventKind::Fixation;
  std::size_t start_idx = 0, end_idx = 0;  // inclusive
  double start_t = 0.0, end_t = 0.0;       // ms
  double duration = 0.0;                   // ms

  bool operator==(const GazeEvent&) const = default;
};

inline SampleClass classify_sample(double vel_abs, const IvtConfig& config) {
  if (vel_abs < config.fixation_max_vel) return SampleClass::FixationCandidate;
  if (vel_abs > config.saccade_min_vel) return SampleClass::SaccadeCandidate;
  return SampleClass::Neither;
}

namespace detail {

inline std::optional<GazeEvent> close_run(SampleClass cls, std::size_t start_idx, std::size_t end_idx, double start_t,
                                          double end_t, const IvtConfig& config) {
  if (cls == SampleClass::Neither) return std::nullopt;
  const double duration = end_t - start_t;
  if (!(duration > 0.0)) return std::nullopt;
  GazeEvent e;
  e.start_idx = start_idx;
  e.end_idx = end_idx;
  e.start_t = start_t;
  e.end_t = end_t;
  e.duration = duration;
  if (cls == SampleClass::FixationCandidate) {
    if (duration < config.fixation_min_dur) return std::nullopt;
    if (config.fixation_max_dur && duration > *config.fixation_max_dur) return std::nullopt;
    e.kind = EventKind::Fixation;
  } else {
    if (duration < config.saccade_min_dur || duration > config.saccade_max_dur) return std::nullopt;
    e.kind = EventKind::Saccade;
  }
  return e;
}

}  // namespace detail

// Streaming detector: an event is reported by the call that ends its run.
class OnlineDetector {
 public:
  explicit OnlineDetector(IvtConfig config = {}) : config_(config) { config_.validate(); }

  std::optional<GazeEvent> push(const KinematicsFrame& frame) {
    if (count_ > 0 && !(frame.t > last_t_))
      fail(ErrorCode::MalformedStream, "frame at t=" + std::to_string(frame.t) + " ms is out of order");
    const SampleClass cls = classify_sample(frame.vel_abs, config_);
    std::optional<GazeEvent> done;
    if (count_ == 0 || cls != run_class_) {
      if (count_ > 0) done = detail::close_run(run_class_, run_start_idx_, count_ - 1, run_start_t_, last_t_, config_);
      run_class_ = cls;
      run_start_idx_ = count_;
      run_start_t_ = frame.t;
    }
    last_t_ = frame.t;
    ++count_;
    return done;
  }

  // Closes the run still open at the end of the stream.
  std::optional<GazeEvent> flush() {
    if (count_ == 0) return std::nullopt;
    auto done = detail::close_run(run_class_, run_start_idx_, count_ - 1, run_start_t_, last_t_, config_);
    run_class_ = SampleClass::Neither;
    run_start_idx_ = count_;
    return done;
  }

  std::size_t frames_seen() const { return count_; }
  const IvtConfig& config() const { return config_; }

 private:
  IvtConfig config_;
  std::size_t count_ = 0;
  SampleClass run_class_ = SampleClass::Neither;
  std::size_t run_start_idx_ = 0;
  double run_start_t_ = 0.0;
  double last_t_ = 0.0;
};

inline std::vector<GazeEvent> detect_events(std::span<const KinematicsFrame> frames, const IvtConfig& config) {
  config.validate();
  std::vector<GazeEvent> events;
  std::size_t i = 0;
  while (i < frames.size()) {
    const SampleClass cls = classify_sample(frames[i].vel_abs, config);
    std::size_t j = i;
    while (j + 1 < frames.size() && classify_sample(frames[j + 1].vel_abs, config) == cls) ++j;
    if (auto e = detail::close_run(cls, i, j, frames[i].t, frames[j].t, config)) events.push_back(*e);
    i = j + 1;
  }
  return events;
}

}  // namespace gazeintent
