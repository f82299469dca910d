#pragma once

// Synthetic gaze sessions with ground-truth triggers. Ordinary viewing
// alternates noisy fixations and minimum-jerk saccades between objects;
// before each trigger the stream carries an intent signature on the target.

#include <gazeintent/dataset.hpp>
#include <gazeintent/error.hpp>
#include <gazeintent/signal.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace gazeintent {

enum class SignatureKind {
  DecayingDrift,  // terminal fixation drifting with decaying speed plus circular micro-movement
  Freeze,         // terminal fixation unusually still
};

struct SynthConfig {
  std::uint64_t seed = 1;
  double duration_s = 120.0;
  double rate_hz = 66.0;
  double jitter_ms = 2.0;  // uniform +/- around the nominal interval
  double fix_min_ms = 200.0, fix_max_ms = 1200.0;
  double amp_min_deg = 12.0, amp_max_deg = 30.0;
  double trigger_min_s = 4.0, trigger_max_s = 7.0;
  double noise_deg = 0.02;
  double az_limit = 35.0, el_limit = 20.0;

  bool signature = true;
  SignatureKind kind = SignatureKind::DecayingDrift;
  double elongation = 1.35;         // terminal fixation length in seconds
  double drift_start_dps = 10.0;    // drift speed at signature onset
  double decay_slope_dps2 = 6.0;    // speed lost per second
  double drift_dir_deg = 45.0;      // 0 = rightward, 90 = upward
  double micro_amp_deg = 0.4;
  double micro_hz = 2.0;
  double freeze_noise_factor = 0.15;

  double post_trigger_hold_ms = 0.0;  // keep gazing at the target after the trigger
  double outlier_rate = 0.0;          // probability of a single-sample tracking glitch

  void validate() const {
    if (!(duration_s > 0.0)) fail(ErrorCode::Config, "duration must be positive");
    if (!(rate_hz > 0.0)) fail(ErrorCode::Config, "sample rate must be positive");
    const double dt = 1000.0 / rate_hz;
    if (!(jitter_ms >= 0.0 && jitter_ms < 0.5 * dt)) fail(ErrorCode::Config, "jitter must be below half the interval");
    if (!(fix_min_ms > 0.0 && fix_min_ms <= fix_max_ms)) fail(ErrorCode::Config, "fixation range is empty");
    if (!(amp_min_deg > 0.0 && amp_min_deg <= amp_max_deg)) fail(ErrorCode::Config, "saccade amplitude range is empty");
    if (!(trigger_min_s > 0.0 && trigger_min_s <= trigger_max_s)) fail(ErrorCode::Config, "trigger interval range is empty");
    if (trigger_min_s * 1000.0 < fix_max_ms + (signature ? elongation * 1000.0 : 0.0) + post_trigger_hold_ms)
      fail(ErrorCode::Config, "trigger interval is shorter than the fixations it must contain");
    if (!(noise_deg >= 0.0)) fail(ErrorCode::Config, "noise must be non-negative");
    if (signature && !(elongation > 0.0)) fail(ErrorCode::Config, "signature length must be positive");
    if (!(outlier_rate >= 0.0 && outlier_rate < 1.0)) fail(ErrorCode::Config, "outlier rate must lie in [0, 1)");
  }
};

// Scheduled events, for checking the detector against the generator.
struct SynthStats {
  std::size_t fixations = 0;
  std::size_t saccades = 0;
  std::size_t triggers = 0;
};

struct SynthSession {
  Session session;
  SynthStats stats;
};

inline double saccade_duration_ms(double amplitude_deg) { return 2.2 * amplitude_deg + 21.0; }

namespace detail {

struct Segment {
  enum class Kind { Fixation, Saccade, Signature } kind = Kind::Fixation;
  double t0 = 0.0, t1 = 0.0;  // ms
  double az0 = 0.0, el0 = 0.0, az1 = 0.0, el1 = 0.0;
  std::string object;
};

class SynthRng {
 public:
  explicit SynthRng(std::uint64_t seed) : rng_(seed) {}
  double uniform() { return unit_uniform_64(); }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  // Box-Muller; portable unlike std::normal_distribution.
  double normal() {
    if (spare_) {
      spare_ = false;
      return cached_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    cached_ = r * std::sin(2.0 * std::numbers::pi * u2);
    spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  double unit_uniform_64() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  std::mt19937_64 rng_;
  bool spare_ = false;
  double cached_ = 0.0;
};

inline double min_jerk(double s) { return s * s * s * (10.0 - 15.0 * s + 6.0 * s * s); }

}  // namespace detail

inline SynthSession generate_synthetic(const SynthConfig& cfg, const std::string& user_id = "synthetic") {
  cfg.validate();
  using detail::Segment;
  detail::SynthRng rng(cfg.seed);
  const double end_ms = cfg.duration_s * 1000.0;

  std::vector<Segment> segs;
  SynthStats stats;
  std::vector<double> triggers;
  double t = 0.0, az = 0.0, el = 0.0;
  std::size_t object_seq = 0, trial = 0;

  auto saccade_to_new_target = [&] {
    const double amp = rng.uniform(cfg.amp_min_deg, cfg.amp_max_deg);
    double ang = rng.uniform(0.0, 2.0 * std::numbers::pi);
    double taz = az + amp * std::cos(ang), tel = el + amp * std::sin(ang);
    // reflect off the field-of-view limits
    if (std::abs(taz) > cfg.az_limit) taz = az - amp * std::cos(ang);
    if (std::abs(tel) > cfg.el_limit) tel = el - amp * std::sin(ang);
    taz = std::clamp(taz, -cfg.az_limit, cfg.az_limit);
    tel = std::clamp(tel, -cfg.el_limit, cfg.el_limit);
    const double real_amp = std::hypot(taz - az, tel - el);
    const double dur = saccade_duration_ms(std::max(real_amp, 1.0));
    segs.push_back({Segment::Kind::Saccade, t, t + dur, az, el, taz, tel, ""});
    ++stats.saccades;
    t += dur;
    az = taz;
    el = tel;
  };
  auto fixate = [&](double dur, Segment::Kind kind, const std::string& object) {
    segs.push_back({kind, t, t + dur, az, el, az, el, object});
    ++stats.fixations;
    t += dur;
  };

  // The final ordinary fixation of a trial leaves room for the approach saccade.
  const double approach_ms = saccade_duration_ms(cfg.amp_max_deg);
  double next_trigger = rng.uniform(cfg.trigger_min_s, cfg.trigger_max_s) * 1000.0;
  fixate(rng.uniform(cfg.fix_min_ms, cfg.fix_max_ms), Segment::Kind::Fixation, "obj" + std::to_string(object_seq++));
  while (t < end_ms) {
    if (cfg.signature) {
      const double sig_ms = cfg.elongation * 1000.0;
      if (t + approach_ms + sig_ms + cfg.fix_min_ms < next_trigger) {
        saccade_to_new_target();
        const double room = next_trigger - sig_ms - approach_ms - t;
        double dur = rng.uniform(cfg.fix_min_ms, cfg.fix_max_ms);
        if (room - dur < cfg.fix_min_ms) dur = std::max(room, cfg.fix_min_ms);
        fixate(dur, Segment::Kind::Fixation, "obj" + std::to_string(object_seq++));
      } else {
        saccade_to_new_target();
        const std::string target = "target" + std::to_string(trial);
        fixate(sig_ms, Segment::Kind::Signature, target);
        triggers.push_back(t);
        if (cfg.post_trigger_hold_ms > 0.0) {
          segs.back().t1 += cfg.post_trigger_hold_ms;  // holds the final signature pose
          t += cfg.post_trigger_hold_ms;
        }
        ++trial;
        next_trigger = t + rng.uniform(cfg.trigger_min_s, cfg.trigger_max_s) * 1000.0;
      }
    } else {
      saccade_to_new_target();
      fixate(rng.uniform(cfg.fix_min_ms, cfg.fix_max_ms), Segment::Kind::Fixation, "obj" + std::to_string(object_seq++));
      while (t >= next_trigger) {
        triggers.push_back(next_trigger);
        next_trigger += rng.uniform(cfg.trigger_min_s, cfg.trigger_max_s) * 1000.0;
      }
    }
  }

  // Per-trigger signature parameters vary a little.
  struct SigParams {
    double dir, v0, phase;
  };
  std::vector<SigParams> sig_params;
  for (const auto& s : segs)
    if (s.kind == Segment::Kind::Signature)
      sig_params.push_back({(cfg.drift_dir_deg + rng.uniform(-20.0, 20.0)) * kDegToRad,
                            cfg.drift_start_dps * rng.uniform(0.85, 1.15), rng.uniform(0.0, 2.0 * std::numbers::pi)});

  SynthSession out;
  out.session.user_id = user_id;
  out.session.task_tag = TaskTag::Synthetic;
  const double dt = 1000.0 / cfg.rate_hz;
  double ts = 0.0;
  std::size_t seg = 0, sig_idx = 0;
  while (ts < end_ms && seg < segs.size()) {
    while (seg < segs.size() && ts >= segs[seg].t1) {
      if (segs[seg].kind == Segment::Kind::Signature) ++sig_idx;
      ++seg;
    }
    if (seg >= segs.size()) break;
    const Segment& s = segs[seg];
    double a = s.az0, e = s.el0, noise = cfg.noise_deg;
    const double tau = (ts - s.t0) / 1000.0;  // s
    switch (s.kind) {
      case Segment::Kind::Fixation: break;
      case Segment::Kind::Saccade: {
        const double k = detail::min_jerk(std::clamp((ts - s.t0) / (s.t1 - s.t0), 0.0, 1.0));
        a = s.az0 + (s.az1 - s.az0) * k;
        e = s.el0 + (s.el1 - s.el0) * k;
        break;
      }
      case Segment::Kind::Signature: {
        const auto& p = sig_params[sig_idx];
        const double sig_len = cfg.elongation;
        const double tt = std::min(tau, sig_len);  // the hold freezes the final pose
        if (cfg.kind == SignatureKind::DecayingDrift) {
          // speed v0 - slope * t, floored at zero
          const double t_stop = cfg.decay_slope_dps2 > 0.0 ? p.v0 / cfg.decay_slope_dps2 : 1e9;
          const double tm = std::min(tt, t_stop);
          const double dist = p.v0 * tm - 0.5 * cfg.decay_slope_dps2 * tm * tm;
          const double w = 2.0 * std::numbers::pi * cfg.micro_hz;
          a += dist * std::cos(p.dir) + cfg.micro_amp_deg * (std::cos(w * tt + p.phase) - std::cos(p.phase));
          e += dist * std::sin(p.dir) + cfg.micro_amp_deg * (std::sin(w * tt + p.phase) - std::sin(p.phase));
        } else {
          noise *= cfg.freeze_noise_factor;
        }
        break;
      }
    }
    a += noise * rng.normal();
    e += noise * rng.normal();
    if (cfg.outlier_rate > 0.0 && rng.uniform() < cfg.outlier_rate) a += 25.0;

    GazeSample g;
    g.t = ts;
    g.dir = direction_from_angles(a, e);
    g.object_id = s.object;
    g.segment = gazeintent::Segment::Task;
    out.session.samples.push_back(std::move(g));
    ts += dt + (cfg.jitter_ms > 0.0 ? rng.uniform(-cfg.jitter_ms, cfg.jitter_ms) : 0.0);
  }

  // Each trigger lands on the last sample at or before its time.
  auto& samples = out.session.samples;
  for (double g : triggers) {
    if (g >= end_ms || samples.empty()) break;
    auto it = std::upper_bound(samples.begin(), samples.end(), g, [](double v, const GazeSample& s) { return v < s.t; });
    if (it == samples.begin()) continue;
    --it;
    if (it->trigger) continue;
    it->trigger = true;
    out.session.triggers.push_back(it->t);
  }
  stats.triggers = out.session.triggers.size();
  out.stats = stats;
  return out;
}

}  // namespace gazeintent
