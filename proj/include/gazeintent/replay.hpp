#pragma once

// Offline replay of annotated sessions through the selection engine.

#include <gazeintent/dataset.hpp>
#include <gazeintent/engine.hpp>
#include <gazeintent/error.hpp>

#include <memory>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace gazeintent {

struct ReplayConfig {
  double tolerance_s = 1.5;                // a selection matches a trigger within +/- this
  std::size_t selections_per_trial = 1;    // consecutive triggers forming one trial

  void validate() const {
    if (!(tolerance_s >= 0.0)) fail(ErrorCode::Config, "tolerance must be non-negative");
    if (selections_per_trial == 0) fail(ErrorCode::Config, "a trial needs at least one selection");
  }
};

struct ReplayRun {
  EngineConfig engine;
  std::shared_ptr<const IntentPredictor> predictor;
  NormStats norm;
};

struct MethodReport {
  Method method = Method::Static;
  Task task = Task::Circle;
  std::size_t selections = 0;
  std::size_t true_selections = 0;
  std::size_t false_selections = 0;
  std::size_t trials = 0;
  std::vector<double> ttc_s;  // completed trials only
  double mean_required_dwell = 0.0;
  std::vector<Selection> log;

  double mean_ttc() const {
    double s = 0.0;
    for (double v : ttc_s) s += v;
    return ttc_s.empty() ? 0.0 : s / static_cast<double>(ttc_s.size());
  }
  bool operator==(const MethodReport& o) const {
    if (method != o.method || task != o.task || selections != o.selections || true_selections != o.true_selections ||
        false_selections != o.false_selections || trials != o.trials || ttc_s != o.ttc_s ||
        mean_required_dwell != o.mean_required_dwell || log.size() != o.log.size())
      return false;
    for (std::size_t i = 0; i < log.size(); ++i)
      if (log[i].object_id != o.log[i].object_id || log[i].t != o.log[i].t || log[i].dwell != o.log[i].dwell ||
          log[i].required != o.log[i].required)
        return false;
    return true;
  }
};

struct ReplayReport {
  std::vector<MethodReport> rows;
  bool operator==(const ReplayReport&) const = default;
};

// Intended target of each trigger: the object gazed at on the trigger sample.
struct TriggerTarget {
  double t = 0.0;
  std::string object_id;
};

inline std::vector<TriggerTarget> trigger_targets(const Session& session) {
  std::vector<TriggerTarget> out;
  for (const auto& s : session.samples)
    if (s.trigger) out.push_back({s.t, s.object_id});
  return out;
}

inline MethodReport replay_method(const Session& session, const ReplayRun& run, const ReplayConfig& rc = {}) {
  rc.validate();
  bool annotated = false;
  for (const auto& s : session.samples) annotated = annotated || !s.object_id.empty();
  if (!annotated) fail(ErrorCode::InvalidInput, "session has no object annotations to replay");

  IntentEngine engine(run.engine, run.predictor, run.norm);
  MethodReport r;
  r.method = run.engine.method;
  r.task = run.engine.task;
  double required_sum = 0.0;
  for (const auto& s : session.samples) {
    auto out = engine.step(s);
    if (out.selection) {
      required_sum += out.selection->required;
      r.log.push_back(std::move(*out.selection));
    }
  }
  r.selections = r.log.size();
  r.mean_required_dwell = r.selections ? required_sum / static_cast<double>(r.selections) : 0.0;

  // Greedy chronological matching; each trigger takes at most one selection.
  const auto targets = trigger_targets(session);
  std::vector<double> matched(targets.size(), -1.0);
  const double tol = rc.tolerance_s * 1000.0;
  for (const auto& sel : r.log) {
    bool hit = false;
    for (std::size_t k = 0; k < targets.size() && !hit; ++k) {
      if (matched[k] >= 0.0 || targets[k].object_id != sel.object_id) continue;
      if (std::abs(sel.t - targets[k].t) <= tol) {
        matched[k] = sel.t;
        hit = true;
      }
    }
    ++(hit ? r.true_selections : r.false_selections);
  }

  // Trial k spans triggers [k*n, (k+1)*n); it starts at the previous trial's last trigger.
  const std::size_t n = rc.selections_per_trial;
  double start = session.samples.empty() ? 0.0 : session.samples.front().t;
  for (std::size_t k = 0; k + n <= targets.size(); k += n) {
    ++r.trials;
    const double done = matched[k + n - 1];
    bool complete = done > start;
    for (std::size_t j = k; j < k + n; ++j) complete = complete && matched[j] >= 0.0;
    if (complete) r.ttc_s.push_back((done - start) / 1000.0);
    start = targets[k + n - 1].t;
  }
  return r;
}

inline ReplayReport replay(const Session& session, std::span<const ReplayRun> runs, const ReplayConfig& rc = {}) {
  ReplayReport rep;
  for (const auto& run : runs) rep.rows.push_back(replay_method(session, run, rc));
  return rep;
}

// One key=value record per method row.
inline void write_report_text(const ReplayReport& rep, std::ostream& os) {
  for (const auto& r : rep.rows) {
    os << "method=" << to_string(r.method) << " task=" << to_string(r.task) << " selections=" << r.selections
       << " true=" << r.true_selections << " false=" << r.false_selections << " trials=" << r.trials
       << " completed=" << r.ttc_s.size() << " mean_ttc_s=" << detail::format_double(r.mean_ttc())
       << " mean_required_dwell_s=" << detail::format_double(r.mean_required_dwell) << "\n";
  }
}

}  // namespace gazeintent
