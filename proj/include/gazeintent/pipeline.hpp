#pragma once

// Sessions -> labeled windows, and the general training protocol built on
// temporal splits and walk-forward cycles.

#include <gazeintent/dataset.hpp>
#include <gazeintent/error.hpp>
#include <gazeintent/events.hpp>
#include <gazeintent/features.hpp>
#include <gazeintent/lstm.hpp>
#include <gazeintent/metrics.hpp>
#include <gazeintent/model_io.hpp>
#include <gazeintent/signal.hpp>
#include <gazeintent/training.hpp>

#include <map>
#include <span>
#include <string>
#include <vector>

namespace gazeintent {

struct PipelineConfig {
  SignalConfig signal;
  IvtConfig ivt;
  WindowConfig window;
  FeatureSchema schema = make_schema(FeatureSet::Set2_ContinuousPlusBooleans11);

  void validate() const {
    signal.validate();
    ivt.validate();
    window.validate();
  }
};

// Task segments too short to filter or to fill one window are skipped.
inline std::vector<LabeledWindow> session_windows(const Session& session, std::size_t ordinal,
                                                  const PipelineConfig& cfg) {
  cfg.validate();
  std::vector<LabeledWindow> out;
  const std::size_t min_len = std::max<std::size_t>(cfg.window.window_size, static_cast<std::size_t>(cfg.signal.sg_window));
  for (auto seg : task_segments(session)) {
    if (seg.size() < min_len) continue;
    const auto frames = process_stream(seg, cfg.signal);
    const auto events = detect_events(frames, cfg.ivt);
    const auto fused = fuse(frames, events, cfg.schema);
    auto labeled = label_windows(make_windows(fused, cfg.window), session.triggers, cfg.window.label_interval);
    for (auto& w : labeled) {
      w.user_id = session.user_id;
      w.session = ordinal;
      w.task_tag = session.task_tag;
      w.load_tags = session.load_tags;
      out.push_back(std::move(w));
    }
  }
  return out;
}

// Session ordinals count per user in input order.
inline std::vector<LabeledWindow> dataset_windows(std::span<const Session> sessions, const PipelineConfig& cfg) {
  std::map<std::string, std::size_t> ordinal;
  std::vector<LabeledWindow> out;
  for (const auto& s : sessions) {
    auto ws = session_windows(s, ordinal[s.user_id]++, cfg);
    out.insert(out.end(), std::make_move_iterator(ws.begin()), std::make_move_iterator(ws.end()));
  }
  return out;
}

struct GeneralConfig {
  std::vector<std::size_t> units{32, 16};
  TrainConfig train;
  SplitSpec split;
};

struct GeneralResult {
  LstmNetwork<double> net;
  std::vector<TrainHistory> cycles;
  Metrics val;
  Metrics test;
  NormStats pooled;  // raw training-split statistics, exported with the model
  Splits splits;     // normalized
};

// Per-user temporal split, per-user normalization inside each split,
// walk-forward training on the training split, evaluation on val and test.
inline GeneralResult train_general(std::vector<LabeledWindow> windows, const GeneralConfig& cfg) {
  if (windows.empty()) fail(ErrorCode::InsufficientData, "no windows to train on");
  const std::size_t dim = windows.front().cols;
  GeneralResult r{LstmNetwork<double>::initialized(dim, cfg.units, cfg.train.seed), {}, {}, {}, {}, {}};
  r.splits = temporal_split(std::move(windows), cfg.split);
  r.pooled = compute_stats(std::span<const LabeledWindow>(r.splits.train), "*", "train");
  normalize(r.splits);
  const auto blocks = walk_forward_blocks(r.splits.train);
  r.cycles = walk_forward_train(r.net, std::span<const std::vector<LabeledWindow>>(blocks), cfg.train);
  if (!r.splits.val.empty()) r.val = evaluate_model(r.net, r.splits.val, cfg.train.threshold);
  if (!r.splits.test.empty()) r.test = evaluate_model(r.net, r.splits.test, cfg.train.threshold);
  return r;
}

inline ModelBundle bundle_of(const LstmNetwork<double>& net, const PipelineConfig& cfg, NormStats norm) {
  ModelBundle m;
  m.net = net;
  m.net.quantize_to_float();
  m.schema = cfg.schema;
  m.norm = std::move(norm);
  m.window = cfg.window;
  m.signal = cfg.signal;
  return m;
}

}  // namespace gazeintent
