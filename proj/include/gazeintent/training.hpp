#pragma once

// Mini-batch training with early stopping on validation F1, walk-forward
// cycles and per-user fine-tuning.

#include <gazeintent/dataset.hpp>
#include <gazeintent/error.hpp>
#include <gazeintent/lstm.hpp>
#include <gazeintent/metrics.hpp>

#include <array>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

namespace gazeintent {

struct TrainConfig {
  std::size_t max_epochs = 200;
  std::size_t patience = 20;
  std::size_t batch_size = 64;
  AdamConfig adam;
  double threshold = 0.5;
  std::uint64_t seed = 1;

  void validate() const {
    if (max_epochs == 0) fail(ErrorCode::Config, "max_epochs must be positive");
    if (patience >= max_epochs) fail(ErrorCode::Config, "patience must be < max_epochs");
    if (!(adam.lr > 0.0)) fail(ErrorCode::Config, "learning rate must be positive");
    if (batch_size == 0) fail(ErrorCode::Config, "batch_size must be positive");
    if (!(threshold > 0.0 && threshold < 1.0)) fail(ErrorCode::Config, "threshold must lie in (0, 1)");
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_f1 = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val_f1 = 0.0;
  bool early_stopped = false;
  bool restored = false;  // parameters were reset to the best-validation snapshot

  std::size_t stop_epoch() const { return epochs.size(); }
};

namespace detail {

template <typename W>
std::vector<const Window*> window_ptrs(std::span<const W> windows) {
  std::vector<const Window*> out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back(&w);
  return out;
}

inline ClassWeights weights_or_uniform(std::span<const LabeledWindow> windows) {
  const auto labels = labels_of(windows);
  const bool both = std::find(labels.begin(), labels.end(), 0) != labels.end() &&
                    std::find(labels.begin(), labels.end(), 1) != labels.end();
  return both ? class_weights(labels) : ClassWeights{};
}

}  // namespace detail

template <typename S, typename W>
std::vector<double> predict_all(const LstmNetwork<S>& net, std::span<const W> windows, std::size_t chunk = 512) {
  const auto ptrs = detail::window_ptrs(windows);
  std::vector<double> out;
  out.reserve(ptrs.size());
  for (std::size_t i = 0; i < ptrs.size(); i += chunk) {
    const std::size_t n = std::min(chunk, ptrs.size() - i);
    for (S p : net.predict(std::span<const Window* const>(ptrs.data() + i, n))) out.push_back(static_cast<double>(p));
  }
  return out;
}

template <typename S>
Metrics evaluate_model(const LstmNetwork<S>& net, std::span<const LabeledWindow> windows, double threshold = 0.5) {
  if (windows.empty()) fail(ErrorCode::InvalidInput, "no windows to evaluate");
  return evaluate_scores(predict_all(net, windows), labels_of(windows), threshold);
}

// Weighted loss over a window set with the given class weights.
template <typename S>
double dataset_loss(std::span<const double> probs, std::span<const LabeledWindow> windows, const ClassWeights& cw) {
  double sum = 0.0;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const double pc = std::clamp(probs[i], kProbClamp, 1.0 - kProbClamp);
    sum -= cw(windows[i].label) * (windows[i].label ? std::log(pc) : std::log(1.0 - pc));
  }
  return sum / static_cast<double>(windows.size());
}

// With an empty validation set every epoch runs and the final parameters
// are kept.
template <typename S>
TrainHistory train(LstmNetwork<S>& net, std::span<const LabeledWindow> train_set, std::span<const LabeledWindow> val_set,
                   const TrainConfig& config, Adam<S>* optimizer = nullptr) {
  config.validate();
  if (train_set.empty()) fail(ErrorCode::InvalidInput, "empty training set");
  const ClassWeights cw = detail::weights_or_uniform(train_set);
  Adam<S> local(config.adam);
  Adam<S>& opt = optimizer ? *optimizer : local;
  std::mt19937_64 rng(config.seed);

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<S> grad(net.param_count());
  std::vector<S> best(net.params().begin(), net.params().end());

  TrainHistory hist;
  hist.best_val_f1 = -1.0;
  std::size_t since_best = 0;
  std::vector<const Window*> ptrs;
  std::vector<int> labels;
  std::vector<S> weights;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    detail::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t i = 0; i < order.size(); i += config.batch_size) {
      const std::size_t n = std::min(config.batch_size, order.size() - i);
      ptrs.clear();
      labels.clear();
      weights.clear();
      for (std::size_t k = 0; k < n; ++k) {
        const auto& w = train_set[order[i + k]];
        ptrs.push_back(&w);
        labels.push_back(w.label);
        weights.push_back(static_cast<S>(cw(w.label)));
      }
      const auto batch = net.pack(std::span<const Window* const>(ptrs));
      loss_sum += static_cast<double>(net.loss_and_gradient(batch, labels, weights, grad)) * static_cast<double>(n);
      opt.update(net.params(), grad);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    if (!val_set.empty()) {
      const auto probs = predict_all(net, val_set);
      rec.val_loss = dataset_loss<S>(probs, val_set, cw);
      rec.val_f1 = f1_score(probs, labels_of(val_set), config.threshold);
    }
    hist.epochs.push_back(rec);
    if (val_set.empty()) continue;
    if (rec.val_f1 > hist.best_val_f1) {
      hist.best_val_f1 = rec.val_f1;
      hist.best_epoch = epoch;
      best.assign(net.params().begin(), net.params().end());
      since_best = 0;
    } else if (++since_best >= config.patience) {
      hist.early_stopped = true;
      break;
    }
  }
  if (val_set.empty()) {
    hist.best_epoch = hist.epochs.size();
    hist.best_val_f1 = 0.0;
  } else {
    std::copy(best.begin(), best.end(), net.params().begin());
    hist.restored = true;
  }
  return hist;
}

// Cycle k (1..3) trains on blocks 1..k+1 and validates on block k+2;
// parameters and optimizer state carry over between cycles.
template <typename S>
std::vector<TrainHistory> walk_forward_train(LstmNetwork<S>& net, std::span<const std::vector<LabeledWindow>> blocks,
                                             const TrainConfig& config) {
  if (blocks.size() != 5) fail(ErrorCode::InvalidInput, "walk-forward training needs 5 blocks, got " +
                                                            std::to_string(blocks.size()));
  Adam<S> opt(config.adam);
  std::vector<TrainHistory> out;
  std::vector<LabeledWindow> train_set;
  train_set.insert(train_set.end(), blocks[0].begin(), blocks[0].end());
  for (std::size_t cycle = 1; cycle <= 3; ++cycle) {
    train_set.insert(train_set.end(), blocks[cycle].begin(), blocks[cycle].end());
    TrainConfig c = config;
    c.seed = config.seed + cycle;
    out.push_back(train(net, std::span<const LabeledWindow>(train_set), blocks[cycle + 1], c, &opt));
  }
  return out;
}

// Continues optimization of a copy of `general` on one user's windows.
template <typename S>
std::pair<LstmNetwork<S>, TrainHistory> fine_tune(const LstmNetwork<S>& general, std::span<const LabeledWindow> user_train,
                                                  std::span<const LabeledWindow> user_val, const TrainConfig& config) {
  if (user_train.empty()) fail(ErrorCode::InvalidInput, "no user windows to fine-tune on");
  LstmNetwork<S> net = general;
  if (config.max_epochs == 0) return {std::move(net), TrainHistory{}};
  TrainConfig c = config;
  if (c.patience >= c.max_epochs) c.patience = c.max_epochs - 1;
  auto hist = train(net, user_train, user_val, c);
  return {std::move(net), std::move(hist)};
}

}  // namespace gazeintent
