#pragma once

// Real-time selection engine: samples in, intent predictions, scaling factor,
// required dwell and selections out.

#include <gazeintent/dataset.hpp>
#include <gazeintent/error.hpp>
#include <gazeintent/events.hpp>
#include <gazeintent/features.hpp>
#include <gazeintent/model_io.hpp>
#include <gazeintent/signal.hpp>

#include <array>
#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gazeintent {

struct ThresholdSet {
  double t_n = 0.05;
  double t_n1 = 0.10;
  double t_n2 = 0.15;
  double t_n3 = 0.70;

  void validate() const {
    for (double t : {t_n, t_n1, t_n2, t_n3})
      if (!(t >= 0.0 && t <= 1.0)) fail(ErrorCode::Config, "threshold weights must lie in [0, 1]");
    if (std::abs(t_n + t_n1 + t_n2 + t_n3 - 1.0) > 1e-9) fail(ErrorCode::Config, "threshold weights must sum to 1");
  }
};

// Last four binary predictions, newest first; starts all zero.
class PredictionBuffer {
 public:
  void push(int p) {
    for (std::size_t i = 3; i > 0; --i) p_[i] = p_[i - 1];
    p_[0] = p ? 1 : 0;
  }
  int operator[](std::size_t i) const { return p_[i]; }
  void clear() { p_ = {}; }
  static PredictionBuffer of(int pn, int pn1, int pn2, int pn3) {
    PredictionBuffer b;
    b.p_ = {pn ? 1 : 0, pn1 ? 1 : 0, pn2 ? 1 : 0, pn3 ? 1 : 0};
    return b;
  }

 private:
  std::array<int, 4> p_{};
};

inline double scaling_factor(const PredictionBuffer& p, const ThresholdSet& t) {
  const double pn = p[0], pn1 = p[1], pn2 = p[2], pn3 = p[3];
  const double s = pn * t.t_n + pn * pn1 * t.t_n1 + pn * pn1 * pn2 * t.t_n2 + pn * pn1 * pn2 * pn3 * t.t_n3;
  return std::clamp(s, 0.0, 1.0);
}

inline double scaled_dwell(double s_f, double static_dwell) {
  if (!(s_f >= 0.0 && s_f <= 1.0)) fail(ErrorCode::InvalidInput, "scaling factor must lie in [0, 1]");
  return (1.0 - s_f) * static_dwell;
}

enum class Method { Static, StaticPlusIntent, GazeIntentGeneral, GazeIntentPersonal };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::Static: return "static";
    case Method::StaticPlusIntent: return "static_intent";
    case Method::GazeIntentGeneral: return "gazeintent";
    case Method::GazeIntentPersonal: return "gazeintent_personal";
  }
  return "unknown";
}

inline Method parse_method(std::string_view s) {
  if (s == "static") return Method::Static;
  if (s == "static_intent" || s == "s+i") return Method::StaticPlusIntent;
  if (s == "gazeintent" || s == "gazeintent_general") return Method::GazeIntentGeneral;
  if (s == "gazeintent_personal") return Method::GazeIntentPersonal;
  fail(ErrorCode::Config, "unknown method '" + std::string(s) + "'");
}

inline bool uses_model(Method m) { return m != Method::Static; }

enum class Task { Circle, Arithmetic, Puzzle };

inline const char* to_string(Task t) {
  switch (t) {
    case Task::Circle: return "circle";
    case Task::Arithmetic: return "arithmetic";
    case Task::Puzzle: return "puzzle";
  }
  return "unknown";
}

inline Task parse_task(std::string_view s) {
  if (s == "circle") return Task::Circle;
  if (s == "arithmetic") return Task::Arithmetic;
  if (s == "puzzle") return Task::Puzzle;
  fail(ErrorCode::Config, "unknown task '" + std::string(s) + "'");
}

// Seconds.
inline double static_dwell_for(Task t) {
  switch (t) {
    case Task::Circle: return 0.3;
    case Task::Arithmetic: return 1.5;
    case Task::Puzzle: return 1.2;
  }
  return 0.3;
}

inline bool method_rule(Method method, double dwell, double required, double static_dwell, double cap, int latest_p) {
  switch (method) {
    case Method::Static: return dwell >= static_dwell;
    case Method::StaticPlusIntent: return (dwell >= static_dwell && latest_p == 1) || dwell >= cap;
    case Method::GazeIntentGeneral:
    case Method::GazeIntentPersonal: return dwell >= required;
  }
  return false;
}

class IntentPredictor {
 public:
  virtual ~IntentPredictor() = default;
  virtual double probability(const Window& window) const = 0;
};

class NetworkPredictor : public IntentPredictor {
 public:
  explicit NetworkPredictor(std::shared_ptr<const LstmNetwork<double>> net) : net_(std::move(net)) {}
  double probability(const Window& window) const override { return net_->predict(window); }

 private:
  std::shared_ptr<const LstmNetwork<double>> net_;
};

struct EngineConfig {
  Method method = Method::Static;
  Task task = Task::Circle;
  std::optional<double> static_dwell;  // overrides the task constant
  ThresholdSet thresholds;
  double binarize_thresh = 0.5;
  double cap_factor = 2.0;  // Static+Intent forced selection at cap_factor x static dwell
  SignalConfig signal;
  IvtConfig ivt;
  WindowConfig window;
  FeatureSchema schema = make_schema(FeatureSet::Set2_ContinuousPlusBooleans11);

  double dwell() const { return static_dwell ? *static_dwell : static_dwell_for(task); }

  void validate() const {
    if (!(dwell() > 0.0)) fail(ErrorCode::Config, "static dwell must be positive");
    if (!(cap_factor >= 1.0)) fail(ErrorCode::Config, "dwell cap must be at least the static dwell");
    if (!(binarize_thresh > 0.0 && binarize_thresh < 1.0)) fail(ErrorCode::Config, "binarize_thresh must lie in (0, 1)");
    thresholds.validate();
    signal.validate();
    ivt.validate();
    window.validate();
  }

  // Adopts the pipeline the model was trained with.
  void adopt(const ModelBundle& model) {
    signal.sg_window = model.signal.sg_window;
    signal.sg_order = model.signal.sg_order;
    window.window_size = model.window.window_size;
    window.overlap = model.window.overlap;
    schema = model.schema;
  }
};

struct Selection {
  std::string object_id;
  double t = 0.0;
  double dwell = 0.0;     // accumulated at selection, s
  double required = 0.0;  // required dwell at selection, s
};

struct EngineOutput {
  double t = 0.0;
  std::optional<double> probability;
  std::optional<int> prediction;
  double s_f = 0.0;
  double dwell_required = 0.0;
  double dwell_accum = 0.0;
  std::optional<Selection> selection;
};

class IntentEngine {
 public:
  // `predictor` may be null only for the Static method.
  IntentEngine(EngineConfig config, std::shared_ptr<const IntentPredictor> predictor = nullptr, NormStats norm = {})
      : cfg_(std::move(config)), predictor_(std::move(predictor)), norm_(std::move(norm)),
        processor_((cfg_.validate(), cfg_.signal)), fuser_(cfg_.schema, cfg_.ivt) {
    if (uses_model(cfg_.method) && !predictor_)
      fail(ErrorCode::Config, std::string("method ") + to_string(cfg_.method) + " needs an intent model");
    if (!norm_.empty() && norm_.mean.size() != cfg_.schema.count())
      fail(ErrorCode::Config, "normalization width " + std::to_string(norm_.mean.size()) + " does not match schema width " +
                                  std::to_string(cfg_.schema.count()));
    row_.resize(cfg_.schema.count());
  }

  static IntentEngine from_model(EngineConfig config, std::shared_ptr<const ModelBundle> model) {
    if (!model) return IntentEngine(std::move(config));
    config.adopt(*model);
    if (model->net.input_dim() != config.schema.count())
      fail(ErrorCode::Config, "model input width does not match its schema");
    auto net = std::shared_ptr<const LstmNetwork<double>>(model, &model->net);
    return IntentEngine(std::move(config), std::make_shared<NetworkPredictor>(net), model->norm);
  }

  const EngineConfig& config() const { return cfg_; }
  double s_f() const { return s_f_; }
  double required_dwell() const {
    return cfg_.method == Method::GazeIntentGeneral || cfg_.method == Method::GazeIntentPersonal
               ? scaled_dwell(s_f_, cfg_.dwell())
               : cfg_.dwell();
  }

  EngineOutput step(const GazeSample& s) {
    if (started_ && !(s.t > last_t_))
      fail(ErrorCode::MalformedStream, "sample at t=" + std::to_string(s.t) + " ms does not advance time");
    started_ = true;
    last_t_ = s.t;

    EngineOutput out;
    out.t = s.t;
    if (uses_model(cfg_.method))
      for (const auto& frame : processor_.push(s)) advance(frame, out);

    if (s.object_id.empty()) {
      object_.clear();
    } else if (s.object_id != object_) {
      object_ = s.object_id;
      dwell_start_ = s.t;
    }
    const double dwell = object_.empty() ? 0.0 : (s.t - dwell_start_) / 1000.0;
    const double required = required_dwell();
    out.s_f = s_f_;
    out.dwell_required = required;
    out.dwell_accum = dwell;

    if (refractory_ > 0) {
      --refractory_;
    } else if (!object_.empty() &&
               method_rule(cfg_.method, dwell, required, cfg_.dwell(), cfg_.cap_factor * cfg_.dwell(), buffer_[0])) {
      out.selection = Selection{object_, s.t, dwell, required};
      dwell_start_ = s.t;
      out.dwell_accum = 0.0;
      refractory_ = cfg_.window.stride();
    }
    return out;
  }

 private:
  void advance(const KinematicsFrame& frame, EngineOutput& out) {
    fuser_.push(frame, row_);
    if (!norm_.empty()) norm_.apply(std::span<double>(row_));
    const std::size_t n = cfg_.window.window_size;
    ring_.push_back(row_);
    if (ring_.size() > n) ring_.erase(ring_.begin());
    ++since_predict_;
    if (ring_.size() < n || (predicted_ && since_predict_ < cfg_.window.stride())) return;

    Window w;
    w.rows = n;
    w.cols = row_.size();
    w.end_t = frame.t;
    w.data.reserve(n * w.cols);
    for (const auto& r : ring_) w.data.insert(w.data.end(), r.begin(), r.end());
    const double p = predictor_->probability(w);
    const int pred = p >= cfg_.binarize_thresh ? 1 : 0;
    buffer_.push(pred);
    s_f_ = scaling_factor(buffer_, cfg_.thresholds);
    predicted_ = true;
    since_predict_ = 0;
    out.probability = p;
    out.prediction = pred;
  }

  EngineConfig cfg_;
  std::shared_ptr<const IntentPredictor> predictor_;
  NormStats norm_;
  StreamProcessor processor_;
  OnlineFuser fuser_;
  std::vector<double> row_;
  std::vector<std::vector<double>> ring_;
  std::size_t since_predict_ = 0;
  bool predicted_ = false;
  PredictionBuffer buffer_;
  double s_f_ = 0.0;

  bool started_ = false;
  double last_t_ = 0.0;
  std::string object_;
  double dwell_start_ = 0.0;
  std::size_t refractory_ = 0;
};

}  // namespace gazeintent
