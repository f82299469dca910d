// gazeintent command-line tool: simulate, process, train, evaluate, replay, serve.
//
// Exit codes: 0 success, 2 configuration or usage error, 3 data error, 4 runtime error.

#include <gazeintent/config_io.hpp>
#include <gazeintent/dataset.hpp>
#include <gazeintent/engine.hpp>
#include <gazeintent/error.hpp>
#include <gazeintent/gridsearch.hpp>
#include <gazeintent/importance.hpp>
#include <gazeintent/metrics.hpp>
#include <gazeintent/model_io.hpp>
#include <gazeintent/pipeline.hpp>
#include <gazeintent/protocol.hpp>
#include <gazeintent/replay.hpp>
#include <gazeintent/service.hpp>
#include <gazeintent/synth.hpp>
#include <gazeintent/training.hpp>
#include <gazeintent/windows_io.hpp>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace gi = gazeintent;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitRuntime = 4;

int exit_code_for(gi::ErrorCode code) {
  switch (code) {
    case gi::ErrorCode::Config: return kExitConfig;
    case gi::ErrorCode::Io: return kExitRuntime;
    default: return kExitData;
  }
}

// ---------------------------------------------------------------------------
// Shared flag groups

struct PipelineFlags {
  std::size_t window = 17;
  std::size_t overlap = 2;
  double label_interval = 1.0;
  int sg_window = 11;
  int sg_order = 1;
  std::string feature_set = "set2";
  std::string ranking;

  void add(CLI::App* app) {
    app->add_option("--window", window, "Frames per window")->capture_default_str();
    app->add_option("--overlap", overlap, "Frames shared by consecutive windows")->capture_default_str();
    app->add_option("--label-interval", label_interval, "Label window positive within this many s of a trigger")
        ->capture_default_str();
    app->add_option("--sg-window", sg_window, "Savitzky-Golay window length (odd)")->capture_default_str();
    app->add_option("--sg-order", sg_order, "Savitzky-Golay polynomial order")->capture_default_str();
    app->add_option("--feature-set", feature_set, "full98, set1, set2, set3 or set4")->capture_default_str();
    app->add_option("--ranking", ranking, "Importance CSV ranking the full feature set (required for set3)");
  }

  gi::PipelineConfig build() const {
    gi::PipelineConfig pc;
    pc.window = {window, overlap, label_interval};
    pc.signal.sg_window = sg_window;
    pc.signal.sg_order = sg_order;
    const auto set = gi::parse_feature_set(feature_set);
    std::vector<std::string> names;
    if (!ranking.empty()) names = load_ranking(ranking);
    pc.schema = gi::make_schema(set, names);
    pc.validate();
    return pc;
  }

  // First column of an importance CSV, in file order.
  static std::vector<std::string> load_ranking(const std::string& path) {
    std::ifstream is(path);
    if (!is) gi::fail(gi::ErrorCode::Io, "cannot open ranking " + path);
    std::vector<std::string> names;
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line))
      if (!line.empty()) names.emplace_back(line.substr(0, line.find(',')));
    return names;
  }
};

struct TrainFlags {
  std::string units = "32,16";
  std::size_t epochs = 200;
  std::size_t patience = 20;
  std::size_t batch = 64;
  double lr = 1e-3;
  std::uint64_t seed = 1;

  void add(CLI::App* app) {
    app->add_option("--units", units, "LSTM layer widths, comma separated")->capture_default_str();
    app->add_option("--epochs", epochs, "Maximum epochs per training run")->capture_default_str();
    app->add_option("--patience", patience, "Epochs without validation F1 gain before stopping")->capture_default_str();
    app->add_option("--batch", batch, "Mini-batch size")->capture_default_str();
    app->add_option("--lr", lr, "Adam learning rate")->capture_default_str();
    app->add_option("--seed", seed, "Initialization and shuffling seed")->capture_default_str();
  }

  gi::TrainConfig train() const {
    gi::TrainConfig c;
    c.max_epochs = epochs;
    c.patience = patience;
    c.batch_size = batch;
    c.adam.lr = lr;
    c.seed = seed;
    c.validate();
    return c;
  }

  std::vector<std::size_t> layer_units() const {
    std::vector<std::size_t> out;
    for (auto part : gi::detail::split(units, ',')) {
      try {
        const auto v = std::stoul(std::string(part));
        if (v == 0) throw std::invalid_argument("zero");
        out.push_back(v);
      } catch (const std::exception&) {
        gi::fail(gi::ErrorCode::Config, "bad --units entry '" + std::string(part) + "'");
      }
    }
    if (out.empty()) gi::fail(gi::ErrorCode::Config, "--units lists no layers");
    return out;
  }

  gi::GeneralConfig general() const { return {layer_units(), train(), {}}; }
};

// --data (gaze log or manifest) or --windows.
struct InputFlags {
  std::string data;
  std::string windows;

  void add(CLI::App* app, bool allow_windows = true) {
    auto* d = app->add_option("--data", data, "Gaze log or dataset manifest")->check(CLI::ExistingFile);
    if (allow_windows) {
      auto* w = app->add_option("--windows", windows, "Windows file written by 'process'")->check(CLI::ExistingFile);
      d->excludes(w);
    } else {
      d->required();
    }
  }

  void require() const {
    if (data.empty() && windows.empty()) gi::fail(gi::ErrorCode::Config, "one of --data or --windows is required");
  }
};

std::vector<gi::Session> load_sessions(const std::string& path) {
  std::ifstream is(path);
  if (!is) gi::fail(gi::ErrorCode::Io, "cannot open " + path);
  std::string first;
  std::getline(is, first);
  if (first == gi::kManifestVersionLine) return gi::load_dataset(path);
  return {gi::load_gaze_log(path)};
}

gi::WindowSet windows_of(const InputFlags& in, const gi::PipelineConfig& pc) {
  in.require();
  if (!in.windows.empty()) return gi::load_windows(in.windows);
  const auto sessions = load_sessions(in.data);
  gi::WindowSet set{pc.schema, pc.window.window_size, pc.window, pc.signal, gi::dataset_windows(sessions, pc)};
  if (set.windows.empty()) gi::fail(gi::ErrorCode::InsufficientData, in.data + " yields no windows");
  return set;
}

gi::PipelineConfig pipeline_of(const gi::WindowSet& set) {
  gi::PipelineConfig pc;
  pc.window = set.window;
  pc.signal.sg_window = set.signal.sg_window;
  pc.signal.sg_order = set.signal.sg_order;
  pc.schema = set.schema;
  return pc;
}

gi::PipelineConfig pipeline_of(const gi::ModelBundle& m) {
  gi::PipelineConfig pc;
  pc.window = m.window;
  pc.signal = m.signal;
  pc.schema = m.schema;
  return pc;
}

// Windows for a trained model: built with its pipeline, or checked against its schema.
gi::WindowSet model_windows(const InputFlags& in, const gi::ModelBundle& model) {
  auto set = windows_of(in, pipeline_of(model));
  if (set.schema.hash() != model.schema.hash())
    gi::fail(gi::ErrorCode::SchemaMismatch, "windows schema " + gi::hex_hash(set.schema.hash()) +
                                                " does not match model schema " + gi::hex_hash(model.schema.hash()));
  if (set.rows != model.window.window_size)
    gi::fail(gi::ErrorCode::Shape, "windows have " + std::to_string(set.rows) + " rows; model expects " +
                                       std::to_string(model.window.window_size));
  return set;
}

json metrics_json(const gi::Metrics& m) {
  return {{"precision", m.precision}, {"recall", m.recall},     {"f1", m.f1},
          {"auc_pr", m.auc_pr},       {"auc_roc", m.auc_roc},   {"n", m.n},
          {"positives", m.positives}, {"degenerate", m.degenerate}};
}

json history_json(const gi::TrainHistory& h) {
  return {{"epochs", h.stop_epoch()}, {"best_epoch", h.best_epoch}, {"best_val_f1", h.best_val_f1},
          {"early_stopped", h.early_stopped}};
}

std::size_t positives_of(const std::vector<gi::LabeledWindow>& ws) {
  std::size_t n = 0;
  for (const auto& w : ws) n += w.label ? 1 : 0;
  return n;
}

void ensure_parent(const std::string& path) {
  const auto parent = fs::path(path).parent_path();
  std::error_code ec;
  if (!parent.empty()) fs::create_directories(parent, ec);
}

void emit(const json& summary) { std::cout << summary.dump() << std::endl; }

// ---------------------------------------------------------------------------
// Subcommands

struct SimulateCmd {
  std::string out;
  std::uint64_t seed = 1;
  double duration = 120.0;
  double rate = 66.0;
  double jitter = 2.0;
  double noise = 0.02;
  double outlier_rate = 0.0;
  std::size_t users = 1;
  std::size_t sessions = 1;
  bool no_signature = false;
  std::string kind = "drift";
  double drift_dir = 45.0;
  std::string user_prefix = "user";

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("simulate", "Generate synthetic gaze logs with an intent signature before triggers");
    c->add_option("--out", out, "Gaze log file, or a directory when several sessions are requested")->required();
    c->add_option("--seed", seed, "Generator seed (session s of user u uses seed + 1000u + s)")->capture_default_str();
    c->add_option("--duration", duration, "Session length in s")->capture_default_str();
    c->add_option("--rate", rate, "Sampling rate in Hz")->capture_default_str();
    c->add_option("--jitter", jitter, "Uniform sampling jitter in ms")->capture_default_str();
    c->add_option("--noise", noise, "Gaze noise in degrees")->capture_default_str();
    c->add_option("--outlier-rate", outlier_rate, "Probability of a single-sample glitch")->capture_default_str();
    c->add_option("--users", users, "Number of users")->capture_default_str()->check(CLI::PositiveNumber);
    c->add_option("--sessions", sessions, "Sessions per user")->capture_default_str()->check(CLI::PositiveNumber);
    c->add_flag("--no-signature", no_signature, "Omit the intent signature (control data)");
    c->add_option("--kind", kind, "Signature kind: drift or freeze")->capture_default_str();
    c->add_option("--drift-dir", drift_dir, "Drift direction in degrees (0 = right, 90 = up)")->capture_default_str();
    c->add_option("--user-prefix", user_prefix, "User id prefix")->capture_default_str();
    c->callback([this] { run(); });
  }

  gi::SynthConfig config(std::size_t u, std::size_t s) const {
    gi::SynthConfig cfg;
    cfg.seed = seed + 1000 * u + s;
    cfg.duration_s = duration;
    cfg.rate_hz = rate;
    cfg.jitter_ms = jitter;
    cfg.noise_deg = noise;
    cfg.outlier_rate = outlier_rate;
    cfg.signature = !no_signature;
    if (kind == "drift")
      cfg.kind = gi::SignatureKind::DecayingDrift;
    else if (kind == "freeze")
      cfg.kind = gi::SignatureKind::Freeze;
    else
      gi::fail(gi::ErrorCode::Config, "unknown signature kind '" + kind + "'");
    cfg.drift_dir_deg = drift_dir;
    cfg.validate();
    return cfg;
  }

  void run() const {
    std::size_t triggers = 0, samples = 0;
    if (users == 1 && sessions == 1) {
      const auto s = gi::generate_synthetic(config(0, 0), user_prefix + "0");
      ensure_parent(out);
      gi::save_gaze_log(s.session, out);
      emit({{"command", "simulate"}, {"out", out}, {"sessions", 1}, {"samples", s.session.samples.size()},
            {"triggers", s.stats.triggers}, {"seed", seed}});
      return;
    }
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec || !fs::is_directory(out)) gi::fail(gi::ErrorCode::Io, "cannot create directory " + out);
    std::vector<gi::ManifestEntry> entries;
    for (std::size_t u = 0; u < users; ++u)
      for (std::size_t s = 0; s < sessions; ++s) {
        const std::string user = user_prefix + std::to_string(u);
        const auto gen = gi::generate_synthetic(config(u, s), user);
        const std::string file = user + "_s" + std::to_string(s) + ".csv";
        gi::save_gaze_log(gen.session, (fs::path(out) / file).string());
        entries.push_back({file, user, gi::TaskTag::Synthetic, {}});
        triggers += gen.stats.triggers;
        samples += gen.session.samples.size();
      }
    const auto manifest = (fs::path(out) / "manifest.csv").string();
    gi::save_manifest(entries, manifest);
    emit({{"command", "simulate"}, {"out", manifest}, {"sessions", entries.size()}, {"samples", samples},
          {"triggers", triggers}, {"seed", seed}});
  }
};

struct ProcessCmd {
  InputFlags in;
  PipelineFlags pipe;
  std::string out;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("process", "Turn gaze logs into labeled feature windows");
    in.add(c, false);
    pipe.add(c);
    c->add_option("--out", out, "Windows file")->required();
    c->callback([this] { run(); });
  }

  void run() const {
    const auto set = windows_of(in, pipe.build());
    ensure_parent(out);
    gi::save_windows(set, out);
    emit({{"command", "process"}, {"out", out}, {"windows", set.windows.size()},
          {"positives", positives_of(set.windows)}, {"feature_set", gi::to_string(set.schema.set_id)},
          {"schema_hash", gi::hex_hash(set.schema.hash())}});
  }
};

// train (single run with early stopping) and walkforward (three walk-forward cycles).
struct TrainCmd {
  bool walk_forward = false;
  InputFlags in;
  PipelineFlags pipe;
  TrainFlags tf;
  std::string out;

  void add(CLI::App& app, bool wf) {
    walk_forward = wf;
    auto* c = wf ? app.add_subcommand("walkforward", "Train the general model with walk-forward cycles")
                 : app.add_subcommand("train", "Train the general model on the training split");
    in.add(c);
    pipe.add(c);
    tf.add(c);
    c->add_option("--out", out, "Model container")->required();
    c->callback([this] { run(); });
  }

  void run() const {
    in.require();
    const auto set = windows_of(in, pipe.build());
    const auto pc = in.windows.empty() ? pipe.build() : pipeline_of(set);
    const auto gc = tf.general();
    json summary{{"command", walk_forward ? "walkforward" : "train"}, {"out", out}, {"seed", tf.seed}};
    gi::ModelBundle bundle;
    if (walk_forward) {
      auto r = gi::train_general(set.windows, gc);
      bundle = gi::bundle_of(r.net, pc, r.pooled);
      json cycles = json::array();
      for (const auto& h : r.cycles) cycles.push_back(history_json(h));
      summary["cycles"] = cycles;
      summary["val"] = metrics_json(r.val);
      summary["test"] = metrics_json(r.test);
    } else {
      auto splits = gi::temporal_split(set.windows, gc.split);
      auto pooled = gi::compute_stats(std::span<const gi::LabeledWindow>(splits.train), "*", "train");
      gi::normalize(splits);
      auto net = gi::LstmNetwork<double>::initialized(set.schema.count(), gc.units, gc.train.seed);
      const auto hist = gi::train(net, splits.train, splits.val, gc.train);
      bundle = gi::bundle_of(net, pc, pooled);
      summary["history"] = history_json(hist);
      summary["val"] = metrics_json(gi::evaluate_model(net, splits.val));
      summary["test"] = metrics_json(gi::evaluate_model(net, splits.test));
    }
    ensure_parent(out);
    gi::save_model(bundle, out);
    summary["schema_hash"] = gi::hex_hash(bundle.schema.hash());
    emit(summary);
  }
};

struct FinetuneCmd {
  std::string model;
  InputFlags in;
  TrainFlags tf;
  std::string user;
  std::string out;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("finetune", "Fine-tune a general model on one user's windows");
    c->add_option("--model", model, "General model container")->required()->check(CLI::ExistingFile);
    in.add(c);
    tf.epochs = 100;
    tf.patience = 10;
    tf.add(c);
    c->add_option("--user", user, "User to personalize for (required when the data holds several users)");
    c->add_option("--out", out, "Personal model container")->required();
    c->callback([this] { run(); });
  }

  void run() const {
    const auto general = gi::load_model(model);
    auto set = model_windows(in, general);
    std::set<std::string> users;
    for (const auto& w : set.windows) users.insert(w.user_id);
    std::string uid = user;
    if (uid.empty()) {
      if (users.size() != 1) gi::fail(gi::ErrorCode::Config, "data holds several users; pass --user");
      uid = *users.begin();
    }
    std::vector<gi::LabeledWindow> mine;
    for (auto& w : set.windows)
      if (w.user_id == uid) mine.push_back(std::move(w));
    if (mine.empty()) gi::fail(gi::ErrorCode::InsufficientData, "no windows for user '" + uid + "'");

    auto splits = gi::temporal_split(std::move(mine));
    auto personal_norm = gi::compute_stats(std::span<const gi::LabeledWindow>(splits.train), uid, "train");
    gi::normalize(splits);
    const auto before = gi::evaluate_model(general.net, splits.test);
    auto [net, hist] = gi::fine_tune(general.net, splits.train, splits.val, tf.train());
    const auto after = gi::evaluate_model(net, splits.test);
    ensure_parent(out);
    gi::save_model(gi::bundle_of(net, pipeline_of(general), std::move(personal_norm)), out);
    emit({{"command", "finetune"}, {"out", out}, {"user", uid}, {"seed", tf.seed}, {"history", history_json(hist)},
          {"general_test", metrics_json(before)}, {"personal_test", metrics_json(after)},
          {"improvement", after.f1 - before.f1}});
  }
};

// Normalizes and selects the requested evaluation split.
std::vector<gi::LabeledWindow> eval_split(std::vector<gi::LabeledWindow> windows, const std::string& split) {
  if (split == "all") {
    gi::normalize(windows, "all");
    return windows;
  }
  auto s = gi::temporal_split(std::move(windows));
  gi::normalize(s);
  if (split == "train") return s.train;
  if (split == "val") return s.val;
  if (split == "test") return s.test;
  gi::fail(gi::ErrorCode::Config, "unknown split '" + split + "'");
}

struct EvalCmd {
  std::string model;
  InputFlags in;
  std::string split = "test";
  double threshold = 0.5;
  std::string out;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("eval", "Evaluate a model: F1, PR and ROC curves");
    c->add_option("--model", model, "Model container")->required()->check(CLI::ExistingFile);
    in.add(c);
    c->add_option("--split", split, "train, val, test or all")->capture_default_str();
    c->add_option("--threshold", threshold, "Decision threshold")->capture_default_str();
    c->add_option("--out", out, "Directory for metrics.json, pr.txt and roc.txt");
    c->callback([this] { run(); });
  }

  void run() const {
    const auto m = gi::load_model(model);
    const auto windows = eval_split(model_windows(in, m).windows, split);
    const auto metrics = gi::evaluate_model(m.net, windows, threshold);
    json summary{{"command", "eval"},
                 {"model", model},
                 {"split", split},
                 {"schema_hash", gi::hex_hash(m.schema.hash())},
                 {"metrics", metrics_json(metrics)}};
    if (!out.empty()) {
      std::error_code ec;
      fs::create_directories(out, ec);
      const fs::path dir(out);
      gi::save_curve(metrics.pr, (dir / "pr.txt").string());
      gi::save_curve(metrics.roc, (dir / "roc.txt").string());
      std::ofstream os(dir / "metrics.json");
      if (!os) gi::fail(gi::ErrorCode::Io, "cannot write " + (dir / "metrics.json").string());
      os << summary.dump(2) << "\n";
      summary["out"] = out;
    }
    emit(summary);
  }
};

struct ImportanceCmd {
  std::string model;
  InputFlags in;
  std::string split = "test";
  std::size_t repeats = 5;
  std::uint64_t seed = 1;
  std::string out;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("importance", "Rank features by permutation influence on F1");
    c->add_option("--model", model, "Model container")->required()->check(CLI::ExistingFile);
    in.add(c);
    c->add_option("--split", split, "train, val, test or all")->capture_default_str();
    c->add_option("--repeats", repeats, "Permutations per feature")->capture_default_str();
    c->add_option("--seed", seed, "Permutation seed")->capture_default_str();
    c->add_option("--out", out, "Ranking CSV (feature,column,influence)")->required();
    c->callback([this] { run(); });
  }

  void run() const {
    const auto m = gi::load_model(model);
    const auto windows = eval_split(model_windows(in, m).windows, split);
    const auto ranking = gi::feature_importance(m.net, windows, m.schema.names, repeats, seed);
    ensure_parent(out);
    std::ofstream os(out);
    if (!os) gi::fail(gi::ErrorCode::Io, "cannot write " + out);
    os << "feature,column,influence\n";
    json top = json::array();
    for (const auto& r : ranking) {
      os << r.feature << ',' << r.column << ',' << gi::detail::format_double(r.influence) << "\n";
      top.push_back({{"feature", r.feature}, {"influence", r.influence}});
    }
    emit({{"command", "importance"}, {"out", out}, {"seed", seed}, {"ranking", top}});
  }
};

struct GridCmd {
  std::string data;
  TrainFlags tf;
  std::string feature_set = "set2";
  std::size_t budget = 0;
  std::string out;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("gridsearch", "Search window, overlap, filter and label settings");
    c->add_option("--data", data, "Gaze log or dataset manifest")->required()->check(CLI::ExistingFile);
    tf.add(c);
    c->add_option("--feature-set", feature_set, "Feature set evaluated at every grid point")->capture_default_str();
    c->add_option("--budget", budget, "Evaluate only the first N configurations (0 = all 288)")->capture_default_str();
    c->add_option("--out", out, "Results CSV, best first")->required();
    c->callback([this] { run(); });
  }

  void run() const {
    const auto sessions = load_sessions(data);
    gi::GridOptions opt;
    opt.general = tf.general();
    opt.feature_set = gi::parse_feature_set(feature_set);
    const auto results = gi::grid_search(sessions, gi::GridSpace{}, budget, opt);
    ensure_parent(out);
    std::ofstream os(out);
    if (!os) gi::fail(gi::ErrorCode::Io, "cannot write " + out);
    gi::write_grid_results(results, os);
    json summary{{"command", "gridsearch"}, {"out", out}, {"seed", tf.seed}, {"evaluated", results.size()}};
    if (!results.empty()) {
      const auto& b = results.front();
      summary["best"] = {{"config_id", b.config.id},        {"window", b.config.window},
                         {"overlap", b.config.overlap},     {"sg_window", b.config.sg_window},
                         {"sg_order", b.config.sg_order},   {"label_interval", b.config.label_interval},
                         {"val_f1", b.val_f1},              {"test_f1", b.test_f1}};
    }
    emit(summary);
  }
};

struct ReplayCmd {
  std::string data;
  std::vector<std::string> methods{"static"};
  std::string task = "circle";
  std::string model;
  std::string personal_model;
  std::string engine_config;
  std::optional<double> static_dwell;
  double tolerance = 1.5;
  std::size_t per_trial = 1;
  std::string out;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("replay", "Replay recorded gaze through each selection method");
    c->add_option("--data", data, "Gaze log or dataset manifest with triggers")->required()->check(CLI::ExistingFile);
    c->add_option("--method", methods, "static, static_intent, gazeintent or gazeintent_personal (repeatable)")
        ->capture_default_str();
    c->add_option("--task", task, "circle, arithmetic or puzzle")->capture_default_str();
    c->add_option("--model", model, "General model (static_intent, gazeintent)")->check(CLI::ExistingFile);
    c->add_option("--personal-model", personal_model, "Personal model (gazeintent_personal)")
        ->check(CLI::ExistingFile);
    c->add_option("--engine-config", engine_config, "Engine JSON whose settings apply to every method")
        ->check(CLI::ExistingFile);
    c->add_option("--static-dwell", static_dwell, "Override the task's static dwell in s");
    c->add_option("--tolerance", tolerance, "Selection matches a trigger within this many s")->capture_default_str();
    c->add_option("--per-trial", per_trial, "Selections forming one trial")->capture_default_str();
    c->add_option("--out", out, "Report file (key=value records, one per session and method)")->required();
    c->callback([this] { run(); });
  }

  void run() const {
    gi::EngineConfig base;
    std::string general_path = model;
    if (!engine_config.empty()) {
      const auto f = gi::load_engine_file(engine_config);
      base = f.engine;
      if (f.model_path && general_path.empty()) general_path = *f.model_path;
    } else {
      base.task = gi::parse_task(task);
    }
    if (static_dwell) base.static_dwell = *static_dwell;

    std::map<std::string, std::shared_ptr<const gi::ModelBundle>> cache;
    auto bundle = [&](const std::string& path, const char* flag) {
      if (path.empty()) gi::fail(gi::ErrorCode::Config, std::string("this method needs ") + flag);
      auto& slot = cache[path];
      if (!slot) slot = std::make_shared<const gi::ModelBundle>(gi::load_model(path));
      return slot;
    };
    std::vector<gi::ReplayRun> runs;
    for (const auto& name : methods) {
      gi::EngineConfig cfg = base;
      cfg.method = gi::parse_method(name);
      std::shared_ptr<const gi::ModelBundle> m;
      if (cfg.method == gi::Method::GazeIntentPersonal)
        m = bundle(personal_model, "--personal-model");
      else if (gi::uses_model(cfg.method))
        m = bundle(general_path, "--model");
      gi::ReplayRun run{cfg, nullptr, {}};
      if (m) {
        run.engine.adopt(*m);
        run.predictor = std::make_shared<gi::NetworkPredictor>(std::shared_ptr<const gi::LstmNetwork<double>>(m, &m->net));
        run.norm = m->norm;
      }
      runs.push_back(std::move(run));
    }

    const gi::ReplayConfig rc{tolerance, per_trial};
    rc.validate();
    const auto sessions = load_sessions(data);
    ensure_parent(out);
    std::ofstream os(out);
    if (!os) gi::fail(gi::ErrorCode::Io, "cannot write " + out);
    json rows = json::array();
    for (std::size_t i = 0; i < sessions.size(); ++i) {
      const auto rep = gi::replay(sessions[i], runs, rc);
      os << "# session=" << i << " user=" << sessions[i].user_id << "\n";
      gi::write_report_text(rep, os);
      for (const auto& r : rep.rows)
        rows.push_back({{"session", i},
                        {"user", sessions[i].user_id},
                        {"method", gi::to_string(r.method)},
                        {"task", gi::to_string(r.task)},
                        {"selections", r.selections},
                        {"true", r.true_selections},
                        {"false", r.false_selections},
                        {"trials", r.trials},
                        {"completed", r.ttc_s.size()},
                        {"mean_ttc_s", r.mean_ttc()},
                        {"mean_required_dwell_s", r.mean_required_dwell}});
    }
    if (!os) gi::fail(gi::ErrorCode::Io, "failed writing " + out);
    emit({{"command", "replay"}, {"out", out}, {"rows", rows}});
  }
};

struct ServeCmd {
  std::string bind = "127.0.0.1:8765";
  std::string models;
  std::string demo_dir;
  std::size_t threads = 1;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("serve", "Stream the selection engine over WebSocket");
    c->add_option("--bind", bind, "host:port to listen on (port 0 picks a free port)")->capture_default_str();
    c->add_option("--models", models, "Directory of .gzm models, addressed by file stem")->check(CLI::ExistingDirectory);
    c->add_option("--demo-dir", demo_dir, "Static demo bundle served over HTTP")->check(CLI::ExistingDirectory);
    c->add_option("--threads", threads, "I/O threads")->capture_default_str()->check(CLI::PositiveNumber);
    c->callback([this] { run(); });
  }

  void run() const {
    const auto colon = bind.rfind(':');
    if (colon == std::string::npos) gi::fail(gi::ErrorCode::Config, "--bind needs host:port");
    gi::service::ServerOptions opts;
    opts.address = bind.substr(0, colon);
    try {
      const auto port = std::stoul(bind.substr(colon + 1));
      if (port > 65535) throw std::out_of_range("port");
      opts.port = static_cast<unsigned short>(port);
    } catch (const std::exception&) {
      gi::fail(gi::ErrorCode::Config, "bad port in --bind '" + bind + "'");
    }
    opts.demo_dir = demo_dir;
    opts.threads = threads;
    auto registry = std::make_shared<const gi::ModelRegistry>(gi::ModelRegistry::load_dir(models));
    gi::service::Server server(opts, registry);
    server.install_signal_handlers();
    emit({{"command", "serve"}, {"address", opts.address}, {"port", server.port()}, {"models", registry->ids()},
          {"protocol", gi::kProtocolVersion}});
    server.run(true);
  }
};

// Default config file: $GAZEINTENT_CONFIG_DIR/gazeintent.toml, when present.
std::string default_config_file() {
  const char* dir = std::getenv("GAZEINTENT_CONFIG_DIR");
  if (!dir || !*dir) return {};
  const auto p = fs::path(dir) / "gazeintent.toml";
  std::error_code ec;
  return fs::is_regular_file(p, ec) ? p.string() : std::string{};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaze-based selection with intent-scaled dwell time", "gazeintent"};
  app.require_subcommand(1);
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.set_config("--config", default_config_file(), "TOML config file; [subcommand] sections, flags override");
  int verbosity = 0;
  app.add_flag("-v,--verbose", verbosity, "More diagnostics on stderr");

  SimulateCmd simulate;
  ProcessCmd process;
  TrainCmd train, walkforward;
  FinetuneCmd finetune;
  EvalCmd eval;
  ImportanceCmd importance;
  GridCmd grid;
  ReplayCmd replay;
  ServeCmd serve;
  simulate.add(app);
  process.add(app);
  train.add(app, false);
  walkforward.add(app, true);
  finetune.add(app);
  eval.add(app);
  importance.add(app);
  grid.add(app);
  replay.add(app);
  serve.add(app);

  // Resolved configuration of the selected subcommand goes to stderr, as a
  // TOML section that can be fed back through --config.
  app.parse_complete_callback([&] {
    for (auto* sub : app.get_subcommands()) {
      std::cerr << "[" << sub->get_name() << "]\n" << sub->config_to_str(true, false);
      if (auto* seed = sub->get_option_no_throw("--seed"))
        std::cerr << "# seed=" << seed->as<std::uint64_t>() << "\n";
      else
        std::cerr << "# seed=none\n";
    }
  });

  const auto started = std::chrono::steady_clock::now();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  } catch (const gi::Error& e) {
    std::cerr << "gazeintent: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "gazeintent: " << e.what() << "\n";
    return kExitRuntime;
  }
  if (verbosity > 0)
    std::cerr << "# elapsed_s="
              << std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count() << "\n";
  return 0;
}
