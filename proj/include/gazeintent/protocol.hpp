#pragma once

// Wire protocol of the streaming service, independent of the transport.
// Newline-delimited JSON; one engine per connection.
//
//   server -> {"type":"hello","protocol":1}                       on connect
//   client -> {"type":"sample","t":ms,"dir":[x,y,z],"object_id":"a"}
//   client -> {"type":"configure","method":"gazeintent","task":"circle","model_id":"general"}
//   server -> {"type":"state","t":ms,"probability":p,"prediction":0|1,"s_f":..,"dwell_required":s,"dwell_accum":s}
//   server -> {"type":"selection","t":ms,"object_id":"a","dwell":s,"required":s}
//   server -> {"type":"error","code":"bad_sample","detail":"..."}
//
// Error codes: bad_message, bad_sample, time_regression, unknown_model, bad_config.

#include <gazeintent/engine.hpp>
#include <gazeintent/error.hpp>
#include <gazeintent/model_io.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gazeintent {

inline constexpr int kProtocolVersion = 1;

// Models keyed by file stem; loaded and schema-verified up front, then shared
// read-only between connections.
class ModelRegistry {
 public:
  void add(const std::string& id, ModelBundle model) {
    models_[id] = std::make_shared<const ModelBundle>(std::move(model));
  }

  static ModelRegistry load_dir(const std::string& dir) {
    ModelRegistry r;
    if (dir.empty()) return r;
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec)) fail(ErrorCode::Io, "model directory " + dir + " does not exist");
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
      if (entry.is_regular_file() && entry.path().extension() == ".gzm") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& p : files) r.add(p.stem().string(), load_model(p.string()));
    return r;
  }

  std::shared_ptr<const ModelBundle> find(const std::string& id) const {
    auto it = models_.find(id);
    return it == models_.end() ? nullptr : it->second;
  }
  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    for (const auto& [id, _] : models_) out.push_back(id);
    return out;
  }

 private:
  std::map<std::string, std::shared_ptr<const ModelBundle>> models_;
};

namespace wire {

inline std::string hello() { return nlohmann::json{{"type", "hello"}, {"protocol", kProtocolVersion}}.dump(); }

inline std::string error(std::string_view code, std::string_view detail) {
  return nlohmann::json{{"type", "error"}, {"code", code}, {"detail", detail}}.dump();
}

inline std::string state(const EngineOutput& o) {
  nlohmann::json j{{"type", "state"}, {"t", o.t}};
  if (o.probability) j["probability"] = *o.probability;
  if (o.prediction) j["prediction"] = *o.prediction;
  j["s_f"] = o.s_f;
  j["dwell_required"] = o.dwell_required;
  j["dwell_accum"] = o.dwell_accum;
  return j.dump();
}

inline std::string selection(const Selection& s) {
  return nlohmann::json{
      {"type", "selection"}, {"t", s.t}, {"object_id", s.object_id}, {"dwell", s.dwell}, {"required", s.required}}
      .dump();
}

}  // namespace wire

class Connection {
 public:
  explicit Connection(std::shared_ptr<const ModelRegistry> registry = nullptr)
      : registry_(registry ? std::move(registry) : std::make_shared<const ModelRegistry>()),
        engine_(std::make_unique<IntentEngine>(EngineConfig{})) {}

  const EngineConfig& config() const { return engine_->config(); }

  // Several lines may arrive in one transport message.
  std::vector<std::string> handle_text(std::string_view text) {
    std::vector<std::string> out;
    while (!text.empty()) {
      const auto nl = text.find('\n');
      std::string_view line = text.substr(0, nl);
      text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
      handle_line(line, out);
    }
    return out;
  }

 private:
  void handle_line(std::string_view line, std::vector<std::string>& out) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      out.push_back(wire::error("bad_message", "not valid JSON"));
      return;
    }
    if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
      out.push_back(wire::error("bad_message", "message needs a string 'type'"));
      return;
    }
    const auto type = j["type"].get<std::string>();
    if (type == "sample")
      on_sample(j, out);
    else if (type == "configure")
      on_configure(j, out);
    else
      out.push_back(wire::error("bad_message", "unknown message type '" + type + "'"));
  }

  void on_sample(const nlohmann::json& j, std::vector<std::string>& out) {
    GazeSample s;
    if (!j.contains("t") || !j["t"].is_number() || !std::isfinite(j["t"].get<double>())) {
      out.push_back(wire::error("bad_sample", "sample needs a finite numeric 't'"));
      return;
    }
    s.t = j["t"].get<double>();
    const auto& d = j.contains("dir") ? j["dir"] : nlohmann::json();
    if (!d.is_array() || d.size() != 3 || !d[0].is_number() || !d[1].is_number() || !d[2].is_number()) {
      out.push_back(wire::error("bad_sample", "sample needs 'dir' as three numbers"));
      return;
    }
    s.dir = {d[0].get<double>(), d[1].get<double>(), d[2].get<double>()};
    const double n = norm(s.dir);
    if (!std::isfinite(n) || std::abs(n - 1.0) > 1e-3) {
      out.push_back(wire::error("bad_sample", "direction norm " + std::to_string(n) + " is not 1"));
      return;
    }
    if (j.contains("object_id") && !j["object_id"].is_null()) {
      if (!j["object_id"].is_string()) {
        out.push_back(wire::error("bad_sample", "'object_id' must be a string"));
        return;
      }
      s.object_id = j["object_id"].get<std::string>();
    }
    if (has_t_ && !(s.t > last_t_)) {
      out.push_back(wire::error("time_regression", "t=" + detail::format_double(s.t) + " does not advance past " +
                                                       detail::format_double(last_t_)));
      return;
    }
    try {
      auto o = engine_->step(s);
      has_t_ = true;
      last_t_ = s.t;
      out.push_back(wire::state(o));
      if (o.selection) out.push_back(wire::selection(*o.selection));
    } catch (const Error& e) {
      out.push_back(wire::error("bad_sample", e.what()));
    }
  }

  void on_configure(const nlohmann::json& j, std::vector<std::string>& out) {
    try {
      EngineConfig cfg;
      if (j.contains("method")) cfg.method = parse_method(j["method"].get<std::string>());
      if (j.contains("task")) cfg.task = parse_task(j["task"].get<std::string>());
      if (j.contains("static_dwell") && !j["static_dwell"].is_null()) cfg.static_dwell = j["static_dwell"].get<double>();
      std::shared_ptr<const ModelBundle> model;
      if (j.contains("model_id") && !j["model_id"].is_null()) {
        const auto id = j["model_id"].get<std::string>();
        model = registry_->find(id);
        if (!model) {
          out.push_back(wire::error("unknown_model", "no model '" + id + "'"));
          return;
        }
      }
      if (uses_model(cfg.method) && !model) {
        out.push_back(wire::error("bad_config", std::string("method ") + to_string(cfg.method) + " needs a model_id"));
        return;
      }
      auto engine = std::make_unique<IntentEngine>(IntentEngine::from_model(cfg, model));
      engine_ = std::move(engine);
      has_t_ = false;
      EngineOutput o;
      o.t = last_t_;
      o.dwell_required = engine_->required_dwell();
      out.push_back(wire::state(o));
    } catch (const nlohmann::json::exception& e) {
      out.push_back(wire::error("bad_config", e.what()));
    } catch (const Error& e) {
      out.push_back(wire::error("bad_config", e.what()));
    }
  }

  std::shared_ptr<const ModelRegistry> registry_;
  std::unique_ptr<IntentEngine> engine_;
  bool has_t_ = false;
  double last_t_ = 0.0;
};

}  // namespace gazeintent
