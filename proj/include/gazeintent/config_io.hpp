#pragma once

// Engine configuration file: versioned JSON.
//
//   {"version": 1, "method": "gazeintent", "task": "circle", "static_dwell": 0.3,
//    "thresholds": [0.05, 0.10, 0.15, 0.70], "binarize_thresh": 0.5, "cap_factor": 2.0,
//    "model": "models/general.gzm"}
//
// Everything except "version" is optional; relative model paths resolve
// against the file's directory.

#include <gazeintent/engine.hpp>
#include <gazeintent/error.hpp>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

namespace gazeintent {

inline constexpr int kEngineConfigVersion = 1;

struct EngineFile {
  EngineConfig engine;
  std::optional<std::string> model_path;
};

inline nlohmann::json to_json(const EngineFile& f) {
  const auto& e = f.engine;
  nlohmann::json j{{"version", kEngineConfigVersion},
                   {"method", to_string(e.method)},
                   {"task", to_string(e.task)},
                   {"static_dwell", e.dwell()},
                   {"thresholds", {e.thresholds.t_n, e.thresholds.t_n1, e.thresholds.t_n2, e.thresholds.t_n3}},
                   {"binarize_thresh", e.binarize_thresh},
                   {"cap_factor", e.cap_factor}};
  if (f.model_path) j["model"] = *f.model_path;
  return j;
}

inline EngineFile engine_file_from_json(const nlohmann::json& j, const std::string& name = "<config>") {
  auto where = [&](const std::string& key) { return name + ": field '" + key + "'"; };
  if (!j.is_object()) fail(ErrorCode::Config, name + ": engine config must be a JSON object");
  if (!j.contains("version") || !j["version"].is_number_integer())
    fail(ErrorCode::Config, name + ": missing integer 'version'");
  if (j["version"].get<int>() != kEngineConfigVersion)
    fail(ErrorCode::Version, name + ": engine config version " + std::to_string(j["version"].get<int>()) +
                                 " is not supported");
  static const char* known[] = {"version", "method", "task", "static_dwell", "thresholds", "binarize_thresh",
                                "cap_factor", "model"};
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) fail(ErrorCode::Config, name + ": unknown field '" + key + "'");
  }
  try {
    EngineFile f;
    auto& e = f.engine;
    if (j.contains("method")) e.method = parse_method(j["method"].get<std::string>());
    if (j.contains("task")) e.task = parse_task(j["task"].get<std::string>());
    if (j.contains("static_dwell")) e.static_dwell = j["static_dwell"].get<double>();
    if (j.contains("thresholds")) {
      const auto& t = j["thresholds"];
      if (!t.is_array() || t.size() != 4) fail(ErrorCode::Config, where("thresholds") + " must list 4 weights");
      e.thresholds = {t[0].get<double>(), t[1].get<double>(), t[2].get<double>(), t[3].get<double>()};
    }
    if (j.contains("binarize_thresh")) e.binarize_thresh = j["binarize_thresh"].get<double>();
    if (j.contains("cap_factor")) e.cap_factor = j["cap_factor"].get<double>();
    if (j.contains("model")) f.model_path = j["model"].get<std::string>();
    e.validate();
    return f;
  } catch (const nlohmann::json::exception& ex) {
    fail(ErrorCode::Config, name + ": " + ex.what());
  }
}

inline EngineFile load_engine_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorCode::Io, "cannot open engine config " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& ex) {
    fail(ErrorCode::Parse, path + ": " + ex.what());
  }
  EngineFile f = engine_file_from_json(j, path);
  if (f.model_path && std::filesystem::path(*f.model_path).is_relative())
    f.model_path = (std::filesystem::path(path).parent_path() / *f.model_path).string();
  return f;
}

inline void save_engine_file(const EngineFile& f, const std::string& path) {
  std::ofstream os(path);
  if (!os) fail(ErrorCode::Io, "cannot write engine config " + path);
  os << to_json(f).dump(2) << "\n";
}

}  // namespace gazeintent
