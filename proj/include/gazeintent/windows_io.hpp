#pragma once

// Labeled windows file (text, lossless):
//
//   # gazeintent-windows 1
//   # rows=17 cols=11 set=set2 schema=0x... overlap=2 label_interval=1 sg_window=11 sg_order=1
//   # names=disp_abs;disp_h;...
//   user_id,session,task_tag,load_tags,label,start,end_t,v0,...,v{rows*cols-1}
//   <one line per window, values row-major>

#include <gazeintent/dataset.hpp>
#include <gazeintent/error.hpp>
#include <gazeintent/features.hpp>
#include <gazeintent/model_io.hpp>

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace gazeintent {

inline constexpr std::string_view kWindowsVersionLine = "# gazeintent-windows 1";

struct WindowSet {
  FeatureSchema schema;
  std::size_t rows = 0;
  WindowConfig window;  // pipeline that produced the windows
  SignalConfig signal;
  std::vector<LabeledWindow> windows;
};

inline void write_windows(const WindowSet& set, std::ostream& os) {
  using detail::format_double;
  os << kWindowsVersionLine << "\n";
  os << "# rows=" << set.rows << " cols=" << set.schema.count() << " set=" << to_string(set.schema.set_id)
     << " schema=" << hex_hash(set.schema.hash()) << " overlap=" << set.window.overlap
     << " label_interval=" << format_double(set.window.label_interval) << " sg_window=" << set.signal.sg_window
     << " sg_order=" << set.signal.sg_order << "\n";
  os << "# names=";
  for (std::size_t i = 0; i < set.schema.names.size(); ++i) os << (i ? ";" : "") << set.schema.names[i];
  os << "\nuser_id,session,task_tag,load_tags,label,start,end_t,values\n";
  for (const auto& w : set.windows) {
    if (w.rows != set.rows || w.cols != set.schema.count()) fail(ErrorCode::Shape, "window shape differs from its set");
    std::string tags;
    for (auto t : w.load_tags) tags += (tags.empty() ? "" : ";") + std::string(to_string(t));
    os << w.user_id << ',' << w.session << ',' << to_string(w.task_tag) << ',' << tags << ',' << w.label << ','
       << w.start << ',' << format_double(w.end_t);
    for (double v : w.data) os << ',' << format_double(v);
    os << "\n";
  }
}

inline WindowSet read_windows(std::istream& is, const std::string& name = "<windows>") {
  std::string line;
  if (!std::getline(is, line) || line != kWindowsVersionLine)
    fail(ErrorCode::Parse, name + ": not a gazeintent windows file");
  WindowSet set;
  std::size_t cols = 0;
  std::string set_name, hash;
  if (!std::getline(is, line) || line.rfind("# rows=", 0) != 0) fail(ErrorCode::Parse, name + ": missing shape line");
  {
    std::istringstream ls(line.substr(2));
    std::string tok;
    while (ls >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) fail(ErrorCode::Parse, name + ": bad shape token '" + tok + "'");
      const auto key = tok.substr(0, eq), val = tok.substr(eq + 1);
      if (key == "rows") set.rows = std::stoul(val);
      else if (key == "cols") cols = std::stoul(val);
      else if (key == "set") set_name = val;
      else if (key == "schema") hash = val;
      else if (key == "overlap") set.window.overlap = std::stoul(val);
      else if (key == "label_interval") set.window.label_interval = detail::parse_double(val, name);
      else if (key == "sg_window") set.signal.sg_window = std::stoi(val);
      else if (key == "sg_order") set.signal.sg_order = std::stoi(val);
    }
    set.window.window_size = set.rows;
  }
  if (!std::getline(is, line) || line.rfind("# names=", 0) != 0) fail(ErrorCode::Parse, name + ": missing names line");
  std::vector<std::string> names;
  for (auto n : detail::split(std::string_view(line).substr(8), ';')) names.emplace_back(n);
  set.schema = schema_from_names(parse_feature_set(set_name), names);
  if (set.schema.count() != cols) fail(ErrorCode::Parse, name + ": column count does not match names");
  if (hex_hash(set.schema.hash()) != hash)
    fail(ErrorCode::SchemaMismatch, name + ": stored schema hash " + hash + " does not match its names (" +
                                        hex_hash(set.schema.hash()) + ")");
  std::getline(is, line);  // column header
  std::size_t lineno = 4;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto where = name + ":" + std::to_string(lineno);
    const auto f = detail::split(line, ',');
    if (f.size() != 7 + set.rows * cols)
      fail(ErrorCode::Parse, where + ": expected " + std::to_string(7 + set.rows * cols) + " fields");
    LabeledWindow w;
    w.user_id = std::string(f[0]);
    w.session = static_cast<std::size_t>(detail::parse_double(f[1], where));
    w.task_tag = parse_task_tag(f[2]);
    if (!f[3].empty())
      for (auto t : detail::split(f[3], ';')) w.load_tags.insert(parse_load_tag(t));
    w.label = detail::parse_double(f[4], where) != 0.0 ? 1 : 0;
    w.start = static_cast<std::size_t>(detail::parse_double(f[5], where));
    w.end_t = detail::parse_double(f[6], where);
    w.rows = set.rows;
    w.cols = cols;
    w.data.reserve(set.rows * cols);
    for (std::size_t i = 7; i < f.size(); ++i) w.data.push_back(detail::parse_double(f[i], where));
    set.windows.push_back(std::move(w));
  }
  return set;
}

inline void save_windows(const WindowSet& set, const std::string& path) {
  std::ofstream os(path);
  if (!os) fail(ErrorCode::Io, "cannot write windows file " + path);
  write_windows(set, os);
  if (!os) fail(ErrorCode::Io, "failed writing windows file " + path);
}

inline WindowSet load_windows(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorCode::Io, "cannot open windows file " + path);
  return read_windows(is, path);
}

}  // namespace gazeintent
