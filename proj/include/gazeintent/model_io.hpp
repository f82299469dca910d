#pragma once

// Versioned binary model container. All integers little-endian.
//
//   magic          8 bytes  "GZINTENT"
//   version        u32      1
//   input_dim      u32
//   n_layers       u32, then n_layers x u32 units
//   window_size    u32
//   overlap        u32
//   label_interval f64      seconds
//   sg_window      u32
//   sg_order       u32
//   schema_hash    u64      FNV-1a of the manifest text below
//   manifest       u32 length + bytes
//   norm_label     u32 length + bytes
//   norm_cols      u32      0 or input_dim
//   norm_mean      norm_cols x f64
//   norm_scale     norm_cols x f64
//   param_count    u64
//   params         param_count x f32

#include <gazeintent/dataset.hpp>
#include <gazeintent/error.hpp>
#include <gazeintent/features.hpp>
#include <gazeintent/lstm.hpp>
#include <gazeintent/signal.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace gazeintent {

inline constexpr char kModelMagic[8] = {'G', 'Z', 'I', 'N', 'T', 'E', 'N', 'T'};
inline constexpr std::uint32_t kModelVersion = 1;

struct ModelBundle {
  LstmNetwork<double> net;
  FeatureSchema schema;
  NormStats norm;
  WindowConfig window;
  SignalConfig signal;
};

inline std::string hex_hash(std::uint64_t h) {
  std::ostringstream os;
  os << "0x" << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

namespace detail {

class ByteWriter {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(const char* p, std::size_t n) { out_.append(p, n); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  const std::string& data() const { return out_; }

 private:
  std::string out_;
};

class ByteReader {
 public:
  ByteReader(const std::string& data, std::string name) : data_(data), name_(std::move(name)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(data_[pos_++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(static_cast<unsigned char>(data_[pos_++])) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string str() { return bytes(u32()); }
  bool done() const { return pos_ == data_.size(); }
  std::size_t remaining() const { return data_.size() - pos_; }

  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) fail(ErrorCode::Parse, name_ + ": truncated model file at byte " + std::to_string(pos_));
  }

 private:
  const std::string& data_;
  std::string name_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_model(const ModelBundle& m) {
  if (m.schema.count() != m.net.input_dim())
    fail(ErrorCode::Shape, "schema has " + std::to_string(m.schema.count()) + " features, network expects " +
                               std::to_string(m.net.input_dim()));
  detail::ByteWriter w;
  w.bytes(kModelMagic, sizeof kModelMagic);
  w.u32(kModelVersion);
  w.u32(static_cast<std::uint32_t>(m.net.input_dim()));
  w.u32(static_cast<std::uint32_t>(m.net.layer_units().size()));
  for (auto u : m.net.layer_units()) w.u32(static_cast<std::uint32_t>(u));
  w.u32(static_cast<std::uint32_t>(m.window.window_size));
  w.u32(static_cast<std::uint32_t>(m.window.overlap));
  w.f64(m.window.label_interval);
  w.u32(static_cast<std::uint32_t>(m.signal.sg_window));
  w.u32(static_cast<std::uint32_t>(m.signal.sg_order));
  w.u64(m.schema.hash());
  w.str(m.schema.manifest());
  w.str(m.norm.user_id);
  w.u32(static_cast<std::uint32_t>(m.norm.mean.size()));
  for (double v : m.norm.mean) w.f64(v);
  for (double v : m.norm.scale) w.f64(v);
  w.u64(m.net.param_count());
  for (double p : m.net.params()) w.f32(static_cast<float>(p));
  return w.data();
}

// `expected_hash`, when given, must match the stored schema hash.
inline ModelBundle deserialize_model(const std::string& data, const std::string& name = "<model>",
                                     std::optional<std::uint64_t> expected_hash = std::nullopt) {
  detail::ByteReader r(data, name);
  if (r.bytes(sizeof kModelMagic) != std::string(kModelMagic, sizeof kModelMagic))
    fail(ErrorCode::Parse, name + ": not a gazeintent model file");
  const std::uint32_t version = r.u32();
  if (version != kModelVersion)
    fail(ErrorCode::Version, name + ": model format version " + std::to_string(version) + " is not supported");
  const std::size_t input_dim = r.u32();
  const std::uint32_t n_layers = r.u32();
  if (n_layers == 0 || n_layers > 64) fail(ErrorCode::Shape, name + ": bad layer count " + std::to_string(n_layers));
  std::vector<std::size_t> units;
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    units.push_back(r.u32());
    if (units.back() == 0 || units.back() > 65536) fail(ErrorCode::Shape, name + ": bad layer width");
  }
  if (input_dim == 0 || input_dim > 65536) fail(ErrorCode::Shape, name + ": bad input_dim");

  ModelBundle m;
  m.window.window_size = r.u32();
  m.window.overlap = r.u32();
  m.window.label_interval = r.f64();
  m.signal.sg_window = static_cast<int>(r.u32());
  m.signal.sg_order = static_cast<int>(r.u32());
  const std::uint64_t stored_hash = r.u64();
  const std::string manifest = r.str();

  std::istringstream ms(manifest);
  m.schema = read_schema(ms, name);
  if (m.schema.hash() != stored_hash)
    fail(ErrorCode::SchemaMismatch, name + ": stored schema hash " + hex_hash(stored_hash) +
                                        " does not match its manifest (" + hex_hash(m.schema.hash()) + ")");
  if (expected_hash && *expected_hash != stored_hash)
    fail(ErrorCode::SchemaMismatch, name + ": model schema hash " + hex_hash(stored_hash) + " differs from expected " +
                                        hex_hash(*expected_hash));
  if (m.schema.count() != input_dim)
    fail(ErrorCode::Shape, name + ": schema lists " + std::to_string(m.schema.count()) + " features but input_dim is " +
                               std::to_string(input_dim));

  m.norm.user_id = r.str();
  m.norm.split = "train";
  const std::size_t cols = r.u32();
  if (cols != 0 && cols != input_dim) fail(ErrorCode::Shape, name + ": normalization width mismatch");
  r.need(cols * 16);
  for (std::size_t i = 0; i < cols; ++i) m.norm.mean.push_back(r.f64());
  for (std::size_t i = 0; i < cols; ++i) m.norm.scale.push_back(r.f64());

  m.net = LstmNetwork<double>(input_dim, units);
  const std::uint64_t count = r.u64();
  if (count != m.net.param_count())
    fail(ErrorCode::Shape, name + ": " + std::to_string(count) + " parameters stored, layout needs " +
                               std::to_string(m.net.param_count()));
  r.need(count * 4);
  for (auto& p : m.net.params()) p = static_cast<double>(r.f32());
  if (!r.done()) fail(ErrorCode::Parse, name + ": " + std::to_string(r.remaining()) + " trailing bytes");
  m.window.validate();
  m.signal.validate();
  return m;
}

inline void save_model(const ModelBundle& m, const std::string& path) {
  const std::string bytes = serialize_model(m);
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorCode::Io, "cannot write model " + path);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) fail(ErrorCode::Io, "failed writing model " + path);
}

inline ModelBundle load_model(const std::string& path, std::optional<std::uint64_t> expected_hash = std::nullopt) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::Io, "cannot open model " + path);
  const std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes, path, expected_hash);
}

}  // namespace gazeintent
