#pragma once

// Stacked LSTM with a dense sigmoid head. All parameters live in one flat
// vector so optimizers, gradient checks and serialization see a single span.
//
// Per layer (gate rows ordered input, forget, candidate, output):
//   W  4H x in   column-major
//   U  4H x H    column-major
//   b  4H
// followed by the dense head weights (H_last) and bias (1).

#include <gazeintent/dataset.hpp>
#include <gazeintent/error.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace gazeintent {

namespace detail {

// Portable draws; the standard distributions are not reproducible across
// library implementations.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do x = rng();
  while (x >= limit);
  return static_cast<std::size_t>(x % n);
}

template <typename It>
void shuffle(It first, It last, std::mt19937_64& rng) {
  for (auto n = static_cast<std::size_t>(last - first); n > 1; --n) std::swap(first[n - 1], first[uniform_index(rng, n)]);
}

}  // namespace detail

inline constexpr double kProbClamp = 1e-7;

template <typename Scalar = double>
class LstmNetwork {
 public:
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using RowVec = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  struct LayerSlots {
    std::size_t in = 0, units = 0;
    std::size_t w = 0, u = 0, b = 0;  // offsets into the parameter vector
  };

  // Packed batch: column t*batch + j holds window j at time step t.
  struct Batch {
    Mat x;
    std::size_t steps = 0, size = 0;
  };

  struct LayerCache {
    Mat gates;  // 4H x TB, activated
    Mat c, tanh_c, h;
  };

  struct Cache {
    std::vector<LayerCache> layers;
    RowVec z, p;
  };

  LstmNetwork() = default;

  LstmNetwork(std::size_t input_dim, std::vector<std::size_t> layer_units)
      : input_dim_(input_dim), units_(std::move(layer_units)) {
    if (input_dim_ == 0) fail(ErrorCode::InvalidInput, "input_dim must be positive");
    if (units_.empty()) fail(ErrorCode::InvalidInput, "at least one LSTM layer is required");
    std::size_t off = 0, in = input_dim_;
    for (std::size_t h : units_) {
      if (h == 0) fail(ErrorCode::InvalidInput, "layer units must be positive");
      LayerSlots s{in, h, off, off + 4 * h * in, off + 4 * h * in + 4 * h * h};
      off = s.b + 4 * h;
      slots_.push_back(s);
      in = h;
    }
    dense_w_ = off;
    dense_b_ = off + in;
    params_.assign(dense_b_ + 1, Scalar(0));
  }

  static LstmNetwork initialized(std::size_t input_dim, std::vector<std::size_t> layer_units, std::uint64_t seed) {
    LstmNetwork net(input_dim, std::move(layer_units));
    net.initialize(seed);
    return net;
  }

  // uniform(-k, k), k = 1/sqrt(fan_in); forget-gate bias 1.
  void initialize(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto draw = [&](std::size_t from, std::size_t to, double k) {
      for (std::size_t i = from; i < to; ++i) params_[i] = static_cast<Scalar>((2.0 * detail::unit_uniform(rng) - 1.0) * k);
    };
    for (const auto& s : slots_) {
      const double k = 1.0 / std::sqrt(static_cast<double>(s.in + s.units));
      draw(s.w, s.b + 4 * s.units, k);
      for (std::size_t r = 0; r < s.units; ++r) params_[s.b + s.units + r] = Scalar(1);
    }
    draw(dense_w_, dense_b_ + 1, 1.0 / std::sqrt(static_cast<double>(units_.back())));
  }

  std::size_t input_dim() const { return input_dim_; }
  const std::vector<std::size_t>& layer_units() const { return units_; }
  std::size_t param_count() const { return params_.size(); }
  std::span<Scalar> params() { return params_; }
  std::span<const Scalar> params() const { return params_; }
  const std::vector<LayerSlots>& slots() const { return slots_; }

  bool operator==(const LstmNetwork& o) const {
    return input_dim_ == o.input_dim_ && units_ == o.units_ && params_ == o.params_;
  }

  // Rounds every parameter through 32-bit float, as stored on disk.
  void quantize_to_float() {
    for (auto& p : params_) p = static_cast<Scalar>(static_cast<float>(p));
  }

  template <typename Win>
  Batch pack(std::span<const Win* const> windows) const {
    if (windows.empty()) fail(ErrorCode::InvalidInput, "empty batch");
    Batch b;
    b.size = windows.size();
    b.steps = windows.front()->rows;
    b.x.resize(static_cast<Eigen::Index>(input_dim_), static_cast<Eigen::Index>(b.steps * b.size));
    for (std::size_t j = 0; j < b.size; ++j) {
      const Window& w = *windows[j];
      if (w.cols != input_dim_ || w.rows != b.steps || w.data.size() != w.rows * w.cols)
        fail(ErrorCode::Shape, "window is " + std::to_string(w.rows) + "x" + std::to_string(w.cols) + ", network expects " +
                                   std::to_string(b.steps) + "x" + std::to_string(input_dim_));
      for (std::size_t t = 0; t < b.steps; ++t)
        for (std::size_t c = 0; c < input_dim_; ++c)
          b.x(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t * b.size + j)) = static_cast<Scalar>(w.at(t, c));
    }
    return b;
  }

  Cache forward(const Batch& batch) const {
    Cache cache;
    cache.layers.reserve(slots_.size());
    const auto B = static_cast<Eigen::Index>(batch.size);
    const Mat* input = &batch.x;
    for (const auto& s : slots_) {
      const auto H = static_cast<Eigen::Index>(s.units);
      LayerCache lc;
      lc.gates = W(s) * (*input);
      lc.gates.colwise() += b(s);
      lc.c.resize(H, input->cols());
      lc.tanh_c.resize(H, input->cols());
      lc.h.resize(H, input->cols());
      Mat h_prev = Mat::Zero(H, B), c_prev = Mat::Zero(H, B);
      for (std::size_t t = 0; t < batch.steps; ++t) {
        const Eigen::Index col = static_cast<Eigen::Index>(t) * B;
        auto g = lc.gates.middleCols(col, B);
        g.noalias() += U(s) * h_prev;
        g.topRows(2 * H) = sigmoid(g.topRows(2 * H));
        g.middleRows(2 * H, H) = g.middleRows(2 * H, H).array().tanh().matrix();
        g.bottomRows(H) = sigmoid(g.bottomRows(H));
        auto c = lc.c.middleCols(col, B);
        c = g.middleRows(H, H).cwiseProduct(c_prev) + g.topRows(H).cwiseProduct(g.middleRows(2 * H, H));
        lc.tanh_c.middleCols(col, B) = c.array().tanh().matrix();
        lc.h.middleCols(col, B) = g.bottomRows(H).cwiseProduct(lc.tanh_c.middleCols(col, B));
        h_prev = lc.h.middleCols(col, B);
        c_prev = c;
      }
      cache.layers.push_back(std::move(lc));
      input = &cache.layers.back().h;
    }
    const Mat& top = cache.layers.back().h;
    cache.z = dense_w().transpose() * top.rightCols(B);
    cache.z.array() += params_[dense_b_];
    cache.p = sigmoid(cache.z);
    return cache;
  }

  template <typename Win>
  std::vector<Scalar> predict(std::span<const Win* const> windows) const {
    const Cache c = forward(pack(windows));
    return {c.p.data(), c.p.data() + c.p.size()};
  }

  Scalar predict(const Window& w) const {
    const Window* p = &w;
    return predict(std::span<const Window* const>(&p, 1)).front();
  }

  // Mean weighted binary cross-entropy with probabilities clamped to
  // [1e-7, 1 - 1e-7]. `weights` holds one weight per batch element.
  static Scalar loss(const RowVec& p, std::span<const int> labels, std::span<const Scalar> weights) {
    Scalar sum = 0;
    for (Eigen::Index j = 0; j < p.size(); ++j) {
      const Scalar pc = std::clamp(p(j), Scalar(kProbClamp), Scalar(1 - kProbClamp));
      const auto k = static_cast<std::size_t>(j);
      sum -= weights[k] * (labels[k] ? std::log(pc) : std::log(1 - pc));
    }
    return sum / static_cast<Scalar>(p.size());
  }

  Scalar loss(const Batch& batch, std::span<const int> labels, std::span<const Scalar> weights) const {
    return loss(forward(batch).p, labels, weights);
  }

  // Backpropagation through time; writes d(loss)/d(params) into grad and
  // returns the loss.
  Scalar loss_and_gradient(const Batch& batch, std::span<const int> labels, std::span<const Scalar> weights,
                           std::span<Scalar> grad) const {
    if (labels.size() != batch.size || weights.size() != batch.size) fail(ErrorCode::Shape, "labels/weights vs batch size");
    if (grad.size() != params_.size()) fail(ErrorCode::Shape, "gradient buffer size");
    const Cache cache = forward(batch);
    const auto B = static_cast<Eigen::Index>(batch.size);
    std::fill(grad.begin(), grad.end(), Scalar(0));

    RowVec dz(B);
    for (Eigen::Index j = 0; j < B; ++j) {
      const auto k = static_cast<std::size_t>(j);
      const Scalar p = cache.p(j);
      const bool inside = p > Scalar(kProbClamp) && p < Scalar(1 - kProbClamp);
      dz(j) = inside ? weights[k] * (p - static_cast<Scalar>(labels[k])) / static_cast<Scalar>(B) : Scalar(0);
    }
    const Mat& top = cache.layers.back().h;
    Eigen::Map<Vec>(grad.data() + dense_w_, static_cast<Eigen::Index>(units_.back())) = top.rightCols(B) * dz.transpose();
    grad[dense_b_] = dz.sum();

    const auto T = static_cast<Eigen::Index>(batch.steps);
    Mat dh_in = Mat::Zero(static_cast<Eigen::Index>(units_.back()), T * B);
    dh_in.rightCols(B) = dense_w() * dz;

    for (std::size_t l = slots_.size(); l-- > 0;) {
      const auto& s = slots_[l];
      const auto& lc = cache.layers[l];
      const Mat& x = l == 0 ? batch.x : cache.layers[l - 1].h;
      const auto H = static_cast<Eigen::Index>(s.units);
      Mat dgates(4 * H, T * B);
      Mat dh_next = Mat::Zero(H, B), dc_next = Mat::Zero(H, B);
      auto dU = Eigen::Map<Mat>(grad.data() + s.u, 4 * H, H);
      for (Eigen::Index t = T; t-- > 0;) {
        const Eigen::Index col = t * B;
        const auto g = lc.gates.middleCols(col, B);
        const auto i = g.topRows(H).array(), f = g.middleRows(H, H).array(), gg = g.middleRows(2 * H, H).array(),
                   o = g.bottomRows(H).array();
        const auto tc = lc.tanh_c.middleCols(col, B).array();
        const Mat dh = dh_in.middleCols(col, B) + dh_next;
        const Mat dc = (dc_next.array() + dh.array() * o * (1 - tc * tc)).matrix();
        auto dg = dgates.middleCols(col, B);
        dg.topRows(H) = (dc.array() * gg * i * (1 - i)).matrix();
        if (t > 0)
          dg.middleRows(H, H) = (dc.array() * lc.c.middleCols(col - B, B).array() * f * (1 - f)).matrix();
        else
          dg.middleRows(H, H).setZero();
        dg.middleRows(2 * H, H) = (dc.array() * i * (1 - gg * gg)).matrix();
        dg.bottomRows(H) = (dh.array() * tc * o * (1 - o)).matrix();
        dc_next = (dc.array() * f).matrix();
        if (t > 0) dU.noalias() += dg * lc.h.middleCols(col - B, B).transpose();
        dh_next.noalias() = U(s).transpose() * dg;
      }
      Eigen::Map<Mat>(grad.data() + s.w, 4 * H, static_cast<Eigen::Index>(s.in)).noalias() = dgates * x.transpose();
      Eigen::Map<Vec>(grad.data() + s.b, 4 * H) = dgates.rowwise().sum();
      if (l > 0) dh_in.noalias() = W(s).transpose() * dgates;
    }
    return loss(cache.p, labels, weights);
  }

 private:
  template <typename Derived>
  static auto sigmoid(const Eigen::MatrixBase<Derived>& x) {
    return (Scalar(1) / (Scalar(1) + (-x.array()).exp())).matrix();
  }

  Eigen::Map<const Mat> W(const LayerSlots& s) const {
    return {params_.data() + s.w, static_cast<Eigen::Index>(4 * s.units), static_cast<Eigen::Index>(s.in)};
  }
  Eigen::Map<const Mat> U(const LayerSlots& s) const {
    return {params_.data() + s.u, static_cast<Eigen::Index>(4 * s.units), static_cast<Eigen::Index>(s.units)};
  }
  Eigen::Map<const Vec> b(const LayerSlots& s) const {
    return {params_.data() + s.b, static_cast<Eigen::Index>(4 * s.units)};
  }
  Eigen::Map<const Vec> dense_w() const {
    return {params_.data() + dense_w_, static_cast<Eigen::Index>(units_.back())};
  }

  std::size_t input_dim_ = 0;
  std::vector<std::size_t> units_;
  std::vector<LayerSlots> slots_;
  std::size_t dense_w_ = 0, dense_b_ = 0;
  std::vector<Scalar> params_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename Scalar = double>
class Adam {
 public:
  Adam() = default;
  explicit Adam(AdamConfig config) : cfg_(config) {}

  void update(std::span<Scalar> params, std::span<const Scalar> grad) {
    if (m_.size() != params.size()) {
      m_.assign(params.size(), Scalar(0));
      v_.assign(params.size(), Scalar(0));
      step_ = 0;
    }
    ++step_;
    const Scalar b1 = static_cast<Scalar>(cfg_.beta1), b2 = static_cast<Scalar>(cfg_.beta2);
    const Scalar c1 = 1 - std::pow(b1, static_cast<Scalar>(step_)), c2 = 1 - std::pow(b2, static_cast<Scalar>(step_));
    const Scalar lr = static_cast<Scalar>(cfg_.lr), eps = static_cast<Scalar>(cfg_.eps);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = b1 * m_[i] + (1 - b1) * grad[i];
      v_[i] = b2 * v_[i] + (1 - b2) * grad[i] * grad[i];
      params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps);
    }
  }

  std::size_t steps() const { return step_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::vector<Scalar> m_, v_;
  std::size_t step_ = 0;
};

}  // namespace gazeintent
