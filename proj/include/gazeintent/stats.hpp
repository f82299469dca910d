#pragma once

#include <gazeintent/error.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace gazeintent {

// Mean, median, mode, standard deviation, skewness, kurtosis.
struct M3S2DK {
  double mean = 0.0;
  double median = 0.0;
  double mode = 0.0;
  double std_dev = 0.0;   // population
  double skewness = 0.0;  // Fisher, 0 when n < 3
  double kurtosis = 0.0;  // excess, 0 when n < 4

  static constexpr std::size_t kCount = 6;
};

// Half-sample mode of sorted data: repeatedly keep the half-width subrange
// with the smallest spread.
inline double half_sample_mode(std::span<const double> sorted) {
  std::size_t lo = 0, n = sorted.size();
  if (n == 0) fail(ErrorCode::InvalidInput, "mode of empty sequence");
  while (n > 3) {
    const std::size_t h = (n + 1) / 2;
    std::size_t best = lo;
    double best_w = sorted[lo + h - 1] - sorted[lo];
    for (std::size_t i = lo + 1; i + h <= lo + n; ++i) {
      const double w = sorted[i + h - 1] - sorted[i];
      if (w < best_w) best_w = w, best = i;
    }
    lo = best;
    n = h;
  }
  if (n == 1) return sorted[lo];
  if (n == 2) return 0.5 * (sorted[lo] + sorted[lo + 1]);
  const double left = sorted[lo + 1] - sorted[lo];
  const double right = sorted[lo + 2] - sorted[lo + 1];
  if (left < right) return 0.5 * (sorted[lo] + sorted[lo + 1]);
  if (right < left) return 0.5 * (sorted[lo + 1] + sorted[lo + 2]);
  return sorted[lo + 1];
}

inline M3S2DK stats_m3s2dk(std::span<const double> values) {
  if (values.empty()) fail(ErrorCode::InvalidInput, "statistics of empty sequence");
  const auto n = static_cast<double>(values.size());
  M3S2DK s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / n;

  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  s.median = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  s.mode = half_sample_mode(sorted);

  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : values) {
    const double d = v - s.mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n, m3 /= n, m4 /= n;
  s.std_dev = std::sqrt(m2);
  // relative floor keeps round-off on constant input from producing huge moments
  const bool flat = !(m2 > 1e-24 * std::max(1.0, s.mean * s.mean));
  if (values.size() >= 3 && !flat) s.skewness = m3 / std::pow(m2, 1.5);
  if (values.size() >= 4 && !flat) s.kurtosis = m4 / (m2 * m2) - 3.0;
  return s;
}

}  // namespace gazeintent
