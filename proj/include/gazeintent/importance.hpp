#pragma once

// Permutation feature importance: mean F1 drop when one feature column is
// shuffled across windows (all time steps of a window move together).

#include <gazeintent/dataset.hpp>
#include <gazeintent/error.hpp>
#include <gazeintent/lstm.hpp>
#include <gazeintent/metrics.hpp>
#include <gazeintent/training.hpp>

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace gazeintent {

struct FeatureInfluence {
  std::string feature;
  std::size_t column = 0;
  double influence = 0.0;
};

using WindowScorer = std::function<std::vector<double>(std::span<const LabeledWindow>)>;

// Ranked descending by influence, ties by column.
inline std::vector<FeatureInfluence> feature_importance(const WindowScorer& score, std::span<const LabeledWindow> windows,
                                                        std::span<const std::string> names, std::size_t n_repeats,
                                                        std::uint64_t seed = 1, double threshold = 0.5) {
  if (n_repeats < 1) fail(ErrorCode::Config, "n_repeats must be at least 1");
  if (windows.empty()) fail(ErrorCode::InvalidInput, "no windows for feature importance");
  const std::size_t cols = windows.front().cols;
  if (names.size() != cols)
    fail(ErrorCode::Shape, std::to_string(names.size()) + " feature names for " + std::to_string(cols) + " columns");
  const auto labels = labels_of(windows);
  const double base = f1_score(score(windows), labels, threshold);

  std::mt19937_64 rng(seed);
  std::vector<LabeledWindow> work(windows.begin(), windows.end());
  std::vector<std::size_t> perm(windows.size());
  std::vector<FeatureInfluence> out;
  for (std::size_t c = 0; c < cols; ++c) {
    double drop = 0.0;
    for (std::size_t rep = 0; rep < n_repeats; ++rep) {
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      detail::shuffle(perm.begin(), perm.end(), rng);
      for (std::size_t i = 0; i < work.size(); ++i)
        for (std::size_t r = 0; r < work[i].rows; ++r) work[i].at(r, c) = windows[perm[i]].at(r, c);
      drop += base - f1_score(score(work), labels, threshold);
    }
    for (std::size_t i = 0; i < work.size(); ++i)
      for (std::size_t r = 0; r < work[i].rows; ++r) work[i].at(r, c) = windows[i].at(r, c);
    out.push_back({names[c], c, drop / static_cast<double>(n_repeats)});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const FeatureInfluence& a, const FeatureInfluence& b) { return a.influence > b.influence; });
  return out;
}

template <typename S>
std::vector<FeatureInfluence> feature_importance(const LstmNetwork<S>& net, std::span<const LabeledWindow> windows,
                                                 std::span<const std::string> names, std::size_t n_repeats,
                                                 std::uint64_t seed = 1, double threshold = 0.5) {
  const WindowScorer score = [&net](std::span<const LabeledWindow> ws) { return predict_all(net, ws); };
  return feature_importance(score, windows, names, n_repeats, seed, threshold);
}

}  // namespace gazeintent
