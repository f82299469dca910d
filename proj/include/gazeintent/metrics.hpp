#pragma once

// Binary classification metrics: confusion at a threshold, tie-grouped ROC
// and PR curves, trapezoidal areas.

#include <gazeintent/error.hpp>

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace gazeintent {

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  double precision() const { return tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0; }
  double recall() const { return tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0; }
  double f1() const {
    const double p = precision(), r = recall();
    return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
  }
};

inline Confusion confusion(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5) {
  if (scores.size() != labels.size()) fail(ErrorCode::Shape, "scores and labels differ in length");
  Confusion c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    if (labels[i])
      (pred ? c.tp : c.fn)++;
    else
      (pred ? c.fp : c.tn)++;
  }
  return c;
}

inline double f1_score(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5) {
  return confusion(scores, labels, threshold).f1();
}

struct CurvePoint {
  double x = 0.0;
  double y = 0.0;
  double threshold = 0.0;
};

struct Metrics {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  double auc_pr = 0.0, auc_roc = 0.0;
  std::vector<CurvePoint> pr;   // x = recall, y = precision
  std::vector<CurvePoint> roc;  // x = false positive rate, y = true positive rate
  std::size_t n = 0, positives = 0;
  bool degenerate = false;  // single-class input: curves undefined
};

inline double trapezoid(std::span<const CurvePoint> pts) {
  double a = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) a += (pts[i].x - pts[i - 1].x) * (pts[i].y + pts[i - 1].y) * 0.5;
  return a;
}

inline Metrics evaluate_scores(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5) {
  const Confusion c = confusion(scores, labels, threshold);
  Metrics m;
  m.precision = c.precision();
  m.recall = c.recall();
  m.f1 = c.f1();
  m.n = scores.size();
  m.positives = c.tp + c.fn;
  const std::size_t negatives = m.n - m.positives;
  if (m.positives == 0 || negatives == 0) {
    m.degenerate = true;
    return m;
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  const auto P = static_cast<double>(m.positives), N = static_cast<double>(negatives);
  m.roc.push_back({0.0, 0.0, scores[order.front()]});
  double tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == s; ++i) (labels[order[i]] ? tp : fp) += 1.0;
    m.roc.push_back({fp / N, tp / P, s});
    m.pr.push_back({tp / P, tp / (tp + fp), s});
  }
  m.pr.insert(m.pr.begin(), {0.0, m.pr.front().y, m.pr.front().threshold});
  m.auc_roc = trapezoid(m.roc);
  m.auc_pr = trapezoid(m.pr);
  return m;
}

// Two-column "x y" text for external plotting.
inline void save_curve(std::span<const CurvePoint> pts, const std::string& path) {
  std::ofstream os(path);
  if (!os) fail(ErrorCode::Io, "cannot write curve " + path);
  os.precision(17);
  for (const auto& p : pts) os << p.x << ' ' << p.y << '\n';
  if (!os) fail(ErrorCode::Io, "failed writing curve " + path);
}

}  // namespace gazeintent
