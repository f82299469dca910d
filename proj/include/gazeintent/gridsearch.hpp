#pragma once

// Preprocessing/windowing configuration search ranked by validation F1.

#include <gazeintent/dataset.hpp>
#include <gazeintent/error.hpp>
#include <gazeintent/features.hpp>
#include <gazeintent/pipeline.hpp>

#include <algorithm>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace gazeintent {

struct GridSpace {
  std::vector<std::size_t> windows{13, 15, 17, 19};
  std::vector<int> sg_orders{1, 2};
  std::vector<int> sg_windows{7, 9, 11};
  std::vector<double> label_intervals{0.5, 0.75, 1.0, 1.25};
  std::vector<std::size_t> overlaps{0, 1, 2};

  std::size_t size() const {
    return windows.size() * sg_orders.size() * sg_windows.size() * label_intervals.size() * overlaps.size();
  }
  void validate() const {
    if (size() == 0) fail(ErrorCode::Config, "grid space is empty");
  }
};

struct GridConfig {
  std::size_t id = 0;
  std::size_t window = 17;
  std::size_t overlap = 2;
  int sg_window = 11;
  int sg_order = 1;
  double label_interval = 1.0;

  bool operator==(const GridConfig&) const = default;
};

// Order: window, then SG order, SG size, label interval, overlap (innermost).
inline std::vector<GridConfig> enumerate(const GridSpace& space) {
  space.validate();
  std::vector<GridConfig> out;
  out.reserve(space.size());
  for (auto w : space.windows)
    for (int order : space.sg_orders)
      for (int sgw : space.sg_windows)
        for (double li : space.label_intervals)
          for (auto ov : space.overlaps) out.push_back({out.size(), w, ov, sgw, order, li});
  return out;
}

struct GridOptions {
  GeneralConfig general;
  FeatureSet feature_set = FeatureSet::Set2_ContinuousPlusBooleans11;
  IvtConfig ivt;
  SignalConfig signal;  // outlier threshold and nominal rate; SG settings come from the grid
};

struct GridResult {
  GridConfig config;
  FeatureSet feature_set = FeatureSet::Set2_ContinuousPlusBooleans11;
  double val_f1 = 0.0;
  double test_f1 = 0.0;
  double auc_pr = 0.0;
  double auc_roc = 0.0;
};

inline PipelineConfig pipeline_for(const GridConfig& g, const GridOptions& opt) {
  PipelineConfig pc;
  pc.signal = opt.signal;
  pc.signal.sg_window = g.sg_window;
  pc.signal.sg_order = g.sg_order;
  pc.ivt = opt.ivt;
  pc.window = {g.window, g.overlap, g.label_interval};
  pc.schema = make_schema(opt.feature_set);
  return pc;
}

inline GridResult evaluate_config(std::span<const Session> sessions, const GridConfig& g, const GridOptions& opt) {
  const auto pc = pipeline_for(g, opt);
  auto r = train_general(dataset_windows(sessions, pc), opt.general);
  return {g, opt.feature_set, r.val.f1, r.test.f1, r.test.auc_pr, r.test.auc_roc};
}

// Evaluates the first `budget` configurations (0 = all), sorted by validation
// F1 descending with ties broken by enumeration index.
inline std::vector<GridResult> grid_search(std::span<const Session> sessions, const GridSpace& space, std::size_t budget,
                                           const GridOptions& opt) {
  auto configs = enumerate(space);
  if (budget > 0 && budget < configs.size()) configs.resize(budget);
  std::vector<GridResult> results;
  results.reserve(configs.size());
  for (const auto& g : configs) results.push_back(evaluate_config(sessions, g, opt));
  std::sort(results.begin(), results.end(), [](const GridResult& a, const GridResult& b) {
    return a.val_f1 != b.val_f1 ? a.val_f1 > b.val_f1 : a.config.id < b.config.id;
  });
  return results;
}

inline constexpr std::string_view kGridHeader =
    "config_id,window,overlap,sg_window,sg_order,label_interval,feature_set,val_f1,test_f1,auc_pr,auc_roc";

inline void write_grid_results(std::span<const GridResult> results, std::ostream& os) {
  using detail::format_double;
  os << kGridHeader << "\n";
  for (const auto& r : results)
    os << r.config.id << ',' << r.config.window << ',' << r.config.overlap << ',' << r.config.sg_window << ','
       << r.config.sg_order << ',' << format_double(r.config.label_interval) << ',' << to_string(r.feature_set) << ','
       << format_double(r.val_f1) << ',' << format_double(r.test_f1) << ',' << format_double(r.auc_pr) << ','
       << format_double(r.auc_roc) << "\n";
}

}  // namespace gazeintent
