#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pcrd::filter {

struct FilterConfig {
  int alpha = 20;       // early-window length
  int beta = 40;        // late-window length
  double v_th = 0.5;    // volatility threshold
  int curve_length = 100;  // L

  void check() const;
};

struct CurveStats {
  double early_mean = 0.0;  // J^em
  double late_mean = 0.0;   // J^lm
  double early_std = 0.0;   // J^ev (population)
  double late_std = 0.0;    // J^lv (population)
  int slope_sign = 0;       // sign of the least-squares slope
  bool pass_mean = false;
  bool pass_std = false;
  bool pass_slope = false;
  bool pass_all = false;
  double max_value = 0.0;   // max_t J^t
  bool selected = false;
  bool fallback = false;    // set on the selected curve when no curve passed
};

bool f_mean(const std::vector<double>& curve, const FilterConfig& config);
bool f_std(const std::vector<double>& curve, const FilterConfig& config);
bool f_slope(const std::vector<double>& curve, const FilterConfig& config);

CurveStats curve_stats(const std::vector<double>& curve,
                       const FilterConfig& config);

struct SelectionResult {
  int best_index = -1;
  bool fallback = false;
  std::vector<CurveStats> stats;
};

// Intersection of the three predicates, then argmax of max_t J^t (ties to the
// smallest index). When no curve passes, falls back to the argmax of the
// late-window mean and flags it.
SelectionResult filter_and_select(const std::vector<std::vector<double>>& curves,
                                  const FilterConfig& config);

// One line per candidate: flags, window stats, selected marker.
std::string render_report(const SelectionResult& result);

}  // namespace pcrd::filter
