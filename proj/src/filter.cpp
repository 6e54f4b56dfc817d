#include "pcrd/filter.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "pcrd/errors.hpp"

namespace pcrd::filter {

void FilterConfig::check() const {
  if (alpha <= 0 || beta <= 0 || curve_length <= 1) {
    throw ConfigError("filter windows and curve length must be positive");
  }
  if (alpha + beta > curve_length) {
    throw ConfigError("alpha + beta must not exceed the curve length");
  }
  if (!(v_th > 0.0)) {
    throw ConfigError("volatility threshold must be positive");
  }
}

namespace {

void check_length(const std::vector<double>& curve,
                  const FilterConfig& config) {
  config.check();
  if (static_cast<int>(curve.size()) != config.curve_length) {
    throw LengthMismatchError(
        "curve has " + std::to_string(curve.size()) + " points, expected " +
        std::to_string(config.curve_length));
  }
}

double window_mean(const std::vector<double>& curve, size_t begin,
                   size_t count) {
  double s = std::accumulate(curve.begin() + static_cast<long>(begin),
                             curve.begin() + static_cast<long>(begin + count),
                             0.0);
  return s / static_cast<double>(count);
}

// Population standard deviation, matching the 1/alpha and 1/beta prefactors.
double window_std(const std::vector<double>& curve, size_t begin, size_t count,
                  double mean) {
  double s = 0.0;
  for (size_t t = begin; t < begin + count; ++t) {
    double d = curve[t] - mean;
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(count));
}

double slope_covariance(const std::vector<double>& curve) {
  size_t n = curve.size();
  double y_mean = window_mean(curve, 0, n);
  double x_mean = (static_cast<double>(n) + 1.0) / 2.0;  // mean of 1..L
  double cov = 0.0;
  for (size_t t = 0; t < n; ++t) {
    cov += (curve[t] - y_mean) * (static_cast<double>(t + 1) - x_mean);
  }
  return cov / static_cast<double>(n);
}

}  // namespace

bool f_mean(const std::vector<double>& curve, const FilterConfig& config) {
  check_length(curve, config);
  size_t alpha = static_cast<size_t>(config.alpha);
  size_t beta = static_cast<size_t>(config.beta);
  double early = window_mean(curve, 0, alpha);
  double late = window_mean(curve, curve.size() - beta, beta);
  return early < late;
}

bool f_std(const std::vector<double>& curve, const FilterConfig& config) {
  check_length(curve, config);
  size_t alpha = static_cast<size_t>(config.alpha);
  size_t beta = static_cast<size_t>(config.beta);
  double em = window_mean(curve, 0, alpha);
  double lm = window_mean(curve, curve.size() - beta, beta);
  double ev = window_std(curve, 0, alpha, em);
  double lv = window_std(curve, curve.size() - beta, beta, lm);
  // Zero-denominator rule: a perfectly flat early window passes only when the
  // late window is flat too.
  if (ev == 0.0) return lv == 0.0;
  return lv / ev < config.v_th;
}

bool f_slope(const std::vector<double>& curve, const FilterConfig& config) {
  check_length(curve, config);
  return slope_covariance(curve) > 0.0;
}

CurveStats curve_stats(const std::vector<double>& curve,
                       const FilterConfig& config) {
  check_length(curve, config);
  size_t alpha = static_cast<size_t>(config.alpha);
  size_t beta = static_cast<size_t>(config.beta);
  CurveStats s;
  s.early_mean = window_mean(curve, 0, alpha);
  s.late_mean = window_mean(curve, curve.size() - beta, beta);
  s.early_std = window_std(curve, 0, alpha, s.early_mean);
  s.late_std = window_std(curve, curve.size() - beta, beta, s.late_mean);
  double cov = slope_covariance(curve);
  s.slope_sign = cov > 0.0 ? 1 : (cov < 0.0 ? -1 : 0);
  s.pass_mean = s.early_mean < s.late_mean;
  s.pass_std = s.early_std == 0.0 ? s.late_std == 0.0
                                  : s.late_std / s.early_std < config.v_th;
  s.pass_slope = cov > 0.0;
  s.pass_all = s.pass_mean && s.pass_std && s.pass_slope;
  s.max_value = *std::max_element(curve.begin(), curve.end());
  return s;
}

SelectionResult filter_and_select(
    const std::vector<std::vector<double>>& curves,
    const FilterConfig& config) {
  if (curves.empty()) throw EmptyInputError("no curves to filter");
  SelectionResult result;
  for (const auto& curve : curves) {
    result.stats.push_back(curve_stats(curve, config));
  }

  int best = -1;
  for (size_t i = 0; i < result.stats.size(); ++i) {
    const CurveStats& s = result.stats[i];
    if (!s.pass_all) continue;
    if (best < 0 ||
        s.max_value > result.stats[static_cast<size_t>(best)].max_value) {
      best = static_cast<int>(i);
    }
  }
  if (best < 0) {
    // No curve survived the intersection; keep the loop alive by taking the
    // best late-window mean and flagging the fallback.
    result.fallback = true;
    for (size_t i = 0; i < result.stats.size(); ++i) {
      if (best < 0 || result.stats[i].late_mean >
                          result.stats[static_cast<size_t>(best)].late_mean) {
        best = static_cast<int>(i);
      }
    }
  }
  result.best_index = best;
  result.stats[static_cast<size_t>(best)].selected = true;
  result.stats[static_cast<size_t>(best)].fallback = result.fallback;
  return result;
}

std::string render_report(const SelectionResult& result) {
  std::string out;
  char line[256];
  for (size_t i = 0; i < result.stats.size(); ++i) {
    const CurveStats& s = result.stats[i];
    std::snprintf(line, sizeof(line),
                  "curve %zu: mean=%s std=%s slope=%s em=%.4g lm=%.4g "
                  "ev=%.4g lv=%.4g max=%.4g%s%s\n",
                  i, s.pass_mean ? "pass" : "fail",
                  s.pass_std ? "pass" : "fail",
                  s.pass_slope ? "pass" : "fail", s.early_mean, s.late_mean,
                  s.early_std, s.late_std, s.max_value,
                  s.selected ? " <== selected" : "",
                  s.fallback ? " (fallback)" : "");
    out += line;
  }
  return out;
}

}  // namespace pcrd::filter
