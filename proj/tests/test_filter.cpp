#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "pcrd/errors.hpp"
#include "pcrd/filter.hpp"
#include "support/curve_oracle.hpp"

using namespace pcrd;
using namespace pcrd::filter;

namespace {

std::vector<double> make_curve(int length,
                               const std::function<double(int)>& f) {
  std::vector<double> c;
  for (int t = 1; t <= length; ++t) c.push_back(f(t));
  return c;
}

}  // namespace

TEST_CASE("f_mean: strict inequality fails a constant curve") {
  FilterConfig cfg;
  auto flat = make_curve(100, [](int) { return 5.0; });
  CHECK_FALSE(f_mean(flat, cfg));
}

TEST_CASE("f_mean: linear curve window means are 10.5 and 80.5") {
  FilterConfig cfg;
  auto line = make_curve(100, [](int t) { return static_cast<double>(t); });
  auto s = curve_stats(line, cfg);
  CHECK(s.early_mean == doctest::Approx(10.5).epsilon(1e-15));
  CHECK(s.late_mean == doctest::Approx(80.5).epsilon(1e-15));
  CHECK(f_mean(line, cfg));
  auto falling = make_curve(100, [](int t) { return 100.0 - t; });
  CHECK_FALSE(f_mean(falling, cfg));
}

TEST_CASE("f_std: ramp-then-plateau passes, pure line fails near ratio 2") {
  FilterConfig cfg;
  auto ramp = make_curve(
      100, [](int t) { return static_cast<double>(std::min(t, 60)); });
  auto s = curve_stats(ramp, cfg);
  CHECK(s.late_std == 0.0);
  CHECK(s.early_std == doctest::Approx(std::sqrt(33.25)).epsilon(1e-12));
  CHECK(f_std(ramp, cfg));

  auto line = make_curve(100, [](int t) { return static_cast<double>(t); });
  auto s2 = curve_stats(line, cfg);
  CHECK(s2.late_std == doctest::Approx(std::sqrt(133.25)).epsilon(1e-12));
  CHECK(s2.late_std / s2.early_std ==
        doctest::Approx(std::sqrt(133.25 / 33.25)).epsilon(1e-12));
  CHECK_FALSE(f_std(line, cfg));
}

TEST_CASE("f_std: zero-denominator rule") {
  FilterConfig cfg;
  // Early window flat, late window noisy -> fail.
  auto c = make_curve(100, [](int t) {
    return t <= 20 ? 1.0 : (t >= 61 && t % 2 == 0 ? 2.0 : 1.0);
  });
  CHECK_FALSE(f_std(c, cfg));
  // Flat everywhere -> pass (perfectly stable).
  auto flat = make_curve(100, [](int) { return 3.0; });
  CHECK(f_std(flat, cfg));
}

TEST_CASE("f_slope: sign of the least-squares slope") {
  FilterConfig cfg;
  CHECK(f_slope(make_curve(100, [](int t) { return static_cast<double>(t); }),
                cfg));
  CHECK_FALSE(f_slope(make_curve(100, [](int) { return 7.0; }), cfg));
  CHECK_FALSE(f_slope(
      make_curve(100, [](int t) { return -static_cast<double>(t); }), cfg));
}

TEST_CASE("length mismatch raises") {
  FilterConfig cfg;
  std::vector<double> short_curve(50, 1.0);
  CHECK_THROWS_AS(f_mean(short_curve, cfg), LengthMismatchError);
  CHECK_THROWS_AS(filter_and_select({short_curve}, cfg), LengthMismatchError);
}

TEST_CASE("filter_and_select: argmax of max among passers") {
  FilterConfig cfg;
  // Both pass; the second has the larger max.
  auto a = make_curve(
      100, [](int t) { return static_cast<double>(std::min(t, 60)) / 6.0; });
  auto b = make_curve(
      100, [](int t) { return static_cast<double>(std::min(t, 60)) / 5.0; });
  auto res = filter_and_select({a, b}, cfg);
  CHECK(res.best_index == 1);
  CHECK_FALSE(res.fallback);
  CHECK(res.stats[1].selected);
}

TEST_CASE("filter_and_select: a failing curve with a higher max loses") {
  FilterConfig cfg;
  // The pure line fails f_std even though its max (100) is larger.
  auto line = make_curve(100, [](int t) { return static_cast<double>(t); });
  auto ramp = make_curve(
      100, [](int t) { return static_cast<double>(std::min(t, 60)); });
  auto res = filter_and_select({line, ramp}, cfg);
  CHECK(res.best_index == 1);
  CHECK_FALSE(res.fallback);
  CHECK(res.stats[0].pass_mean);
  CHECK_FALSE(res.stats[0].pass_std);
}

TEST_CASE("filter_and_select: empty intersection falls back to late mean") {
  FilterConfig cfg;
  auto down = make_curve(100, [](int t) { return 50.0 - t; });
  auto flat = make_curve(100, [](int) { return 10.0; });
  auto res = filter_and_select({down, flat}, cfg);
  CHECK(res.fallback);
  CHECK(res.best_index == 1);  // late mean 10 beats -30.5
  CHECK(res.stats[1].fallback);
}

TEST_CASE("filter_and_select: ties break to the smallest index") {
  FilterConfig cfg;
  auto ramp = make_curve(
      100, [](int t) { return static_cast<double>(std::min(t, 60)); });
  auto res = filter_and_select({ramp, ramp, ramp}, cfg);
  CHECK(res.best_index == 0);
}

TEST_CASE("empty input raises") {
  CHECK_THROWS_AS(filter_and_select({}, FilterConfig{}), EmptyInputError);
}

TEST_CASE("property: flags are invariant to constant shifts") {
  FilterConfig cfg;
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    auto curve = testutil::random_curve(rng, 100);
    auto base = curve_stats(curve, cfg);
    double shift = -40.0 + static_cast<double>(rng() % 80);
    auto shifted = curve;
    for (auto& v : shifted) v += shift;
    auto after = curve_stats(shifted, cfg);
    CHECK(base.pass_mean == after.pass_mean);
    CHECK(base.pass_std == after.pass_std);
    CHECK(base.pass_slope == after.pass_slope);
  }
}

TEST_CASE("property: selection is invariant to positive scaling") {
  FilterConfig cfg;
  std::mt19937_64 rng(13);
  for (int batch = 0; batch < 40; ++batch) {
    std::vector<std::vector<double>> curves;
    for (int i = 0; i < 6; ++i) {
      curves.push_back(testutil::random_curve(rng, 100));
    }
    auto base = filter_and_select(curves, cfg);
    double lambda = 0.25 + static_cast<double>(rng() % 8);
    auto scaled = curves;
    for (auto& c : scaled) {
      for (auto& v : c) v *= lambda;
    }
    auto after = filter_and_select(scaled, cfg);
    CHECK(base.best_index == after.best_index);
    CHECK(base.fallback == after.fallback);
    for (size_t i = 0; i < curves.size(); ++i) {
      CHECK(base.stats[i].pass_all == after.stats[i].pass_all);
    }
  }
}

TEST_CASE("oracle equivalence on seeded random curves") {
  FilterConfig cfg;
  std::mt19937_64 rng(4242);
  int disagreements = 0;
  for (int batch = 0; batch < 50; ++batch) {
    std::vector<std::vector<double>> curves;
    for (int i = 0; i < 10; ++i) {
      curves.push_back(testutil::random_curve(rng, 100));
    }
    auto res = filter_and_select(curves, cfg);
    for (size_t i = 0; i < curves.size(); ++i) {
      auto oracle = testutil::oracle_flags(curves[i], cfg.alpha, cfg.beta,
                                           cfg.v_th);
      if (oracle.mean != res.stats[i].pass_mean ||
          oracle.std != res.stats[i].pass_std ||
          oracle.slope != res.stats[i].pass_slope) {
        ++disagreements;
      }
    }
    bool oracle_fallback = false;
    int oracle_best = testutil::oracle_select(curves, cfg.alpha, cfg.beta,
                                              cfg.v_th, &oracle_fallback);
    if (oracle_best != res.best_index || oracle_fallback != res.fallback) {
      ++disagreements;
    }
  }
  CHECK(disagreements == 0);
}

TEST_CASE("report renders one line per candidate with a selection marker") {
  FilterConfig cfg;
  auto ramp = make_curve(
      100, [](int t) { return static_cast<double>(std::min(t, 60)); });
  auto flat = make_curve(100, [](int) { return 1.0; });
  auto res = filter_and_select({flat, ramp}, cfg);
  std::string report = render_report(res);
  CHECK(std::count(report.begin(), report.end(), '\n') == 2);
  CHECK(report.find("<== selected") != std::string::npos);
}
