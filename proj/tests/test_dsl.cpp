#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <random>

#include "pcrd/dsl.hpp"
#include "support/test_util.hpp"

using namespace pcrd;
using dsl::DslError;

namespace {

dsl::RewardProgram parse_ok(const std::string& text) {
  auto r = dsl::parse(text);
  REQUIRE(r.ok());
  return std::move(r.value());
}

dsl::RewardProgram valid_program(const std::string& text) {
  auto p = parse_ok(text);
  REQUIRE_FALSE(dsl::validate(p, FeatureCatalog::v1()).has_value());
  return p;
}

}  // namespace

TEST_CASE("parse: single term") {
  auto p = parse_ok("term platoon weight 1.0: platoon_size");
  CHECK(p.terms.size() == 1);
  CHECK(p.terms[0].name == "platoon");
  CHECK(p.terms[0].weight == 1.0);
}

TEST_CASE("parse: unclosed parenthesis is a syntax error") {
  auto r = dsl::parse("term x weight 1.0: (platoon_size");
  REQUIRE_FALSE(r.ok());
  CHECK(r.error().kind == DslError::Kind::Syntax);
  CHECK(r.error().line >= 1);
}

TEST_CASE("parse: two terms with negative weight") {
  auto p = parse_ok(
      "term a weight 0.5: in_platoon\nterm b weight -0.1: delay_minutes");
  REQUIRE(p.terms.size() == 2);
  CHECK(p.terms[0].weight == 0.5);
  CHECK(p.terms[1].weight == -0.1);
}

TEST_CASE("validate: unknown identifier") {
  auto p = parse_ok("term a weight 1.0: platon_size");
  auto err = dsl::validate(p, FeatureCatalog::v1());
  REQUIRE(err.has_value());
  CHECK(err->kind == DslError::Kind::Semantic);
  CHECK(err->message.find("platon_size") != std::string::npos);
}

TEST_CASE("validate: call arity") {
  auto p = parse_ok("term a weight 1.0: min(platoon_size)");
  auto err = dsl::validate(p, FeatureCatalog::v1());
  REQUIRE(err.has_value());
  CHECK(err->kind == DslError::Kind::Semantic);
}

TEST_CASE("validate: well-formed program passes") {
  auto p = parse_ok("term a weight 1.0: clamp(delay_minutes, 0, 10)");
  CHECK_FALSE(dsl::validate(p, FeatureCatalog::v1()).has_value());
}

TEST_CASE("evaluate: weighted feature") {
  auto p = valid_program("term p weight 2.0: platoon_size");
  FeatureMap f;
  f.set("platoon_size", 3.0);
  auto v = dsl::evaluate(p, f);
  REQUIRE(v.ok());
  CHECK(v.value() == 6.0);
}

TEST_CASE("evaluate: forced zero denominator is a runtime error") {
  auto p = valid_program(
      "term x weight 1.0: 1 / (delay_minutes - delay_minutes)");
  FeatureMap f;
  f.set("delay_minutes", 17.0);
  auto v = dsl::evaluate(p, f);
  REQUIRE_FALSE(v.ok());
  CHECK(v.error().kind == DslError::Kind::Runtime);
}

TEST_CASE("evaluate: two-term hand computation") {
  auto p = valid_program(
      "term a weight 0.5: in_platoon\nterm b weight -0.1: delay_minutes");
  FeatureMap f;
  f.set("in_platoon", 1.0);
  f.set("delay_minutes", 5.0);
  auto v = dsl::evaluate(p, f);
  REQUIRE(v.ok());
  CHECK(v.value() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("evaluate: ternary takes only one branch") {
  auto p = valid_program(
      "term g weight 1.0: delay_minutes != 0 ? 1 / delay_minutes : 0");
  FeatureMap f;  // delay 0: the division must not run
  auto v = dsl::evaluate(p, f);
  REQUIRE(v.ok());
  CHECK(v.value() == 0.0);
}

TEST_CASE("evaluate: and/or short-circuit") {
  auto p = valid_program(
      "term g weight 1.0: in_platoon and 1 / delay_minutes");
  FeatureMap f;  // in_platoon 0, delay 0
  auto v = dsl::evaluate(p, f);
  REQUIRE(v.ok());
  CHECK(v.value() == 0.0);
}

TEST_CASE("evaluate: non-finite intermediates are runtime errors") {
  auto p = valid_program("term a weight 1.0: exp(1000 - delay_minutes)");
  FeatureMap f;
  auto v = dsl::evaluate(p, f);
  REQUIRE_FALSE(v.ok());
  CHECK(v.error().kind == DslError::Kind::Runtime);
}

TEST_CASE("evaluate is pure") {
  auto p = valid_program("term a weight 1.3: tanh(step_platoon_km / 10)");
  FeatureMap f;
  f.set("step_platoon_km", 6.25);
  auto a = dsl::evaluate(p, f);
  auto b = dsl::evaluate(p, f);
  REQUIRE(a.ok());
  REQUIRE(b.ok());
  CHECK(a.value() == b.value());
}

TEST_CASE("pretty_print round-trips the corpus and spec examples") {
  std::vector<std::string> sources = {
      "term platoon weight 1.0: platoon_size",
      "term x weight 1.0: in_platoon ? 1 : 2 * delay_minutes",
      "term a weight 0.5: in_platoon\nterm b weight -0.1: delay_minutes",
  };
  for (const auto& path :
       testutil::list_files(testutil::fixture("dsl/valid"))) {
    sources.push_back(testutil::read_file(path));
  }
  for (const auto& src : sources) {
    CAPTURE(src);
    auto p = parse_ok(src);
    std::string printed = dsl::pretty_print(p);
    auto q = parse_ok(printed);
    CHECK(dsl::structurally_equal(p, q));
    // Canonical text is a fixed point.
    CHECK(dsl::pretty_print(q) == printed);
  }
}

TEST_CASE("pretty_print preserves precedence without parentheses") {
  auto p = parse_ok("term a weight 1.0: (1 + 2) * 3 - 4 / (5 - 6)");
  auto q = parse_ok(dsl::pretty_print(p));
  CHECK(dsl::structurally_equal(p, q));
}

TEST_CASE("structural_diff: added, reweighted, identical") {
  auto base = parse_ok("term a weight 1.0: platoon_size");
  auto added = parse_ok(
      "term a weight 1.0: platoon_size\nterm b weight 0.5: in_platoon");
  auto rew = parse_ok("term a weight 2.0: platoon_size");

  auto d1 = dsl::structural_diff(base, added);
  CHECK(d1.added.size() == 1);
  CHECK(d1.removed.empty());
  CHECK(d1.reweighted.empty());

  auto d2 = dsl::structural_diff(base, rew);
  CHECK(d2.reweighted.size() == 1);
  CHECK(d2.bodies_changed.empty());

  auto d3 = dsl::structural_diff(base, base.clone());
  CHECK(d3.empty());
}

TEST_CASE("taxonomy: fixture corpus classifies 100% correctly") {
  const auto& catalog = FeatureCatalog::v1();
  struct Group {
    const char* dir;
    bool valid;
    DslError::Kind kind;
  };
  const Group groups[] = {
      {"dsl/valid", true, DslError::Kind::Syntax},
      {"dsl/syntax", false, DslError::Kind::Syntax},
      {"dsl/semantic", false, DslError::Kind::Semantic},
      {"dsl/runtime", false, DslError::Kind::Runtime},
  };
  int total = 0;
  for (const auto& g : groups) {
    for (const auto& path : testutil::list_files(testutil::fixture(g.dir))) {
      CAPTURE(path);
      auto c = dsl::classify(testutil::read_file(path), catalog);
      ++total;
      if (g.valid) {
        CHECK(c.valid);
      } else {
        REQUIRE_FALSE(c.valid);
        CHECK(c.error->kind == g.kind);
      }
    }
  }
  CHECK(total == 30);
}

TEST_CASE("sandbox: depth bound") {
  std::string deep = "term x weight 1.0: ";
  for (int i = 0; i < 80; ++i) deep += '(';
  deep += "1";
  for (int i = 0; i < 80; ++i) deep += ')';
  auto r = dsl::parse(deep);
  REQUIRE_FALSE(r.ok());
  CHECK(r.error().kind == DslError::Kind::Syntax);
  CHECK(r.error().message.find("depth") != std::string::npos);
}

TEST_CASE("sandbox: random 1 kB inputs always classify quickly") {
  std::mt19937_64 rng(99);
  const std::string alphabet =
      "term weight and or not minmaxabsclampexptanh platoon_size "
      "delay_minutes()+-*/<>=!?:., \n0123456789";
  for (int i = 0; i < 200; ++i) {
    std::string input;
    input.reserve(1024);
    for (int c = 0; c < 1024; ++c) {
      input += alphabet[rng() % alphabet.size()];
    }
    auto t0 = std::chrono::steady_clock::now();
    auto c = dsl::classify(input, FeatureCatalog::v1());
    double ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
    CHECK(ms < 10.0);
    // Every input lands in exactly one class.
    CHECK((c.valid || c.error.has_value()));
  }
}

TEST_CASE("weights must be finite") {
  auto r = dsl::parse("term a weight 1e999: platoon_size");
  REQUIRE_FALSE(r.ok());
  CHECK(r.error().kind == DslError::Kind::Syntax);
}
