#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>
#include <sstream>

#include "pcrd/errors.hpp"
#include "pcrd/network.hpp"
#include "support/path_oracle.hpp"
#include "support/test_util.hpp"

using namespace pcrd;
using namespace pcrd::net;

TEST_CASE("shortest_path: line graph has the only path") {
  auto g = testutil::line_graph({10.0, 10.0}, false);
  CHECK(shortest_path(g, 0, 2) == std::vector<int>{0, 1, 2});
}

TEST_CASE("shortest_path: picks the strictly shorter triangle leg") {
  std::vector<Hub> hubs{{0, "a", 0, 0, 1}, {1, "b", 0, 0, 1}, {2, "c", 0, 0, 1}};
  std::vector<RoadEdge> edges{{0, 1, 5.0}, {1, 2, 5.0}, {0, 2, 11.0}};
  TransportGraph g(std::move(hubs), std::move(edges), {});
  auto route = shortest_path(g, 0, 2);
  CHECK(route == std::vector<int>{0, 1, 2});
  CHECK(g.route_length_km(route) == 10.0);
}

TEST_CASE("shortest_path: equal-length tie breaks lexicographically") {
  // Two routes 0-1-3 and 0-2-3 with identical total length.
  std::vector<Hub> hubs{
      {0, "a", 0, 0, 1}, {1, "b", 0, 0, 1}, {2, "c", 0, 0, 1},
      {3, "d", 0, 0, 1}};
  std::vector<RoadEdge> edges{{0, 1, 7.0}, {1, 3, 7.0}, {0, 2, 7.0},
                              {2, 3, 7.0}};
  TransportGraph g(std::move(hubs), std::move(edges), {});
  CHECK(shortest_path(g, 0, 3) == std::vector<int>{0, 1, 3});
  auto oracle = testutil::brute_force_shortest(g, 0, 3);
  REQUIRE(oracle.has_value());
  CHECK(shortest_path(g, 0, 3) == *oracle);
}

TEST_CASE("shortest_path: unreachable destination raises NoRoute") {
  std::vector<Hub> hubs{{0, "a", 0, 0, 1}, {1, "b", 0, 0, 1}};
  std::vector<RoadEdge> edges{{1, 0, 3.0}};
  TransportGraph g(std::move(hubs), std::move(edges), {});
  CHECK_THROWS_AS(shortest_path(g, 0, 1), NoRouteError);
}

TEST_CASE("shortest_path agrees with enumeration on random small graphs") {
  std::mt19937_64 rng(7);
  const double weights[] = {5.0, 10.0, 15.0, 20.0};
  for (int trial = 0; trial < 60; ++trial) {
    int n = 2 + static_cast<int>(rng() % 7);  // 2..8 hubs
    std::vector<Hub> hubs;
    for (int i = 0; i < n; ++i) {
      hubs.push_back({i, "h" + std::to_string(i), 0, 0, 1});
    }
    std::vector<RoadEdge> edges;
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        if (a == b) continue;
        if (rng() % 100 < 45) {
          edges.push_back({a, b, weights[rng() % 4]});
        }
      }
    }
    TransportGraph g(std::move(hubs), std::move(edges), {});
    for (int origin = 0; origin < n; ++origin) {
      for (int dest = 0; dest < n; ++dest) {
        if (origin == dest) continue;
        auto oracle = testutil::brute_force_shortest(g, origin, dest);
        if (!oracle) {
          CHECK_THROWS_AS(shortest_path(g, origin, dest), NoRouteError);
          continue;
        }
        auto got = shortest_path(g, origin, dest);
        CAPTURE(trial);
        CAPTURE(origin);
        CAPTURE(dest);
        CHECK(got == *oracle);
      }
    }
  }
}

TEST_CASE("deadline arithmetic matches the 10% cap rule") {
  // 150 km at v_med 75 -> 120 min trip, 12 min cap, ceil(132/5) = 27 steps.
  CHECK(deadline_step_for(150.0, 10, 5, 75.0, 0.1) == 10 + 27);
  // 75 km -> 60 min trip, 6 min cap, ceil(66/5) = 14 steps.
  CHECK(deadline_step_for(75.0, 1, 5, 75.0, 0.1) == 1 + 14);
  CHECK_THROWS_AS(deadline_step_for(0.0, 1, 5, 75.0, 0.1), ValidationError);
}

namespace {

TransportGraph two_hub_zone_graph() {
  std::vector<Hub> hubs{{0, "a", 0, 0, 100}, {1, "b", 0, 0, 100}};
  std::vector<RoadEdge> edges{{0, 1, 50.0}, {1, 0, 50.0}};
  std::vector<Zone> zones{{0, {0, 1}}};
  return TransportGraph(std::move(hubs), std::move(edges), std::move(zones));
}

}  // namespace

TEST_CASE("generate_missions: equal populations sample both origins evenly") {
  auto g = two_hub_zone_graph();
  MissionParams params;
  params.missions_per_zone = 10000;
  params.window_lo = 1;
  params.window_hi = 73;
  auto tasks = generate_missions(g, params, 42);
  REQUIRE(tasks.size() == 10000);
  int from_a = 0;
  for (const auto& t : tasks) {
    if (t.origin == 0) ++from_a;
  }
  double share = static_cast<double>(from_a) / 10000.0;
  CHECK(share > 0.48);
  CHECK(share < 0.52);
}

TEST_CASE("generate_missions: start steps stay inside the window") {
  auto g = two_hub_zone_graph();
  MissionParams params;
  params.missions_per_zone = 1000;
  params.window_lo = 1;
  params.window_hi = 73;
  auto tasks = generate_missions(g, params, 5);
  for (const auto& t : tasks) {
    CHECK(t.start_step >= 1);
    CHECK(t.start_step <= 73);
    CHECK(t.start_step < t.deadline_step);
  }
}

TEST_CASE("generate_missions is deterministic and routes along edges") {
  auto g = two_hub_zone_graph();
  MissionParams params;
  params.missions_per_zone = 25;
  auto a = generate_missions(g, params, 9);
  auto b = generate_missions(g, params, 9);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].origin == b[i].origin);
    CHECK(a[i].destination == b[i].destination);
    CHECK(a[i].start_step == b[i].start_step);
    CHECK(a[i].route == b[i].route);
    for (size_t leg = 0; leg + 1 < a[i].route.size(); ++leg) {
      CHECK(g.edge_between(a[i].route[leg], a[i].route[leg + 1]) >= 0);
    }
    CHECK(a[i].origin != a[i].destination);
  }
}

TEST_CASE("generate_missions: disconnected zone raises after resampling") {
  // The zone-internal subgraph has no edges at all, so every sampled pair
  // fails and the 64-attempt budget runs out.
  std::vector<Hub> hubs{
      {0, "a", 0, 0, 100}, {1, "b", 0, 0, 100}, {2, "c", 0, 0, 100}};
  std::vector<RoadEdge> edges{{0, 2, 50.0}, {2, 1, 50.0}};
  std::vector<Zone> zones{{0, {0, 1}}};
  TransportGraph g(std::move(hubs), std::move(edges), std::move(zones));
  MissionParams params;
  params.missions_per_zone = 1;
  CHECK_THROWS_AS(generate_missions(g, params, 3), ZoneDisconnectedError);
}

TEST_CASE("load_graph: minimal fixture") {
  std::istringstream in(
      "# tiny\nHUB 0 alpha 31.2 121.5 2400000\nHUB 1 beta 32.0 118.8 "
      "850000\nEDGE 0 1 295.5\n");
  auto g = load_graph(in);
  CHECK(g.hubs().size() == 2);
  CHECK(g.edges().size() == 1);
  CHECK(g.hub(0).name == "alpha");
  CHECK(g.edge(0).length_km == 295.5);
}

TEST_CASE("load_graph: unknown hub id in an edge is a validation error") {
  std::istringstream in("HUB 0 a 0 0 10\nEDGE 0 99 12.0\n");
  CHECK_THROWS_AS(load_graph(in), ValidationError);
}

TEST_CASE("load_graph: malformed record reports the line") {
  std::istringstream in("HUB 0 a 0 0 10\nEDGE zero one\n");
  try {
    load_graph(in);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("graph save/load round-trip") {
  auto g = generate_synthetic_network(SyntheticParams{}, 2024);
  std::ostringstream out;
  save_graph(g, out);
  std::istringstream in(out.str());
  auto h = load_graph(in);
  CHECK(h.hubs().size() == g.hubs().size());
  CHECK(h.edges().size() == g.edges().size());
  CHECK(h.zones().size() == g.zones().size());
}

TEST_CASE("bundled synthetic dataset matches the published scale") {
  auto g = load_graph_file(testutil::asset_dir() +
                           "/networks/yangtze_synthetic.net");
  CHECK(g.hubs().size() == 41);
  CHECK(g.edges().size() == 202);
  CHECK(g.zones().size() == 12);
  std::set<int> covered;
  for (const auto& z : g.zones()) {
    CHECK(z.hub_ids.size() >= 5);
    CHECK(z.hub_ids.size() <= 9);
    covered.insert(z.hub_ids.begin(), z.hub_ids.end());
    // Zone-internal routing must work between every ordered pair.
    for (int a : z.hub_ids) {
      for (int b : z.hub_ids) {
        if (a == b) continue;
        CHECK_NOTHROW(shortest_path_within(g, a, b, z.hub_ids));
      }
    }
  }
  CHECK(covered.size() == 41);
  for (const auto& e : g.edges()) {
    CHECK(e.length_km >= 30.0);
    CHECK(e.length_km <= 200.0);
  }
  // Default missions: 5 per zone over 12 zones = 60 tasks.
  auto tasks = generate_missions(g, MissionParams{}, 1);
  CHECK(tasks.size() == 60);
}

TEST_CASE("mission save/load round-trip") {
  auto g = two_hub_zone_graph();
  MissionParams params;
  params.missions_per_zone = 4;
  auto tasks = generate_missions(g, params, 11);
  std::ostringstream out;
  save_missions(tasks, out);
  std::istringstream in(out.str());
  auto loaded = load_missions(in);
  REQUIRE(loaded.size() == tasks.size());
  for (size_t i = 0; i < tasks.size(); ++i) {
    CHECK(loaded[i].truck_id == tasks[i].truck_id);
    CHECK(loaded[i].route == tasks[i].route);
    CHECK(loaded[i].deadline_step == tasks[i].deadline_step);
  }
}
