#pragma once

#include <map>
#include <set>
#include <tuple>
#include <vector>

#include "pcrd/sim.hpp"

namespace testutil {

// Post-hoc platoon-distance recomputation from the trajectory log alone: no
// ledger state is consulted, only per-row actions, post-step locations and
// step distances. Mirrors the platoon rules:
//   - co-travel groups share (edge, exact position) or (hub, arrival edge);
//   - a platoon continues while >= 2 of its members share a key;
//   - Wait/Mix: >= 2 co-departing trucks with one key form a platoon;
//   - Speed/Mix: everything moving at SpeedMed with one key merges (on an
//     arrival key only when all of them departed this step);
//   - members of a platoon of size >= 2 accrue their step distance;
//   - arrival dissolves after accrual.
inline double recompute_platoon_km(
    const std::vector<pcrd::sim::TrajectoryRow>& rows,
    pcrd::sim::Scenario scenario) {
  using pcrd::sim::Action;
  const bool wait_rule = scenario == pcrd::sim::Scenario::Wait ||
                         scenario == pcrd::sim::Scenario::Mix;
  const bool speed_rule = scenario == pcrd::sim::Scenario::Speed ||
                          scenario == pcrd::sim::Scenario::Mix;

  std::map<int, std::vector<pcrd::sim::TrajectoryRow>> by_step;
  for (const auto& r : rows) by_step[r.step].push_back(r);

  double dp = 0.0;
  std::map<int, int> member_of;  // truck -> platoon label
  int next_label = 0;

  for (const auto& [step, step_rows] : by_step) {
    (void)step;
    using Key = std::tuple<int, int, int, double>;
    std::map<Key, std::vector<pcrd::sim::TrajectoryRow>> groups;
    for (const auto& r : step_rows) {
      if (r.action == Action::Wait) continue;
      Key key = r.arrived
                    ? Key{1, r.location.hub_id, r.arrived_via_edge, 0.0}
                    : Key{0, r.location.edge_index, 0,
                          r.location.position_km};
      groups[key].push_back(r);
    }

    std::map<int, int> next_member_of;
    std::set<int> claimed_labels;

    for (const auto& [key, group] : groups) {
      bool arrival_key = std::get<0>(key) == 1;

      struct Unit {
        std::vector<pcrd::sim::TrajectoryRow> rows;
        bool licensed = false;
        bool has_label = false;
        int label = 0;
      };
      std::map<int, Unit> by_prev;
      std::vector<pcrd::sim::TrajectoryRow> loose;
      for (const auto& r : group) {
        auto it = member_of.find(r.truck_id);
        if (it != member_of.end()) {
          by_prev[it->second].rows.push_back(r);
        } else {
          loose.push_back(r);
        }
      }
      std::vector<Unit> units;
      for (auto& [label, unit] : by_prev) {
        if (unit.rows.size() >= 2) {
          unit.licensed = true;
          unit.has_label = true;
          unit.label = label;
          units.push_back(std::move(unit));
        } else {
          loose.push_back(unit.rows[0]);
        }
      }
      if (wait_rule) {
        Unit departers;
        std::vector<pcrd::sim::TrajectoryRow> rest;
        for (const auto& r : loose) {
          if (r.departed) {
            departers.rows.push_back(r);
          } else {
            rest.push_back(r);
          }
        }
        if (departers.rows.size() >= 2) {
          departers.licensed = true;
          units.push_back(std::move(departers));
          loose = rest;
        }
      }
      for (const auto& r : loose) {
        Unit u;
        u.rows.push_back(r);
        units.push_back(std::move(u));
      }

      if (speed_rule) {
        Unit merged;
        std::vector<Unit> rest;
        for (auto& u : units) {
          bool all_med = true;
          bool all_departed = true;
          for (const auto& r : u.rows) {
            all_med = all_med && r.action == Action::SpeedMed;
            all_departed = all_departed && r.departed;
          }
          if (all_med && (!arrival_key || all_departed)) {
            for (const auto& r : u.rows) merged.rows.push_back(r);
            if (!merged.has_label && u.has_label) {
              merged.has_label = true;
              merged.label = u.label;
            }
          } else {
            rest.push_back(std::move(u));
          }
        }
        if (!merged.rows.empty()) {
          merged.licensed = merged.rows.size() >= 2;
          rest.push_back(std::move(merged));
        }
        units = std::move(rest);
      }

      for (auto& u : units) {
        if (u.rows.size() < 2 || !u.licensed) continue;
        for (const auto& r : u.rows) dp += r.step_distance_km;
        if (!arrival_key) {
          int label = (u.has_label && !claimed_labels.count(u.label))
                          ? u.label
                          : next_label++;
          claimed_labels.insert(label);
          for (const auto& r : u.rows) next_member_of[r.truck_id] = label;
        }
      }
    }
    member_of = std::move(next_member_of);
  }
  return dp;
}

}  // namespace testutil
