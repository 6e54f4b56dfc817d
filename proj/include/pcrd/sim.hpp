#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pcrd/dsl.hpp"
#include "pcrd/errors.hpp"
#include "pcrd/features.hpp"
#include "pcrd/network.hpp"

namespace pcrd::sim {

enum class Scenario { Wait, Speed, Mix };
enum class ObjectiveKind { SingleObject, MultiObject };

const char* scenario_name(Scenario s);
const char* objective_name(ObjectiveKind o);
std::optional<Scenario> scenario_from_name(std::string_view name);
std::optional<ObjectiveKind> objective_from_name(std::string_view name);

struct EnvConfig {
  int dt_minutes = 5;
  int horizon_minutes = 1000;  // 200 steps at dt = 5
  double v_low_kmh = 60.0;
  double v_med_kmh = 75.0;
  double v_high_kmh = 90.0;
  double platoon_profit_per_km = 1.7;  // c_p
  double delay_fraction = 0.1;
  Scenario scenario = Scenario::Wait;
  ObjectiveKind objective = ObjectiveKind::SingleObject;
  // 0 derives the count from the mission list; a positive value is checked
  // against it.
  int truck_count = 0;
  // One step's maximum closing distance, (v_high - v_med) * dt / 60.
  double catchup_tolerance_km = 1.25;

  int horizon_steps() const { return horizon_minutes / dt_minutes; }
  void check() const;
};

enum class Action { Wait = 0, SpeedLow = 1, SpeedMed = 2, SpeedHigh = 3 };
inline constexpr int kActionCount = 4;
const char* action_name(Action a);

// Bitmask over Action values.
using ActionMask = unsigned;
inline bool mask_has(ActionMask mask, Action a) {
  return (mask >> static_cast<unsigned>(a)) & 1u;
}

struct Location {
  bool at_hub = true;
  int hub_id = 0;       // valid when at_hub
  int edge_index = -1;  // valid when !at_hub
  double position_km = 0.0;
};

struct TruckState {
  int truck_id = 0;
  const net::FreightTask* task = nullptr;
  Location location;
  int route_leg = 0;  // index into route: at route[leg] or on edge leg->leg+1
  double delay_minutes = 0.0;
  std::optional<int> platoon_id;
  double platoon_km = 0.0;
  double traveled_km = 0.0;
  bool started = false;
  bool finished = false;
  std::optional<int> finish_step;

  // Per-step scratch used by feature snapshots and platoon bookkeeping.
  double step_distance_km = 0.0;
  double step_platoon_km = 0.0;
  double step_speed_kmh = 0.0;
  bool waited_this_step = false;
  bool departed_this_step = false;  // hub -> edge transition
  bool arrived_this_step = false;   // completed an edge
  int arrived_via_edge = -1;

  double route_length_km = 0.0;
  double delay_cap_minutes = 0.0;
};

struct Observation {
  double location_code = 0.0;  // hub id at a hub, -(edge_index + 1) on an edge
  double progress_fraction = 0.0;
  double remaining_route_km = 0.0;
  double delay_minutes = 0.0;
  double remaining_slack_minutes = 0.0;
  double platoon_size = 0.0;
  double step_index = 0.0;
  double hub_truck_count = 0.0;
  double edge_nearby_count = 0.0;
  double shared_next_edge_count = 0.0;
};

struct PlatoonLedger {
  struct Platoon {
    std::vector<int> members;
    int formed_step = 0;
  };
  std::map<int, Platoon> active;
  int next_id = 1;
};

struct EpisodeInfo {
  double platoon_km_total = 0.0;    // D_p
  double traveled_km_total = 0.0;   // D_total
  double delay_minutes_total = 0.0; // T_d at the current instant
  double running_objective = 0.0;   // 0 while denominators are degenerate
};

struct StepOutcome {
  std::map<int, Observation> observations;  // active or just-finished trucks
  std::map<int, double> rewards;
  std::map<int, bool> done;
  EpisodeInfo info;
};

// One row per acting truck per step; enough to recompute platooning and
// distance accounting without the ledger.
struct TrajectoryRow {
  int step = 0;
  int truck_id = 0;
  Action action = Action::Wait;
  Location location;          // after the step
  std::optional<int> platoon_id;
  double delay_minutes = 0.0; // after the step
  bool departed = false;      // hub -> edge transition this step
  bool arrived = false;       // completed an edge this step
  int arrived_via_edge = -1;
  double step_distance_km = 0.0;
};

class RewardRuntimeError : public Error {
 public:
  RewardRuntimeError(int truck_id, int step, dsl::DslError error)
      : Error("REWARD_RUNTIME", "truck " + std::to_string(truck_id) +
                                    " step " + std::to_string(step) + ": " +
                                    error.to_string()),
        truck_id_(truck_id), step_(step), dsl_error_(std::move(error)) {}
  int truck_id() const { return truck_id_; }
  int step() const { return step_; }
  const dsl::DslError& dsl_error() const { return dsl_error_; }

 private:
  int truck_id_;
  int step_;
  dsl::DslError dsl_error_;
};

class Environment {
 public:
  Environment(const net::TransportGraph& graph,
              std::vector<net::FreightTask> missions, EnvConfig config);

  // Truck states hold pointers into missions_; pin the object.
  Environment(const Environment&) = delete;
  Environment& operator=(const Environment&) = delete;

  // Null program -> zero rewards (objective-only rollouts).
  void set_reward_program(const dsl::RewardProgram* program) {
    program_ = program;
  }

  StepOutcome reset(std::uint64_t seed);

  // Executes one dt step. Joint actions must contain one legal action per
  // active truck; entries for inactive trucks are rejected.
  StepOutcome step(const std::map<int, Action>& joint_actions);

  ActionMask action_mask(int truck_id) const;
  static ActionMask scenario_menu(Scenario scenario, bool at_hub);

  Observation observe(int truck_id) const;
  FeatureMap feature_snapshot(int truck_id) const;

  bool is_active(int truck_id) const;  // started and not finished
  bool all_finished() const;
  bool horizon_reached() const { return step_index_ >= config_.horizon_steps(); }
  bool episode_over() const { return all_finished() || horizon_reached(); }

  int step_index() const { return step_index_; }
  const EnvConfig& config() const { return config_; }
  const net::TransportGraph& graph() const { return graph_; }
  const std::vector<net::FreightTask>& missions() const { return missions_; }
  const TruckState& truck(int truck_id) const;
  const PlatoonLedger& ledger() const { return ledger_; }
  const std::vector<TrajectoryRow>& trajectory() const { return trajectory_; }
  EpisodeInfo info() const;

  double compute_objective() const;  // J for the configured objective kind
  double delay_cap_minutes(int truck_id) const;

  // Uniform draw over the legal mask, fed by the reset seed.
  Action sample_random_action(int truck_id);

 private:
  void apply_kinematics(TruckState& truck, Action action);
  void update_platoons(const std::map<int, Action>& joint_actions);
  double reward_for(int truck_id);

  const net::TransportGraph& graph_;
  std::vector<net::FreightTask> missions_;
  EnvConfig config_;
  const dsl::RewardProgram* program_ = nullptr;

  std::vector<TruckState> trucks_;
  std::map<int, size_t> truck_index_;
  PlatoonLedger ledger_;
  std::vector<TrajectoryRow> trajectory_;
  int step_index_ = 0;
  double platoon_km_total_ = 0.0;
  double traveled_km_total_ = 0.0;
  double t_total_minutes_ = 0.0;  // sum of medium-speed trip times
  std::mt19937_64 rng_{0};
};

void write_trajectory(const std::vector<TrajectoryRow>& rows,
                      std::ostream& out);

// Auto-generated document handed to the LLM: scenario rules, action menu,
// feature catalog, platoon formation conditions, DSL grammar summary.
std::string render_environment_brief(const EnvConfig& config);
std::uint64_t brief_hash(const EnvConfig& config);

}  // namespace pcrd::sim
