#include "pcrd/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>

#include "pcrd/util.hpp"

namespace pcrd::sim {

const char* scenario_name(Scenario s) {
  switch (s) {
    case Scenario::Wait: return "wait";
    case Scenario::Speed: return "speed";
    case Scenario::Mix: return "mix";
  }
  return "?";
}

const char* objective_name(ObjectiveKind o) {
  return o == ObjectiveKind::SingleObject ? "single" : "multi";
}

std::optional<Scenario> scenario_from_name(std::string_view name) {
  if (name == "wait") return Scenario::Wait;
  if (name == "speed") return Scenario::Speed;
  if (name == "mix") return Scenario::Mix;
  return std::nullopt;
}

std::optional<ObjectiveKind> objective_from_name(std::string_view name) {
  if (name == "single") return ObjectiveKind::SingleObject;
  if (name == "multi") return ObjectiveKind::MultiObject;
  return std::nullopt;
}

const char* action_name(Action a) {
  switch (a) {
    case Action::Wait: return "wait";
    case Action::SpeedLow: return "low";
    case Action::SpeedMed: return "med";
    case Action::SpeedHigh: return "high";
  }
  return "?";
}

void EnvConfig::check() const {
  if (!(v_low_kmh < v_med_kmh && v_med_kmh < v_high_kmh)) {
    throw ConfigError("speeds must satisfy v_low < v_med < v_high");
  }
  if (dt_minutes <= 0 || horizon_minutes % dt_minutes != 0) {
    throw ConfigError("dt must be positive and divide the horizon");
  }
  if (!(delay_fraction > 0.0 && delay_fraction < 1.0)) {
    throw ConfigError("delay_fraction must lie in (0, 1)");
  }
  if (!(catchup_tolerance_km > 0.0)) {
    throw ConfigError("catchup_tolerance_km must be positive");
  }
}

Environment::Environment(const net::TransportGraph& graph,
                         std::vector<net::FreightTask> missions,
                         EnvConfig config)
    : graph_(graph), missions_(std::move(missions)), config_(config) {
  config_.check();
  if (missions_.empty()) throw EmptyInputError("no freight missions supplied");
  if (config_.truck_count > 0 &&
      config_.truck_count != static_cast<int>(missions_.size())) {
    throw ConfigError("configured truck_count " +
                      std::to_string(config_.truck_count) + " does not match " +
                      std::to_string(missions_.size()) + " missions");
  }
  for (const auto& task : missions_) {
    if (task.route.size() < 2) {
      throw ValidationError("task " + std::to_string(task.truck_id) +
                            " has a degenerate route");
    }
    graph_.route_length_km(task.route);  // throws when legs are not edges
  }
  reset(0);
}

StepOutcome Environment::reset(std::uint64_t seed) {
  trucks_.clear();
  truck_index_.clear();
  ledger_ = PlatoonLedger{};
  trajectory_.clear();
  step_index_ = 0;
  platoon_km_total_ = 0.0;
  traveled_km_total_ = 0.0;
  t_total_minutes_ = 0.0;
  rng_.seed(seed);

  for (const auto& task : missions_) {
    TruckState truck;
    truck.truck_id = task.truck_id;
    truck.task = &task;
    truck.location = Location{true, task.route.front(), -1, 0.0};
    truck.route_length_km = graph_.route_length_km(task.route);
    truck.delay_cap_minutes =
        config_.delay_fraction * 60.0 * truck.route_length_km /
        config_.v_med_kmh;
    t_total_minutes_ += 60.0 * truck.route_length_km / config_.v_med_kmh;
    truck_index_[truck.truck_id] = trucks_.size();
    trucks_.push_back(std::move(truck));
  }

  StepOutcome out;
  for (const auto& truck : trucks_) {
    out.observations[truck.truck_id] = observe(truck.truck_id);
    out.rewards[truck.truck_id] = 0.0;
    out.done[truck.truck_id] = false;
  }
  out.info = info();
  return out;
}

const TruckState& Environment::truck(int truck_id) const {
  auto it = truck_index_.find(truck_id);
  if (it == truck_index_.end()) {
    throw ValidationError("unknown truck id " + std::to_string(truck_id));
  }
  return trucks_[it->second];
}

bool Environment::is_active(int truck_id) const {
  const TruckState& t = truck(truck_id);
  // Callers ask between steps, about the step they are deciding next; reset
  // leaves step_index_ at 0, so the first decided step is 1.
  return !t.finished && t.task->start_step <= step_index_ + 1;
}

bool Environment::all_finished() const {
  return std::all_of(trucks_.begin(), trucks_.end(),
                     [](const TruckState& t) { return t.finished; });
}

double Environment::delay_cap_minutes(int truck_id) const {
  return truck(truck_id).delay_cap_minutes;
}

ActionMask Environment::scenario_menu(Scenario scenario, bool at_hub) {
  auto bit = [](Action a) { return 1u << static_cast<unsigned>(a); };
  switch (scenario) {
    case Scenario::Wait:
      return at_hub ? (bit(Action::Wait) | bit(Action::SpeedMed))
                    : bit(Action::SpeedMed);
    case Scenario::Speed:
      return bit(Action::SpeedLow) | bit(Action::SpeedMed) |
             bit(Action::SpeedHigh);
    case Scenario::Mix:
      return scenario_menu(Scenario::Wait, at_hub) |
             scenario_menu(Scenario::Speed, at_hub);
  }
  return 0;
}

ActionMask Environment::action_mask(int truck_id) const {
  const TruckState& t = truck(truck_id);
  if (t.finished) {
    throw IllegalActionError("truck " + std::to_string(truck_id) +
                             " is finished");
  }
  if (!is_active(truck_id)) {
    throw IllegalActionError("truck " + std::to_string(truck_id) +
                             " has not started yet");
  }
  ActionMask mask = scenario_menu(config_.scenario, t.location.at_hub);
  if (t.delay_minutes > t.delay_cap_minutes) {
    mask &= ~(1u << static_cast<unsigned>(Action::Wait));
    mask &= ~(1u << static_cast<unsigned>(Action::SpeedLow));
  }
  return mask;
}

Action Environment::sample_random_action(int truck_id) {
  ActionMask mask = action_mask(truck_id);
  std::vector<Action> legal;
  for (int a = 0; a < kActionCount; ++a) {
    if (mask_has(mask, static_cast<Action>(a))) {
      legal.push_back(static_cast<Action>(a));
    }
  }
  return legal[rng_() % legal.size()];
}

void Environment::apply_kinematics(TruckState& t, Action action) {
  const auto& route = t.task->route;
  if (action == Action::Wait) {
    t.waited_this_step = true;
    t.delay_minutes += config_.dt_minutes;
    return;
  }

  double v = action == Action::SpeedLow   ? config_.v_low_kmh
             : action == Action::SpeedMed ? config_.v_med_kmh
                                          : config_.v_high_kmh;
  t.step_speed_kmh = v;

  if (t.location.at_hub) {
    int ei = graph_.edge_between(route[static_cast<size_t>(t.route_leg)],
                                 route[static_cast<size_t>(t.route_leg) + 1]);
    t.location = Location{false, -1, ei, 0.0};
    t.departed_this_step = true;
  }

  int edge_index = t.location.edge_index;
  const net::RoadEdge& edge = graph_.edge(edge_index);
  double advance = v * config_.dt_minutes / 60.0;
  double remaining = edge.length_km - t.location.position_km;
  if (advance >= remaining) {
    // Overshoot is discarded; the truck arrives and waits for the next step.
    t.traveled_km += remaining;
    t.step_distance_km += remaining;
    t.route_leg += 1;
    t.location = Location{true, route[static_cast<size_t>(t.route_leg)], -1,
                          0.0};
    t.arrived_this_step = true;
    t.arrived_via_edge = edge_index;
    if (t.route_leg + 1 == static_cast<int>(route.size())) {
      t.finished = true;
      t.finish_step = step_index_;
    }
  } else {
    t.location.position_km += advance;
    t.traveled_km += advance;
    t.step_distance_km += advance;
  }

  if (action == Action::SpeedLow) {
    t.delay_minutes +=
        config_.dt_minutes * (config_.v_med_kmh / config_.v_low_kmh - 1.0);
  } else if (action == Action::SpeedHigh) {
    double recovered =
        config_.dt_minutes * (1.0 - config_.v_med_kmh / config_.v_high_kmh);
    t.delay_minutes = std::max(0.0, t.delay_minutes - recovered);
  }
}

namespace {

// Co-travel key after kinematics: trucks sharing a key traveled to the same
// place this step. kind 0 = on edge (bit-exact position after snapping),
// kind 1 = arrived at hub via edge.
struct CoKey {
  int kind = 0;
  int a = 0;
  int b = 0;
  double pos = 0.0;

  bool operator<(const CoKey& o) const {
    return std::tie(kind, a, b, pos) < std::tie(o.kind, o.a, o.b, o.pos);
  }
};

struct StepRecord {
  Action action = Action::Wait;
  bool departed = false;
  bool arrived = false;
  int arrived_via = -1;
};

}  // namespace

void Environment::update_platoons(const std::map<int, Action>& joint_actions) {
  const bool wait_rule =
      config_.scenario == Scenario::Wait || config_.scenario == Scenario::Mix;
  const bool speed_rule =
      config_.scenario == Scenario::Speed || config_.scenario == Scenario::Mix;

  std::map<int, StepRecord> records;  // acting trucks only
  for (const auto& [id, action] : joint_actions) {
    const TruckState& t = truck(id);
    StepRecord rec;
    rec.action = action;
    rec.departed = t.departed_this_step;
    rec.arrived = t.arrived_this_step;
    rec.arrived_via = t.arrived_via_edge;
    records[id] = rec;
  }

  // Snap pass (speed rule): SpeedMed trucks on the same edge within the
  // catch-up tolerance collapse onto the leader's position.
  if (speed_rule) {
    std::map<int, std::vector<int>> med_by_edge;
    for (const auto& [id, rec] : records) {
      const TruckState& t = truck(id);
      if (rec.action == Action::SpeedMed && !t.location.at_hub) {
        med_by_edge[t.location.edge_index].push_back(id);
      }
    }
    for (auto& [edge, ids] : med_by_edge) {
      (void)edge;
      std::sort(ids.begin(), ids.end(), [this](int a, int b) {
        double pa = truck(a).location.position_km;
        double pb = truck(b).location.position_km;
        if (pa != pb) return pa > pb;
        return a < b;
      });
      double leader_pos = truck(ids[0]).location.position_km;
      for (int id : ids) {
        TruckState& t = trucks_[truck_index_[id]];
        if (leader_pos - t.location.position_km <=
            config_.catchup_tolerance_km) {
          double jump = leader_pos - t.location.position_km;
          t.location.position_km = leader_pos;
          t.traveled_km += jump;
          t.step_distance_km += jump;
        } else {
          leader_pos = t.location.position_km;  // next cluster
        }
      }
    }
  }

  // Group acting trucks by co-travel key.
  std::map<CoKey, std::vector<int>> groups;
  for (const auto& [id, rec] : records) {
    const TruckState& t = truck(id);
    if (rec.action == Action::Wait) continue;
    CoKey key;
    if (t.location.at_hub) {
      key = CoKey{1, t.location.hub_id, rec.arrived_via, 0.0};
    } else {
      key = CoKey{0, t.location.edge_index, 0, t.location.position_km};
    }
    groups[key].push_back(id);
  }

  PlatoonLedger next;
  next.next_id = ledger_.next_id;
  std::map<int, std::optional<int>> assigned;  // truck -> platoon id
  for (const auto& t : trucks_) assigned[t.truck_id] = std::nullopt;
  // A platoon that splits into two co-located subgroups may continue only
  // once under its old id; later claimants get fresh ids.
  std::set<int> claimed_ids;

  for (const auto& [key, ids] : groups) {
    // Units: continuing previous platoons (>= 2 members sharing the key),
    // the co-departure group (wait rule), then leftover singletons.
    std::map<int, std::vector<int>> by_prev;
    std::vector<int> loose;
    for (int id : ids) {
      const TruckState& t = truck(id);
      if (t.platoon_id.has_value()) {
        by_prev[*t.platoon_id].push_back(id);
      } else {
        loose.push_back(id);
      }
    }
    struct Unit {
      std::vector<int> members;
      std::optional<int> prev_id;
      bool licensed = false;  // already a platoon (continuation/co-departure)
    };
    std::vector<Unit> units;
    for (auto& [prev, members] : by_prev) {
      if (members.size() >= 2) {
        units.push_back(Unit{members, prev, true});
      } else {
        loose.push_back(members[0]);  // platoon-mates diverged; lapses
      }
    }
    std::sort(loose.begin(), loose.end());
    if (wait_rule) {
      std::vector<int> departers;
      for (int id : loose) {
        if (records[id].departed) departers.push_back(id);
      }
      if (departers.size() >= 2) {
        for (int id : departers) {
          loose.erase(std::find(loose.begin(), loose.end(), id));
        }
        units.push_back(Unit{departers, std::nullopt, true});
      }
    }
    for (int id : loose) units.push_back(Unit{{id}, std::nullopt, false});

    // Speed rule: merge every unit moving at SpeedMed. On-edge keys always
    // qualify; arrival keys only for trucks that departed this step (they
    // were co-located at the hub).
    if (speed_rule) {
      Unit merged;
      std::vector<Unit> rest;
      for (auto& unit : units) {
        bool all_med = true;
        bool all_departed = true;
        for (int id : unit.members) {
          all_med = all_med && records[id].action == Action::SpeedMed;
          all_departed = all_departed && records[id].departed;
        }
        bool qualifies = all_med && (key.kind == 0 || all_departed);
        if (qualifies) {
          merged.members.insert(merged.members.end(), unit.members.begin(),
                                unit.members.end());
          if (!merged.prev_id.has_value()) merged.prev_id = unit.prev_id;
        } else {
          rest.push_back(std::move(unit));
        }
      }
      if (!merged.members.empty()) {
        merged.licensed = merged.members.size() >= 2;
        rest.push_back(std::move(merged));
      }
      units = std::move(rest);
    }

    for (auto& unit : units) {
      if (unit.members.size() < 2 || !unit.licensed) continue;
      std::sort(unit.members.begin(), unit.members.end());
      int pid = unit.prev_id.has_value() && !claimed_ids.count(*unit.prev_id)
                    ? *unit.prev_id
                    : next.next_id++;
      claimed_ids.insert(pid);
      for (int id : unit.members) {
        TruckState& t = trucks_[truck_index_[id]];
        t.step_platoon_km = t.step_distance_km;
        t.platoon_km += t.step_distance_km;
        platoon_km_total_ += t.step_distance_km;
        assigned[id] = pid;
      }
      // Platoons dissolve on hub arrival, after the step's accrual.
      if (key.kind == 0) {
        next.active[pid] = PlatoonLedger::Platoon{unit.members, step_index_};
      } else {
        for (int id : unit.members) assigned[id] = std::nullopt;
      }
    }
  }

  for (auto& t : trucks_) t.platoon_id = assigned[t.truck_id];
  ledger_ = std::move(next);
}

double Environment::reward_for(int truck_id) {
  if (program_ == nullptr) return 0.0;
  FeatureMap features = feature_snapshot(truck_id);
  auto result = dsl::evaluate(*program_, features);
  if (!result.ok()) {
    throw RewardRuntimeError(truck_id, step_index_, result.error());
  }
  return result.value();
}

StepOutcome Environment::step(const std::map<int, Action>& joint_actions) {
  if (episode_over()) {
    throw IllegalActionError("episode is over; call reset()");
  }
  step_index_ += 1;

  // Every truck active at the step being executed must act, with a legal
  // action; nobody else may. step_index_ was already advanced above.
  std::map<int, Action> acting;
  for (const auto& t : trucks_) {
    if (t.finished || t.task->start_step > step_index_) continue;
    auto it = joint_actions.find(t.truck_id);
    if (it == joint_actions.end()) {
      throw IllegalActionError("truck " + std::to_string(t.truck_id) +
                               " is active but supplied no action");
    }
    if (!mask_has(action_mask(t.truck_id), it->second)) {
      throw IllegalActionError("action '" +
                               std::string(action_name(it->second)) +
                               "' is illegal for truck " +
                               std::to_string(t.truck_id));
    }
    acting[t.truck_id] = it->second;
  }
  for (const auto& [id, action] : joint_actions) {
    (void)action;
    if (!acting.count(id)) {
      throw IllegalActionError("truck " + std::to_string(id) +
                               " is not active this step");
    }
  }

  for (auto& t : trucks_) {
    t.step_distance_km = 0.0;
    t.step_platoon_km = 0.0;
    t.step_speed_kmh = 0.0;
    t.waited_this_step = false;
    t.departed_this_step = false;
    t.arrived_this_step = false;
    t.arrived_via_edge = -1;
  }
  for (const auto& [id, action] : acting) {
    apply_kinematics(trucks_[truck_index_[id]], action);
  }

  update_platoons(acting);

  StepOutcome out;
  for (const auto& [id, action] : acting) {
    TruckState& t = trucks_[truck_index_[id]];
    traveled_km_total_ += t.step_distance_km;

    TrajectoryRow row;
    row.step = step_index_;
    row.truck_id = id;
    row.action = action;
    row.location = t.location;
    row.platoon_id = t.platoon_id;
    row.delay_minutes = t.delay_minutes;
    row.step_distance_km = t.step_distance_km;
    row.departed = t.departed_this_step;
    row.arrived = t.arrived_this_step;
    row.arrived_via_edge = t.arrived_via_edge;
    trajectory_.push_back(row);

    out.rewards[id] = reward_for(id);
    out.observations[id] = observe(id);
    out.done[id] = t.finished || horizon_reached();
  }
  out.info = info();
  return out;
}

namespace {

// Next route edge the truck will enter; -1 when none remains.
int next_edge_of(const net::TransportGraph& graph, const TruckState& t) {
  const auto& route = t.task->route;
  int from_leg = t.location.at_hub ? t.route_leg : t.route_leg + 1;
  if (from_leg + 1 >= static_cast<int>(route.size())) return -1;
  return graph.edge_between(route[static_cast<size_t>(from_leg)],
                            route[static_cast<size_t>(from_leg) + 1]);
}

}  // namespace

Observation Environment::observe(int truck_id) const {
  const TruckState& t = truck(truck_id);
  Observation obs;
  obs.location_code = t.location.at_hub
                          ? static_cast<double>(t.location.hub_id)
                          : -static_cast<double>(t.location.edge_index + 1);
  if (!t.location.at_hub) {
    const net::RoadEdge& e = graph_.edge(t.location.edge_index);
    obs.progress_fraction = t.location.position_km / e.length_km;
  }
  obs.remaining_route_km = t.route_length_km - t.traveled_km;
  obs.delay_minutes = t.delay_minutes;
  obs.remaining_slack_minutes = t.delay_cap_minutes - t.delay_minutes;
  if (t.platoon_id.has_value()) {
    auto it = ledger_.active.find(*t.platoon_id);
    if (it != ledger_.active.end()) {
      obs.platoon_size = static_cast<double>(it->second.members.size());
    }
  }
  obs.step_index = static_cast<double>(step_index_);

  int ego_next_edge = t.finished ? -1 : next_edge_of(graph_, t);
  for (const auto& other : trucks_) {
    if (other.truck_id == t.truck_id) continue;
    if (other.finished || other.task->start_step > step_index_ + 1) continue;
    bool co_located = false;
    if (t.location.at_hub && other.location.at_hub &&
        other.location.hub_id == t.location.hub_id) {
      obs.hub_truck_count += 1.0;
      co_located = true;
    } else if (!t.location.at_hub && !other.location.at_hub &&
               other.location.edge_index == t.location.edge_index) {
      if (std::fabs(other.location.position_km - t.location.position_km) <=
          config_.catchup_tolerance_km) {
        obs.edge_nearby_count += 1.0;
      }
      co_located = other.location.position_km == t.location.position_km;
    }
    if (co_located && ego_next_edge >= 0 &&
        next_edge_of(graph_, other) == ego_next_edge) {
      obs.shared_next_edge_count += 1.0;
    }
  }
  return obs;
}

FeatureMap Environment::feature_snapshot(int truck_id) const {
  const TruckState& t = truck(truck_id);
  Observation obs = observe(truck_id);
  FeatureMap f(FeatureCatalog::v1());
  f[feat::kPlatoonSize] = obs.platoon_size;
  f[feat::kInPlatoon] = obs.platoon_size >= 2.0 ? 1.0 : 0.0;
  f[feat::kStepPlatoonKm] = t.step_platoon_km;
  f[feat::kDelayMinutes] = t.delay_minutes;
  f[feat::kRemainingSlackMinutes] = obs.remaining_slack_minutes;
  f[feat::kHubTruckCount] = obs.hub_truck_count;
  f[feat::kEdgeNearbyCount] = obs.edge_nearby_count;
  f[feat::kSharedNextEdgeCount] = obs.shared_next_edge_count;
  f[feat::kProgressFraction] = obs.progress_fraction;
  f[feat::kRemainingKm] = obs.remaining_route_km;
  f[feat::kIsAtHub] = t.location.at_hub ? 1.0 : 0.0;
  f[feat::kIsFinished] = t.finished ? 1.0 : 0.0;
  f[feat::kStepIndex] = static_cast<double>(step_index_);
  f[feat::kSpeedKmh] = t.step_speed_kmh;
  f[feat::kWaitedThisStep] = t.waited_this_step ? 1.0 : 0.0;
  return f;
}

EpisodeInfo Environment::info() const {
  EpisodeInfo i;
  i.platoon_km_total = platoon_km_total_;
  i.traveled_km_total = traveled_km_total_;
  double t_d = 0.0;
  for (const auto& t : trucks_) t_d += t.delay_minutes;
  i.delay_minutes_total = t_d;
  if (config_.objective == ObjectiveKind::SingleObject) {
    i.running_objective = config_.platoon_profit_per_km * platoon_km_total_;
  } else if (traveled_km_total_ > 0.0 && t_total_minutes_ > 0.0) {
    i.running_objective = platoon_km_total_ / traveled_km_total_ -
                          t_d / t_total_minutes_;
  } else {
    i.running_objective = 0.0;
  }
  return i;
}

double Environment::compute_objective() const {
  if (config_.objective == ObjectiveKind::SingleObject) {
    return config_.platoon_profit_per_km * platoon_km_total_;
  }
  if (traveled_km_total_ == 0.0 || t_total_minutes_ == 0.0) {
    throw DegenerateDenominatorError(
        "multi-objective J undefined: no distance traveled or empty scenario");
  }
  double t_d = 0.0;
  for (const auto& t : trucks_) t_d += t.delay_minutes;
  return platoon_km_total_ / traveled_km_total_ - t_d / t_total_minutes_;
}

void write_trajectory(const std::vector<TrajectoryRow>& rows,
                      std::ostream& out) {
  for (const auto& r : rows) {
    out << r.step << ' ' << r.truck_id << ' ' << action_name(r.action) << ' ';
    if (r.location.at_hub) {
      out << "hub:" << r.location.hub_id;
    } else {
      out << "edge:" << r.location.edge_index << ':'
          << format_double(r.location.position_km);
    }
    out << ' ' << (r.platoon_id.has_value() ? std::to_string(*r.platoon_id)
                                            : std::string("-"));
    out << ' ' << format_double(r.delay_minutes) << "\n";
  }
}

std::string render_environment_brief(const EnvConfig& config) {
  std::ostringstream out;
  const auto& catalog = FeatureCatalog::v1();
  out << "PLATOON COORDINATION ENVIRONMENT BRIEF (feature catalog "
      << catalog.version << ")\n\n";

  out << "== World ==\n"
      << "Trucks carry freight tasks over a directed hub network. Time "
         "advances in steps of "
      << config.dt_minutes << " minutes with a horizon of "
      << config.horizon_minutes << " minutes (" << config.horizon_steps()
      << " steps). Each truck follows a fixed shortest route and must reach "
         "its destination before its deadline. Speeds: low "
      << format_double(config.v_low_kmh) << " km/h, medium "
      << format_double(config.v_med_kmh) << " km/h, high "
      << format_double(config.v_high_kmh) << " km/h.\n\n";

  out << "== Actions (scenario: " << scenario_name(config.scenario) << ") ==\n";
  switch (config.scenario) {
    case Scenario::Wait:
      out << "At a hub a truck may wait one step or depart at medium speed; "
             "on an edge it always drives at medium speed. Waiting is the "
             "only coordination lever.\n";
      break;
    case Scenario::Speed:
      out << "A truck always drives, choosing low, medium or high speed each "
             "step; there is no waiting at hubs. Speed choice is the only "
             "coordination lever.\n";
      break;
    case Scenario::Mix:
      out << "At a hub a truck may wait one step or depart at low, medium or "
             "high speed; on an edge it chooses low, medium or high speed "
             "each step.\n";
      break;
  }
  char g4[32];
  out << "Delay accounting: waiting adds " << config.dt_minutes
      << " min of delay per step; low speed adds ";
  std::snprintf(g4, sizeof(g4), "%.4g",
                config.dt_minutes * (config.v_med_kmh / config.v_low_kmh - 1.0));
  out << g4 << " min per step; high speed recovers ";
  std::snprintf(g4, sizeof(g4), "%.4g",
                config.dt_minutes *
                    (1.0 - config.v_med_kmh / config.v_high_kmh));
  out << g4
      << " min per step (delay never drops below 0). Each truck has a delay "
         "cap of "
      << format_double(config.delay_fraction * 100.0)
      << "% of its medium-speed trip time; while delay exceeds the cap, Wait "
         "and low speed are masked out until the truck catches up.\n\n";

  out << "== Platoon rules ==\n";
  if (config.scenario == Scenario::Wait || config.scenario == Scenario::Mix) {
    out << "Trucks that depart the same hub on the same step onto the same "
           "edge (at the same speed) form a platoon.\n";
  }
  if (config.scenario == Scenario::Speed || config.scenario == Scenario::Mix) {
    out << "Trucks on the same edge that both choose medium speed and sit "
           "within "
        << format_double(config.catchup_tolerance_km)
        << " km of each other snap together and merge into a platoon.\n";
  }
  out << "A platoon needs at least 2 trucks, persists until its members "
         "reach the next hub, and may re-form there. Every kilometer a "
         "member travels while platooned counts into the platoon distance "
         "D_p.\n\n";

  out << "== Objective ==\n";
  if (config.objective == ObjectiveKind::SingleObject) {
    out << "J = " << format_double(config.platoon_profit_per_km)
        << " * D_p, the platoon fuel profit; D_p is the total platoon "
           "distance over all trucks. Delay is irrelevant to J (the delay "
           "cap still applies).\n\n";
  } else {
    out << "J = D_p / D_total - T_d / T_total: the fraction of all driven "
           "kilometers spent platooned minus the total delay relative to the "
           "medium-speed trip times. Forming platoons raises J; delay lowers "
           "it.\n\n";
  }

  out << "== Per-truck reward features (all finite numbers) ==\n";
  for (const auto& entry : catalog.entries) {
    out << entry.name << " [" << entry.units << "]: " << entry.description
        << "\n";
  }
  out << "\n== Reward language ==\n"
      << "A reward program is a list of weighted terms evaluated per truck "
         "per step; the reward is the weighted sum.\n"
      << dsl::grammar_summary()
      << "Example:\n"
         "term platoon_bonus weight 1.0: in_platoon * step_platoon_km\n"
         "term delay_penalty weight -0.05: delay_minutes\n";
  return out.str();
}

std::uint64_t brief_hash(const EnvConfig& config) {
  return fnv1a64(render_environment_brief(config));
}

}  // namespace pcrd::sim
