#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pcrd::net {

struct Hub {
  int id = 0;
  std::string name;
  double lat = 0.0;
  double lon = 0.0;
  std::int64_t population = 1;
};

struct RoadEdge {
  int from_hub = 0;
  int to_hub = 0;
  double length_km = 0.0;
};

struct Zone {
  int id = 0;
  std::vector<int> hub_ids;  // kept sorted
};

class TransportGraph {
 public:
  TransportGraph() = default;
  TransportGraph(std::vector<Hub> hubs, std::vector<RoadEdge> edges,
                 std::vector<Zone> zones);

  const std::vector<Hub>& hubs() const { return hubs_; }
  const std::vector<RoadEdge>& edges() const { return edges_; }
  const std::vector<Zone>& zones() const { return zones_; }

  bool has_hub(int id) const { return hub_index_.count(id) > 0; }
  const Hub& hub(int id) const;
  const RoadEdge& edge(int index) const {
    return edges_[static_cast<size_t>(index)];
  }

  // Outgoing edge indices, sorted by destination hub id.
  const std::vector<int>& outgoing(int hub_id) const;

  // -1 when no such edge exists.
  int edge_between(int from_hub, int to_hub) const;

  double route_length_km(const std::vector<int>& route) const;

 private:
  void rebuild_adjacency();
  void check_invariants() const;

  std::vector<Hub> hubs_;
  std::vector<RoadEdge> edges_;
  std::vector<Zone> zones_;
  std::map<int, size_t> hub_index_;
  std::map<int, std::vector<int>> adjacency_;
};

struct FreightTask {
  int truck_id = 0;
  int origin = 0;
  int destination = 0;
  int start_step = 1;
  int deadline_step = 2;
  std::vector<int> route;  // origin ... destination, consecutive hubs adjacent
};

// Minimum total length_km; ties broken by the lexicographically smallest
// hub-id sequence so routing is platform independent.
std::vector<int> shortest_path(const TransportGraph& graph, int origin,
                               int destination);

// Same, restricted to edges whose endpoints both lie in `allowed_hubs`.
std::vector<int> shortest_path_within(const TransportGraph& graph, int origin,
                                      int destination,
                                      const std::vector<int>& allowed_hubs);

// deadline_step = start_step + ceil((1 + delay_fraction) * T_vm / dt),
// T_vm = 60 * length_km / v_med. Shared by mission generation and the
// simulator so both sides agree on the cap.
int deadline_step_for(double route_length_km, int start_step, int dt_minutes,
                      double v_med_kmh, double delay_fraction);

struct MissionParams {
  int missions_per_zone = 5;
  int window_lo = 1;   // inclusive start-step window
  int window_hi = 73;  // 6 h morning window at dt = 5
  int dt_minutes = 5;
  double v_med_kmh = 75.0;
  double delay_fraction = 0.1;
};

// Deterministic in (graph, zones, params, seed). Origin/destination sampled
// within each zone proportionally to hub population; routes are zone-internal
// shortest paths; origin == destination pairs are resampled (64 attempts).
std::vector<FreightTask> generate_missions(const TransportGraph& graph,
                                           const MissionParams& params,
                                           std::uint64_t seed);

TransportGraph load_graph(std::istream& in);
TransportGraph load_graph_file(const std::string& path);
void save_graph(const TransportGraph& graph, std::ostream& out);
void save_graph_file(const TransportGraph& graph, const std::string& path);

std::vector<FreightTask> load_missions(std::istream& in);
std::vector<FreightTask> load_missions_file(const std::string& path);
void save_missions(const std::vector<FreightTask>& tasks, std::ostream& out);
void save_missions_file(const std::vector<FreightTask>& tasks,
                        const std::string& path);

struct SyntheticParams {
  int hub_count = 41;
  int edge_count = 202;  // directed
  int zone_count = 12;
  int zone_min = 5;
  int zone_max = 9;
  double min_length_km = 30.0;
  double max_length_km = 200.0;
};

// Seeded generator matching the bundled dataset's scale statistics: every
// zone's induced subgraph is strongly connected and every hub is covered by
// at least one zone.
TransportGraph generate_synthetic_network(const SyntheticParams& params,
                                          std::uint64_t seed);

}  // namespace pcrd::net
