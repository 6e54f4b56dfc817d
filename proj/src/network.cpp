#include "pcrd/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <queue>
#include <random>
#include <set>
#include <sstream>

#include "pcrd/errors.hpp"
#include "pcrd/util.hpp"

namespace pcrd::net {

namespace {

double u01(std::mt19937_64& rng) {
  // 53 mantissa bits; avoids the implementation-defined std distributions.
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

size_t weighted_index(std::mt19937_64& rng,
                      const std::vector<double>& cumulative) {
  double r = u01(rng) * cumulative.back();
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
  size_t idx = static_cast<size_t>(it - cumulative.begin());
  return std::min(idx, cumulative.size() - 1);
}

double haversine_km(double lat1, double lon1, double lat2, double lon2) {
  constexpr double kEarthRadiusKm = 6371.0;
  constexpr double kDeg = 3.14159265358979323846 / 180.0;
  double dlat = (lat2 - lat1) * kDeg;
  double dlon = (lon2 - lon1) * kDeg;
  double a = std::sin(dlat / 2) * std::sin(dlat / 2) +
             std::cos(lat1 * kDeg) * std::cos(lat2 * kDeg) *
                 std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(a)));
}

}  // namespace

TransportGraph::TransportGraph(std::vector<Hub> hubs,
                               std::vector<RoadEdge> edges,
                               std::vector<Zone> zones)
    : hubs_(std::move(hubs)), edges_(std::move(edges)), zones_(std::move(zones)) {
  for (size_t i = 0; i < hubs_.size(); ++i) {
    if (!hub_index_.emplace(hubs_[i].id, i).second) {
      throw ValidationError("duplicate hub id " + std::to_string(hubs_[i].id));
    }
  }
  check_invariants();
  for (auto& zone : zones_) {
    std::sort(zone.hub_ids.begin(), zone.hub_ids.end());
    zone.hub_ids.erase(std::unique(zone.hub_ids.begin(), zone.hub_ids.end()),
                       zone.hub_ids.end());
  }
  rebuild_adjacency();
}

void TransportGraph::check_invariants() const {
  for (const auto& hub : hubs_) {
    if (hub.population <= 0) {
      throw ValidationError("hub " + std::to_string(hub.id) +
                            " has non-positive population");
    }
    if (hub.name.empty() ||
        hub.name.find_first_of(" \t") != std::string::npos) {
      throw ValidationError("hub " + std::to_string(hub.id) +
                            " has an empty or whitespace-containing name");
    }
  }
  std::set<std::pair<int, int>> seen;
  for (const auto& edge : edges_) {
    if (!hub_index_.count(edge.from_hub) || !hub_index_.count(edge.to_hub)) {
      throw ValidationError("edge " + std::to_string(edge.from_hub) + "->" +
                            std::to_string(edge.to_hub) +
                            " references an unknown hub id");
    }
    if (edge.from_hub == edge.to_hub) {
      throw ValidationError("self-loop edge at hub " +
                            std::to_string(edge.from_hub));
    }
    if (!(edge.length_km > 0.0)) {
      throw ValidationError("edge " + std::to_string(edge.from_hub) + "->" +
                            std::to_string(edge.to_hub) +
                            " has non-positive length");
    }
    if (!seen.emplace(edge.from_hub, edge.to_hub).second) {
      throw ValidationError("duplicate edge " + std::to_string(edge.from_hub) +
                            "->" + std::to_string(edge.to_hub));
    }
  }
  std::set<int> zone_ids;
  for (const auto& zone : zones_) {
    if (!zone_ids.insert(zone.id).second) {
      throw ValidationError("duplicate zone id " + std::to_string(zone.id));
    }
    if (zone.hub_ids.empty()) {
      throw ValidationError("zone " + std::to_string(zone.id) + " is empty");
    }
    for (int h : zone.hub_ids) {
      if (!hub_index_.count(h)) {
        throw ValidationError("zone " + std::to_string(zone.id) +
                              " references unknown hub id " +
                              std::to_string(h));
      }
    }
  }
}

void TransportGraph::rebuild_adjacency() {
  adjacency_.clear();
  for (const auto& hub : hubs_) adjacency_[hub.id];
  for (size_t i = 0; i < edges_.size(); ++i) {
    adjacency_[edges_[i].from_hub].push_back(static_cast<int>(i));
  }
  for (auto& [hub, out] : adjacency_) {
    std::sort(out.begin(), out.end(), [this](int a, int b) {
      return edges_[static_cast<size_t>(a)].to_hub <
             edges_[static_cast<size_t>(b)].to_hub;
    });
  }
}

const Hub& TransportGraph::hub(int id) const {
  auto it = hub_index_.find(id);
  if (it == hub_index_.end()) {
    throw ValidationError("unknown hub id " + std::to_string(id));
  }
  return hubs_[it->second];
}

const std::vector<int>& TransportGraph::outgoing(int hub_id) const {
  auto it = adjacency_.find(hub_id);
  if (it == adjacency_.end()) {
    throw ValidationError("unknown hub id " + std::to_string(hub_id));
  }
  return it->second;
}

int TransportGraph::edge_between(int from_hub, int to_hub) const {
  auto it = adjacency_.find(from_hub);
  if (it == adjacency_.end()) return -1;
  for (int ei : it->second) {
    if (edges_[static_cast<size_t>(ei)].to_hub == to_hub) return ei;
  }
  return -1;
}

double TransportGraph::route_length_km(const std::vector<int>& route) const {
  double total = 0.0;
  for (size_t i = 0; i + 1 < route.size(); ++i) {
    int ei = edge_between(route[i], route[i + 1]);
    if (ei < 0) {
      throw ValidationError("route hubs " + std::to_string(route[i]) + "->" +
                            std::to_string(route[i + 1]) +
                            " are not connected by an edge");
    }
    total += edges_[static_cast<size_t>(ei)].length_km;
  }
  return total;
}

namespace {

std::vector<int> dijkstra(const TransportGraph& graph, int origin,
                          int destination,
                          const std::set<int>* allowed) {
  if (!graph.has_hub(origin) || !graph.has_hub(destination)) {
    throw ValidationError("shortest_path endpoints must exist in the graph");
  }
  if (origin == destination) return {origin};

  // Keys are (distance, hub-id path); the pair ordering yields the
  // lexicographically smallest sequence among equal-length routes.
  using Key = std::pair<double, std::vector<int>>;
  std::priority_queue<Key, std::vector<Key>, std::greater<Key>> heap;
  heap.push({0.0, {origin}});
  std::set<int> expanded;

  while (!heap.empty()) {
    auto [dist, path] = heap.top();
    heap.pop();
    int u = path.back();
    if (!expanded.insert(u).second) continue;
    if (u == destination) return path;
    for (int ei : graph.outgoing(u)) {
      const RoadEdge& e = graph.edge(ei);
      if (allowed != nullptr &&
          (!allowed->count(e.from_hub) || !allowed->count(e.to_hub))) {
        continue;
      }
      if (expanded.count(e.to_hub)) continue;
      std::vector<int> next = path;
      next.push_back(e.to_hub);
      heap.push({dist + e.length_km, std::move(next)});
    }
  }
  throw NoRouteError("no route from hub " + std::to_string(origin) +
                     " to hub " + std::to_string(destination));
}

}  // namespace

std::vector<int> shortest_path(const TransportGraph& graph, int origin,
                               int destination) {
  return dijkstra(graph, origin, destination, nullptr);
}

std::vector<int> shortest_path_within(const TransportGraph& graph, int origin,
                                      int destination,
                                      const std::vector<int>& allowed_hubs) {
  std::set<int> allowed(allowed_hubs.begin(), allowed_hubs.end());
  return dijkstra(graph, origin, destination, &allowed);
}

int deadline_step_for(double route_length_km, int start_step, int dt_minutes,
                      double v_med_kmh, double delay_fraction) {
  if (!(route_length_km > 0.0)) {
    throw ValidationError("route length must be positive");
  }
  double t_vm_minutes = 60.0 * route_length_km / v_med_kmh;
  double q = (1.0 + delay_fraction) * t_vm_minutes / dt_minutes;
  return start_step + static_cast<int>(std::ceil(q - 1e-9));
}

std::vector<FreightTask> generate_missions(const TransportGraph& graph,
                                           const MissionParams& params,
                                           std::uint64_t seed) {
  if (params.window_lo > params.window_hi || params.window_lo < 1) {
    throw ConfigError("invalid mission window");
  }
  std::mt19937_64 rng(seed);
  std::vector<FreightTask> tasks;
  int truck_id = 0;

  std::vector<Zone> zones = graph.zones();
  std::sort(zones.begin(), zones.end(),
            [](const Zone& a, const Zone& b) { return a.id < b.id; });

  for (const auto& zone : zones) {
    std::vector<double> cumulative;
    double total = 0.0;
    for (int h : zone.hub_ids) {
      total += static_cast<double>(graph.hub(h).population);
      cumulative.push_back(total);
    }
    for (int j = 0; j < params.missions_per_zone; ++j) {
      std::vector<int> route;
      int origin = -1;
      int destination = -1;
      bool found = false;
      for (int attempt = 0; attempt < 64 && !found; ++attempt) {
        origin = zone.hub_ids[weighted_index(rng, cumulative)];
        destination = zone.hub_ids[weighted_index(rng, cumulative)];
        if (origin == destination) continue;
        try {
          route = shortest_path_within(graph, origin, destination,
                                       zone.hub_ids);
          found = true;
        } catch (const NoRouteError&) {
        }
      }
      if (!found) {
        throw ZoneDisconnectedError(
            "zone " + std::to_string(zone.id) +
            ": no route between sampled hub pairs after 64 attempts");
      }
      FreightTask task;
      task.truck_id = truck_id++;
      task.origin = origin;
      task.destination = destination;
      task.start_step = uniform_int(rng, params.window_lo, params.window_hi);
      task.route = route;
      task.deadline_step = deadline_step_for(
          graph.route_length_km(route), task.start_step, params.dt_minutes,
          params.v_med_kmh, params.delay_fraction);
      tasks.push_back(std::move(task));
    }
  }
  return tasks;
}

// ------------------------------------------------------------- file I/O ----

TransportGraph load_graph(std::istream& in) {
  std::vector<Hub> hubs;
  std::vector<RoadEdge> edges;
  std::vector<Zone> zones;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    size_t hash = view.find('#');
    if (hash != std::string_view::npos) view = view.substr(0, hash);
    std::istringstream ss{std::string(view)};
    std::string tag;
    if (!(ss >> tag)) continue;
    if (tag == "HUB") {
      Hub hub;
      if (!(ss >> hub.id >> hub.name >> hub.lat >> hub.lon >> hub.population)) {
        throw ParseError("malformed HUB record", line_no);
      }
      hubs.push_back(std::move(hub));
    } else if (tag == "EDGE") {
      RoadEdge edge;
      if (!(ss >> edge.from_hub >> edge.to_hub >> edge.length_km)) {
        throw ParseError("malformed EDGE record", line_no);
      }
      edges.push_back(edge);
    } else if (tag == "ZONE") {
      Zone zone;
      if (!(ss >> zone.id)) {
        throw ParseError("malformed ZONE record", line_no);
      }
      int h;
      while (ss >> h) zone.hub_ids.push_back(h);
      if (zone.hub_ids.empty()) {
        throw ParseError("ZONE record without hub ids", line_no);
      }
      if (zone.hub_ids.size() < 5 || zone.hub_ids.size() > 9) {
        throw ValidationError("zone " + std::to_string(zone.id) + " has " +
                              std::to_string(zone.hub_ids.size()) +
                              " hubs, expected 5-9");
      }
      zones.push_back(std::move(zone));
    } else {
      throw ParseError("unknown record tag '" + tag + "'", line_no);
    }
  }
  return TransportGraph(std::move(hubs), std::move(edges), std::move(zones));
}

TransportGraph load_graph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open network file: " + path);
  return load_graph(in);
}

void save_graph(const TransportGraph& graph, std::ostream& out) {
  out << "# hubs: " << graph.hubs().size()
      << " edges: " << graph.edges().size()
      << " zones: " << graph.zones().size() << "\n";
  for (const auto& hub : graph.hubs()) {
    out << "HUB " << hub.id << ' ' << hub.name << ' ' << format_double(hub.lat)
        << ' ' << format_double(hub.lon) << ' ' << hub.population << "\n";
  }
  for (const auto& edge : graph.edges()) {
    out << "EDGE " << edge.from_hub << ' ' << edge.to_hub << ' '
        << format_double(edge.length_km) << "\n";
  }
  for (const auto& zone : graph.zones()) {
    out << "ZONE " << zone.id;
    for (int h : zone.hub_ids) out << ' ' << h;
    out << "\n";
  }
}

void save_graph_file(const TransportGraph& graph, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write network file: " + path);
  save_graph(graph, out);
}

std::vector<FreightTask> load_missions(std::istream& in) {
  std::vector<FreightTask> tasks;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    size_t hash = view.find('#');
    if (hash != std::string_view::npos) view = view.substr(0, hash);
    std::istringstream ss{std::string(view)};
    std::string tag;
    if (!(ss >> tag)) continue;
    if (tag != "TASK") throw ParseError("unknown record tag '" + tag + "'",
                                        line_no);
    FreightTask task;
    std::string route_field;
    if (!(ss >> task.truck_id >> task.origin >> task.destination >>
          task.start_step >> task.deadline_step >> route_field)) {
      throw ParseError("malformed TASK record", line_no);
    }
    std::istringstream rs(route_field);
    std::string part;
    while (std::getline(rs, part, ',')) {
      if (part.empty()) throw ParseError("malformed route field", line_no);
      task.route.push_back(std::stoi(part));
    }
    if (task.route.size() < 2 || task.route.front() != task.origin ||
        task.route.back() != task.destination) {
      throw ValidationError("task " + std::to_string(task.truck_id) +
                            ": route must run origin..destination");
    }
    if (task.start_step >= task.deadline_step) {
      throw ValidationError("task " + std::to_string(task.truck_id) +
                            ": start_step must precede deadline_step");
    }
    tasks.push_back(std::move(task));
  }
  return tasks;
}

std::vector<FreightTask> load_missions_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open mission file: " + path);
  return load_missions(in);
}

void save_missions(const std::vector<FreightTask>& tasks, std::ostream& out) {
  for (const auto& task : tasks) {
    out << "TASK " << task.truck_id << ' ' << task.origin << ' '
        << task.destination << ' ' << task.start_step << ' '
        << task.deadline_step << ' ';
    for (size_t i = 0; i < task.route.size(); ++i) {
      if (i > 0) out << ',';
      out << task.route[i];
    }
    out << "\n";
  }
}

void save_missions_file(const std::vector<FreightTask>& tasks,
                        const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write mission file: " + path);
  save_missions(tasks, out);
}

// -------------------------------------------------- synthetic generator ----

namespace {

bool zone_strongly_connected(const std::vector<int>& members,
                             const std::set<std::pair<int, int>>& arcs) {
  if (members.size() <= 1) return true;
  std::set<int> member_set(members.begin(), members.end());
  auto reach = [&](bool reverse) {
    std::set<int> visited{members[0]};
    std::vector<int> stack{members[0]};
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int v : members) {
        if (visited.count(v)) continue;
        bool connected = reverse ? arcs.count({v, u}) > 0
                                 : arcs.count({u, v}) > 0;
        if (connected) {
          visited.insert(v);
          stack.push_back(v);
        }
      }
    }
    return visited.size() == member_set.size();
  };
  return reach(false) && reach(true);
}

}  // namespace

TransportGraph generate_synthetic_network(const SyntheticParams& params,
                                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int n = params.hub_count;

  // Hub positions in a Yangtze-delta-sized box, spread by rejection sampling.
  std::vector<double> lat(n), lon(n);
  for (int i = 0; i < n; ++i) {
    for (int tries = 0; tries < 256; ++tries) {
      double la = 29.0 + u01(rng) * 4.2;
      double lo = 118.0 + u01(rng) * 4.5;
      bool ok = true;
      for (int j = 0; j < i; ++j) {
        double d = std::hypot(la - lat[j], lo - lon[j]);
        if (d < 0.30) {
          ok = false;
          break;
        }
      }
      if (ok || tries == 255) {
        lat[i] = la;
        lon[i] = lo;
        break;
      }
    }
  }

  std::vector<Hub> hubs(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    Hub& hub = hubs[static_cast<size_t>(i)];
    hub.id = i;
    char name[16];
    std::snprintf(name, sizeof(name), "city_%02d", i);
    hub.name = name;
    hub.lat = lat[i];
    hub.lon = lon[i];
    // Log-uniform metro populations, 200k .. ~24M.
    hub.population =
        static_cast<std::int64_t>(2.0e5 * std::exp(u01(rng) * std::log(120.0)));
  }

  // Zone seeds by farthest-point traversal, then nearest-seed assignment.
  const int zn = params.zone_count;
  std::vector<int> seeds{0};
  while (static_cast<int>(seeds.size()) < zn) {
    int best = -1;
    double best_d = -1.0;
    for (int i = 0; i < n; ++i) {
      double d = 1e300;
      for (int s : seeds) {
        d = std::min(d, std::hypot(lat[i] - lat[s], lon[i] - lon[s]));
      }
      if (d > best_d) {
        best_d = d;
        best = i;
      }
    }
    seeds.push_back(best);
  }

  std::vector<std::vector<int>> zone_members(static_cast<size_t>(zn));
  for (int i = 0; i < n; ++i) {
    int best = 0;
    double best_d = 1e300;
    for (int z = 0; z < zn; ++z) {
      double d = std::hypot(lat[i] - lat[seeds[static_cast<size_t>(z)]],
                            lon[i] - lon[seeds[static_cast<size_t>(z)]]);
      if (d < best_d) {
        best_d = d;
        best = z;
      }
    }
    zone_members[static_cast<size_t>(best)].push_back(i);
  }

  // Grow undersized zones with the nearest outside hubs (overlap allowed),
  // trim oversized ones back to the seed's nearest members.
  for (int z = 0; z < zn; ++z) {
    auto& members = zone_members[static_cast<size_t>(z)];
    int s = seeds[static_cast<size_t>(z)];
    auto by_seed_distance = [&](int a, int b) {
      double da = std::hypot(lat[a] - lat[s], lon[a] - lon[s]);
      double db = std::hypot(lat[b] - lat[s], lon[b] - lon[s]);
      if (da != db) return da < db;
      return a < b;
    };
    std::sort(members.begin(), members.end(), by_seed_distance);
    if (static_cast<int>(members.size()) > params.zone_max) {
      members.resize(static_cast<size_t>(params.zone_max));
    }
    if (static_cast<int>(members.size()) < params.zone_min) {
      std::vector<int> candidates;
      for (int i = 0; i < n; ++i) {
        if (std::find(members.begin(), members.end(), i) == members.end()) {
          candidates.push_back(i);
        }
      }
      std::sort(candidates.begin(), candidates.end(), by_seed_distance);
      for (int c : candidates) {
        if (static_cast<int>(members.size()) >= params.zone_min) break;
        members.push_back(c);
      }
    }
    std::sort(members.begin(), members.end());
  }

  // Every zone gets a bidirectional ring through its members (ordered by
  // angle around the zone centroid) so its induced subgraph is strongly
  // connected; remaining edge budget goes to the globally nearest hub pairs.
  std::set<std::pair<int, int>> arcs;
  auto add_pair = [&](int a, int b) {
    arcs.insert({a, b});
    arcs.insert({b, a});
  };
  for (int z = 0; z < zn; ++z) {
    auto ring = zone_members[static_cast<size_t>(z)];
    double cy = 0.0, cx = 0.0;
    for (int i : ring) {
      cy += lat[i];
      cx += lon[i];
    }
    cy /= static_cast<double>(ring.size());
    cx /= static_cast<double>(ring.size());
    std::sort(ring.begin(), ring.end(), [&](int a, int b) {
      double ta = std::atan2(lat[a] - cy, lon[a] - cx);
      double tb = std::atan2(lat[b] - cy, lon[b] - cx);
      if (ta != tb) return ta < tb;
      return a < b;
    });
    for (size_t i = 0; i < ring.size(); ++i) {
      add_pair(ring[i], ring[(i + 1) % ring.size()]);
    }
  }

  std::vector<std::pair<double, std::pair<int, int>>> candidates;
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      if (arcs.count({a, b})) continue;
      candidates.push_back(
          {haversine_km(lat[a], lon[a], lat[b], lon[b]), {a, b}});
    }
  }
  std::sort(candidates.begin(), candidates.end());
  for (const auto& [d, pair] : candidates) {
    (void)d;
    if (static_cast<int>(arcs.size()) >= params.edge_count) break;
    add_pair(pair.first, pair.second);
  }
  if (static_cast<int>(arcs.size()) != params.edge_count) {
    throw ConfigError("synthetic generator could not hit the edge budget of " +
                      std::to_string(params.edge_count));
  }

  std::vector<RoadEdge> edges;
  for (const auto& [a, b] : arcs) {
    RoadEdge e;
    e.from_hub = a;
    e.to_hub = b;
    double km = haversine_km(lat[a], lon[a], lat[b], lon[b]) * 1.25;
    e.length_km = std::clamp(km, params.min_length_km, params.max_length_km);
    edges.push_back(e);
  }

  std::vector<Zone> zones;
  for (int z = 0; z < zn; ++z) {
    if (!zone_strongly_connected(zone_members[static_cast<size_t>(z)], arcs)) {
      throw ConfigError("synthetic zone " + std::to_string(z) +
                        " is not strongly connected");
    }
    Zone zone;
    zone.id = z;
    zone.hub_ids = zone_members[static_cast<size_t>(z)];
    zones.push_back(std::move(zone));
  }

  return TransportGraph(std::move(hubs), std::move(edges), std::move(zones));
}

}  // namespace pcrd::net
