#include "pcrd/features.hpp"

namespace pcrd {

const FeatureCatalog& FeatureCatalog::v1() {
  static const FeatureCatalog catalog{
      "v1",
      {
          {"platoon_size",
           "number of trucks in the ego truck's platoon, 0 when not in one",
           "count"},
          {"in_platoon", "1 when the ego truck is in a platoon, else 0",
           "flag"},
          {"step_platoon_km",
           "kilometers traveled in a platoon during this step", "km"},
          {"delay_minutes", "accumulated schedule delay", "minutes"},
          {"remaining_slack_minutes",
           "delay budget left before the delay cap masks slow actions "
           "(negative when over the cap)",
           "minutes"},
          {"hub_truck_count",
           "other trucks currently at the same hub (0 when on an edge)",
           "count"},
          {"edge_nearby_count",
           "other trucks on the same edge within the catch-up tolerance "
           "(0 when at a hub)",
           "count"},
          {"shared_next_edge_count",
           "other co-located trucks whose next route edge matches the ego "
           "truck's next edge",
           "count"},
          {"progress_fraction",
           "fraction of the current edge already covered, 0 at a hub",
           "fraction"},
          {"remaining_km", "route distance left to the destination", "km"},
          {"is_at_hub", "1 when at a hub, else 0", "flag"},
          {"is_finished", "1 once the freight task is completed", "flag"},
          {"step_index", "current environment step (1-based)", "steps"},
          {"speed_kmh", "speed driven during this step, 0 when waiting",
           "km/h"},
          {"waited_this_step", "1 when the action this step was Wait", "flag"},
      }};
  return catalog;
}

void FeatureMap::set(std::string_view name, double v) {
  int idx = catalog_->index_of(name);
  if (idx >= 0) values_[static_cast<size_t>(idx)] = v;
}

double FeatureMap::get(std::string_view name) const {
  int idx = catalog_->index_of(name);
  return idx >= 0 ? values_[static_cast<size_t>(idx)] : 0.0;
}

}  // namespace pcrd
