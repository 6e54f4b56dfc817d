#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace pcrd {

// The feature catalog is the contract between the simulator (which fills a
// FeatureMap per truck per step) and the reward DSL (whose programs may only
// reference catalog identifiers). Versioned so generated programs can be
// re-checked against the catalog they were written for.
struct FeatureCatalog {
  struct Entry {
    std::string name;
    std::string description;
    std::string units;
  };

  std::string version;
  std::vector<Entry> entries;

  // -1 when absent.
  int index_of(std::string_view name) const {
    for (size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].name == name) return static_cast<int>(i);
    }
    return -1;
  }

  static const FeatureCatalog& v1();
};

// Indices into FeatureCatalog::v1(), in catalog order.
namespace feat {
inline constexpr int kPlatoonSize = 0;
inline constexpr int kInPlatoon = 1;
inline constexpr int kStepPlatoonKm = 2;
inline constexpr int kDelayMinutes = 3;
inline constexpr int kRemainingSlackMinutes = 4;
inline constexpr int kHubTruckCount = 5;
inline constexpr int kEdgeNearbyCount = 6;
inline constexpr int kSharedNextEdgeCount = 7;
inline constexpr int kProgressFraction = 8;
inline constexpr int kRemainingKm = 9;
inline constexpr int kIsAtHub = 10;
inline constexpr int kIsFinished = 11;
inline constexpr int kStepIndex = 12;
inline constexpr int kSpeedKmh = 13;
inline constexpr int kWaitedThisStep = 14;
inline constexpr int kCount = 15;
}  // namespace feat

// Dense per-truck snapshot aligned with a catalog.
class FeatureMap {
 public:
  explicit FeatureMap(const FeatureCatalog& catalog = FeatureCatalog::v1())
      : catalog_(&catalog), values_(catalog.entries.size(), 0.0) {}

  const FeatureCatalog& catalog() const { return *catalog_; }
  size_t size() const { return values_.size(); }

  double operator[](int idx) const { return values_[static_cast<size_t>(idx)]; }
  double& operator[](int idx) { return values_[static_cast<size_t>(idx)]; }

  // Name-based access, mainly for tests and the CLI probe.
  void set(std::string_view name, double v);
  double get(std::string_view name) const;

 private:
  const FeatureCatalog* catalog_;
  std::vector<double> values_;
};

}  // namespace pcrd
