#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pcrd/air.hpp"
#include "pcrd/evoleap.hpp"
#include "pcrd/filter.hpp"
#include "pcrd/gateway.hpp"
#include "pcrd/network.hpp"
#include "pcrd/sim.hpp"
#include "pcrd/trainer.hpp"

namespace pcrd::pipeline {

struct PipelineConfig {
  int n_iter = 5;
  int k = 4;
  int m = 1;
  std::vector<evo::Strategy> strategies = evo::default_strategy_set();
  sim::EnvConfig env;
  marl::TrainConfig train;
  filter::FilterConfig filter;
  llm::ProviderConfig provider;
  net::MissionParams missions;
  int worker_count = 4;
  std::uint64_t master_seed = 1;

  // Empty network_file -> bundled synthetic generator with network_seed.
  std::string network_file;
  std::uint64_t network_seed = 2024;
  std::string missions_file;  // empty -> generate_missions over the zones

  std::string run_root = "runs";
  std::string run_id;  // empty -> derived from config hash and seed
  air::GenerationMode generation_mode = air::GenerationMode::SingleCall;
  bool cache_best_curve = false;  // skip retraining the carried-over best

  void check() const;
};

std::uint64_t config_hash(const PipelineConfig& config);

struct CandidateInfo {
  int index = 0;
  std::string origin;  // "initial" | "carryover" | strategy name
  std::string program_hash;
  std::string reward_path;  // relative to the run directory; empty if invalid
  std::string curve_path;
  bool generated_ok = false;
  bool trained_ok = false;
  std::string failure;
};

struct IterationRecord {
  int index = 0;  // 1-based
  std::vector<CandidateInfo> candidates;
  std::vector<filter::CurveStats> stats;  // aligned with trained candidates
  std::vector<int> trained_candidates;    // candidate indices behind `stats`
  int selected = -1;                      // candidate index within the pool
  bool fallback = false;
};

struct RunManifest {
  std::string run_id;
  std::string created_at;
  std::string phase;  // generated | trained | selected | done
  int phase_iteration = 0;
  std::uint64_t config_hash_value = 0;
  PipelineConfig config;
  int gateway_total_calls = 0;
  int generation_calls = 0;
  std::vector<IterationRecord> iterations;
  std::string final_best_path;
  std::string final_best_hash;
  double wall_seconds = 0.0;
};

// Graph + missions resolved from a config; shared read-only by workers.
struct World {
  net::TransportGraph graph;
  std::vector<net::FreightTask> missions;
};

World build_world(const PipelineConfig& config);

marl::EnvFactory make_env_factory(const World& world,
                                  const sim::EnvConfig& env_config);

// Trains every candidate on worker_count threads. Per-candidate seeds are
// hash(master seed, iteration, index), so placement never affects results.
std::vector<marl::TrainResult> train_pool(
    const World& world,
    const std::vector<std::shared_ptr<const dsl::RewardProgram>>& pool,
    const PipelineConfig& config, int iteration);

// Full loop: AIR initialization, then N_iter rounds of parallel training,
// filtering, and (except on the final round) evolution. Everything lands
// under <run_root>/<run_id>/; a partial manifest survives aborts.
RunManifest run_pipeline(const PipelineConfig& config, llm::Provider& provider);

// Continues an interrupted run from its last completed phase; with the mock
// provider and unchanged seeds the result equals an uninterrupted run.
RunManifest resume_pipeline(const std::string& run_root,
                            const std::string& run_id,
                            llm::Provider* provider);

RunManifest load_manifest(const std::string& run_root,
                          const std::string& run_id);

// Manifest + curves flattened to CSV files under out_dir.
void export_run(const std::string& run_root, const std::string& run_id,
                const std::string& out_dir);

std::string manifest_path(const std::string& run_root,
                          const std::string& run_id);

}  // namespace pcrd::pipeline
