#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>

#include "pcrd/pipeline.hpp"
#include "support/test_util.hpp"

using namespace pcrd;
using namespace pcrd::pipeline;
namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

PipelineConfig tiny_config(const std::string& run_root) {
  PipelineConfig cfg;
  cfg.n_iter = 3;
  cfg.k = 2;
  cfg.m = 1;
  cfg.network_file = testutil::fixture("tiny.net");
  cfg.missions_file = testutil::fixture("tiny_missions.txt");
  cfg.env.scenario = sim::Scenario::Wait;
  cfg.env.objective = sim::ObjectiveKind::SingleObject;
  cfg.env.horizon_minutes = 100;  // 20 steps
  cfg.train.max_training_episodes = 20;
  cfg.train.eval_every_episodes = 2;  // curve length 10
  cfg.train.epsilon_decay_env_steps = 200;
  cfg.train.learning_rate = 0.2;
  cfg.filter.alpha = 2;
  cfg.filter.beta = 4;
  cfg.filter.curve_length = 10;
  cfg.worker_count = 2;
  cfg.master_seed = 11;
  cfg.run_root = run_root;
  return cfg;
}

ordered_json scrubbed_manifest(const std::string& root,
                               const std::string& run_id) {
  std::ifstream in(manifest_path(root, run_id));
  REQUIRE(in);
  ordered_json j = ordered_json::parse(in);
  j.erase("created_at");
  j.erase("wall_seconds");
  return j;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / ("pcrd_test_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

}  // namespace

TEST_CASE("config hash ignores nothing behavioral and check() guards lengths") {
  PipelineConfig cfg = tiny_config("x");
  CHECK_NOTHROW(cfg.check());
  auto h1 = config_hash(cfg);
  cfg.master_seed += 1;
  CHECK(config_hash(cfg) != h1);
  cfg.master_seed -= 1;
  CHECK(config_hash(cfg) == h1);

  cfg.train.eval_every_episodes = 5;  // curve length 4 != filter length 10
  CHECK_THROWS_AS(cfg.check(), ConfigError);
}

TEST_CASE("build_world resolves files and the synthetic fallback") {
  PipelineConfig cfg = tiny_config("x");
  World world = build_world(cfg);
  CHECK(world.graph.hubs().size() == 2);
  CHECK(world.missions.size() == 2);

  PipelineConfig synth = tiny_config("x");
  synth.network_file.clear();
  synth.missions_file.clear();
  World world2 = build_world(synth);
  CHECK(world2.graph.hubs().size() == 41);
  CHECK(world2.missions.size() == 60);
}

TEST_CASE("train_pool: results are placement independent") {
  PipelineConfig cfg = tiny_config("x");
  World world = build_world(cfg);
  std::vector<std::shared_ptr<const dsl::RewardProgram>> pool;
  const char* sources[] = {
      "term a weight 1.0: in_platoon",
      "term b weight 0.5: step_platoon_km",
      "term c weight 1.0: platoon_size",
  };
  for (const char* src : sources) {
    auto parsed = dsl::parse(src);
    REQUIRE(parsed.ok());
    auto prog = std::make_shared<dsl::RewardProgram>(std::move(parsed.value()));
    REQUIRE_FALSE(dsl::validate(*prog, FeatureCatalog::v1()).has_value());
    pool.push_back(std::move(prog));
  }

  cfg.worker_count = 1;
  auto serial = train_pool(world, pool, cfg, 1);
  cfg.worker_count = 3;
  auto parallel = train_pool(world, pool, cfg, 1);
  REQUIRE(serial.size() == parallel.size());
  for (size_t j = 0; j < serial.size(); ++j) {
    REQUIRE(serial[j].ok());
    REQUIRE(parallel[j].ok());
    auto a = serial[j].curve->objectives();
    auto b = parallel[j].curve->objectives();
    CHECK(a == b);
  }
}

TEST_CASE("train_pool: a runtime-faulting candidate is recorded, not fatal") {
  PipelineConfig cfg = tiny_config("x");
  World world = build_world(cfg);
  std::vector<std::shared_ptr<const dsl::RewardProgram>> pool;
  auto good = dsl::parse("term a weight 1.0: in_platoon");
  auto bad = dsl::parse("term b weight 1.0: 1 / step_platoon_km");
  for (auto* r : {&good, &bad}) {
    auto prog = std::make_shared<dsl::RewardProgram>(std::move(r->value()));
    REQUIRE_FALSE(dsl::validate(*prog, FeatureCatalog::v1()).has_value());
    pool.push_back(std::move(prog));
  }
  auto results = train_pool(world, pool, cfg, 1);
  CHECK(results[0].ok());
  CHECK_FALSE(results[1].ok());
  CHECK(results[1].failure->error.kind == dsl::DslError::Kind::Runtime);
}

TEST_CASE("run_pipeline: shape, counts, persistence, replay consistency") {
  TempDir root("pipeline_shape");
  PipelineConfig cfg = tiny_config(root.str());
  llm::MockProvider mock(testutil::fixture("mock_pipeline"));
  RunManifest manifest = run_pipeline(cfg, mock);

  CHECK(manifest.phase == "done");
  REQUIRE(manifest.iterations.size() == 3);
  // Pool sizes 2, 5, 5 and trainings 2 + 5 + 5.
  CHECK(manifest.iterations[0].candidates.size() == 2);
  CHECK(manifest.iterations[1].candidates.size() == 5);
  CHECK(manifest.iterations[2].candidates.size() == 5);
  int trainings = 0;
  for (const auto& iter : manifest.iterations) {
    for (const auto& c : iter.candidates) {
      if (c.trained_ok) ++trainings;
    }
  }
  CHECK(trainings == 12);
  // 1 initial generation + 4 strategies x 2 evolving iterations.
  CHECK(manifest.generation_calls == 9);
  // 6 AIR calls + 8 evolution calls, no repairs in the fixture.
  CHECK(manifest.gateway_total_calls == 14);
  CHECK(mock.consumed() == 14);

  // Origins: iteration 2+ carries the best and adds one per strategy.
  CHECK(manifest.iterations[1].candidates[0].origin == "carryover");
  CHECK(manifest.iterations[1].candidates[1].origin == "branch-augment");
  CHECK(manifest.iterations[1].candidates[4].origin == "paradigm-leap");

  // Filter replay on the persisted curves reproduces every selection.
  fs::path run_dir = fs::path(root.str()) / manifest.run_id;
  for (const auto& iter : manifest.iterations) {
    std::vector<std::vector<double>> curves;
    std::vector<int> trained;
    for (const auto& c : iter.candidates) {
      if (!c.trained_ok) continue;
      trained.push_back(c.index);
      curves.push_back(
          marl::load_curve_csv_file((run_dir / c.curve_path).string())
              .objectives());
    }
    auto sel = filter::filter_and_select(curves, cfg.filter);
    CHECK(trained[static_cast<size_t>(sel.best_index)] == iter.selected);
    CHECK(sel.fallback == iter.fallback);
  }

  // Artifacts exist on disk.
  CHECK(fs::exists(run_dir / "best.rdsl"));
  CHECK(fs::exists(run_dir / "manifest.json"));
  CHECK(fs::exists(run_dir / "air_transcript.json"));
  CHECK(fs::exists(run_dir / "gateway_transcripts.json"));
  CHECK(fs::exists(run_dir / "iter_2/cand_1/diff.txt"));
  CHECK(fs::exists(run_dir / "iter_2/cand_1/transcript.json"));

  // The final best equals the last iteration's selected candidate.
  const auto& last = manifest.iterations.back();
  CHECK(manifest.final_best_hash ==
        last.candidates[static_cast<size_t>(last.selected)].program_hash);
}

TEST_CASE("run_pipeline: identical seeds give identical manifests") {
  TempDir root_a("pipeline_det_a");
  TempDir root_b("pipeline_det_b");
  PipelineConfig cfg_a = tiny_config(root_a.str());
  PipelineConfig cfg_b = tiny_config(root_b.str());
  llm::MockProvider mock_a(testutil::fixture("mock_pipeline"));
  llm::MockProvider mock_b(testutil::fixture("mock_pipeline"));
  auto ma = run_pipeline(cfg_a, mock_a);
  auto mb = run_pipeline(cfg_b, mock_b);
  CHECK(ma.run_id == mb.run_id);
  CHECK(scrubbed_manifest(root_a.str(), ma.run_id) ==
        scrubbed_manifest(root_b.str(), mb.run_id));
}

TEST_CASE("resume after a mid-run interruption matches the clean run") {
  TempDir root_full("pipeline_full");
  TempDir root_cut("pipeline_cut");
  PipelineConfig cfg_full = tiny_config(root_full.str());
  llm::MockProvider mock_full(testutil::fixture("mock_pipeline"));
  auto clean = run_pipeline(cfg_full, mock_full);

  // Interrupted run: the provider dies after 10 responses, mid-evolution of
  // iteration 2; on-disk state freezes at the last checkpoint.
  TempDir script("pipeline_script");
  auto files = testutil::list_files(testutil::fixture("mock_pipeline"));
  for (size_t i = 0; i < 10; ++i) {
    fs::copy_file(files[i], script.path / fs::path(files[i]).filename());
  }
  PipelineConfig cfg_cut = tiny_config(root_cut.str());
  llm::MockProvider truncated(script.str());
  CHECK_THROWS_AS(run_pipeline(cfg_cut, truncated), GatewayError);

  auto partial = load_manifest(root_cut.str(), clean.run_id);
  CHECK(partial.phase != "done");

  llm::MockProvider full_again(
      testutil::fixture("mock_pipeline"),
      static_cast<size_t>(partial.gateway_total_calls));
  auto resumed =
      resume_pipeline(root_cut.str(), clean.run_id, &full_again);
  CHECK(resumed.phase == "done");
  CHECK(scrubbed_manifest(root_cut.str(), clean.run_id) ==
        scrubbed_manifest(root_full.str(), clean.run_id));
}

TEST_CASE("pipeline aborts when every initial candidate is invalid") {
  TempDir root("pipeline_abort");
  TempDir script("abort_script");
  // 5 analysis answers, then a generation with two bad programs and two
  // repair replies that are still invalid.
  for (int i = 0; i < 5; ++i) {
    std::ofstream(script.path / ("00" + std::to_string(i) + ".txt"))
        << "analysis answer\n";
  }
  std::ofstream(script.path / "005.txt")
      << "```rdsl\nterm a weight 1.0: no_such_feature\n```\n"
         "```rdsl\nterm b weight 1.0: also_wrong\n```\n";
  std::ofstream(script.path / "006.txt")
      << "```rdsl\nterm a weight 1.0: still_wrong\n```\n";
  std::ofstream(script.path / "007.txt")
      << "```rdsl\nterm b weight 1.0: wrong_again\n```\n";

  PipelineConfig cfg = tiny_config(root.str());
  cfg.run_id = "abort-run";
  llm::MockProvider mock(script.str());
  CHECK_THROWS_AS(run_pipeline(cfg, mock), PipelineAbortError);

  // The partial manifest survives and records both failures.
  auto partial = load_manifest(root.str(), "abort-run");
  CHECK(partial.phase == "generated");
  REQUIRE(partial.iterations.size() == 1);
  for (const auto& c : partial.iterations[0].candidates) {
    CHECK_FALSE(c.generated_ok);
    CHECK_FALSE(c.failure.empty());
  }
}

TEST_CASE("export flattens curves and summary") {
  TempDir root("pipeline_export");
  TempDir out("pipeline_export_out");
  PipelineConfig cfg = tiny_config(root.str());
  llm::MockProvider mock(testutil::fixture("mock_pipeline"));
  auto manifest = run_pipeline(cfg, mock);
  export_run(root.str(), manifest.run_id, out.str());
  CHECK(fs::exists(out.path / "summary.csv"));
  CHECK(fs::exists(out.path / "curve_i1_c0.csv"));
  CHECK(fs::exists(out.path / "curve_i3_c4.csv"));
  std::string summary = testutil::read_file((out.path / "summary.csv").string());
  // Header plus one row per candidate (2 + 5 + 5).
  CHECK(std::count(summary.begin(), summary.end(), '\n') == 13);
}

TEST_CASE("hyperparameter defaults echo the published values") {
  PipelineConfig cfg;
  CHECK(cfg.n_iter == 5);
  CHECK(cfg.k == 4);
  CHECK(cfg.m == 1);
  CHECK(cfg.strategies.size() == 4);
  CHECK(cfg.train.max_training_episodes == 4000);
  CHECK(cfg.train.batch_size == 24);
  CHECK(cfg.train.replay_capacity == 100);
  CHECK(cfg.train.gamma == 0.99);
  CHECK(cfg.train.learning_rate == 1e-3);
  CHECK(cfg.train.epsilon_init == 1.0);
  CHECK(cfg.train.epsilon_min == 0.05);
  CHECK(cfg.train.epsilon_decay_env_steps == 50000);
  CHECK(cfg.train.eval_every_episodes == 40);
  CHECK(cfg.filter.alpha == 20);
  CHECK(cfg.filter.beta == 40);
  CHECK(cfg.filter.v_th == 0.5);
  CHECK(cfg.filter.curve_length == 100);
  CHECK(cfg.env.dt_minutes == 5);
  CHECK(cfg.env.horizon_minutes == 1000);
  CHECK(cfg.env.v_low_kmh == 60.0);
  CHECK(cfg.env.v_med_kmh == 75.0);
  CHECK(cfg.env.v_high_kmh == 90.0);
  CHECK(cfg.env.platoon_profit_per_km == 1.7);
  CHECK(cfg.env.delay_fraction == 0.1);
  CHECK(cfg.env.catchup_tolerance_km == 1.25);
}

TEST_CASE("default shape: k=4, N_iter=5 gives 24 trainings, 17 generations") {
  TempDir root("pipeline_default_shape");
  PipelineConfig cfg = tiny_config(root.str());
  cfg.n_iter = 5;
  cfg.k = 4;
  llm::MockProvider mock(testutil::fixture("mock_pipeline_full"));
  auto manifest = run_pipeline(cfg, mock);

  REQUIRE(manifest.iterations.size() == 5);
  CHECK(manifest.iterations[0].candidates.size() == 4);
  int trainings = 0;
  for (size_t n = 0; n < manifest.iterations.size(); ++n) {
    if (n > 0) CHECK(manifest.iterations[n].candidates.size() == 5);
    for (const auto& c : manifest.iterations[n].candidates) {
      if (c.trained_ok) ++trainings;
    }
  }
  CHECK(trainings == 24);
  CHECK(manifest.generation_calls == 17);
  CHECK(manifest.gateway_total_calls == 22);
  CHECK(mock.consumed() == 22);
}

TEST_CASE("resume from an interruption inside the first evolution round") {
  TempDir root_full("pipeline_full2");
  TempDir root_cut("pipeline_cut2");
  PipelineConfig cfg = tiny_config(root_full.str());
  llm::MockProvider mock_full(testutil::fixture("mock_pipeline"));
  auto clean = run_pipeline(cfg, mock_full);

  // Die after 8 responses: two of four evolution calls of iteration 1 done,
  // checkpoint still says "selected" for iteration 1.
  TempDir script("pipeline_script2");
  auto files = testutil::list_files(testutil::fixture("mock_pipeline"));
  for (size_t i = 0; i < 8; ++i) {
    fs::copy_file(files[i], script.path / fs::path(files[i]).filename());
  }
  PipelineConfig cfg_cut = tiny_config(root_cut.str());
  llm::MockProvider truncated(script.str());
  CHECK_THROWS_AS(run_pipeline(cfg_cut, truncated), GatewayError);

  auto partial = load_manifest(root_cut.str(), clean.run_id);
  CHECK(partial.phase == "selected");
  CHECK(partial.phase_iteration == 1);
  CHECK(partial.gateway_total_calls == 6);  // checkpointed before evolution

  llm::MockProvider full_again(
      testutil::fixture("mock_pipeline"),
      static_cast<size_t>(partial.gateway_total_calls));
  auto resumed = resume_pipeline(root_cut.str(), clean.run_id, &full_again);
  CHECK(resumed.phase == "done");
  CHECK(scrubbed_manifest(root_cut.str(), clean.run_id) ==
        scrubbed_manifest(root_full.str(), clean.run_id));
}
