#include "pcrd/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "pcrd/errors.hpp"
#include "pcrd/util.hpp"

namespace pcrd::pipeline {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

void PipelineConfig::check() const {
  if (n_iter < 1 || k < 1 || m < 1) {
    throw ConfigError("n_iter, k and m must all be >= 1");
  }
  if (strategies.empty()) throw ConfigError("strategy set must be non-empty");
  if (worker_count < 1) throw ConfigError("worker_count must be >= 1");
  env.check();
  train.check();
  filter.check();
  provider.check();
  if (train.curve_length() != filter.curve_length) {
    throw ConfigError(
        "trainer curve length (max_training_episodes / eval_every_episodes) "
        "must equal the filter's curve length");
  }
}

// ------------------------------------------------------- config <-> json ---

namespace {

ordered_json env_to_json(const sim::EnvConfig& e) {
  return ordered_json{{"dt_minutes", e.dt_minutes},
                      {"horizon_minutes", e.horizon_minutes},
                      {"v_low_kmh", e.v_low_kmh},
                      {"v_med_kmh", e.v_med_kmh},
                      {"v_high_kmh", e.v_high_kmh},
                      {"platoon_profit_per_km", e.platoon_profit_per_km},
                      {"delay_fraction", e.delay_fraction},
                      {"scenario", sim::scenario_name(e.scenario)},
                      {"objective", sim::objective_name(e.objective)},
                      {"truck_count", e.truck_count},
                      {"catchup_tolerance_km", e.catchup_tolerance_km}};
}

sim::EnvConfig env_from_json(const ordered_json& j) {
  sim::EnvConfig e;
  e.dt_minutes = j.at("dt_minutes");
  e.horizon_minutes = j.at("horizon_minutes");
  e.v_low_kmh = j.at("v_low_kmh");
  e.v_med_kmh = j.at("v_med_kmh");
  e.v_high_kmh = j.at("v_high_kmh");
  e.platoon_profit_per_km = j.at("platoon_profit_per_km");
  e.delay_fraction = j.at("delay_fraction");
  e.scenario = *sim::scenario_from_name(j.at("scenario").get<std::string>());
  e.objective =
      *sim::objective_from_name(j.at("objective").get<std::string>());
  e.truck_count = j.at("truck_count");
  e.catchup_tolerance_km = j.at("catchup_tolerance_km");
  return e;
}

ordered_json train_to_json(const marl::TrainConfig& t) {
  return ordered_json{
      {"max_training_episodes", t.max_training_episodes},
      {"batch_size", t.batch_size},
      {"replay_capacity", t.replay_capacity},
      {"gamma", t.gamma},
      {"learning_rate", t.learning_rate},
      {"epsilon_init", t.epsilon_init},
      {"epsilon_min", t.epsilon_min},
      {"epsilon_decay_env_steps", t.epsilon_decay_env_steps},
      {"eval_every_episodes", t.eval_every_episodes},
      {"eval_rollouts_per_point", t.eval_rollouts_per_point}};
}

marl::TrainConfig train_from_json(const ordered_json& j) {
  marl::TrainConfig t;
  t.max_training_episodes = j.at("max_training_episodes");
  t.batch_size = j.at("batch_size");
  t.replay_capacity = j.at("replay_capacity");
  t.gamma = j.at("gamma");
  t.learning_rate = j.at("learning_rate");
  t.epsilon_init = j.at("epsilon_init");
  t.epsilon_min = j.at("epsilon_min");
  t.epsilon_decay_env_steps = j.at("epsilon_decay_env_steps");
  t.eval_every_episodes = j.at("eval_every_episodes");
  t.eval_rollouts_per_point = j.at("eval_rollouts_per_point");
  return t;
}

ordered_json filter_to_json(const filter::FilterConfig& f) {
  return ordered_json{{"alpha", f.alpha},
                      {"beta", f.beta},
                      {"v_th", f.v_th},
                      {"curve_length", f.curve_length}};
}

filter::FilterConfig filter_from_json(const ordered_json& j) {
  filter::FilterConfig f;
  f.alpha = j.at("alpha");
  f.beta = j.at("beta");
  f.v_th = j.at("v_th");
  f.curve_length = j.at("curve_length");
  return f;
}

ordered_json provider_to_json(const llm::ProviderConfig& p) {
  return ordered_json{{"endpoint", p.endpoint},
                      {"path", p.path},
                      {"model", p.model},
                      {"temperature", p.temperature},
                      {"max_tokens", p.max_tokens},
                      {"timeout_seconds", p.timeout_seconds},
                      {"max_attempts", p.max_attempts},
                      {"backoff_base_seconds", p.backoff_base_seconds},
                      {"api_key_env", p.api_key_env},
                      {"inflight_cap", p.inflight_cap}};
}

llm::ProviderConfig provider_from_json(const ordered_json& j) {
  llm::ProviderConfig p;
  p.endpoint = j.at("endpoint");
  p.path = j.at("path");
  p.model = j.at("model");
  p.temperature = j.at("temperature");
  p.max_tokens = j.at("max_tokens");
  p.timeout_seconds = j.at("timeout_seconds");
  p.max_attempts = j.at("max_attempts");
  p.backoff_base_seconds = j.at("backoff_base_seconds");
  p.api_key_env = j.at("api_key_env");
  p.inflight_cap = j.at("inflight_cap");
  return p;
}

ordered_json missions_to_json(const net::MissionParams& m) {
  return ordered_json{{"missions_per_zone", m.missions_per_zone},
                      {"window_lo", m.window_lo},
                      {"window_hi", m.window_hi},
                      {"dt_minutes", m.dt_minutes},
                      {"v_med_kmh", m.v_med_kmh},
                      {"delay_fraction", m.delay_fraction}};
}

net::MissionParams missions_from_json(const ordered_json& j) {
  net::MissionParams m;
  m.missions_per_zone = j.at("missions_per_zone");
  m.window_lo = j.at("window_lo");
  m.window_hi = j.at("window_hi");
  m.dt_minutes = j.at("dt_minutes");
  m.v_med_kmh = j.at("v_med_kmh");
  m.delay_fraction = j.at("delay_fraction");
  return m;
}

ordered_json config_to_json(const PipelineConfig& c) {
  ordered_json strategies = ordered_json::array();
  for (auto s : c.strategies) strategies.push_back(evo::strategy_name(s));
  return ordered_json{
      {"n_iter", c.n_iter},
      {"k", c.k},
      {"m", c.m},
      {"strategies", strategies},
      {"env", env_to_json(c.env)},
      {"train", train_to_json(c.train)},
      {"filter", filter_to_json(c.filter)},
      {"provider", provider_to_json(c.provider)},
      {"missions", missions_to_json(c.missions)},
      {"worker_count", c.worker_count},
      {"master_seed", c.master_seed},
      {"network_file", c.network_file},
      {"network_seed", c.network_seed},
      {"missions_file", c.missions_file},
      {"generation_mode",
       c.generation_mode == air::GenerationMode::SingleCall ? "single-call"
                                                            : "per-candidate"},
      {"cache_best_curve", c.cache_best_curve}};
}

PipelineConfig config_from_json(const ordered_json& j) {
  PipelineConfig c;
  c.n_iter = j.at("n_iter");
  c.k = j.at("k");
  c.m = j.at("m");
  c.strategies.clear();
  for (const auto& s : j.at("strategies")) {
    auto parsed = evo::strategy_from_name(s.get<std::string>());
    if (!parsed) throw ConfigError("unknown strategy in manifest");
    c.strategies.push_back(*parsed);
  }
  c.env = env_from_json(j.at("env"));
  c.train = train_from_json(j.at("train"));
  c.filter = filter_from_json(j.at("filter"));
  c.provider = provider_from_json(j.at("provider"));
  c.missions = missions_from_json(j.at("missions"));
  c.worker_count = j.at("worker_count");
  c.master_seed = j.at("master_seed").get<std::uint64_t>();
  c.network_file = j.at("network_file");
  c.network_seed = j.at("network_seed").get<std::uint64_t>();
  c.missions_file = j.at("missions_file");
  c.generation_mode = j.at("generation_mode") == "per-candidate"
                          ? air::GenerationMode::PerCandidateCalls
                          : air::GenerationMode::SingleCall;
  c.cache_best_curve = j.at("cache_best_curve");
  return c;
}

}  // namespace

std::uint64_t config_hash(const PipelineConfig& config) {
  // run_id and run_root are identity/location, not behavior.
  return fnv1a64(config_to_json(config).dump());
}

// --------------------------------------------------------------- world -----

World build_world(const PipelineConfig& config) {
  World world;
  if (config.network_file.empty()) {
    world.graph = net::generate_synthetic_network(net::SyntheticParams{},
                                                  config.network_seed);
  } else {
    world.graph = net::load_graph_file(config.network_file);
  }
  if (config.missions_file.empty()) {
    net::MissionParams mp = config.missions;
    mp.dt_minutes = config.env.dt_minutes;
    mp.v_med_kmh = config.env.v_med_kmh;
    mp.delay_fraction = config.env.delay_fraction;
    world.missions =
        net::generate_missions(world.graph, mp, config.master_seed);
  } else {
    world.missions = net::load_missions_file(config.missions_file);
  }
  return world;
}

marl::EnvFactory make_env_factory(const World& world,
                                  const sim::EnvConfig& env_config) {
  return [&world, env_config]() {
    return std::make_unique<sim::Environment>(world.graph, world.missions,
                                              env_config);
  };
}

std::vector<marl::TrainResult> train_pool(
    const World& world,
    const std::vector<std::shared_ptr<const dsl::RewardProgram>>& pool,
    const PipelineConfig& config, int iteration) {
  if (pool.empty()) throw EmptyInputError("empty reward pool");
  std::vector<marl::TrainResult> results(pool.size());
  std::atomic<size_t> next{0};
  std::vector<std::exception_ptr> errors(pool.size());
  auto factory = make_env_factory(world, config.env);

  auto worker = [&]() {
    while (true) {
      size_t j = next.fetch_add(1);
      if (j >= pool.size()) return;
      if (!pool[j]) continue;
      marl::TrainConfig tc = config.train;
      tc.seed = hash_combine(
          config.master_seed,
          hash_combine(static_cast<std::uint64_t>(iteration),
                       static_cast<std::uint64_t>(j)));
      try {
        results[j] = marl::train(factory, *pool[j], tc);
      } catch (...) {
        errors[j] = std::current_exception();
      }
    }
  };

  size_t thread_count =
      std::min(pool.size(), static_cast<size_t>(config.worker_count));
  std::vector<std::thread> threads;
  for (size_t i = 0; i < thread_count; ++i) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

// ------------------------------------------------------------- manifest ----

std::string manifest_path(const std::string& run_root,
                          const std::string& run_id) {
  return (fs::path(run_root) / run_id / "manifest.json").string();
}

namespace {

ordered_json stats_to_json(const filter::CurveStats& s) {
  return ordered_json{{"early_mean", s.early_mean},
                      {"late_mean", s.late_mean},
                      {"early_std", s.early_std},
                      {"late_std", s.late_std},
                      {"slope_sign", s.slope_sign},
                      {"pass_mean", s.pass_mean},
                      {"pass_std", s.pass_std},
                      {"pass_slope", s.pass_slope},
                      {"pass_all", s.pass_all},
                      {"max_value", s.max_value},
                      {"selected", s.selected},
                      {"fallback", s.fallback}};
}

filter::CurveStats stats_from_json(const ordered_json& j) {
  filter::CurveStats s;
  s.early_mean = j.at("early_mean");
  s.late_mean = j.at("late_mean");
  s.early_std = j.at("early_std");
  s.late_std = j.at("late_std");
  s.slope_sign = j.at("slope_sign");
  s.pass_mean = j.at("pass_mean");
  s.pass_std = j.at("pass_std");
  s.pass_slope = j.at("pass_slope");
  s.pass_all = j.at("pass_all");
  s.max_value = j.at("max_value");
  s.selected = j.at("selected");
  s.fallback = j.at("fallback");
  return s;
}

ordered_json manifest_to_json(const RunManifest& m) {
  ordered_json j;
  j["run_id"] = m.run_id;
  j["created_at"] = m.created_at;
  j["phase"] = m.phase;
  j["phase_iteration"] = m.phase_iteration;
  j["config_hash"] = hex64(m.config_hash_value);
  j["config"] = config_to_json(m.config);
  j["gateway_total_calls"] = m.gateway_total_calls;
  j["generation_calls"] = m.generation_calls;
  j["iterations"] = ordered_json::array();
  for (const auto& it : m.iterations) {
    ordered_json cands = ordered_json::array();
    for (const auto& c : it.candidates) {
      cands.push_back(ordered_json{{"index", c.index},
                                   {"origin", c.origin},
                                   {"program_hash", c.program_hash},
                                   {"reward_path", c.reward_path},
                                   {"curve_path", c.curve_path},
                                   {"generated_ok", c.generated_ok},
                                   {"trained_ok", c.trained_ok},
                                   {"failure", c.failure}});
    }
    ordered_json stats = ordered_json::array();
    for (const auto& s : it.stats) stats.push_back(stats_to_json(s));
    j["iterations"].push_back(
        ordered_json{{"index", it.index},
                     {"candidates", cands},
                     {"trained_candidates", it.trained_candidates},
                     {"stats", stats},
                     {"selected", it.selected},
                     {"fallback", it.fallback}});
  }
  j["final_best_path"] = m.final_best_path;
  j["final_best_hash"] = m.final_best_hash;
  j["wall_seconds"] = m.wall_seconds;
  return j;
}

RunManifest manifest_from_json(const ordered_json& j) {
  RunManifest m;
  m.run_id = j.at("run_id");
  m.created_at = j.at("created_at");
  m.phase = j.at("phase");
  m.phase_iteration = j.at("phase_iteration");
  m.config = config_from_json(j.at("config"));
  m.config_hash_value = config_hash(m.config);
  m.gateway_total_calls = j.at("gateway_total_calls");
  m.generation_calls = j.at("generation_calls");
  for (const auto& itj : j.at("iterations")) {
    IterationRecord it;
    it.index = itj.at("index");
    for (const auto& cj : itj.at("candidates")) {
      CandidateInfo c;
      c.index = cj.at("index");
      c.origin = cj.at("origin");
      c.program_hash = cj.at("program_hash");
      c.reward_path = cj.at("reward_path");
      c.curve_path = cj.at("curve_path");
      c.generated_ok = cj.at("generated_ok");
      c.trained_ok = cj.at("trained_ok");
      c.failure = cj.at("failure");
      it.candidates.push_back(std::move(c));
    }
    it.trained_candidates =
        itj.at("trained_candidates").get<std::vector<int>>();
    for (const auto& sj : itj.at("stats")) {
      it.stats.push_back(stats_from_json(sj));
    }
    it.selected = itj.at("selected");
    it.fallback = itj.at("fallback");
    m.iterations.push_back(std::move(it));
  }
  m.final_best_path = j.at("final_best_path");
  m.final_best_hash = j.at("final_best_hash");
  m.wall_seconds = j.at("wall_seconds");
  return m;
}

void atomic_write(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw ConfigError("cannot write " + tmp);
    out << content;
  }
  fs::rename(tmp, path);
}

// ------------------------------------------------------------ run state ----

struct RunState {
  PipelineConfig config;
  fs::path run_dir;
  World world;
  RunManifest manifest;
  std::unique_ptr<llm::Gateway> gateway;
  std::vector<llm::ChatMessage> base_transcript;
  // Aligned with the current iteration's candidate list; null = invalid.
  std::vector<std::shared_ptr<const dsl::RewardProgram>> pool;
  std::chrono::steady_clock::time_point t0;
};

void save_state(RunState& state) {
  state.manifest.gateway_total_calls = state.gateway->total_calls();
  state.manifest.generation_calls = state.gateway->generation_calls();
  state.manifest.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                    state.t0)
          .count();
  atomic_write(manifest_path(state.config.run_root, state.manifest.run_id),
               manifest_to_json(state.manifest).dump(2) + "\n");
  state.gateway->transcripts().save(
      (state.run_dir / "gateway_transcripts.json").string());
}

void save_chat(const std::vector<llm::ChatMessage>& messages,
               const std::string& path) {
  ordered_json doc = ordered_json::array();
  std::string stamp = llm::utc_timestamp();
  for (const auto& m : messages) {
    doc.push_back(ordered_json{
        {"role", m.role}, {"content", m.content}, {"timestamp", stamp}});
  }
  atomic_write(path, doc.dump(2) + "\n");
}

std::vector<llm::ChatMessage> load_chat(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open transcript: " + path);
  ordered_json doc = ordered_json::parse(in);
  std::vector<llm::ChatMessage> out;
  for (const auto& m : doc) {
    out.push_back({m.at("role").get<std::string>(),
                   m.at("content").get<std::string>()});
  }
  return out;
}

std::string candidate_dir(int iteration, int index) {
  return "iter_" + std::to_string(iteration) + "/cand_" +
         std::to_string(index);
}

// Writes one candidate record to disk and the manifest row.
CandidateInfo persist_candidate(RunState& state, int iteration, int index,
                                const std::string& origin,
                                const air::CandidateRecord& record) {
  CandidateInfo info;
  info.index = index;
  info.origin = origin;
  fs::path dir = state.run_dir / candidate_dir(iteration, index);
  fs::create_directories(dir);
  if (record.program) {
    std::string canonical = dsl::pretty_print(*record.program);
    info.generated_ok = true;
    info.program_hash = hex64(fnv1a64(canonical));
    info.reward_path = candidate_dir(iteration, index) + "/reward.rdsl";
    atomic_write((state.run_dir / info.reward_path).string(), canonical);
  } else {
    info.failure = record.failure ? record.failure->to_string()
                                  : "no program extracted";
    atomic_write((dir / "rejected.rdsl").string(), record.source);
  }
  return info;
}

// --------------------------------------------------------------- phases ----

void do_initial_generation(RunState& state) {
  const auto& config = state.config;
  std::string brief = sim::render_environment_brief(config.env);
  air::TaskText task =
      air::builtin_task_text(config.env.scenario, config.env.objective);
  int dialogue_k =
      config.generation_mode == air::GenerationMode::SingleCall ? config.k : 1;
  air::AnalysisDialogue dialogue =
      air::build_analysis_dialogue(brief, task, dialogue_k);
  air::GenerationOutcome outcome =
      air::generate_initial(dialogue, config.k, *state.gateway,
                            FeatureCatalog::v1(), config.generation_mode);

  state.base_transcript = outcome.transcript;
  save_chat(state.base_transcript,
            (state.run_dir / "air_transcript.json").string());

  IterationRecord iter;
  iter.index = 1;
  state.pool.clear();
  for (size_t j = 0; j < outcome.records.size(); ++j) {
    iter.candidates.push_back(persist_candidate(
        state, 1, static_cast<int>(j), "initial", outcome.records[j]));
    state.pool.push_back(outcome.records[j].program);
  }
  state.manifest.iterations.push_back(std::move(iter));
  state.manifest.phase = "generated";
  state.manifest.phase_iteration = 1;
  save_state(state);

  bool any_valid = false;
  for (const auto& p : state.pool) any_valid = any_valid || (p != nullptr);
  if (!any_valid) {
    throw PipelineAbortError("all initial candidates failed validation");
  }
}

void do_training(RunState& state) {
  const int n = state.manifest.phase_iteration;
  IterationRecord& iter = state.manifest.iterations.back();

  // Optional reuse of the carried-over best's curve from the previous round.
  std::string cached_curve;
  if (state.config.cache_best_curve && n > 1) {
    const IterationRecord& prev =
        state.manifest.iterations[static_cast<size_t>(n) - 2];
    if (prev.selected >= 0) {
      cached_curve =
          prev.candidates[static_cast<size_t>(prev.selected)].curve_path;
    }
  }

  std::vector<std::shared_ptr<const dsl::RewardProgram>> to_train = state.pool;
  if (!cached_curve.empty() && !to_train.empty() && to_train[0]) {
    to_train[0] = nullptr;  // candidate 0 is the carryover
  }

  auto results = train_pool(state.world, to_train, state.config, n);

  for (size_t j = 0; j < state.pool.size(); ++j) {
    CandidateInfo& info = iter.candidates[j];
    if (!state.pool[j]) continue;
    std::string rel = candidate_dir(n, static_cast<int>(j)) + "/curve.csv";
    if (!cached_curve.empty() && j == 0) {
      fs::copy_file(state.run_dir / cached_curve, state.run_dir / rel,
                    fs::copy_options::overwrite_existing);
      info.trained_ok = true;
      info.curve_path = rel;
      continue;
    }
    const marl::TrainResult& r = results[j];
    if (r.ok()) {
      std::ostringstream csv;
      marl::save_curve_csv(*r.curve, csv);
      atomic_write((state.run_dir / rel).string(), csv.str());
      info.trained_ok = true;
      info.curve_path = rel;
      if (r.qfunction) {
        std::ostringstream qs;
        r.qfunction->save(qs);
        atomic_write((state.run_dir / candidate_dir(n, static_cast<int>(j)) /
                      "policy.qtable")
                         .string(),
                     qs.str());
      }
    } else {
      info.trained_ok = false;
      info.failure = r.failure->error.to_string() + " (episode " +
                     std::to_string(r.failure->episode) + ", truck " +
                     std::to_string(r.failure->truck_id) + ")";
    }
  }
  state.manifest.phase = "trained";
  save_state(state);
}

void do_selection(RunState& state) {
  const int n = state.manifest.phase_iteration;
  IterationRecord& iter = state.manifest.iterations.back();

  // Selection always replays the persisted curves, so the recorded best is
  // reproducible from the run directory alone.
  std::vector<std::vector<double>> curves;
  std::vector<int> trained;
  for (const auto& c : iter.candidates) {
    if (!c.trained_ok) continue;
    trained.push_back(c.index);
    curves.push_back(
        marl::load_curve_csv_file((state.run_dir / c.curve_path).string())
            .objectives());
  }
  if (curves.empty()) {
    save_state(state);
    throw PipelineAbortError("iteration " + std::to_string(n) +
                             ": no candidate trained successfully");
  }
  filter::SelectionResult sel =
      filter::filter_and_select(curves, state.config.filter);
  iter.trained_candidates = trained;
  iter.stats = sel.stats;
  iter.selected = trained[static_cast<size_t>(sel.best_index)];
  iter.fallback = sel.fallback;
  state.manifest.phase = "selected";
  save_state(state);
}

void do_evolution(RunState& state) {
  const int n = state.manifest.phase_iteration;
  const IterationRecord& iter = state.manifest.iterations.back();
  const CandidateInfo& best_info =
      iter.candidates[static_cast<size_t>(iter.selected)];
  std::shared_ptr<const dsl::RewardProgram> best =
      state.pool[static_cast<size_t>(iter.selected)];

  marl::TrainingCurve best_curve = marl::load_curve_csv_file(
      (state.run_dir / best_info.curve_path).string());
  filter::CurveStats best_stats =
      filter::curve_stats(best_curve.objectives(), state.config.filter);
  evo::FeedbackPacket feedback = evo::build_feedback(best_curve, best_stats);

  IterationRecord next_iter;
  next_iter.index = n + 1;
  std::vector<std::shared_ptr<const dsl::RewardProgram>> next_pool;

  // Candidate 0 carries the best forward (Algorithm 1 line 14).
  air::CandidateRecord carry;
  carry.program = best;
  carry.source = dsl::pretty_print(*best);
  next_iter.candidates.push_back(
      persist_candidate(state, n + 1, 0, "carryover", carry));
  next_pool.push_back(best);

  int index = 1;
  for (evo::Strategy strategy : state.config.strategies) {
    evo::EvolveOutcome outcome =
        evo::evolve(*best, feedback, strategy, state.config.m, *state.gateway,
                    FeatureCatalog::v1(), state.base_transcript);
    for (size_t r = 0; r < outcome.records.size(); ++r) {
      CandidateInfo info =
          persist_candidate(state, n + 1, index, evo::strategy_name(strategy),
                            outcome.records[r]);
      fs::path dir = state.run_dir / candidate_dir(n + 1, index);
      save_chat(outcome.appended, (dir / "transcript.json").string());
      atomic_write((dir / "diff.txt").string(),
                   outcome.diffs[r].to_string() + "\n");
      next_iter.candidates.push_back(std::move(info));
      next_pool.push_back(outcome.records[r].program);
      ++index;
    }
  }

  state.manifest.iterations.push_back(std::move(next_iter));
  state.pool = std::move(next_pool);
  state.manifest.phase = "generated";
  state.manifest.phase_iteration = n + 1;
  save_state(state);
}

void finalize(RunState& state) {
  const IterationRecord& last = state.manifest.iterations.back();
  const CandidateInfo& best =
      last.candidates[static_cast<size_t>(last.selected)];
  fs::copy_file(state.run_dir / best.reward_path, state.run_dir / "best.rdsl",
                fs::copy_options::overwrite_existing);
  state.manifest.final_best_path = "best.rdsl";
  state.manifest.final_best_hash = best.program_hash;
  state.manifest.phase = "done";
  save_state(state);
}

void drive(RunState& state) {
  while (state.manifest.phase != "done") {
    if (state.manifest.phase == "generated") {
      do_training(state);
    } else if (state.manifest.phase == "trained") {
      do_selection(state);
    } else if (state.manifest.phase == "selected") {
      if (state.manifest.phase_iteration < state.config.n_iter) {
        do_evolution(state);
      } else {
        finalize(state);
      }
    } else {
      throw PipelineAbortError("unknown phase '" + state.manifest.phase + "'");
    }
  }
}

std::string derive_run_id(const PipelineConfig& config) {
  return "run-" + hex64(config_hash(config)).substr(0, 8) + "-s" +
         std::to_string(config.master_seed);
}

}  // namespace

RunManifest load_manifest(const std::string& run_root,
                          const std::string& run_id) {
  std::ifstream in(manifest_path(run_root, run_id));
  if (!in) {
    throw ConfigError("no manifest for run '" + run_id + "' under " +
                      run_root);
  }
  return manifest_from_json(ordered_json::parse(in));
}

RunManifest run_pipeline(const PipelineConfig& config_in,
                         llm::Provider& provider) {
  PipelineConfig config = config_in;
  config.check();
  if (config.run_id.empty()) config.run_id = derive_run_id(config);

  RunState state;
  state.config = config;
  state.t0 = std::chrono::steady_clock::now();
  state.run_dir = fs::path(config.run_root) / config.run_id;
  fs::create_directories(state.run_dir);

  state.world = build_world(config);
  net::save_graph_file(state.world.graph,
                       (state.run_dir / "network.net").string());
  net::save_missions_file(state.world.missions,
                          (state.run_dir / "missions.txt").string());

  state.manifest.run_id = config.run_id;
  state.manifest.created_at = llm::utc_timestamp();
  state.manifest.config = config;
  state.manifest.config_hash_value = config_hash(config);
  state.gateway = std::make_unique<llm::Gateway>(provider, config.provider);

  try {
    do_initial_generation(state);
    drive(state);
  } catch (const PipelineAbortError&) {
    save_state(state);
    throw;
  }
  return state.manifest;
}

RunManifest resume_pipeline(const std::string& run_root,
                            const std::string& run_id,
                            llm::Provider* provider) {
  RunState state;
  state.manifest = load_manifest(run_root, run_id);
  state.config = state.manifest.config;
  state.config.run_root = run_root;
  state.config.run_id = run_id;
  state.t0 = std::chrono::steady_clock::now();
  state.run_dir = fs::path(run_root) / run_id;

  state.world.graph =
      net::load_graph_file((state.run_dir / "network.net").string());
  state.world.missions =
      net::load_missions_file((state.run_dir / "missions.txt").string());

  if (provider == nullptr) {
    throw ConfigError("resume requires a provider");
  }
  state.gateway = std::make_unique<llm::Gateway>(
      *provider, state.config.provider, state.manifest.gateway_total_calls,
      state.manifest.generation_calls);
  state.gateway->transcripts().load(
      (state.run_dir / "gateway_transcripts.json").string());

  if (fs::exists(state.run_dir / "air_transcript.json")) {
    state.base_transcript =
        load_chat((state.run_dir / "air_transcript.json").string());
  }

  // Rebuild the current pool from the persisted candidate files.
  if (!state.manifest.iterations.empty()) {
    const IterationRecord& iter = state.manifest.iterations.back();
    state.pool.clear();
    for (const auto& c : iter.candidates) {
      if (!c.generated_ok) {
        state.pool.push_back(nullptr);
        continue;
      }
      std::ifstream in(state.run_dir / c.reward_path);
      std::ostringstream ss;
      ss << in.rdbuf();
      auto parsed = dsl::parse(ss.str());
      if (!parsed.ok()) {
        throw ConfigError("persisted candidate is unparseable: " +
                          c.reward_path);
      }
      auto program =
          std::make_shared<dsl::RewardProgram>(std::move(parsed.value()));
      if (auto err = dsl::validate(*program, FeatureCatalog::v1())) {
        throw ConfigError("persisted candidate fails validation: " +
                          c.reward_path);
      }
      state.pool.push_back(std::move(program));
    }
  }

  try {
    if (state.manifest.iterations.empty()) {
      do_initial_generation(state);
    }
    drive(state);
  } catch (const PipelineAbortError&) {
    save_state(state);
    throw;
  }
  return state.manifest;
}

void export_run(const std::string& run_root, const std::string& run_id,
                const std::string& out_dir) {
  RunManifest manifest = load_manifest(run_root, run_id);
  fs::path run_dir = fs::path(run_root) / run_id;
  fs::create_directories(out_dir);

  std::ofstream summary(fs::path(out_dir) / "summary.csv");
  summary << "iteration,candidate,origin,program_hash,trained_ok,selected,"
             "fallback,early_mean,late_mean,max_value\n";
  for (const auto& iter : manifest.iterations) {
    for (const auto& c : iter.candidates) {
      const filter::CurveStats* stats = nullptr;
      for (size_t t = 0; t < iter.trained_candidates.size(); ++t) {
        if (iter.trained_candidates[t] == c.index) {
          stats = &iter.stats[t];
          break;
        }
      }
      summary << iter.index << ',' << c.index << ',' << c.origin << ','
              << c.program_hash << ',' << (c.trained_ok ? 1 : 0) << ','
              << (iter.selected == c.index ? 1 : 0) << ','
              << (iter.selected == c.index && iter.fallback ? 1 : 0) << ',';
      if (stats != nullptr) {
        summary << format_double(stats->early_mean) << ','
                << format_double(stats->late_mean) << ','
                << format_double(stats->max_value);
      } else {
        summary << ",,";
      }
      summary << "\n";
      if (c.trained_ok) {
        fs::copy_file(run_dir / c.curve_path,
                      fs::path(out_dir) / ("curve_i" +
                                           std::to_string(iter.index) + "_c" +
                                           std::to_string(c.index) + ".csv"),
                      fs::copy_options::overwrite_existing);
      }
    }
  }
}

}  // namespace pcrd::pipeline
