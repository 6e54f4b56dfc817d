#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "pcrd/air.hpp"
#include "pcrd/dsl.hpp"
#include "pcrd/errors.hpp"
#include "pcrd/evoleap.hpp"
#include "pcrd/filter.hpp"
#include "pcrd/gateway.hpp"
#include "pcrd/network.hpp"
#include "pcrd/pipeline.hpp"
#include "pcrd/sim.hpp"
#include "pcrd/trainer.hpp"
#include "pcrd/util.hpp"

namespace {

using namespace pcrd;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

sim::Scenario parse_scenario(const std::string& name) {
  auto s = sim::scenario_from_name(name);
  if (!s) throw ConfigError("unknown scenario '" + name + "'");
  return *s;
}

sim::ObjectiveKind parse_objective(const std::string& name) {
  auto o = sim::objective_from_name(name);
  if (!o) throw ConfigError("unknown objective '" + name + "'");
  return *o;
}

int exit_code_for(const Error& e) {
  const std::string& c = e.category();
  if (c == "SYNTAX" || c == "SEMANTIC" || c == "RUNTIME") return 2;
  if (c == "PIPELINE") return 3;
  return 1;
}

struct RolloutOptions {
  std::string network, missions_path, scenario = "wait", objective = "single";
  std::string policy = "random";
  std::string reward_file, log_path;
  std::uint64_t seed = 1;
};

int run_rollout(const RolloutOptions& opt) {
  net::TransportGraph graph = net::load_graph_file(opt.network);
  auto missions = net::load_missions_file(opt.missions_path);
  sim::EnvConfig env_config;
  env_config.scenario = parse_scenario(opt.scenario);
  env_config.objective = parse_objective(opt.objective);
  sim::Environment env(graph, missions, env_config);

  dsl::RewardProgram program;
  bool have_program = false;
  if (!opt.reward_file.empty()) {
    auto parsed = dsl::parse(read_file(opt.reward_file));
    if (!parsed.ok()) throw Error(dsl::kind_name(parsed.error().kind),
                                  parsed.error().message);
    program = std::move(parsed.value());
    if (auto err = dsl::validate(program, FeatureCatalog::v1())) {
      throw Error(dsl::kind_name(err->kind), err->message);
    }
    env.set_reward_program(&program);
    have_program = true;
  }

  env.reset(opt.seed);
  double reward_sum = 0.0;
  while (!env.episode_over()) {
    std::map<int, sim::Action> actions;
    for (const auto& task : env.missions()) {
      if (!env.is_active(task.truck_id)) continue;
      if (opt.policy == "random") {
        actions[task.truck_id] = env.sample_random_action(task.truck_id);
      } else if (opt.policy == "med") {
        actions[task.truck_id] = sim::Action::SpeedMed;
      } else {
        throw ConfigError("unknown policy '" + opt.policy + "'");
      }
    }
    auto out = env.step(actions);
    for (const auto& [id, r] : out.rewards) {
      (void)id;
      reward_sum += r;
    }
  }
  auto info = env.info();
  std::cout << "J " << format_double(env.compute_objective()) << "\n"
            << "D_p_km " << format_double(info.platoon_km_total) << "\n"
            << "D_total_km " << format_double(info.traveled_km_total) << "\n"
            << "T_d_minutes " << format_double(info.delay_minutes_total)
            << "\n"
            << "steps " << env.step_index() << "\n";
  if (have_program) {
    std::cout << "reward_sum " << format_double(reward_sum) << "\n";
  }
  if (!opt.log_path.empty()) {
    std::ofstream log(opt.log_path);
    if (!log) throw ConfigError("cannot write log: " + opt.log_path);
    sim::write_trajectory(env.trajectory(), log);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "pcrd: automated reward design for cooperative truck platooning"};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "declarative INI config file; pipeline options live in a "
                 "[pipeline] section");

  // gen-network ------------------------------------------------------------
  auto* gen_net = app.add_subcommand(
      "gen-network", "Generate the bundled-scale synthetic network");
  std::string gn_out = "network.net";
  std::uint64_t gn_seed = 2024;
  net::SyntheticParams gn_params;
  gen_net->add_option("--out", gn_out, "output network file");
  gen_net->add_option("--seed", gn_seed, "generator seed");
  gen_net->add_option("--hubs", gn_params.hub_count);
  gen_net->add_option("--edges", gn_params.edge_count);
  gen_net->add_option("--zones", gn_params.zone_count);

  // gen-missions -----------------------------------------------------------
  auto* gen_missions =
      app.add_subcommand("gen-missions", "Sample freight missions per zone");
  std::string gm_network, gm_out = "missions.txt";
  std::uint64_t gm_seed = 1;
  net::MissionParams gm_params;
  gen_missions->add_option("--network", gm_network)->required();
  gen_missions->add_option("--out", gm_out);
  gen_missions->add_option("--seed", gm_seed);
  gen_missions->add_option("--per-zone", gm_params.missions_per_zone);
  gen_missions->add_option("--window-lo", gm_params.window_lo);
  gen_missions->add_option("--window-hi", gm_params.window_hi);
  gen_missions->add_option("--dt", gm_params.dt_minutes);
  gen_missions->add_option("--v-med", gm_params.v_med_kmh);
  gen_missions->add_option("--delay-fraction", gm_params.delay_fraction);

  // rollout ----------------------------------------------------------------
  auto* rollout = app.add_subcommand(
      "rollout", "Run one episode with a random or fixed policy");
  RolloutOptions ro;
  rollout->add_option("--network", ro.network)->required();
  rollout->add_option("--missions", ro.missions_path)->required();
  rollout->add_option("--scenario", ro.scenario);
  rollout->add_option("--objective", ro.objective);
  rollout->add_option("--policy", ro.policy)
      ->description("random | med");
  rollout->add_option("--reward", ro.reward_file);
  rollout->add_option("--log", ro.log_path);
  rollout->add_option("--seed", ro.seed);

  // train-one --------------------------------------------------------------
  auto* train_one =
      app.add_subcommand("train-one", "Train a single reward file");
  std::string to_network, to_missions, to_scenario = "wait",
              to_objective = "single", to_reward, to_curve = "curve.csv",
              to_policy;
  marl::TrainConfig to_train;
  train_one->add_option("--network", to_network)->required();
  train_one->add_option("--missions", to_missions)->required();
  train_one->add_option("--scenario", to_scenario);
  train_one->add_option("--objective", to_objective);
  train_one->add_option("--reward", to_reward)->required();
  train_one->add_option("--out-curve", to_curve);
  train_one->add_option("--out-policy", to_policy);
  train_one->add_option("--episodes", to_train.max_training_episodes);
  train_one->add_option("--eval-every", to_train.eval_every_episodes);
  train_one->add_option("--batch-size", to_train.batch_size);
  train_one->add_option("--learning-rate", to_train.learning_rate);
  train_one->add_option("--epsilon-decay-steps",
                        to_train.epsilon_decay_env_steps);
  train_one->add_option("--seed", to_train.seed);

  // filter -----------------------------------------------------------------
  auto* filter_cmd = app.add_subcommand(
      "filter", "Filter training curves and select the best candidate");
  std::vector<std::string> fc_curves;
  filter::FilterConfig fc_config;
  bool fc_length_set = false;
  filter_cmd->add_option("curves", fc_curves, "curve CSV files")->required();
  filter_cmd->add_option("--alpha", fc_config.alpha);
  filter_cmd->add_option("--beta", fc_config.beta);
  filter_cmd->add_option("--v-th", fc_config.v_th);
  filter_cmd
      ->add_option("--length", fc_config.curve_length,
                   "expected curve length (default: inferred)")
      ->each([&](const std::string&) { fc_length_set = true; });

  // pipeline ---------------------------------------------------------------
  auto* pipe = app.add_subcommand("pipeline", "Run the full design loop");
  pipe->configurable();
  pipeline::PipelineConfig pc;
  std::string pc_scenario = "wait", pc_objective = "single", pc_mock,
              pc_strategies;
  bool pc_per_candidate = false;
  pipe->add_option("--n-iter", pc.n_iter);
  pipe->add_option("--k", pc.k);
  pipe->add_option("--m", pc.m);
  pipe->add_option("--strategies", pc_strategies,
                   "comma-separated strategy names");
  pipe->add_option("--scenario", pc_scenario);
  pipe->add_option("--objective", pc_objective);
  pipe->add_option("--workers", pc.worker_count);
  pipe->add_option("--seed", pc.master_seed);
  pipe->add_option("--network", pc.network_file);
  pipe->add_option("--network-seed", pc.network_seed);
  pipe->add_option("--missions", pc.missions_file);
  pipe->add_option("--per-zone", pc.missions.missions_per_zone);
  pipe->add_option("--episodes", pc.train.max_training_episodes);
  pipe->add_option("--eval-every", pc.train.eval_every_episodes);
  pipe->add_option("--batch-size", pc.train.batch_size);
  pipe->add_option("--learning-rate", pc.train.learning_rate);
  pipe->add_option("--epsilon-decay-steps", pc.train.epsilon_decay_env_steps);
  pipe->add_option("--alpha", pc.filter.alpha);
  pipe->add_option("--beta", pc.filter.beta);
  pipe->add_option("--v-th", pc.filter.v_th);
  bool pc_curve_length_set = false;
  pipe->add_option("--curve-length", pc.filter.curve_length,
                   "filter curve length (default: episodes / eval-every)")
      ->each([&](const std::string&) { pc_curve_length_set = true; });
  pipe->add_option("--endpoint", pc.provider.endpoint);
  pipe->add_option("--model", pc.provider.model);
  pipe->add_option("--temperature", pc.provider.temperature);
  pipe->add_option("--max-tokens", pc.provider.max_tokens);
  pipe->add_option("--timeout", pc.provider.timeout_seconds);
  pipe->add_option("--attempts", pc.provider.max_attempts);
  pipe->add_option("--key-env", pc.provider.api_key_env);
  pipe->add_option("--mock", pc_mock, "mock script directory (offline run)");
  pipe->add_option("--out", pc.run_root, "run directory root");
  pipe->add_option("--run-id", pc.run_id);
  pipe->add_flag("--per-candidate-calls", pc_per_candidate);
  pipe->add_flag("--cache-best-curve", pc.cache_best_curve);

  // resume -----------------------------------------------------------------
  auto* resume = app.add_subcommand("resume", "Continue an interrupted run");
  std::string rs_id, rs_root = "runs", rs_mock;
  resume->add_option("run_id", rs_id)->required();
  resume->add_option("--root", rs_root);
  resume->add_option("--mock", rs_mock, "mock script directory");

  // export -----------------------------------------------------------------
  auto* export_cmd =
      app.add_subcommand("export", "Export curves and manifest to CSV");
  std::string ex_run, ex_root = "runs", ex_out = "export";
  export_cmd->add_option("--run", ex_run)->required();
  export_cmd->add_option("--root", ex_root);
  export_cmd->add_option("--out", ex_out);

  // dsl --------------------------------------------------------------------
  auto* dsl_cmd = app.add_subcommand("dsl", "Reward DSL utilities");
  auto* dsl_check =
      dsl_cmd->add_subcommand("check", "Parse, validate and classify a file");
  std::string dc_file;
  dsl_check->add_option("file", dc_file)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen_net->parsed()) {
      auto graph = net::generate_synthetic_network(gn_params, gn_seed);
      net::save_graph_file(graph, gn_out);
      std::cout << "wrote " << gn_out << ": " << graph.hubs().size()
                << " hubs, " << graph.edges().size() << " edges, "
                << graph.zones().size() << " zones\n";
      return 0;
    }
    if (gen_missions->parsed()) {
      auto graph = net::load_graph_file(gm_network);
      auto tasks = net::generate_missions(graph, gm_params, gm_seed);
      net::save_missions_file(tasks, gm_out);
      std::cout << "wrote " << gm_out << ": " << tasks.size() << " tasks\n";
      return 0;
    }
    if (rollout->parsed()) {
      return run_rollout(ro);
    }
    if (train_one->parsed()) {
      auto graph = net::load_graph_file(to_network);
      auto missions = net::load_missions_file(to_missions);
      sim::EnvConfig env_config;
      env_config.scenario = parse_scenario(to_scenario);
      env_config.objective = parse_objective(to_objective);
      auto parsed = dsl::parse(read_file(to_reward));
      if (!parsed.ok()) {
        throw Error(dsl::kind_name(parsed.error().kind),
                    parsed.error().message);
      }
      dsl::RewardProgram program = std::move(parsed.value());
      if (auto err = dsl::validate(program, FeatureCatalog::v1())) {
        throw Error(dsl::kind_name(err->kind), err->message);
      }
      pipeline::World world{std::move(graph), std::move(missions)};
      auto factory = pipeline::make_env_factory(world, env_config);
      auto result = marl::train(factory, program, to_train);
      if (!result.ok()) {
        throw Error(dsl::kind_name(result.failure->error.kind),
                    result.failure->error.message + " (episode " +
                        std::to_string(result.failure->episode) + ")");
      }
      marl::save_curve_csv_file(*result.curve, to_curve);
      std::cout << "wrote " << to_curve << ": " << result.curve->points.size()
                << " points, final J "
                << format_double(result.curve->points.back().objective)
                << "\n";
      if (!to_policy.empty()) {
        std::ofstream out(to_policy);
        result.qfunction->save(out);
        std::cout << "wrote " << to_policy << " ("
                  << result.qfunction->table_size() << " states)\n";
      }
      return 0;
    }
    if (filter_cmd->parsed()) {
      std::vector<std::vector<double>> curves;
      for (const auto& path : fc_curves) {
        curves.push_back(marl::load_curve_csv_file(path).objectives());
      }
      if (!fc_length_set && !curves.empty()) {
        fc_config.curve_length = static_cast<int>(curves.front().size());
      }
      auto result = filter::filter_and_select(curves, fc_config);
      std::cout << filter::render_report(result);
      std::cout << "selected " << result.best_index << " ("
                << fc_curves[static_cast<size_t>(result.best_index)] << ")"
                << (result.fallback ? " via fallback" : "") << "\n";
      return 0;
    }
    if (pipe->parsed()) {
      pc.env.scenario = parse_scenario(pc_scenario);
      pc.env.objective = parse_objective(pc_objective);
      if (!pc_curve_length_set) {
        pc.filter.curve_length = pc.train.curve_length();
      }
      if (pc_per_candidate) {
        pc.generation_mode = air::GenerationMode::PerCandidateCalls;
      }
      if (!pc_strategies.empty()) {
        pc.strategies.clear();
        std::istringstream ss(pc_strategies);
        std::string name;
        while (std::getline(ss, name, ',')) {
          auto s = evo::strategy_from_name(name);
          if (!s) throw ConfigError("unknown strategy '" + name + "'");
          pc.strategies.push_back(*s);
        }
      }
      std::unique_ptr<llm::Provider> provider;
      if (!pc_mock.empty()) {
        provider = std::make_unique<llm::MockProvider>(pc_mock);
      } else {
        provider = std::make_unique<llm::HttpProvider>();
      }
      auto manifest = pipeline::run_pipeline(pc, *provider);
      std::cout << "run " << manifest.run_id << " done; best "
                << manifest.final_best_hash << " at "
                << (pc.run_root + "/" + manifest.run_id + "/" +
                    manifest.final_best_path)
                << "\n";
      return 0;
    }
    if (resume->parsed()) {
      std::unique_ptr<llm::Provider> provider;
      if (!rs_mock.empty()) {
        auto manifest = pipeline::load_manifest(rs_root, rs_id);
        provider = std::make_unique<llm::MockProvider>(
            rs_mock, static_cast<size_t>(manifest.gateway_total_calls));
      } else {
        provider = std::make_unique<llm::HttpProvider>();
      }
      auto manifest = pipeline::resume_pipeline(rs_root, rs_id,
                                                provider.get());
      std::cout << "run " << manifest.run_id << " done; best "
                << manifest.final_best_hash << "\n";
      return 0;
    }
    if (export_cmd->parsed()) {
      pipeline::export_run(ex_root, ex_run, ex_out);
      std::cout << "exported run " << ex_run << " to " << ex_out << "\n";
      return 0;
    }
    if (dsl_check->parsed()) {
      auto result = dsl::classify(read_file(dc_file), FeatureCatalog::v1());
      if (result.valid) {
        std::cout << "VALID: evaluates to "
                  << format_double(*result.probe_value)
                  << " at the all-zero probe\n";
        return 0;
      }
      std::cout << result.error->to_string() << "\n";
      return 2;
    }
  } catch (const Error& e) {
    std::cerr << e.category() << ": " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "ERROR: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
