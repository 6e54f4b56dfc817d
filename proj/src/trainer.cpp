#include "pcrd/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "pcrd/errors.hpp"
#include "pcrd/util.hpp"

namespace pcrd::marl {

void TrainConfig::check() const {
  if (max_training_episodes <= 0 || eval_every_episodes <= 0 ||
      max_training_episodes % eval_every_episodes != 0) {
    throw ConfigError(
        "eval_every_episodes must divide max_training_episodes");
  }
  if (batch_size <= 0 || replay_capacity <= 0) {
    throw ConfigError("batch_size and replay_capacity must be positive");
  }
  if (!(gamma > 0.0 && gamma <= 1.0) || !(learning_rate > 0.0)) {
    throw ConfigError("gamma must lie in (0,1] and learning_rate be positive");
  }
  if (!(epsilon_min >= 0.0 && epsilon_min <= epsilon_init &&
        epsilon_init <= 1.0)) {
    throw ConfigError("epsilon schedule endpoints out of range");
  }
  if (epsilon_decay_env_steps <= 0 || eval_rollouts_per_point <= 0) {
    throw ConfigError(
        "epsilon_decay_env_steps and eval_rollouts_per_point must be "
        "positive");
  }
}

double epsilon_at(const TrainConfig& config, std::int64_t env_steps) {
  double frac = static_cast<double>(
                    std::min(env_steps, config.epsilon_decay_env_steps)) /
                static_cast<double>(config.epsilon_decay_env_steps);
  return config.epsilon_init -
         (config.epsilon_init - config.epsilon_min) * frac;
}

// ------------------------------------------------------------- tabular -----

std::uint64_t TabularQFunction::discretize(const sim::Observation& obs) {
  auto cap3 = [](double v) {
    return static_cast<std::uint64_t>(std::min(3.0, std::max(0.0, v)));
  };
  std::uint64_t progress =
      obs.progress_fraction < 0.25 ? 0 : obs.progress_fraction < 0.5 ? 1
      : obs.progress_fraction < 0.75 ? 2 : 3;
  std::uint64_t delay = obs.delay_minutes == 0.0 ? 0
                        : obs.remaining_slack_minutes >= 0.0 ? 1 : 2;
  // location_code is a hub id (>= 0) or -(edge_index + 1); offset into a
  // 21-bit unsigned field.
  std::uint64_t loc = static_cast<std::uint64_t>(
      static_cast<std::int64_t>(obs.location_code) + (1 << 20));
  std::uint64_t key = loc;
  key = (key << 2) | progress;
  key = (key << 2) | delay;
  key = (key << 2) | cap3(obs.platoon_size);
  key = (key << 2) | cap3(obs.hub_truck_count);
  key = (key << 2) | cap3(obs.edge_nearby_count);
  key = (key << 2) | cap3(obs.shared_next_edge_count);
  return key;
}

std::array<double, sim::kActionCount> TabularQFunction::predict(
    const sim::Observation& obs) const {
  auto it = table_.find(discretize(obs));
  if (it == table_.end()) return {0.0, 0.0, 0.0, 0.0};
  return it->second;
}

void TabularQFunction::update(std::span<const Transition* const> batch,
                              std::span<const double> targets,
                              double learning_rate) {
  for (size_t i = 0; i < batch.size(); ++i) {
    const Transition& tr = *batch[i];
    auto& q = table_[discretize(tr.obs)];
    double& cell = q[static_cast<size_t>(tr.action)];
    cell += learning_rate * (targets[i] - cell);
  }
}

void TabularQFunction::save(std::ostream& out) const {
  out << "pcrd-qtable v1\n";
  std::vector<std::uint64_t> keys;
  keys.reserve(table_.size());
  for (const auto& [k, v] : table_) {
    (void)v;
    keys.push_back(k);
  }
  std::sort(keys.begin(), keys.end());
  for (std::uint64_t k : keys) {
    const auto& q = table_.at(k);
    out << k;
    for (double v : q) out << ' ' << format_double(v);
    out << "\n";
  }
}

std::shared_ptr<TabularQFunction> TabularQFunction::load(std::istream& in) {
  std::string header;
  std::getline(in, header);
  if (header != "pcrd-qtable v1") {
    throw ParseError("unrecognized q-table header '" + header + "'", 1);
  }
  auto q = std::make_shared<TabularQFunction>();
  std::uint64_t key;
  while (in >> key) {
    std::array<double, sim::kActionCount> row{};
    for (auto& v : row) in >> v;
    q->table_[key] = row;
  }
  return q;
}

// -------------------------------------------------------------- rollout ----

sim::Action GreedyPolicy::select(const sim::Observation& obs,
                                 sim::ActionMask mask) const {
  auto values = q->predict(obs);
  int best = -1;
  for (int a = 0; a < sim::kActionCount; ++a) {
    if (!sim::mask_has(mask, static_cast<sim::Action>(a))) continue;
    if (best < 0 || values[static_cast<size_t>(a)] >
                        values[static_cast<size_t>(best)]) {
      best = a;
    }
  }
  if (best < 0) throw IllegalActionError("empty action mask");
  return static_cast<sim::Action>(best);
}

std::vector<double> TrainingCurve::objectives() const {
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(p.objective);
  return out;
}

namespace {

double u01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

struct RolloutStats {
  double objective = 0.0;
  double reward_sum = 0.0;
  std::int64_t agent_steps = 0;
};

// Greedy rollout used for curve evaluation; rewards still run the program so
// runtime faults surface here too.
RolloutStats greedy_rollout(sim::Environment& env, const GreedyPolicy& policy,
                            std::uint64_t reset_seed) {
  env.reset(reset_seed);
  RolloutStats stats;
  while (!env.episode_over()) {
    std::map<int, sim::Action> actions;
    for (const auto& task : env.missions()) {
      int id = task.truck_id;
      if (!env.is_active(id)) continue;
      actions[id] = policy.select(env.observe(id), env.action_mask(id));
    }
    if (actions.empty()) {
      // Nobody has started yet; step the clock with an empty joint action.
      env.step({});
      continue;
    }
    auto out = env.step(actions);
    for (const auto& [id, r] : out.rewards) {
      (void)id;
      stats.reward_sum += r;
      stats.agent_steps += 1;
    }
  }
  stats.objective = env.compute_objective();
  return stats;
}

}  // namespace

TrainResult train(const EnvFactory& factory, const dsl::RewardProgram& program,
                  const TrainConfig& config) {
  config.check();
  TrainResult result;
  auto q = std::make_shared<TabularQFunction>();
  ReplayBuffer replay(static_cast<size_t>(config.replay_capacity));
  std::mt19937_64 rng(config.seed);
  std::int64_t env_steps = 0;

  auto env = factory();
  env->set_reward_program(&program);
  GreedyPolicy greedy{q.get()};
  TrainingCurve curve;
  int current_episode = 0;

  try {
    for (int episode = 1; episode <= config.max_training_episodes; ++episode) {
      current_episode = episode;
      env->reset(hash_combine(config.seed, static_cast<std::uint64_t>(episode)));
      Episode ep;
      while (!env->episode_over()) {
        double eps = epsilon_at(config, env_steps);
        std::map<int, sim::Action> actions;
        std::map<int, sim::Observation> obs_before;
        for (const auto& task : env->missions()) {
          int id = task.truck_id;
          if (!env->is_active(id)) continue;
          sim::Observation obs = env->observe(id);
          sim::ActionMask mask = env->action_mask(id);
          sim::Action a;
          if (u01(rng) < eps) {
            std::vector<sim::Action> legal;
            for (int c = 0; c < sim::kActionCount; ++c) {
              if (sim::mask_has(mask, static_cast<sim::Action>(c))) {
                legal.push_back(static_cast<sim::Action>(c));
              }
            }
            a = legal[rng() % legal.size()];
          } else {
            a = greedy.select(obs, mask);
          }
          actions[id] = a;
          obs_before[id] = obs;
        }
        auto out = env->step(actions);
        env_steps += 1;
        for (const auto& [id, a] : actions) {
          Transition tr;
          tr.obs = obs_before[id];
          tr.action = static_cast<int>(a);
          tr.reward = out.rewards.at(id);
          tr.next_obs = out.observations.at(id);
          tr.done = out.done.at(id);
          tr.next_mask = tr.done ? 0 : env->action_mask(id);
          ep.push_back(std::move(tr));
        }
      }
      replay.push(std::move(ep));

      // One-step TD targets from the frozen pre-update table, then a single
      // batched application.
      std::vector<const Transition*> batch;
      for (int b = 0; b < config.batch_size; ++b) {
        const Episode& sampled =
            replay.episode(rng() % replay.size());
        for (const auto& tr : sampled) batch.push_back(&tr);
      }
      std::vector<double> targets;
      targets.reserve(batch.size());
      for (const Transition* tr : batch) {
        double target = tr->reward;
        if (!tr->done) {
          auto values = q->predict(tr->next_obs);
          double best = 0.0;
          bool first = true;
          for (int a = 0; a < sim::kActionCount; ++a) {
            if (!sim::mask_has(tr->next_mask, static_cast<sim::Action>(a))) {
              continue;
            }
            double v = values[static_cast<size_t>(a)];
            if (first || v > best) {
              best = v;
              first = false;
            }
          }
          target += config.gamma * (first ? 0.0 : best);
        }
        targets.push_back(target);
      }
      q->update(batch, targets, config.learning_rate);

      if (episode % config.eval_every_episodes == 0) {
        double j_sum = 0.0;
        double reward_sum = 0.0;
        std::int64_t agent_steps = 0;
        for (int r = 0; r < config.eval_rollouts_per_point; ++r) {
          RolloutStats stats = greedy_rollout(
              *env, greedy, hash_combine(config.seed,
                                         0x9e00u + static_cast<unsigned>(r)));
          j_sum += stats.objective;
          reward_sum += stats.reward_sum;
          agent_steps += stats.agent_steps;
        }
        CurvePoint point;
        point.eval_index = episode / config.eval_every_episodes;
        point.objective = j_sum / config.eval_rollouts_per_point;
        point.mean_step_reward =
            agent_steps > 0 ? reward_sum / static_cast<double>(agent_steps)
                            : 0.0;
        curve.points.push_back(point);
      }
    }
  } catch (const sim::RewardRuntimeError& e) {
    CandidateFailure failure;
    failure.error = e.dsl_error();
    failure.truck_id = e.truck_id();
    failure.step = e.step();
    failure.episode = current_episode;
    result.failure = failure;
    return result;
  }

  result.curve = std::move(curve);
  result.qfunction = std::move(q);
  return result;
}

double evaluate_policy(const EnvFactory& factory, const GreedyPolicy& policy,
                       int rollouts) {
  if (rollouts <= 0) throw EmptyInputError("rollouts must be positive");
  auto env = factory();
  double sum = 0.0;
  for (int r = 0; r < rollouts; ++r) {
    sum += greedy_rollout(*env, policy, static_cast<std::uint64_t>(r)).objective;
  }
  return sum / rollouts;
}

double random_policy_mean_objective(const EnvFactory& factory, int rollouts,
                                    std::uint64_t seed) {
  if (rollouts <= 0) throw EmptyInputError("rollouts must be positive");
  auto env = factory();
  env->set_reward_program(nullptr);
  double sum = 0.0;
  for (int r = 0; r < rollouts; ++r) {
    env->reset(hash_combine(seed, static_cast<std::uint64_t>(r)));
    while (!env->episode_over()) {
      std::map<int, sim::Action> actions;
      for (const auto& task : env->missions()) {
        if (env->is_active(task.truck_id)) {
          actions[task.truck_id] = env->sample_random_action(task.truck_id);
        }
      }
      env->step(actions);
    }
    sum += env->compute_objective();
  }
  return sum / rollouts;
}

void save_curve_csv(const TrainingCurve& curve, std::ostream& out) {
  out << "eval_index,J,mean_step_reward\n";
  for (const auto& p : curve.points) {
    out << p.eval_index << ',' << format_double(p.objective) << ','
        << format_double(p.mean_step_reward) << "\n";
  }
}

TrainingCurve load_curve_csv(std::istream& in) {
  TrainingCurve curve;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("eval_index", 0) == 0) continue;
    std::istringstream ss(line);
    CurvePoint p;
    char comma;
    if (!(ss >> p.eval_index >> comma >> p.objective)) {
      throw ParseError("malformed curve row", line_no);
    }
    if (ss >> comma >> p.mean_step_reward) {
    }
    curve.points.push_back(p);
  }
  return curve;
}

TrainingCurve load_curve_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open curve file: " + path);
  return load_curve_csv(in);
}

void save_curve_csv_file(const TrainingCurve& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write curve file: " + path);
  save_curve_csv(curve, out);
}

}  // namespace pcrd::marl
