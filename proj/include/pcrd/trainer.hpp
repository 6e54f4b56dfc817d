#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "pcrd/dsl.hpp"
#include "pcrd/sim.hpp"

namespace pcrd::marl {

struct TrainConfig {
  int max_training_episodes = 4000;
  int batch_size = 24;
  int replay_capacity = 100;  // episodes
  double gamma = 0.99;
  double learning_rate = 1e-3;
  double epsilon_init = 1.0;
  double epsilon_min = 0.05;
  std::int64_t epsilon_decay_env_steps = 50000;
  int eval_every_episodes = 40;
  int eval_rollouts_per_point = 3;
  std::uint64_t seed = 0;

  int curve_length() const {
    return max_training_episodes / eval_every_episodes;
  }
  void check() const;
};

// Linear decay from epsilon_init to epsilon_min over the decay window, then
// held at the floor.
double epsilon_at(const TrainConfig& config, std::int64_t env_steps);

struct Transition {
  sim::Observation obs;
  int action = 0;
  double reward = 0.0;
  sim::Observation next_obs;
  sim::ActionMask next_mask = 0;
  bool done = false;
};

using Episode = std::vector<Transition>;

// Pluggable approximator; parameters are shared across all agents.
class QFunction {
 public:
  virtual ~QFunction() = default;
  virtual std::array<double, sim::kActionCount> predict(
      const sim::Observation& obs) const = 0;
  virtual void update(std::span<const Transition* const> batch,
                      std::span<const double> targets,
                      double learning_rate) = 0;
};

// Tabular reference approximator. Observations are discretized: progress
// fraction into 4 bins, delay into {zero, under-cap, over-cap}, counts capped
// at 3.
class TabularQFunction : public QFunction {
 public:
  std::array<double, sim::kActionCount> predict(
      const sim::Observation& obs) const override;
  void update(std::span<const Transition* const> batch,
              std::span<const double> targets, double learning_rate) override;

  static std::uint64_t discretize(const sim::Observation& obs);
  size_t table_size() const { return table_.size(); }

  void save(std::ostream& out) const;
  static std::shared_ptr<TabularQFunction> load(std::istream& in);

 private:
  std::unordered_map<std::uint64_t, std::array<double, sim::kActionCount>>
      table_;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(size_t capacity) : capacity_(capacity) {}

  void push(Episode episode) {
    episodes_.push_back(std::move(episode));
    if (episodes_.size() > capacity_) episodes_.pop_front();
  }
  size_t size() const { return episodes_.size(); }
  const Episode& episode(size_t i) const { return episodes_[i]; }  // 0 oldest

 private:
  std::deque<Episode> episodes_;
  size_t capacity_;
};

struct CurvePoint {
  int eval_index = 0;  // 1-based
  double objective = 0.0;
  double mean_step_reward = 0.0;
};

struct TrainingCurve {
  std::vector<CurvePoint> points;
  std::vector<double> objectives() const;
};

struct CandidateFailure {
  dsl::DslError error;
  int truck_id = 0;
  int step = 0;
  int episode = 0;
};

using EnvFactory = std::function<std::unique_ptr<sim::Environment>()>;

struct GreedyPolicy {
  const QFunction* q = nullptr;
  // Masked argmax; ties go to the lowest action index.
  sim::Action select(const sim::Observation& obs, sim::ActionMask mask) const;
};

struct TrainResult {
  std::optional<TrainingCurve> curve;
  std::shared_ptr<TabularQFunction> qfunction;
  std::optional<CandidateFailure> failure;
  bool ok() const { return curve.has_value(); }
};

// Parameter-shared epsilon-greedy Q-learning over all trucks. A
// DslError(Runtime) anywhere marks the candidate invalid instead of retrying.
TrainResult train(const EnvFactory& factory, const dsl::RewardProgram& program,
                  const TrainConfig& config);

// Greedy (epsilon = 0) rollouts on the factory's fixed missions.
double evaluate_policy(const EnvFactory& factory, const GreedyPolicy& policy,
                       int rollouts);

// Uniform-random legal actions; baseline for the trainer smoke property.
double random_policy_mean_objective(const EnvFactory& factory, int rollouts,
                                    std::uint64_t seed);

void save_curve_csv(const TrainingCurve& curve, std::ostream& out);
TrainingCurve load_curve_csv(std::istream& in);
TrainingCurve load_curve_csv_file(const std::string& path);
void save_curve_csv_file(const TrainingCurve& curve, const std::string& path);

}  // namespace pcrd::marl
