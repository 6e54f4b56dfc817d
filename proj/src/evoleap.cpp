#include "pcrd/evoleap.hpp"

#include <cstdio>

#include "pcrd/errors.hpp"
#include "pcrd/prompts_data.hpp"

namespace pcrd::evo {

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::BranchAugment: return "branch-augment";
    case Strategy::PruneRefine: return "prune-refine";
    case Strategy::EquilibriumTune: return "equilibrium-tune";
    case Strategy::ParadigmLeap: return "paradigm-leap";
    case Strategy::GenericImprove: return "generic-improve";
  }
  return "?";
}

std::optional<Strategy> strategy_from_name(std::string_view name) {
  if (name == "branch-augment") return Strategy::BranchAugment;
  if (name == "prune-refine") return Strategy::PruneRefine;
  if (name == "equilibrium-tune") return Strategy::EquilibriumTune;
  if (name == "paradigm-leap") return Strategy::ParadigmLeap;
  if (name == "generic-improve") return Strategy::GenericImprove;
  return std::nullopt;
}

std::vector<Strategy> default_strategy_set() {
  return {Strategy::BranchAugment, Strategy::PruneRefine,
          Strategy::EquilibriumTune, Strategy::ParadigmLeap};
}

namespace {

std::string g4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

std::string_view strategy_template(Strategy s) {
  switch (s) {
    case Strategy::BranchAugment: return prompts::kStrategyBranchAugment;
    case Strategy::PruneRefine: return prompts::kStrategyPruneRefine;
    case Strategy::EquilibriumTune: return prompts::kStrategyEquilibriumTune;
    case Strategy::ParadigmLeap: return prompts::kStrategyParadigmLeap;
    case Strategy::GenericImprove: return prompts::kStrategyGenericImprove;
  }
  return {};
}

}  // namespace

FeedbackPacket build_feedback(const marl::TrainingCurve& curve,
                              const filter::CurveStats& stats) {
  std::string text = "=== TRAINING FEEDBACK ===\n";
  text += "objective J every 5th evaluation (index:value):\n";
  for (size_t i = 4; i < curve.points.size(); i += 5) {
    text += std::to_string(curve.points[i].eval_index) + ":" +
            g4(curve.points[i].objective) + " ";
  }
  text += "\nmean per-step reward every 5th evaluation (index:value):\n";
  for (size_t i = 4; i < curve.points.size(); i += 5) {
    text += std::to_string(curve.points[i].eval_index) + ":" +
            g4(curve.points[i].mean_step_reward) + " ";
  }
  text += "\nsummary: early_mean=" + g4(stats.early_mean) +
          " late_mean=" + g4(stats.late_mean) +
          " early_std=" + g4(stats.early_std) +
          " late_std=" + g4(stats.late_std) +
          " slope_sign=" + std::to_string(stats.slope_sign) +
          " max=" + g4(stats.max_value) + "\n";
  text += std::string("filters: mean=") + (stats.pass_mean ? "pass" : "fail") +
          " std=" + (stats.pass_std ? "pass" : "fail") +
          " slope=" + (stats.pass_slope ? "pass" : "fail") + "\n";
  return FeedbackPacket{std::move(text)};
}

EvolveOutcome evolve(const dsl::RewardProgram& best,
                     const FeedbackPacket& feedback, Strategy strategy, int m,
                     llm::Gateway& gateway, const FeatureCatalog& catalog,
                     const std::vector<llm::ChatMessage>& base_transcript) {
  if (m < 1) throw ConfigError("m must be >= 1");
  EvolveOutcome outcome;

  std::vector<llm::ChatMessage> buffer = base_transcript;
  llm::ChatMessage feedback_msg{
      "user", air::render_template(
                  prompts::kFeedback,
                  {{"best_program", dsl::pretty_print(best)},
                   {"packet", feedback.text}})};
  llm::ChatMessage strategy_msg{
      "user", air::render_template(strategy_template(strategy),
                                   {{"m", std::to_string(m)}})};
  buffer.push_back(feedback_msg);
  buffer.push_back(strategy_msg);
  outcome.appended.push_back(feedback_msg);
  outcome.appended.push_back(strategy_msg);

  size_t appended_from = buffer.size();
  std::string response = gateway.complete(buffer, true);
  buffer.push_back({"assistant", response});

  outcome.records = air::collect_candidates(response, m, gateway, catalog,
                                            buffer, outcome.repair_rounds);
  for (size_t i = appended_from; i < buffer.size(); ++i) {
    outcome.appended.push_back(buffer[i]);
  }
  for (const auto& rec : outcome.records) {
    if (rec.program) {
      outcome.diffs.push_back(dsl::structural_diff(best, *rec.program));
    } else {
      outcome.diffs.push_back(dsl::StructuralDiff{});
    }
  }
  return outcome;
}

}  // namespace pcrd::evo
