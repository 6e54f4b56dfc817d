#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pcrd/air.hpp"
#include "pcrd/filter.hpp"
#include "pcrd/trainer.hpp"

namespace pcrd::evo {

// The four fixed strategies; GenericImprove is the single unconstrained
// prompt kept for the ablation harness and excluded from the default set.
enum class Strategy {
  BranchAugment,
  PruneRefine,
  EquilibriumTune,
  ParadigmLeap,
  GenericImprove,
};

const char* strategy_name(Strategy s);
std::optional<Strategy> strategy_from_name(std::string_view name);
std::vector<Strategy> default_strategy_set();

struct FeedbackPacket {
  std::string text;  // deterministic fixed-format rendering, 4 sig. digits
};

// Downsampled J curve and mean step-reward trace (every 5th point) plus the
// filter's window statistics.
FeedbackPacket build_feedback(const marl::TrainingCurve& curve,
                              const filter::CurveStats& stats);

struct EvolveOutcome {
  std::vector<air::CandidateRecord> records;
  // Edit-shape log per record (empty diff for excluded candidates).
  std::vector<dsl::StructuralDiff> diffs;
  // Messages appended beyond the base buffer: feedback, strategy prompt,
  // responses and any repair exchange.
  std::vector<llm::ChatMessage> appended;
  int repair_rounds = 0;
};

// Sends base buffer + {best program, feedback, strategy prompt}; extracts,
// parses and validates m programs with the same one-repair-round rule as the
// AIR module. Never mutates `best`.
EvolveOutcome evolve(const dsl::RewardProgram& best,
                     const FeedbackPacket& feedback, Strategy strategy, int m,
                     llm::Gateway& gateway, const FeatureCatalog& catalog,
                     const std::vector<llm::ChatMessage>& base_transcript);

}  // namespace pcrd::evo
