#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pcrd/dsl.hpp"
#include "pcrd/gateway.hpp"
#include "pcrd/sim.hpp"

namespace pcrd::air {

struct TaskText {
  std::string scenario_name;
  std::string objective_text;
};

// The six built-in scenario/objective task texts.
TaskText builtin_task_text(sim::Scenario scenario, sim::ObjectiveKind objective);

// Six user prompts in send order: background, the four analysis dimensions
// (implementation details, environmental architecture, agent interactions,
// task-relevant information), then the generation instruction.
struct AnalysisDialogue {
  std::vector<std::string> turns;
};

AnalysisDialogue build_analysis_dialogue(const std::string& brief,
                                         const TaskText& task, int k);

struct CandidateRecord {
  std::shared_ptr<const dsl::RewardProgram> program;  // null when excluded
  std::string source;                                 // raw block text
  std::optional<dsl::DslError> failure;
  bool repaired = false;
};

struct GenerationOutcome {
  std::vector<CandidateRecord> records;
  std::vector<llm::ChatMessage> transcript;  // full dialogue with answers
  int repair_rounds = 0;

  std::vector<std::shared_ptr<const dsl::RewardProgram>> pool() const;
};

enum class GenerationMode { SingleCall, PerCandidateCalls };

// Runs the dialogue turn by turn, each answer appended to the chat buffer
// before the next question. Invalid candidates get one repair round; those
// still invalid are recorded and excluded.
GenerationOutcome generate_initial(const AnalysisDialogue& dialogue, int k,
                                   llm::Gateway& gateway,
                                   const FeatureCatalog& catalog,
                                   GenerationMode mode = GenerationMode::SingleCall);

// Shared helper: extract -> parse -> validate -> (repair once) for every
// block in a generation response. Appends repair exchanges to `transcript`.
std::vector<CandidateRecord> collect_candidates(
    const std::string& response, int expected, llm::Gateway& gateway,
    const FeatureCatalog& catalog, std::vector<llm::ChatMessage>& transcript,
    int& repair_rounds);

std::string render_template(std::string_view tpl,
                            const std::map<std::string, std::string>& vars);

}  // namespace pcrd::air
