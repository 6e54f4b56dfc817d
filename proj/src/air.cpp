#include "pcrd/air.hpp"

#include "pcrd/errors.hpp"
#include "pcrd/prompts_data.hpp"

namespace pcrd::air {

TaskText builtin_task_text(sim::Scenario scenario,
                           sim::ObjectiveKind objective) {
  TaskText t;
  t.scenario_name = std::string(sim::scenario_name(scenario)) + "-" +
                    sim::objective_name(objective);
  if (objective == sim::ObjectiveKind::SingleObject) {
    switch (scenario) {
      case sim::Scenario::Wait:
        t.objective_text =
            "Without considering time, planning the waiting time at hubs to "
            "form platoons as many as possible to obtain profits.";
        break;
      case sim::Scenario::Speed:
        t.objective_text =
            "Without considering time, adjusting the speed to form platoons "
            "as many as possible to obtain profits.";
        break;
      case sim::Scenario::Mix:
        t.objective_text =
            "Without considering time, adjusting the speed and waiting time "
            "to form platoons as many as possible to obtain profits.";
        break;
    }
  } else {
    switch (scenario) {
      case sim::Scenario::Wait:
        t.objective_text =
            "Planning the waiting time at hubs to form as many platoons as "
            "possible while reducing delay time.";
        break;
      case sim::Scenario::Speed:
        t.objective_text =
            "Adjusting the speed to form as many platoons as possible while "
            "reducing delay time.";
        break;
      case sim::Scenario::Mix:
        t.objective_text =
            "Adjusting the speed and waiting time to form as many platoons "
            "as possible while reducing delay time.";
        break;
    }
  }
  return t;
}

std::string render_template(std::string_view tpl,
                            const std::map<std::string, std::string>& vars) {
  std::string out(tpl);
  for (const auto& [name, value] : vars) {
    std::string needle = "{" + name + "}";
    size_t pos = 0;
    while ((pos = out.find(needle, pos)) != std::string::npos) {
      out.replace(pos, needle.size(), value);
      pos += value.size();
    }
  }
  return out;
}

AnalysisDialogue build_analysis_dialogue(const std::string& brief,
                                         const TaskText& task, int k) {
  if (brief.empty()) throw ConfigError("environment brief must be non-empty");
  AnalysisDialogue d;
  d.turns.push_back(render_template(
      prompts::kAirBackground,
      {{"brief", brief}, {"task_text", task.objective_text}}));
  d.turns.push_back(std::string(prompts::kAirDimImplementation));
  d.turns.push_back(std::string(prompts::kAirDimArchitecture));
  d.turns.push_back(std::string(prompts::kAirDimInteractions));
  d.turns.push_back(render_template(prompts::kAirDimTask,
                                    {{"task_text", task.objective_text}}));
  d.turns.push_back(render_template(prompts::kAirGenerate,
                                    {{"k", std::to_string(k)},
                                     {"grammar", dsl::grammar_summary()}}));
  return d;
}

std::vector<std::shared_ptr<const dsl::RewardProgram>> GenerationOutcome::pool()
    const {
  std::vector<std::shared_ptr<const dsl::RewardProgram>> out;
  for (const auto& r : records) {
    if (r.program) out.push_back(r.program);
  }
  return out;
}

namespace {

// Parse + validate one extracted block; nullopt on failure.
std::shared_ptr<const dsl::RewardProgram> try_build(
    const std::string& source, const FeatureCatalog& catalog,
    dsl::DslError* error) {
  auto parsed = dsl::parse(source);
  if (!parsed.ok()) {
    *error = parsed.error();
    return nullptr;
  }
  auto program = std::make_shared<dsl::RewardProgram>(std::move(parsed.value()));
  if (auto err = dsl::validate(*program, catalog)) {
    *error = *err;
    return nullptr;
  }
  return program;
}

}  // namespace

std::vector<CandidateRecord> collect_candidates(
    const std::string& response, int expected, llm::Gateway& gateway,
    const FeatureCatalog& catalog, std::vector<llm::ChatMessage>& transcript,
    int& repair_rounds) {
  auto blocks = llm::extract_program_blocks(response);
  if (blocks.empty()) {
    throw ExtractionError("response contains no fenced rdsl block");
  }
  if (expected > 0 && static_cast<int>(blocks.size()) > expected) {
    blocks.resize(static_cast<size_t>(expected));
  }

  std::vector<CandidateRecord> records;
  for (size_t i = 0; i < blocks.size(); ++i) {
    CandidateRecord rec;
    rec.source = blocks[i];
    dsl::DslError error;
    rec.program = try_build(blocks[i], catalog, &error);
    if (!rec.program) {
      // One repair round: send the error back, take the first block of the
      // reply.
      ++repair_rounds;
      rec.repaired = true;
      transcript.push_back(
          {"user",
           render_template(prompts::kRepair,
                           {{"index", std::to_string(i + 1)},
                            {"error", error.to_string()}})});
      std::string reply = gateway.complete(transcript, true);
      transcript.push_back({"assistant", reply});
      auto repaired_blocks = llm::extract_program_blocks(reply);
      if (repaired_blocks.empty()) {
        rec.failure = error;
      } else {
        rec.source = repaired_blocks.front();
        dsl::DslError repair_error;
        rec.program = try_build(rec.source, catalog, &repair_error);
        if (!rec.program) rec.failure = repair_error;
      }
    }
    records.push_back(std::move(rec));
  }
  return records;
}

GenerationOutcome generate_initial(const AnalysisDialogue& dialogue, int k,
                                   llm::Gateway& gateway,
                                   const FeatureCatalog& catalog,
                                   GenerationMode mode) {
  if (k < 1) throw ConfigError("k must be >= 1");
  if (dialogue.turns.size() != 6) {
    throw ConfigError("analysis dialogue must have exactly 6 turns");
  }
  GenerationOutcome outcome;
  auto& transcript = outcome.transcript;

  for (size_t i = 0; i + 1 < dialogue.turns.size(); ++i) {
    transcript.push_back({"user", dialogue.turns[i]});
    std::string answer = gateway.complete(transcript, false);
    transcript.push_back({"assistant", answer});
  }

  if (mode == GenerationMode::SingleCall) {
    transcript.push_back({"user", dialogue.turns.back()});
    std::string response = gateway.complete(transcript, true);
    transcript.push_back({"assistant", response});
    outcome.records = collect_candidates(response, k, gateway, catalog,
                                         transcript, outcome.repair_rounds);
  } else {
    // One generation call per candidate; the shared buffer keeps later calls
    // aware of earlier programs, which helps distinctness. Build the dialogue
    // with k = 1 when using this mode.
    for (int j = 0; j < k; ++j) {
      transcript.push_back({"user", dialogue.turns.back()});
      std::string response = gateway.complete(transcript, true);
      transcript.push_back({"assistant", response});
      auto records = collect_candidates(response, 1, gateway, catalog,
                                        transcript, outcome.repair_rounds);
      for (auto& r : records) outcome.records.push_back(std::move(r));
    }
  }
  return outcome;
}

}  // namespace pcrd::air
