// Copyright 2026 The harmarena Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "harmarena/backend.hpp"
#include "harmarena/datamodel.hpp"
#include "harmarena/templates.hpp"

namespace harmarena {

// ---------------------------------------------------------------------------
// Scheduling

// Models with a valid analysis for one task.
struct TaskEntrants {
  std::string task_id;
  std::string meme_id;
  std::vector<std::string> models;
};

struct Pairing {
  std::string task_id;
  std::string meme_id;
  std::string model_a;
  std::string model_b;
  // When set, model_b's answer is presented first.
  bool swapped = false;

  bool operator==(const Pairing&) const = default;
};

struct Schedule {
  std::vector<Pairing> pairings;
  std::vector<std::string> skipped_tasks;  // fewer than two entrants
  std::map<std::string, int> appearances;
};

// Picks up to `per_task` entrants per task, preferring the models that have
// appeared least so far (ties broken by a seeded shuffle), and emits every
// pair among them. Presentation order bits come from their own seed.
// Throws std::invalid_argument if per_task < 2.
Schedule schedule_battles(std::span<const TaskEntrants> tasks, int per_task,
                          std::uint64_t scheduler_seed, std::uint64_t presentation_seed);

// ---------------------------------------------------------------------------
// Judging

struct JudgingConfig {
  Setting setting = Setting::kMemeArena;
  VoteRule vote_rule = VoteRule::kAbstain;
  // Judges from either contestant's family sit the battle out.
  bool exclude_contestant_judges = true;
  // One request per dimension instead of one request for all six.
  bool per_dimension_calls = false;
};

// Everything judges need, indexed for lookup.
struct ArenaInputs {
  std::map<std::string, Meme> memes;
  std::map<std::string, ContextTask> tasks;
  std::map<AnalysisKey, Analysis> analyses;
  // Reference text per meme for the fused and external guideline settings.
  std::map<std::string, std::string> guidelines;
};

// The reference a judge sees in a given setting, or nullopt when the setting
// has none. Throws StageError if the setting needs a reference that is
// missing.
std::optional<std::string> reference_for(const ArenaInputs& inputs, const JudgingConfig& config,
                                         const ModelRef& judge, const Pairing& pairing);

// Panel members that judge the pairing, in panel order.
std::vector<ModelRef> battle_judges(std::span<const ModelRef> panel, const Roster& roster,
                                    const Pairing& pairing, const JudgingConfig& config);

// Whole-verdict and single-dimension judge prompts. An absent reference
// drops the reference section entirely.
std::string build_judge_prompt(std::string_view task_text, const std::optional<std::string>& reference,
                               std::string_view answer_1, std::string_view answer_2,
                               const TemplateSet& templates = TemplateSet::defaults());
std::string build_dimension_prompt(std::string_view task_text,
                                   const std::optional<std::string>& reference,
                                   std::string_view answer_1, std::string_view answer_2,
                                   Dimension dimension,
                                   const TemplateSet& templates = TemplateSet::defaults());

// First JSON object in the text, which must carry all six dimension keys
// with values "A", "B" or "Tie" (case-insensitive). Throws ParseError.
Verdict parse_verdicts(std::string_view text);
Winner parse_dimension_verdict(std::string_view text, Dimension dimension);

// One judge's verdict on a pairing, in true model identities. Reprompts once
// on an unparseable reply. Throws BackendError, ParseError or StageError.
Verdict judge_battle(const ModelRef& judge, const Pairing& pairing, const ArenaInputs& inputs,
                     const JudgingConfig& config, Invoker& invoker, const TemplateSet& templates);

// Judges one pairing with every assigned judge. Never throws for model
// misbehaviour; missing verdicts leave the battle invalid with a note.
BattleRecord run_battle(const Pairing& pairing, std::span<const ModelRef> panel,
                        const Roster& roster, const ArenaInputs& inputs,
                        const JudgingConfig& config, Invoker& invoker,
                        const TemplateSet& templates);

struct ArenaOptions {
  int workers = 1;
  // Stops after this many new battles; simulates an interrupted run.
  std::size_t max_new_battles = static_cast<std::size_t>(-1);
};

struct ArenaSummary {
  std::size_t already_logged = 0;
  std::size_t judged = 0;
  std::size_t valid = 0;
  std::size_t remaining = 0;
};

// Judges the schedule and appends records to the battle log in schedule
// order. Battles already in the log are skipped, so an interrupted run can
// be resumed; a torn final line is repaired first.
ArenaSummary run_arena(std::span<const Pairing> pairings, std::span<const ModelRef> panel,
                       const Roster& roster, const ArenaInputs& inputs,
                       const JudgingConfig& config, Invoker& invoker,
                       const TemplateSet& templates, const std::filesystem::path& log_path,
                       const ArenaOptions& options = {});

}  // namespace harmarena
