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

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "harmarena/backend.hpp"
#include "harmarena/datamodel.hpp"
#include "harmarena/rng.hpp"
#include "harmarena/templates.hpp"

namespace harmarena {

// Iterative multi-judge fusion of a meme's analysis pool into one guideline.

// Family of a model, falling back to its name.
std::string family_of(const ModelRef& model);

// Panel members whose family differs from `author_family`, in panel order.
// Throws StageError when none remain.
std::vector<ModelRef> eligible_judges(std::span<const ModelRef> panel,
                                      std::string_view author_family);

struct FusionState {
  Guideline guideline;
  // Remaining analyses, in draw order.
  std::vector<Analysis> pool;
  std::vector<std::string> used_judges;
  // Analyses already returned to the pool once after a failed round.
  std::vector<AnalysisKey> requeued;
};

// Adopts one panel-family analysis, drawn uniformly, as version 0 and removes
// it from the pool. The pool is first put in canonical (task id, author)
// order. Throws StageError if no panel family authored an analysis.
FusionState init_guideline(const std::string& meme_id, std::vector<Analysis> pool,
                           std::span<const ModelRef> panel, const Roster& roster, Rng& rng);

// Whether the never-used judges can still each be given a distinct remaining
// analysis they are eligible for. Exposed for tests.
bool coverage_feasible(std::span<const Analysis> pool, std::span<const ModelRef> unused_judges,
                       const Roster& roster);

// Inner text of the first <guideline>...</guideline> block, else the trimmed
// reply. Throws ParseError on an empty result.
std::string parse_guideline_reply(std::string_view text);

std::string build_fusion_prompt(const Meme& meme, std::string_view guideline,
                                const Analysis& analysis, bool guideline_first,
                                const TemplateSet& templates = TemplateSet::defaults());

// Outcome of one round.
enum class RoundOutcome {
  kFused,     // guideline advanced by one version
  kRequeued,  // both judge attempts failed; analysis moved to the pool tail
  kDropped,   // failed again after its one requeue; analysis discarded
};

// Draws an analysis and an eligible judge, asks the judge to merge the
// current guideline with the analysis (presented in random order, unlabeled)
// and records the result. On judge failure one other eligible judge is tried.
// Failures are appended to `failures`.
RoundOutcome fusion_round(FusionState& state, const Meme& meme, std::span<const ModelRef> panel,
                          const Roster& roster, Invoker& invoker, const TemplateSet& templates,
                          Rng& rng, std::vector<StageFailure>& failures);

// Runs init plus rounds until the pool is empty. Invalid analyses are ignored.
// Throws StageError if fewer than two analyses or judges are available.
Guideline fuse(const Meme& meme, std::vector<Analysis> analyses, std::span<const ModelRef> panel,
               const Roster& roster, Invoker& invoker, const TemplateSet& templates,
               std::uint64_t seed, std::vector<StageFailure>& failures);

}  // namespace harmarena
