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

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "harmarena/backend.hpp"
#include "harmarena/datamodel.hpp"
#include "harmarena/templates.hpp"

namespace harmarena {

// Context simulation, task formulation and target analyses for one meme.

struct ParsedAnalysis {
  std::string background;
  std::string reasoning;

  bool operator==(const ParsedAnalysis&) const = default;
};

// Splits a two-part analysis on its [Background Knowledge] and [Reasoning]
// markers. Markers match case-insensitively with flexible inner whitespace;
// list numbering and markdown emphasis around them are dropped. Throws
// ParseError if either marker is missing or either part is empty.
ParsedAnalysis parse_analysis(std::string_view text);

// Canonical two-part rendering; parse_analysis(render_analysis(b, r)) == {b, r}
// for trimmed non-empty parts.
std::string render_analysis(std::string_view background, std::string_view reasoning);
std::string render_analysis(const Analysis& analysis);

// Controller output parsers (strict JSON, surrounding prose tolerated).
std::vector<InterpretiveContext> parse_contexts(std::string_view text,
                                                std::string_view meme_id);
std::string parse_instruction(std::string_view text);

// Three synthetic audience profiles, one per relevance level, ordered
// highly relevant, moderately relevant, unrelated. Reprompts once on
// unparseable output, then throws StageError.
std::vector<InterpretiveContext> simulate_contexts(const Meme& meme,
                                                   const ModelRef& controller,
                                                   Invoker& invoker,
                                                   const TemplateSet& templates);

ContextTask formulate_task(const Meme& meme, const InterpretiveContext& context,
                           const ModelRef& controller, Invoker& invoker,
                           const TemplateSet& templates);

// The target prompt: the task's perspective-specific text followed by the
// two-part chain-of-thought directive. Throws Error on an empty instruction.
std::string build_cot_prompt(const ContextTask& task,
                             const TemplateSet& templates = TemplateSet::defaults());

// Throws BackendError or ParseError (after one reprompt).
Analysis collect_analysis(const ModelRef& target, const ContextTask& task, const Meme& meme,
                          Invoker& invoker, const TemplateSet& templates);

struct MemeSimulation {
  std::vector<InterpretiveContext> contexts;
  std::vector<ContextTask> tasks;
  std::vector<Analysis> analyses;
  std::vector<StageFailure> failures;
  bool completed = false;  // contexts and tasks were produced
};

// Runs the whole stage for one meme. Never throws for model misbehaviour:
// a failed context or task step skips the meme, a failed analysis is left out
// of the pool; both are recorded in `failures`.
MemeSimulation simulate_meme(const Meme& meme, const ModelRef& controller,
                             std::span<const ModelRef> targets, Invoker& invoker,
                             const TemplateSet& templates);

}  // namespace harmarena
