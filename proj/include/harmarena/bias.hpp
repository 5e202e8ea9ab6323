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
#include <vector>

#include "harmarena/datamodel.hpp"
#include "harmarena/jsonl.hpp"
#include "harmarena/rating.hpp"

namespace harmarena {

// Sum of rel[p - 1] / log2(p + 1) over positions p = 1..P.
double dcg(std::span<const double> relevances);

// NDCG of `actual` against `ideal`, both orderings of the same models. The
// model at ideal position p (1-based) has relevance P - p, floored at zero;
// P defaults to the number of models. Throws Error if the sets differ.
double ndcg(std::span<const std::string> actual, std::span<const std::string> ideal,
            std::size_t p = 0);

// Bradley-Terry ranking from one judge's verdict stream.
std::vector<std::string> per_judge_ranking(std::span<const BattleRecord> log,
                                           const std::string& judge,
                                           Dimension dimension = Dimension::kOverall,
                                           const RatingOptions& options = {});

struct BiasRow {
  std::string setting;
  std::vector<std::string> ideal;
  // Judges without verdicts in this setting are absent.
  std::map<std::string, double> ndcg;
  double average = 0;
};

struct BiasReport {
  std::vector<std::string> judges;
  std::vector<BiasRow> rows;
};

struct SettingLog {
  std::string setting;
  std::vector<BattleRecord> battles;
};

// Per setting: the joint-vote ranking is the ideal, and each judge's own
// ranking is scored against it. When a judge's battles cover fewer models,
// both rankings are restricted to the models they share.
BiasReport bias_report(std::span<const SettingLog> logs, std::span<const std::string> judges,
                       std::size_t p = 0, Dimension dimension = Dimension::kOverall,
                       const RatingOptions& options = {});

// ---------------------------------------------------------------------------
// Biased-judge simulator

struct SimulatedJudge {
  std::string name;
  std::string family;  // defaults to name
  double noise = 0;    // standard deviation, rating points
  double self_boost = 0;
  std::string favored;
  double favored_boost = 0;
};

enum class GuidelineMode { kSelf, kShared };

std::string_view to_string(GuidelineMode m);
std::optional<GuidelineMode> parse_guideline_mode(std::string_view text);

struct BiasScenario {
  std::map<std::string, double> strengths;
  // Model families; a model absent here is its own family.
  std::map<std::string, std::string> families;
  std::vector<SimulatedJudge> judges;
  int battles = 6000;
  int per_task = 3;
  std::uint64_t seed = 0;
  double alpha = 400;
  // Fraction of every boost removed under a shared guideline.
  double attenuation = 0.9;
  double tie_rate = 0;
  bool exclude_contestant_judges = false;
  VoteRule vote_rule = VoteRule::kAbstain;

  // Throws ValidationError naming the offending field.
  void validate() const;
  static BiasScenario from_json(const Json& j);
  static BiasScenario load(const std::filesystem::path& path);
};

// Synthetic battle log in the regular schema. Pairings come from the real
// scheduler; each judge's six verdicts are drawn independently from the
// Elo win probability of the boosted, noise-perturbed rating gap. Both modes
// share every random draw, so they differ only in boost size.
std::vector<BattleRecord> simulate_biased_judges(const BiasScenario& scenario,
                                                 GuidelineMode mode);

}  // namespace harmarena
