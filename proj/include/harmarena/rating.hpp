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

#include <array>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "harmarena/datamodel.hpp"

namespace harmarena {

// Probability that a player rated `ra` beats one rated `rb`.
double elo_expected(double ra, double rb, double alpha = 400.0);

// One sequential update; `score_a` is 1 (a wins), 0.5 (tie) or 0 (b wins).
std::pair<double, double> elo_update(double ra, double rb, double score_a, double k,
                                     double alpha = 400.0);

// A single comparison in one dimension.
struct Outcome {
  std::string a;
  std::string b;
  double score_a = 0.5;

  bool operator==(const Outcome&) const = default;
};

double score_of(Winner w);

// Outcomes of valid battles under the joint verdict, in log order.
std::vector<Outcome> joint_outcomes(std::span<const BattleRecord> log, Dimension dimension);
// Outcomes of valid battles under one judge's verdicts, in log order.
std::vector<Outcome> judge_outcomes(std::span<const BattleRecord> log, const std::string& judge,
                                    Dimension dimension);

enum class WinRateTies { kHalfCredit, kExclude };

std::string_view to_string(WinRateTies t);
std::optional<WinRateTies> parse_win_rate_ties(std::string_view text);

struct RatingOptions {
  double k = 4.0;
  double alpha = 400.0;
  double anchor = 1000.0;
  double tolerance = 1e-8;  // max rating change, in points
  int max_iterations = 500;
  WinRateTies win_rate_ties = WinRateTies::kHalfCredit;
};

// Percent; nullopt when the model has no counted battles.
std::optional<double> win_rate(std::span<const Outcome> outcomes, const std::string& model,
                               WinRateTies ties = WinRateTies::kHalfCredit);

// One pass in order. Models listed in `models` without battles keep the
// initial rating (options.anchor).
RatingTable elo_sequential(std::span<const Outcome> outcomes, Dimension dimension,
                           const RatingOptions& options = {},
                           std::span<const std::string> models = {});

struct BtDiagnostics {
  // Log-likelihood after each accepted iterate, starting from all-equal.
  std::vector<double> log_likelihood;
  int iterations = 0;
  bool converged = false;
  // The raw counts had no finite maximizer, so one virtual tie was added to
  // every compared pair.
  bool smoothed = false;
};

// Bradley-Terry maximum likelihood on the Elo scale, ties as half a win for
// each side. Ratings are shifted so their mean equals the anchor. Models in
// `models` with no comparisons are reported in `excluded`. Throws Error when
// the comparison graph is disconnected, naming the components.
RatingTable bt_fit(std::span<const Outcome> outcomes, Dimension dimension,
                   const RatingOptions& options = {}, std::span<const std::string> models = {},
                   BtDiagnostics* diagnostics = nullptr);

// Total log-likelihood of `outcomes` under `table`'s ratings.
double bt_log_likelihood(std::span<const Outcome> outcomes, const RatingTable& table,
                         double alpha = 400.0);

// Models by descending rating, ties by name.
std::vector<std::string> ranking_of(const RatingTable& table);

struct Leaderboard {
  // Indexed like kAllDimensions.
  std::array<RatingTable, 6> tables;
  std::vector<std::string> ranking;

  const RatingTable& table(Dimension d) const { return tables[static_cast<std::size_t>(d)]; }
};

// Bradley-Terry tables from joint verdicts for every dimension, win rates
// from the overall dimension, ranking by overall rating.
Leaderboard leaderboard(std::span<const BattleRecord> log, const RatingOptions& options = {},
                        std::span<const std::string> models = {});

}  // namespace harmarena
