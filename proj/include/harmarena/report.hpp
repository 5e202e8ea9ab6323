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
#include <string>
#include <vector>

#include "harmarena/bias.hpp"
#include "harmarena/rating.hpp"

namespace harmarena {

// Header plus one row per ranked model; numbers rendered with two decimals.
// Columns: Model, Battles, the five criteria, Overall, Win Rate.
std::vector<std::vector<std::string>> leaderboard_cells(const Leaderboard& board);

std::string to_csv(const std::vector<std::vector<std::string>>& cells);
std::string to_markdown(const std::vector<std::vector<std::string>>& cells);

std::string leaderboard_csv(const Leaderboard& board);
std::string leaderboard_markdown(const Leaderboard& board);

// Columns: Setting, one per judge, Avg. Absent judges render as "-".
std::vector<std::vector<std::string>> bias_cells(const BiasReport& report);
std::string bias_csv(const BiasReport& report);
std::string bias_markdown(const BiasReport& report);

// Sequential Elo ratings per dimension, for comparison with the fitted table.
std::string elo_csv(const std::array<RatingTable, 6>& tables);

struct RunCounts {
  std::size_t memes = 0;
  std::size_t tasks = 0;
  std::size_t analyses = 0;
  std::size_t guidelines = 0;
  std::size_t battles = 0;
  std::size_t valid_battles = 0;
  std::size_t failures = 0;
};

// Markdown summary: run counts, the leaderboard and, when given, the bias
// table. A bias report without rows is omitted.
std::string render_report(const std::string& setting, const RunCounts& counts,
                          const Leaderboard& board, const std::optional<BiasReport>& bias);

}  // namespace harmarena
