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

#include "harmarena/report.hpp"

#include <fmt/format.h>

namespace harmarena {

namespace {

std::string fixed2(double v) { return fmt::format("{:.2f}", v); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string md_field(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace

std::vector<std::vector<std::string>> leaderboard_cells(const Leaderboard& board) {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{"Model", "Battles"};
  for (Dimension d : kAllDimensions) header.emplace_back(dimension_title(d));
  header.emplace_back("Win Rate");
  cells.push_back(std::move(header));

  const RatingTable& overall = board.table(Dimension::kOverall);
  for (const auto& model : board.ranking) {
    std::vector<std::string> row{model};
    auto b = overall.battles.find(model);
    row.push_back(std::to_string(b == overall.battles.end() ? 0 : b->second));
    for (const auto& table : board.tables) {
      auto it = table.ratings.find(model);
      row.push_back(it == table.ratings.end() ? "-" : fixed2(it->second));
    }
    auto wr = overall.win_rate.find(model);
    row.push_back(wr == overall.win_rate.end() ? "-" : fixed2(wr->second));
    cells.push_back(std::move(row));
  }
  return cells;
}

std::string to_csv(const std::vector<std::vector<std::string>>& cells) {
  std::string out;
  for (const auto& row : cells) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += csv_field(row[i]);
    }
    out += '\n';
  }
  return out;
}

std::string to_markdown(const std::vector<std::vector<std::string>>& cells) {
  std::string out;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    out += '|';
    for (const auto& c : cells[r]) out += ' ' + md_field(c) + " |";
    out += '\n';
    if (r == 0) {
      out += '|';
      for (std::size_t i = 0; i < cells[r].size(); ++i) out += i == 0 ? " --- |" : " ---: |";
      out += '\n';
    }
  }
  return out;
}

std::string leaderboard_csv(const Leaderboard& board) { return to_csv(leaderboard_cells(board)); }

std::string leaderboard_markdown(const Leaderboard& board) {
  return to_markdown(leaderboard_cells(board));
}

std::vector<std::vector<std::string>> bias_cells(const BiasReport& report) {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{"Setting"};
  header.insert(header.end(), report.judges.begin(), report.judges.end());
  header.emplace_back("Avg");
  cells.push_back(std::move(header));
  for (const auto& row : report.rows) {
    std::vector<std::string> line{row.setting};
    for (const auto& j : report.judges) {
      auto it = row.ndcg.find(j);
      line.push_back(it == row.ndcg.end() ? "-" : fixed2(it->second));
    }
    line.push_back(row.ndcg.empty() ? "-" : fixed2(row.average));
    cells.push_back(std::move(line));
  }
  return cells;
}

std::string bias_csv(const BiasReport& report) { return to_csv(bias_cells(report)); }

std::string bias_markdown(const BiasReport& report) { return to_markdown(bias_cells(report)); }

std::string elo_csv(const std::array<RatingTable, 6>& tables) {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{"Model"};
  for (Dimension d : kAllDimensions) header.emplace_back(dimension_title(d));
  cells.push_back(std::move(header));
  for (const auto& [model, r] : tables.back().ratings) {
    std::vector<std::string> row{model};
    for (const auto& t : tables) {
      auto it = t.ratings.find(model);
      row.push_back(it == t.ratings.end() ? "-" : fixed2(it->second));
    }
    cells.push_back(std::move(row));
  }
  return to_csv(cells);
}

std::string render_report(const std::string& setting, const RunCounts& counts,
                          const Leaderboard& board, const std::optional<BiasReport>& bias) {
  std::string out = "# Evaluation report\n\n";
  out += fmt::format("Setting: {}\n\n", setting);
  out += "| Item | Count |\n| --- | ---: |\n";
  out += fmt::format("| Memes | {} |\n", counts.memes);
  out += fmt::format("| Tasks | {} |\n", counts.tasks);
  out += fmt::format("| Analyses | {} |\n", counts.analyses);
  out += fmt::format("| Guidelines | {} |\n", counts.guidelines);
  out += fmt::format("| Battles logged | {} |\n", counts.battles);
  out += fmt::format("| Valid battles | {} |\n", counts.valid_battles);
  out += fmt::format("| Recorded failures | {} |\n\n", counts.failures);
  out += "## Leaderboard\n\n";
  out += "Bradley-Terry ratings from joint panel votes, ranked by Overall.\n\n";
  out += leaderboard_markdown(board);
  if (bias && !bias->rows.empty()) {
    out += "\n## Judge consistency (NDCG against the joint ranking)\n\n";
    out += bias_markdown(*bias);
  }
  return out;
}

}  // namespace harmarena
