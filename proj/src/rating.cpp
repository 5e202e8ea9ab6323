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

#include "harmarena/rating.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include <Eigen/Dense>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include "harmarena/error.hpp"

namespace harmarena {

namespace {

// log(sigmoid(x)) without overflow.
double log_sigmoid(double x) {
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Credit totals per unordered pair i < j: wins[i][j] is i's credit against j.
struct PairCounts {
  std::vector<std::string> names;
  std::vector<std::vector<double>> wins;

  std::size_t size() const { return names.size(); }
};

PairCounts count_pairs(std::span<const Outcome> outcomes, const std::vector<std::string>& names) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < names.size(); ++i) index[names[i]] = i;
  PairCounts pc{names, std::vector<std::vector<double>>(names.size(),
                                                        std::vector<double>(names.size(), 0.0))};
  for (const auto& o : outcomes) {
    const std::size_t a = index.at(o.a);
    const std::size_t b = index.at(o.b);
    pc.wins[a][b] += o.score_a;
    pc.wins[b][a] += 1.0 - o.score_a;
  }
  return pc;
}

double log_likelihood(const PairCounts& pc, const Eigen::VectorXd& beta) {
  double ll = 0;
  for (std::size_t i = 0; i < pc.size(); ++i) {
    for (std::size_t j = 0; j < pc.size(); ++j) {
      if (i != j && pc.wins[i][j] > 0) {
        ll += pc.wins[i][j] * log_sigmoid(beta[static_cast<Eigen::Index>(i)] -
                                          beta[static_cast<Eigen::Index>(j)]);
      }
    }
  }
  return ll;
}

std::vector<std::vector<std::size_t>> components(const PairCounts& pc) {
  std::vector<std::size_t> parent(pc.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t i = 0; i < pc.size(); ++i) {
    for (std::size_t j = i + 1; j < pc.size(); ++j) {
      if (pc.wins[i][j] + pc.wins[j][i] > 0) parent[find(i)] = find(j);
    }
  }
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < pc.size(); ++i) groups[find(i)].push_back(i);
  std::vector<std::vector<std::size_t>> out;
  for (auto& [root, members] : groups) out.push_back(std::move(members));
  return out;
}

// Every model reachable from every other along "earned credit against" edges.
bool strongly_connected(const PairCounts& pc) {
  auto reach_all = [&](bool forward) {
    std::vector<bool> seen(pc.size(), false);
    std::vector<std::size_t> stack{0};
    seen[0] = true;
    std::size_t count = 1;
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (std::size_t v = 0; v < pc.size(); ++v) {
        const double w = forward ? pc.wins[u][v] : pc.wins[v][u];
        if (!seen[v] && w > 0) {
          seen[v] = true;
          ++count;
          stack.push_back(v);
        }
      }
    }
    return count == pc.size();
  };
  return pc.size() <= 1 || (reach_all(true) && reach_all(false));
}

std::vector<std::string> model_names(std::span<const Outcome> outcomes) {
  std::set<std::string> names;
  for (const auto& o : outcomes) {
    names.insert(o.a);
    names.insert(o.b);
  }
  return {names.begin(), names.end()};
}

void fill_counts(RatingTable& table, std::span<const Outcome> outcomes,
                 const std::vector<std::string>& names, WinRateTies ties) {
  for (const auto& n : names) table.battles[n] = 0;
  for (const auto& o : outcomes) {
    ++table.battles[o.a];
    ++table.battles[o.b];
  }
  for (const auto& n : names) {
    if (auto wr = win_rate(outcomes, n, ties)) table.win_rate[n] = *wr;
  }
}

}  // namespace

double elo_expected(double ra, double rb, double alpha) {
  return 1.0 / (1.0 + std::pow(10.0, (rb - ra) / alpha));
}

std::pair<double, double> elo_update(double ra, double rb, double score_a, double k,
                                     double alpha) {
  const double ea = elo_expected(ra, rb, alpha);
  const double delta = k * (score_a - ea);
  return {ra + delta, rb - delta};
}

double score_of(Winner w) {
  switch (w) {
    case Winner::kA:
      return 1.0;
    case Winner::kB:
      return 0.0;
    case Winner::kTie:
      return 0.5;
  }
  return 0.5;
}

std::vector<Outcome> joint_outcomes(std::span<const BattleRecord> log, Dimension dimension) {
  std::vector<Outcome> out;
  for (const auto& b : log) {
    if (!b.valid || !b.joint) continue;
    out.push_back({b.model_a, b.model_b, score_of((*b.joint)[dimension])});
  }
  return out;
}

std::vector<Outcome> judge_outcomes(std::span<const BattleRecord> log, const std::string& judge,
                                    Dimension dimension) {
  std::vector<Outcome> out;
  for (const auto& b : log) {
    if (!b.valid) continue;
    auto it = b.judge_verdicts.find(judge);
    if (it == b.judge_verdicts.end()) continue;
    out.push_back({b.model_a, b.model_b, score_of(it->second[dimension])});
  }
  return out;
}

std::string_view to_string(WinRateTies t) {
  return t == WinRateTies::kHalfCredit ? "half" : "exclude";
}

std::optional<WinRateTies> parse_win_rate_ties(std::string_view text) {
  if (text == "half" || text == "half_credit") return WinRateTies::kHalfCredit;
  if (text == "exclude") return WinRateTies::kExclude;
  return std::nullopt;
}

std::optional<double> win_rate(std::span<const Outcome> outcomes, const std::string& model,
                               WinRateTies ties) {
  double credit = 0;
  double counted = 0;
  for (const auto& o : outcomes) {
    double s;
    if (o.a == model) {
      s = o.score_a;
    } else if (o.b == model) {
      s = 1.0 - o.score_a;
    } else {
      continue;
    }
    if (s == 0.5 && ties == WinRateTies::kExclude) continue;
    credit += s;
    counted += 1;
  }
  if (counted == 0) return std::nullopt;
  return 100.0 * credit / counted;
}

RatingTable elo_sequential(std::span<const Outcome> outcomes, Dimension dimension,
                           const RatingOptions& options, std::span<const std::string> models) {
  RatingTable table;
  table.dimension = dimension;
  table.method = RatingMethod::kEloSequential;
  auto names = model_names(outcomes);
  for (const auto& m : models) {
    if (!std::binary_search(names.begin(), names.end(), m)) table.excluded.push_back(m);
  }
  std::vector<std::string> all = names;
  all.insert(all.end(), table.excluded.begin(), table.excluded.end());
  for (const auto& n : all) table.ratings[n] = options.anchor;
  for (const auto& o : outcomes) {
    auto [ra, rb] = elo_update(table.ratings[o.a], table.ratings[o.b], o.score_a, options.k,
                               options.alpha);
    table.ratings[o.a] = ra;
    table.ratings[o.b] = rb;
  }
  fill_counts(table, outcomes, names, options.win_rate_ties);
  return table;
}

RatingTable bt_fit(std::span<const Outcome> outcomes, Dimension dimension,
                   const RatingOptions& options, std::span<const std::string> models,
                   BtDiagnostics* diagnostics) {
  RatingTable table;
  table.dimension = dimension;
  table.method = RatingMethod::kBradleyTerry;
  const auto names = model_names(outcomes);
  for (const auto& m : models) {
    if (!std::binary_search(names.begin(), names.end(), m)) table.excluded.push_back(m);
  }
  BtDiagnostics local;
  BtDiagnostics& diag = diagnostics ? *diagnostics : local;
  diag = {};
  if (names.empty()) return table;

  PairCounts pc = count_pairs(outcomes, names);
  if (const auto comps = components(pc); comps.size() > 1) {
    std::vector<std::string> parts;
    for (const auto& c : comps) {
      std::vector<std::string> members;
      for (std::size_t i : c) members.push_back(names[i]);
      parts.push_back(fmt::format("{{{}}}", fmt::join(members, ", ")));
    }
    throw Error(fmt::format("comparison graph is disconnected: {}", fmt::join(parts, " | ")));
  }
  if (!strongly_connected(pc)) {
    diag.smoothed = true;
    for (std::size_t i = 0; i < pc.size(); ++i) {
      for (std::size_t j = i + 1; j < pc.size(); ++j) {
        if (pc.wins[i][j] + pc.wins[j][i] > 0) {
          pc.wins[i][j] += 0.5;
          pc.wins[j][i] += 0.5;
        }
      }
    }
  }

  // Natural-log scale: P(i beats j) = sigmoid(beta_i - beta_j). The last
  // model is pinned at 0 while solving.
  const auto n = static_cast<Eigen::Index>(pc.size());
  const double points = options.alpha / std::log(10.0);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(n);
  double ll = log_likelihood(pc, beta);
  diag.log_likelihood.push_back(ll);

  for (int iter = 0; iter < options.max_iterations && n > 1; ++iter) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(n);
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(n, n);  // negative Hessian
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double wij = pc.wins[i][j];
        const double wji = pc.wins[j][i];
        const double total = wij + wji;
        if (total == 0) continue;
        const double p = sigmoid(beta[i] - beta[j]);
        const double g = wij - total * p;
        grad[i] += g;
        grad[j] -= g;
        const double h = total * p * (1 - p);
        info(i, i) += h;
        info(j, j) += h;
        info(i, j) -= h;
        info(j, i) -= h;
      }
    }
    const Eigen::Index m = n - 1;
    Eigen::VectorXd step = Eigen::VectorXd::Zero(n);
    step.head(m) = info.topLeftCorner(m, m).ldlt().solve(grad.head(m));

    double t = 1.0;
    bool accepted = false;
    Eigen::VectorXd next;
    double next_ll = ll;
    for (int halving = 0; halving < 60; ++halving, t *= 0.5) {
      next = beta + t * step;
      next_ll = log_likelihood(pc, next);
      if (next_ll >= ll) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // No representable ascent left: the iterate is optimal to precision.
      diag.converged = true;
      break;
    }
    const double delta = (next - beta).cwiseAbs().maxCoeff() * points;
    beta = next;
    ll = next_ll;
    diag.log_likelihood.push_back(ll);
    diag.iterations = iter + 1;
    if (delta < options.tolerance) {
      diag.converged = true;
      break;
    }
  }
  if (n == 1) diag.converged = true;

  const double mean = beta.mean();
  for (Eigen::Index i = 0; i < n; ++i) {
    table.ratings[names[static_cast<std::size_t>(i)]] = options.anchor + (beta[i] - mean) * points;
  }
  fill_counts(table, outcomes, names, options.win_rate_ties);
  return table;
}

double bt_log_likelihood(std::span<const Outcome> outcomes, const RatingTable& table,
                         double alpha) {
  double ll = 0;
  for (const auto& o : outcomes) {
    const double ra = table.ratings.at(o.a);
    const double rb = table.ratings.at(o.b);
    const double x = (ra - rb) * std::log(10.0) / alpha;
    if (o.score_a > 0) ll += o.score_a * log_sigmoid(x);
    if (o.score_a < 1) ll += (1 - o.score_a) * log_sigmoid(-x);
  }
  return ll;
}

std::vector<std::string> ranking_of(const RatingTable& table) {
  std::vector<std::pair<std::string, double>> items(table.ratings.begin(), table.ratings.end());
  std::stable_sort(items.begin(), items.end(), [](const auto& x, const auto& y) {
    if (x.second != y.second) return x.second > y.second;
    return x.first < y.first;
  });
  std::vector<std::string> out;
  for (auto& [name, r] : items) out.push_back(name);
  return out;
}

Leaderboard leaderboard(std::span<const BattleRecord> log, const RatingOptions& options,
                        std::span<const std::string> models) {
  Leaderboard board;
  for (std::size_t i = 0; i < kAllDimensions.size(); ++i) {
    const auto outcomes = joint_outcomes(log, kAllDimensions[i]);
    board.tables[i] = bt_fit(outcomes, kAllDimensions[i], options, models);
  }
  const auto overall = joint_outcomes(log, Dimension::kOverall);
  if (overall.empty()) throw Error("no valid battles to rank");
  board.ranking = ranking_of(board.table(Dimension::kOverall));
  return board;
}

}  // namespace harmarena
