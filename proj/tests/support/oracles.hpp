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

// Reference implementations used only by tests. They share no code with the
// library and favour obviousness over speed.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "harmarena/rating.hpp"

namespace harmarena::oracle {

// Credit matrix: credit[a][b] is a's total score against b.
using Credit = std::map<std::string, std::map<std::string, double>>;

inline Credit credit_of(const std::vector<Outcome>& outcomes) {
  Credit c;
  for (const auto& o : outcomes) {
    c[o.a][o.b] += o.score_a;
    c[o.b][o.a] += 1.0 - o.score_a;
  }
  return c;
}

inline std::vector<std::string> players(const std::vector<Outcome>& outcomes) {
  std::set<std::string> s;
  for (const auto& o : outcomes) {
    s.insert(o.a);
    s.insert(o.b);
  }
  return {s.begin(), s.end()};
}

// Whether every player can reach every other along positive-credit edges.
inline bool strongly_connected(const Credit& c, const std::vector<std::string>& names) {
  for (const auto& src : names) {
    std::set<std::string> seen{src};
    std::vector<std::string> stack{src};
    while (!stack.empty()) {
      const std::string u = stack.back();
      stack.pop_back();
      auto it = c.find(u);
      if (it == c.end()) continue;
      for (const auto& [v, w] : it->second) {
        if (w > 0 && seen.insert(v).second) stack.push_back(v);
      }
    }
    if (seen.size() != names.size()) return false;
  }
  return true;
}

// Sum over ordered pairs of credit * log P(a beats b) on the Elo scale.
inline double log_likelihood(const Credit& c, const std::map<std::string, double>& r, double alpha) {
  double ll = 0;
  for (const auto& [a, row] : c) {
    for (const auto& [b, w] : row) {
      if (w <= 0) continue;
      const double p = 1.0 / (1.0 + std::pow(10.0, (r.at(b) - r.at(a)) / alpha));
      ll += w * std::log(p);
    }
  }
  return ll;
}

// Maximizer of a concave function on [lo, hi] by ternary search.
inline double ternary_max(const std::function<double(double)>& f, double lo, double hi) {
  for (int i = 0; i < 200 && hi - lo > 1e-9; ++i) {
    const double m1 = lo + (hi - lo) / 3;
    const double m2 = hi - (hi - lo) / 3;
    if (f(m1) < f(m2)) {
      lo = m1;
    } else {
      hi = m2;
    }
  }
  return 0.5 * (lo + hi);
}

// Bradley-Terry maximizer for up to three players by nested ternary search
// over ratings relative to the last player, then shifted to mean `anchor`.
// When the credit graph is not strongly connected, half a win is first added
// in each direction of every compared pair.
inline std::map<std::string, double> grid_bt(const std::vector<Outcome>& outcomes, double alpha = 400,
                                             double anchor = 1000) {
  const auto names = players(outcomes);
  Credit c = credit_of(outcomes);
  if (!strongly_connected(c, names)) {
    for (std::size_t i = 0; i < names.size(); ++i) {
      for (std::size_t j = i + 1; j < names.size(); ++j) {
        const double total = c[names[i]][names[j]] + c[names[j]][names[i]];
        if (total > 0) {
          c[names[i]][names[j]] += 0.5;
          c[names[j]][names[i]] += 0.5;
        }
      }
    }
  }
  std::map<std::string, double> r;
  for (const auto& n : names) r[n] = 0;
  const double span = 6000;
  if (names.size() == 2) {
    r[names[0]] = ternary_max(
        [&](double x) {
          auto t = r;
          t[names[0]] = x;
          return log_likelihood(c, t, alpha);
        },
        -span, span);
  } else if (names.size() == 3) {
    auto best_inner = [&](double x) {
      auto t = r;
      t[names[0]] = x;
      t[names[1]] = ternary_max(
          [&](double y) {
            auto u = t;
            u[names[1]] = y;
            return log_likelihood(c, u, alpha);
          },
          -span, span);
      return t;
    };
    const double x = ternary_max([&](double v) { return log_likelihood(c, best_inner(v), alpha); }, -span, span);
    r = best_inner(x);
  }
  double mean = 0;
  for (const auto& [n, v] : r) mean += v;
  mean /= static_cast<double>(r.size());
  for (auto& [n, v] : r) v = v - mean + anchor;
  return r;
}

// DCG with relevance P - (ideal position), written out per position.
inline double brute_ndcg(const std::vector<std::string>& actual, const std::vector<std::string>& ideal) {
  const double P = static_cast<double>(ideal.size());
  std::map<std::string, double> rel;
  for (std::size_t i = 0; i < ideal.size(); ++i) rel[ideal[i]] = P - static_cast<double>(i + 1);
  double dcg = 0, idcg = 0;
  for (std::size_t p = 1; p <= actual.size(); ++p) {
    dcg += rel.at(actual[p - 1]) / std::log2(static_cast<double>(p) + 1);
    idcg += rel.at(ideal[p - 1]) / std::log2(static_cast<double>(p) + 1);
  }
  return idcg == 0 ? 1.0 : dcg / idcg;
}

// Spearman correlation between two orderings of the same items.
inline double spearman(const std::vector<std::string>& x, const std::vector<std::string>& y) {
  std::map<std::string, double> rank_y;
  for (std::size_t i = 0; i < y.size(); ++i) rank_y[y[i]] = static_cast<double>(i);
  const double n = static_cast<double>(x.size());
  double d2 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(i) - rank_y.at(x[i]);
    d2 += d * d;
  }
  return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

}  // namespace harmarena::oracle
