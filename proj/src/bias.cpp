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

#include "harmarena/bias.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "harmarena/arena.hpp"
#include "harmarena/error.hpp"
#include "harmarena/rng.hpp"

namespace harmarena {

double dcg(std::span<const double> relevances) {
  double total = 0;
  for (std::size_t i = 0; i < relevances.size(); ++i) {
    total += relevances[i] / std::log2(static_cast<double>(i) + 2.0);
  }
  return total;
}

double ndcg(std::span<const std::string> actual, std::span<const std::string> ideal,
            std::size_t p) {
  const std::set<std::string> a(actual.begin(), actual.end());
  const std::set<std::string> b(ideal.begin(), ideal.end());
  if (a != b || a.size() != actual.size() || b.size() != ideal.size()) {
    throw Error("ndcg: rankings must order the same distinct models");
  }
  if (ideal.empty()) throw Error("ndcg: empty ranking");
  const std::size_t depth = p == 0 ? ideal.size() : std::min(p, ideal.size());
  const double big_p = static_cast<double>(p == 0 ? ideal.size() : p);
  std::map<std::string, double> rel;
  for (std::size_t i = 0; i < ideal.size(); ++i) {
    rel[ideal[i]] = std::max(0.0, big_p - static_cast<double>(i + 1));
  }
  std::vector<double> got;
  std::vector<double> best;
  for (std::size_t i = 0; i < depth; ++i) {
    got.push_back(rel[actual[i]]);
    best.push_back(rel[ideal[i]]);
  }
  const double idcg = dcg(best);
  if (idcg == 0) return 1.0;  // every relevance is zero
  return dcg(got) / idcg;
}

std::vector<std::string> per_judge_ranking(std::span<const BattleRecord> log,
                                           const std::string& judge, Dimension dimension,
                                           const RatingOptions& options) {
  const auto outcomes = judge_outcomes(log, judge, dimension);
  return ranking_of(bt_fit(outcomes, dimension, options));
}

BiasReport bias_report(std::span<const SettingLog> logs, std::span<const std::string> judges,
                       std::size_t p, Dimension dimension, const RatingOptions& options) {
  BiasReport report;
  report.judges.assign(judges.begin(), judges.end());
  for (const auto& setting : logs) {
    BiasRow row;
    row.setting = setting.setting;
    row.ideal = ranking_of(bt_fit(joint_outcomes(setting.battles, dimension), dimension, options));
    double sum = 0;
    for (const auto& judge : judges) {
      if (judge_outcomes(setting.battles, judge, dimension).empty()) continue;
      auto actual = per_judge_ranking(setting.battles, judge, dimension, options);
      const std::set<std::string> judged(actual.begin(), actual.end());
      std::vector<std::string> ideal;
      for (const auto& m : row.ideal) {
        if (judged.count(m)) ideal.push_back(m);
      }
      const std::set<std::string> common(ideal.begin(), ideal.end());
      std::erase_if(actual, [&](const std::string& m) { return !common.count(m); });
      const double score = ndcg(actual, ideal, p == 0 ? 0 : std::min(p, ideal.size()));
      row.ndcg[judge] = score;
      sum += score;
    }
    row.average = row.ndcg.empty() ? 0.0 : sum / static_cast<double>(row.ndcg.size());
    report.rows.push_back(std::move(row));
  }
  return report;
}

// ---------------------------------------------------------------------------

std::string_view to_string(GuidelineMode m) { return m == GuidelineMode::kSelf ? "self" : "shared"; }

std::optional<GuidelineMode> parse_guideline_mode(std::string_view text) {
  if (text == "self") return GuidelineMode::kSelf;
  if (text == "shared") return GuidelineMode::kShared;
  return std::nullopt;
}

void BiasScenario::validate() const {
  if (strengths.size() < 3) throw ValidationError("strengths", "at least 3 models required");
  if (judges.size() < 2) throw ValidationError("judges", "at least 2 judges required");
  for (std::size_t i = 0; i < judges.size(); ++i) {
    const auto& j = judges[i];
    const std::string where = fmt::format("judges[{}]", i);
    if (j.name.empty()) throw ValidationError(where + ".name", "must be non-empty");
    if (j.noise < 0) throw ValidationError(where + ".noise", "must be >= 0");
    if (j.self_boost < 0) throw ValidationError(where + ".self_boost", "must be >= 0");
    if (j.favored_boost < 0) throw ValidationError(where + ".favored_boost", "must be >= 0");
  }
  if (battles < 0) throw ValidationError("battles", "must be >= 0");
  if (per_task < 2) throw ValidationError("per_task", "must be >= 2");
  if (alpha <= 0) throw ValidationError("alpha", "must be positive");
  if (attenuation < 0 || attenuation > 1) throw ValidationError("attenuation", "must be in [0, 1]");
  if (tie_rate < 0 || tie_rate >= 1) throw ValidationError("tie_rate", "must be in [0, 1)");
}

BiasScenario BiasScenario::from_json(const Json& j) {
  BiasScenario s;
  try {
    s.strengths = j.at("strengths").get<std::map<std::string, double>>();
    s.families = j.value("families", std::map<std::string, std::string>{});
    for (const auto& jj : j.at("judges")) {
      SimulatedJudge judge;
      judge.name = jj.at("name").get<std::string>();
      judge.family = jj.value("family", judge.name);
      judge.noise = jj.value("noise", 0.0);
      judge.self_boost = jj.value("self_boost", 0.0);
      judge.favored = jj.value("favored", "");
      judge.favored_boost = jj.value("favored_boost", 0.0);
      s.judges.push_back(std::move(judge));
    }
    s.battles = j.value("battles", s.battles);
    s.per_task = j.value("per_task", s.per_task);
    s.seed = j.value("seed", s.seed);
    s.alpha = j.value("alpha", s.alpha);
    s.attenuation = j.value("attenuation", s.attenuation);
    s.tie_rate = j.value("tie_rate", s.tie_rate);
    s.exclude_contestant_judges = j.value("exclude_contestant_judges", false);
    const std::string rule = j.value("vote_rule", "abstain");
    auto vr = parse_vote_rule(rule);
    if (!vr) throw ValidationError("vote_rule", "unknown rule '" + rule + "'");
    s.vote_rule = *vr;
  } catch (const Json::exception& e) {
    throw ValidationError("scenario", e.what());
  }
  s.validate();
  return s;
}

BiasScenario BiasScenario::load(const std::filesystem::path& path) {
  try {
    return from_json(Json::parse(read_text_file(path)));
  } catch (const Json::parse_error& e) {
    throw ValidationError(path.string(), e.what());
  }
}

std::vector<BattleRecord> simulate_biased_judges(const BiasScenario& scenario,
                                                 GuidelineMode mode) {
  scenario.validate();
  std::vector<std::string> models;
  for (const auto& [m, r] : scenario.strengths) models.push_back(m);
  auto family = [&](const std::string& m) {
    auto it = scenario.families.find(m);
    return it == scenario.families.end() ? m : it->second;
  };

  const int per_task = std::min<int>(scenario.per_task, static_cast<int>(models.size()));
  const int pairs_per_task = per_task * (per_task - 1) / 2;
  const int task_count = (scenario.battles + pairs_per_task - 1) / pairs_per_task;
  std::vector<TaskEntrants> tasks;
  tasks.reserve(static_cast<std::size_t>(task_count));
  for (int t = 0; t < task_count; ++t) {
    const std::string meme = fmt::format("sim-{:05d}", t / 3);
    tasks.push_back({canonical_task_id(meme, kAllRelevance[static_cast<std::size_t>(t % 3)]),
                     meme, models});
  }
  auto schedule = schedule_battles(tasks, per_task, derive_seed(scenario.seed, "scheduler"),
                                   derive_seed(scenario.seed, "presentation"));
  schedule.pairings.resize(
      std::min(schedule.pairings.size(), static_cast<std::size_t>(scenario.battles)));

  const double keep = mode == GuidelineMode::kShared ? 1.0 - scenario.attenuation : 1.0;
  const Setting setting =
      mode == GuidelineMode::kShared ? Setting::kMemeArena : Setting::kSelfGuideline;
  Rng rng(derive_seed(scenario.seed, "verdicts"));

  std::vector<BattleRecord> log;
  log.reserve(schedule.pairings.size());
  for (const auto& p : schedule.pairings) {
    BattleRecord rec;
    rec.battle_id = canonical_battle_id(setting, p.task_id, p.model_a, p.model_b);
    rec.task_id = p.task_id;
    rec.meme_id = p.meme_id;
    rec.model_a = p.model_a;
    rec.model_b = p.model_b;
    rec.swapped = p.swapped;
    rec.setting = setting;
    rec.vote_rule = scenario.vote_rule;
    for (const auto& judge : scenario.judges) {
      const std::string jf = judge.family.empty() ? judge.name : judge.family;
      auto boost = [&](const std::string& m) {
        double b = 0;
        if (family(m) == jf) b += judge.self_boost;
        if (!judge.favored.empty() && m == judge.favored) b += judge.favored_boost;
        return b * keep;
      };
      // Draws happen for every judge so that both modes consume the stream
      // identically, including judges that sit the battle out.
      Verdict v;
      for (Dimension d : kAllDimensions) {
        const double noise = rng.normal() * judge.noise;
        const double u_tie = rng.uniform01();
        const double u_win = rng.uniform01();
        const double ra = scenario.strengths.at(p.model_a) + boost(p.model_a) + noise;
        const double rb = scenario.strengths.at(p.model_b) + boost(p.model_b);
        if (u_tie < scenario.tie_rate) {
          v[d] = Winner::kTie;
        } else {
          v[d] = u_win < elo_expected(ra, rb, scenario.alpha) ? Winner::kA : Winner::kB;
        }
      }
      const bool contestant = family(p.model_a) == jf || family(p.model_b) == jf;
      if (scenario.exclude_contestant_judges && contestant) continue;
      rec.judges.push_back(judge.name);
      rec.judge_verdicts[judge.name] = v;
    }
    finalize_battle(rec);
    log.push_back(std::move(rec));
  }
  return log;
}

}  // namespace harmarena
