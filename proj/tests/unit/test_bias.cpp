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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "harmarena/bias.hpp"
#include "harmarena/error.hpp"
#include "harmarena/rng.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace harmarena;

namespace {

using Names = std::vector<std::string>;

BiasScenario five_models(std::uint64_t seed) {
  BiasScenario s;
  s.strengths = {{"m1", 1300}, {"m2", 1150}, {"m3", 1000}, {"m4", 850}, {"m5", 700}};
  s.families = {{"m4", "fam-x"}};
  s.judges = {{"j1", "j1", 0, 0, "", 0}, {"j2", "j2", 0, 0, "", 0}, {"j3", "j3", 0, 0, "", 0}};
  s.battles = 1500;
  s.seed = seed;
  return s;
}

}  // namespace

TEST(Dcg, Examples) {
  const std::vector<double> r{2, 1, 0};
  EXPECT_NEAR(dcg(r), 2.0 + 1.0 / std::log2(3.0), 1e-12);
  EXPECT_NEAR(dcg(r), 2.630929753571457, 1e-12);
  const std::vector<double> zeros{0, 0, 0};
  EXPECT_DOUBLE_EQ(dcg(zeros), 0.0);
  const std::vector<double> one{5};
  EXPECT_DOUBLE_EQ(dcg(one), 5.0);
}

TEST(Ndcg, Examples) {
  const Names ideal{"a", "b", "c"};
  const Names swapped_top{"b", "a", "c"};
  EXPECT_DOUBLE_EQ(ndcg(ideal, ideal), 1.0);
  EXPECT_NEAR(ndcg(swapped_top, ideal), 0.859719, 1e-6);
  EXPECT_NEAR(ndcg(swapped_top, ideal, 2), 0.630930, 1e-6);
  const Names reversed{"c", "b", "a"};
  EXPECT_LT(ndcg(reversed, ideal), ndcg(swapped_top, ideal));
}

TEST(Ndcg, MatchesBruteForceOverAllPermutations) {
  for (std::size_t n = 2; n <= 6; ++n) {
    Names ideal;
    for (std::size_t i = 0; i < n; ++i) ideal.push_back(std::string(1, static_cast<char>('a' + i)));
    Names perm = ideal;
    do {
      ASSERT_NEAR(ndcg(perm, ideal), oracle::brute_ndcg(perm, ideal), 1e-12);
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
}

TEST(Ndcg, InvariantUnderRelabelling) {
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    Names ideal{"a", "b", "c", "d", "e"};
    Names actual = ideal;
    rng.shuffle(actual);
    const double base = ndcg(actual, ideal);
    std::map<std::string, std::string> relabel;
    Names targets{"v", "w", "x", "y", "z"};
    rng.shuffle(targets);
    for (std::size_t k = 0; k < ideal.size(); ++k) relabel[ideal[k]] = targets[k];
    Names ideal2, actual2;
    for (const auto& m : ideal) ideal2.push_back(relabel[m]);
    for (const auto& m : actual) actual2.push_back(relabel[m]);
    EXPECT_DOUBLE_EQ(ndcg(actual2, ideal2), base);
    EXPECT_GE(base, 0.0);
    EXPECT_LE(base, 1.0);
  }
}

TEST(Ndcg, RejectsMismatchedSets) {
  const Names a{"a", "b"};
  const Names b{"a", "c"};
  EXPECT_THROW(ndcg(a, b), Error);
  const Names dup{"a", "a"};
  EXPECT_THROW(ndcg(dup, a), Error);
  EXPECT_THROW(ndcg(Names{}, Names{}), Error);
}

TEST(PerJudgeRanking, SingleJudgeEqualsJointRanking) {
  BiasScenario s = five_models(1);
  s.judges = {{"solo", "solo", 50, 0, "", 0}, {"other", "other", 0, 0, "", 0}};
  s.exclude_contestant_judges = false;
  auto log = simulate_biased_judges(s, GuidelineMode::kSelf);
  for (auto& b : log) {
    b.judges = {"solo"};
    b.judge_verdicts.erase("other");
    finalize_battle(b);
  }
  const Names joint = ranking_of(bt_fit(joint_outcomes(log, Dimension::kOverall), Dimension::kOverall));
  EXPECT_EQ(per_judge_ranking(log, "solo"), joint);
}

TEST(PerJudgeRanking, FavouringJudgePromotesFavourite) {
  BiasScenario s = five_models(2);
  s.judges[0].favored = "m5";
  s.judges[0].favored_boost = 800;
  const auto log = simulate_biased_judges(s, GuidelineMode::kSelf);
  const Names biased = per_judge_ranking(log, "j1");
  const Names fair = per_judge_ranking(log, "j2");
  auto pos = [](const Names& r, const std::string& m) { return std::find(r.begin(), r.end(), m) - r.begin(); };
  EXPECT_LT(pos(biased, "m5"), pos(fair, "m5"));
}

TEST(BiasReportTest, AverageIsMeanOfRow) {
  BiasScenario s = five_models(3);
  s.judges[1].self_boost = 500;
  s.judges[1].family = "fam-x";
  std::vector<SettingLog> logs{{"self", simulate_biased_judges(s, GuidelineMode::kSelf)},
                               {"shared", simulate_biased_judges(s, GuidelineMode::kShared)}};
  const Names judges{"j1", "j2", "j3"};
  const BiasReport report = bias_report(logs, judges);
  ASSERT_EQ(report.rows.size(), 2u);
  for (const auto& row : report.rows) {
    ASSERT_EQ(row.ndcg.size(), 3u);
    double sum = 0;
    for (const auto& [j, v] : row.ndcg) sum += v;
    EXPECT_NEAR(row.average, sum / 3.0, 1e-12);
  }
  EXPECT_LT(report.rows[0].ndcg.at("j2"), report.rows[1].ndcg.at("j2") + 1e-12);
}

TEST(BiasReportTest, IdenticalJudgesScorePerfectly) {
  BiasScenario s = five_models(4);
  auto log = simulate_biased_judges(s, GuidelineMode::kShared);
  for (auto& b : log) {
    const Verdict v = b.judge_verdicts.at("j1");
    for (auto& [j, verdict] : b.judge_verdicts) verdict = v;
    finalize_battle(b);
  }
  const std::vector<SettingLog> logs{{"same", log}};
  const Names judges{"j1", "j2", "j3"};
  const BiasReport report = bias_report(logs, judges);
  for (const auto& j : judges) EXPECT_DOUBLE_EQ(report.rows[0].ndcg.at(j), 1.0);
  EXPECT_DOUBLE_EQ(report.rows[0].average, 1.0);
}

TEST(BiasReportTest, AbsentJudgeIsOmitted) {
  const auto log = simulate_biased_judges(five_models(5), GuidelineMode::kSelf);
  const std::vector<SettingLog> logs{{"s", log}};
  const Names judges{"j1", "nobody"};
  const BiasReport report = bias_report(logs, judges);
  EXPECT_EQ(report.rows[0].ndcg.count("nobody"), 0u);
  EXPECT_DOUBLE_EQ(report.rows[0].average, report.rows[0].ndcg.at("j1"));
}

TEST(Simulator, UnbiasedJudgesRecoverTrueOrder) {
  const Names truth{"m1", "m2", "m3", "m4", "m5"};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    BiasScenario s = five_models(seed);
    s.battles = 5000;
    for (auto& j : s.judges) j.noise = 30;
    const auto log = simulate_biased_judges(s, GuidelineMode::kSelf);
    EXPECT_EQ(log.size(), 5000u);
    for (const auto& j : {"j1", "j2", "j3"}) {
      EXPECT_GE(ndcg(per_judge_ranking(log, j), truth), 0.95) << "seed " << seed << " judge " << j;
    }
  }
}

TEST(Simulator, SelfBoostLowersTheBoostedJudgesScore) {
  BiasScenario s = five_models(6);
  s.judges[0].family = "fam-x";
  s.judges[0].self_boost = 800;
  const auto log = simulate_biased_judges(s, GuidelineMode::kSelf);
  const std::vector<SettingLog> logs{{"self", log}};
  const Names judges{"j1", "j2", "j3"};
  const BiasReport report = bias_report(logs, judges);
  EXPECT_LT(report.rows[0].ndcg.at("j1"), report.rows[0].ndcg.at("j2"));
  EXPECT_LT(report.rows[0].ndcg.at("j1"), 1.0);
}

TEST(Simulator, ModesShareEveryDrawWithoutBoosts) {
  const BiasScenario s = five_models(7);
  const auto self = simulate_biased_judges(s, GuidelineMode::kSelf);
  const auto shared = simulate_biased_judges(s, GuidelineMode::kShared);
  ASSERT_EQ(self.size(), shared.size());
  for (std::size_t i = 0; i < self.size(); ++i) {
    EXPECT_EQ(self[i].judge_verdicts, shared[i].judge_verdicts);
    EXPECT_EQ(self[i].setting, Setting::kSelfGuideline);
    EXPECT_EQ(shared[i].setting, Setting::kMemeArena);
  }
}

TEST(Simulator, DeterministicPerSeedAndValid) {
  const BiasScenario s = five_models(8);
  const auto a = simulate_biased_judges(s, GuidelineMode::kSelf);
  const auto b = simulate_biased_judges(s, GuidelineMode::kSelf);
  EXPECT_EQ(a, b);
  for (const auto& r : a) EXPECT_TRUE(r.valid);
}

TEST(Simulator, ContestantExclusion) {
  BiasScenario s = five_models(9);
  s.judges[2].family = "fam-x";
  s.exclude_contestant_judges = true;
  const auto log = simulate_biased_judges(s, GuidelineMode::kSelf);
  for (const auto& r : log) {
    const bool m4 = r.model_a == "m4" || r.model_b == "m4";
    EXPECT_EQ(std::count(r.judges.begin(), r.judges.end(), "j3"), m4 ? 0 : 1);
  }
}

TEST(Scenario, ValidationNamesField) {
  auto expect_field = [](const Json& j, const std::string& field) {
    try {
      BiasScenario::from_json(j);
      ADD_FAILURE() << "expected failure for " << field;
    } catch (const ValidationError& e) {
      EXPECT_EQ(e.where(), field);
    }
  };
  Json base = {{"strengths", {{"a", 1000}, {"b", 900}, {"c", 800}}},
               {"judges", Json::array({{{"name", "x"}}, {{"name", "y"}}})}};
  EXPECT_NO_THROW(BiasScenario::from_json(base));
  Json j = base;
  j["strengths"].erase("c");
  expect_field(j, "strengths");
  j = base;
  j["judges"][1]["noise"] = -1;
  expect_field(j, "judges[1].noise");
  j = base;
  j["attenuation"] = 1.5;
  expect_field(j, "attenuation");
  j = base;
  j["vote_rule"] = "dictator";
  expect_field(j, "vote_rule");
  j = base;
  j.erase("judges");
  expect_field(j, "scenario");
}

TEST(Scenario, DemoScenarioLoads) {
  const BiasScenario s = BiasScenario::load(harmarena::testing::demo_dir() / "bias_scenario.json");
  EXPECT_GE(s.judges.size(), 2u);
  EXPECT_GE(s.strengths.size(), 3u);
}
