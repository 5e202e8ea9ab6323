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
#include <map>
#include <mutex>

#include "harmarena/error.hpp"
#include "harmarena/fusion.hpp"
#include "harmarena/simulation.hpp"
#include "fusion_harness.hpp"
#include "test_support.hpp"

using namespace harmarena;
using harmarena::testing::analysis;
using harmarena::testing::model;
using harmarena::testing::no_sleep_retry;
using harmarena::testing::replay_schedule;
using harmarena::testing::ScriptedJudges;
using harmarena::testing::FusionSetup;
using harmarena::testing::assignable_without;

TEST(EligibleJudges, ExcludesAuthorFamily) {
  std::vector<ModelRef> panel{model("J1"), model("J2"), model("J3"), model("J4")};
  const auto e = eligible_judges(panel, "J2");
  ASSERT_EQ(e.size(), 3u);
  EXPECT_EQ(e[0].name, "J1");
  EXPECT_EQ(e[1].name, "J3");
  EXPECT_EQ(e[2].name, "J4");
  EXPECT_EQ(eligible_judges(panel, "someone-else").size(), 4u);
  std::vector<ModelRef> solo{model("J1")};
  EXPECT_THROW(eligible_judges(solo, "J1"), StageError);
}

TEST(EligibleJudges, FamilyNotNameDecides) {
  std::vector<ModelRef> panel{model("big", "acme"), model("other", "zeta")};
  const auto e = eligible_judges(panel, "acme");
  ASSERT_EQ(e.size(), 1u);
  EXPECT_EQ(e[0].name, "other");
}

TEST(InitGuideline, ForcedChoiceWithOneJudgeAuthoredAnalysis) {
  std::vector<ModelRef> panel{model("J1"), model("J2")};
  Roster roster({model("J1"), model("J2"), model("x"), model("y")});
  std::vector<Analysis> pool{analysis("m#a", "x"), analysis("m#b", "J2"), analysis("m#c", "y")};
  Rng rng(1);
  const FusionState s = init_guideline("m", pool, panel, roster, rng);
  EXPECT_EQ(s.guideline.seed, (AnalysisKey{"m#b", "J2"}));
  EXPECT_EQ(s.guideline.version, 0);
  EXPECT_EQ(s.guideline.text, render_analysis(pool[1]));
  EXPECT_EQ(s.pool.size(), 2u);
}

TEST(InitGuideline, DeterministicAndFromPanelFamily) {
  FusionSetup setup(5, 2);
  std::set<std::string> authors;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng a(seed), b(seed);
    const auto s1 = init_guideline("m1", setup.pool, setup.panel, setup.roster, a);
    const auto s2 = init_guideline("m1", setup.pool, setup.panel, setup.roster, b);
    EXPECT_EQ(s1.guideline, s2.guideline);
    EXPECT_TRUE(s1.guideline.seed.author == "t1" || s1.guideline.seed.author == "t2");
    authors.insert(s1.guideline.seed.author);
    EXPECT_EQ(s1.pool.size(), setup.pool.size() - 1);
  }
  EXPECT_EQ(authors.size(), 2u);
}

TEST(InitGuideline, NoJudgeAuthoredAnalysisIsStageError) {
  std::vector<ModelRef> panel{model("J1"), model("J2")};
  Roster roster({model("J1"), model("J2"), model("x")});
  Rng rng(1);
  EXPECT_THROW(init_guideline("m", {analysis("m#a", "x")}, panel, roster, rng), StageError);
}

TEST(FusionRound, ScriptedTextBecomesNextVersion) {
  FusionSetup setup(5, 4);
  Rng rng(3);
  FusionState state = init_guideline("m1", setup.pool, setup.panel, setup.roster, rng);
  std::vector<StageFailure> failures;
  const std::size_t before = state.pool.size();
  EXPECT_EQ(fusion_round(state, setup.meme, setup.panel, setup.roster, *setup.invoker, setup.templates,
                         rng, failures),
            RoundOutcome::kFused);
  EXPECT_EQ(state.pool.size(), before - 1);
  EXPECT_EQ(state.guideline.version, 1);
  EXPECT_EQ(state.guideline.text, setup.backend->last_text);
  ASSERT_EQ(state.guideline.trail.size(), 1u);
  EXPECT_TRUE(failures.empty());
}

TEST(FusionRound, PromptHoldsBothInputsUnlabeled) {
  const Meme meme = harmarena::testing::meme("m1", "caption");
  const Analysis a = analysis("m1#unrelated", "x");
  const std::string g = "CURRENT GUIDELINE";
  const std::string first = build_fusion_prompt(meme, g, a, true);
  const std::string second = build_fusion_prompt(meme, g, a, false);
  EXPECT_LT(first.find(g), first.find(a.background));
  EXPECT_GT(second.find(g), second.find(a.background));
  EXPECT_EQ(first.find("guideline]"), std::string::npos);
  EXPECT_NE(first.find("caption"), std::string::npos);
}

TEST(Fuse, CardinalityExclusionCoverageAndLastOutput) {
  FusionSetup setup(5, 4);
  std::vector<StageFailure> failures;
  const Guideline g = fuse(setup.meme, setup.pool, setup.panel, setup.roster, *setup.invoker,
                           setup.templates, 42, failures);
  EXPECT_TRUE(failures.empty());
  EXPECT_EQ(g.version, 14);
  ASSERT_EQ(g.trail.size(), 14u);
  EXPECT_EQ(g.text, setup.backend->last_text);
  EXPECT_EQ(g.text, "v14 from " + g.trail.back().judge);

  std::multiset<std::pair<std::string, std::string>> consumed{{g.seed.task_id, g.seed.author}};
  std::set<std::string> judges;
  for (std::size_t i = 0; i < g.trail.size(); ++i) {
    const auto& e = g.trail[i];
    EXPECT_EQ(e.round, static_cast<int>(i + 1));
    EXPECT_NE(setup.roster.family_of(e.judge), setup.roster.family_of(e.consumed.author));
    consumed.insert({e.consumed.task_id, e.consumed.author});
    judges.insert(e.judge);
  }
  std::multiset<std::pair<std::string, std::string>> expected;
  for (const auto& a : setup.pool) expected.insert({a.task_id, a.author});
  EXPECT_EQ(consumed, expected);
  EXPECT_EQ(judges.size(), 4u);
}

TEST(Fuse, FixedSeedReplaysIdentically) {
  FusionSetup a(6, 3), b(6, 3);
  std::vector<StageFailure> fa, fb;
  const Guideline ga = fuse(a.meme, a.pool, a.panel, a.roster, *a.invoker, a.templates, 7, fa);
  const Guideline gb = fuse(b.meme, b.pool, b.panel, b.roster, *b.invoker, b.templates, 7, fb);
  EXPECT_EQ(Json(ga).dump(), Json(gb).dump());
  EXPECT_EQ(a.backend->prompts, b.backend->prompts);

  // Input order does not matter either.
  FusionSetup c(6, 3);
  std::reverse(c.pool.begin(), c.pool.end());
  std::vector<StageFailure> fc;
  const Guideline gc = fuse(c.meme, c.pool, c.panel, c.roster, *c.invoker, c.templates, 7, fc);
  EXPECT_EQ(ga.trail, gc.trail);
}

TEST(Fuse, TrailMatchesIndependentReplay) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const int n = 4 + static_cast<int>(seed % 4);
    const int k = 2 + static_cast<int>(seed % 3);
    FusionSetup setup(n, std::min(k, n - 1));
    std::vector<StageFailure> failures;
    const Guideline g = fuse(setup.meme, setup.pool, setup.panel, setup.roster, *setup.invoker,
                             setup.templates, seed, failures);
    AnalysisKey seed_key;
    const auto trail = replay_schedule(setup.pool, setup.panel, setup.roster, seed, "m1", &seed_key);
    EXPECT_EQ(g.seed, seed_key) << "seed " << seed;
    EXPECT_EQ(g.trail, trail) << "seed " << seed;
  }
}

TEST(Fuse, CoverageHoldsWhenPoolBarelyExceedsPanel) {
  // Pool of 5 after init, 4 judges: coverage leaves almost no slack.
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    FusionSetup setup(5, 4);
    setup.pool.resize(6);  // t1 and t2 analyses only
    std::vector<StageFailure> failures;
    const Guideline g = fuse(setup.meme, setup.pool, setup.panel, setup.roster, *setup.invoker,
                             setup.templates, seed, failures);
    std::set<std::string> judges;
    for (const auto& e : g.trail) judges.insert(e.judge);
    ASSERT_EQ(g.trail.size(), 5u);
    EXPECT_EQ(judges.size(), 4u) << "seed " << seed;
  }
}

TEST(Fuse, FailedJudgeIsReplacedByAnother) {
  FusionSetup setup(5, 3);
  setup.backend->failing = {"t1"};
  std::vector<StageFailure> failures;
  const Guideline g = fuse(setup.meme, setup.pool, setup.panel, setup.roster, *setup.invoker,
                           setup.templates, 11, failures);
  EXPECT_EQ(g.version, 14);
  for (const auto& e : g.trail) EXPECT_NE(e.judge, "t1");
  for (const auto& f : failures) {
    EXPECT_EQ(f.stage, "fuse");
    EXPECT_EQ(f.model, "t1");
    EXPECT_EQ(f.kind, "transport");
  }
}

TEST(Fuse, AllJudgesDownRequeuesOnceThenDrops) {
  FusionSetup setup(4, 2);
  setup.backend->failing = {"t1", "t2"};
  std::vector<StageFailure> failures;
  const Guideline g = fuse(setup.meme, setup.pool, setup.panel, setup.roster, *setup.invoker,
                           setup.templates, 5, failures);
  EXPECT_EQ(g.version, 0);
  EXPECT_TRUE(g.trail.empty());
  std::map<std::string, int> kinds;
  for (const auto& f : failures) ++kinds[f.kind];
  EXPECT_EQ(kinds["requeued"], 11);
  EXPECT_EQ(kinds["dropped"], 11);
}

TEST(Fuse, RequeuedAnalysisReturnsToPoolTail) {
  FusionSetup setup(4, 2);
  Rng rng(9);
  FusionState state = init_guideline("m1", setup.pool, setup.panel, setup.roster, rng);
  setup.backend->failing = {"t1", "t2"};
  std::vector<StageFailure> failures;
  const std::size_t before = state.pool.size();
  EXPECT_EQ(fusion_round(state, setup.meme, setup.panel, setup.roster, *setup.invoker, setup.templates,
                         rng, failures),
            RoundOutcome::kRequeued);
  EXPECT_EQ(state.pool.size(), before);
  ASSERT_EQ(state.requeued.size(), 1u);
  EXPECT_EQ((AnalysisKey{state.pool.back().task_id, state.pool.back().author}), state.requeued[0]);
}

TEST(Fuse, Preconditions) {
  FusionSetup setup(4, 2);
  std::vector<StageFailure> failures;
  std::vector<Analysis> one{setup.pool[0]};
  EXPECT_THROW(fuse(setup.meme, one, setup.panel, setup.roster, *setup.invoker, setup.templates, 1, failures),
               StageError);
  std::vector<ModelRef> solo{setup.panel[0]};
  EXPECT_THROW(fuse(setup.meme, setup.pool, solo, setup.roster, *setup.invoker, setup.templates, 1, failures),
               StageError);
  std::vector<Analysis> invalid = setup.pool;
  for (auto& a : invalid) a.reasoning.clear();
  invalid[0] = setup.pool[0];
  EXPECT_THROW(fuse(setup.meme, invalid, setup.panel, setup.roster, *setup.invoker, setup.templates, 1, failures),
               StageError);
}

TEST(CoverageFeasible, Examples) {
  Roster roster({model("a"), model("b"), model("c")});
  std::vector<ModelRef> judges{model("a"), model("b")};
  EXPECT_TRUE(coverage_feasible(std::vector<Analysis>{analysis("t", "c"), analysis("t", "a")}, judges, roster));
  EXPECT_FALSE(coverage_feasible(std::vector<Analysis>{analysis("t", "c")}, judges, roster));
  EXPECT_FALSE(coverage_feasible(std::vector<Analysis>{analysis("t", "a"), analysis("u", "a")}, judges, roster));
}

TEST(GuidelineReply, Parsing) {
  EXPECT_EQ(parse_guideline_reply("noise <guideline>\n body \n</guideline> trailing"), "body");
  EXPECT_EQ(parse_guideline_reply("  bare text "), "bare text");
  EXPECT_EQ(parse_guideline_reply("<guideline>unterminated"), "unterminated");
  EXPECT_THROW(parse_guideline_reply("<guideline> </guideline>"), ParseError);
  EXPECT_THROW(parse_guideline_reply("   "), ParseError);
}
