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

#include <regex>

#include "harmarena/error.hpp"
#include "harmarena/rng.hpp"
#include "harmarena/simulation.hpp"
#include "test_support.hpp"

using namespace harmarena;
using harmarena::testing::mock_registry;
using harmarena::testing::no_sleep_retry;

namespace {

const char* kContextsJson =
    R"([{"relevance": "unrelated", "profile": "P-unrelated"},
        {"relevance": "highly_relevant", "profile": "P-high"},
        {"relevance": "moderately_relevant", "profile": "P-moderate"}])";

Json controller_rules() {
  return Json::array(
      {{{"tag", "ControllerSim"}, {"pattern", "Describe three social media users"}, {"response", kContextsJson}},
       {{"tag", "ControllerSim"},
        {"pattern", "meme: highly relevant"},
        {"response", R"({"instruction": "I-high"})"}},
       {{"tag", "ControllerSim"},
        {"pattern", "meme: moderately relevant"},
        {"response", R"(Sure! {"instruction": "I-moderate"})"}},
       {{"tag", "ControllerSim"}, {"pattern", "meme: unrelated"}, {"response", R"({"task": "I-unrelated"})"}}});
}

struct Fixture {
  explicit Fixture(Json rules) : registry(mock_registry(Json{{"rules", std::move(rules)}})),
                                 invoker(*registry, {}, no_sleep_retry()) {}
  std::shared_ptr<BackendRegistry> registry;
  Invoker invoker;
  TemplateSet templates = TemplateSet::defaults();
  ModelRef controller = harmarena::testing::model("ctl");
  Meme meme = harmarena::testing::meme("m1", "caption text");
};

ContextTask make_task(Relevance r, std::string instruction, std::string profile = "profile") {
  ContextTask t;
  t.meme_id = "m1";
  t.task_id = canonical_task_id("m1", r);
  t.context = {"m1", r, std::move(profile)};
  t.instruction = std::move(instruction);
  return t;
}

}  // namespace

TEST(ParseAnalysis, SplitsNumberedInlineMarkers) {
  const auto p = parse_analysis("1) [Background Knowledge]: X 2) [Reasoning]: Y");
  EXPECT_EQ(p.background, "X");
  EXPECT_EQ(p.reasoning, "Y");
}

TEST(ParseAnalysis, PlainMarkers) {
  const auto p = parse_analysis("[Background Knowledge]: A [Reasoning]: B");
  EXPECT_EQ(p, (ParsedAnalysis{"A", "B"}));
}

TEST(ParseAnalysis, MissingReasoningFails) {
  EXPECT_THROW(parse_analysis("[Background Knowledge]: only facts"), ParseError);
  EXPECT_THROW(parse_analysis("[Reasoning]: before [Background Knowledge]: after"), ParseError);
  EXPECT_THROW(parse_analysis("no markers"), ParseError);
  EXPECT_THROW(parse_analysis("[Background Knowledge]: [Reasoning]: B"), ParseError);
  EXPECT_THROW(parse_analysis("[Background Knowledge]: A [Reasoning]:   "), ParseError);
}

TEST(ParseAnalysis, LowercaseAndMarkdownVariants) {
  EXPECT_EQ(parse_analysis("[background knowledge] x\n[reasoning] y"), (ParsedAnalysis{"x", "y"}));
  EXPECT_EQ(parse_analysis("**[Background Knowledge]:** x\n\n**[Reasoning]:** y"),
            (ParsedAnalysis{"x", "y"}));
  EXPECT_EQ(parse_analysis("### [BACKGROUND  KNOWLEDGE]\nx\n### [Reasoning]\ny"),
            (ParsedAnalysis{"x", "y"}));
  EXPECT_EQ(parse_analysis("[Background Knowledge]\xEF\xBC\x9A x\n(2) [Reasoning]\xEF\xBC\x9A y"),
            (ParsedAnalysis{"x", "y"}));
}

TEST(ParseAnalysis, SentenceEndingInNumberKeepsIt) {
  const auto p = parse_analysis("[Background Knowledge]: depth level 5. [Reasoning]: r");
  EXPECT_EQ(p.background, "depth level 5.");
  const auto q = parse_analysis("[Background Knowledge]: facts\n2. [Reasoning]: r");
  EXPECT_EQ(q.background, "facts");
}

// Reference extractor for the fuzz corpus below.
ParsedAnalysis regex_oracle(const std::string& text) {
  static const std::regex re(
      R"(\[\s*background\s+knowledge\s*\][\s*_:]*([\s\S]*?)\s*[*_#]*\s*(?:\(\d{1,2}\)|\d{1,2}\)|\d{1,2}\.)?\s*[*_#]*\s*\[\s*reasoning\s*\][\s*_:]*([\s\S]*?)\s*$)",
      std::regex::ECMAScript | std::regex::icase);
  std::smatch m;
  if (!std::regex_search(text, m, re)) throw std::runtime_error("oracle failed on: " + text);
  return {m[1].str(), m[2].str()};
}

TEST(ParseAnalysis, FuzzedMarkerCasingMatchesRegexOracle) {
  Rng rng(20261016);
  auto recase = [&](std::string s) {
    for (char& c : s) {
      if (rng.bernoulli(0.5)) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
    return s;
  };
  auto ws = [&](int max) { return std::string(rng.uniform_index(max + 1), ' '); };
  const std::vector<std::string> words{"alpha", "beta", "gamma", "delta", "meme", "context", "risk"};
  auto body = [&] {
    std::string out;
    const std::size_t n = 1 + rng.uniform_index(8);
    for (std::size_t i = 0; i < n; ++i) {
      if (i > 0) out += rng.bernoulli(0.2) ? "\n" : " ";
      out += words[rng.uniform_index(words.size())];
    }
    return out;
  };
  const std::vector<std::string> seps{":", ": ", "**:** ", " :", "\n", "**: ", ""};
  const std::vector<std::string> numbering{" ", "\n", " 2) ", "\n2. ", " (2) ", " **2)** ", "\n## ", "\n**"};
  for (int i = 0; i < 2000; ++i) {
    const std::string bg_marker = "[" + ws(2) + recase("background") + " " + ws(2) +
                                  recase("knowledge") + ws(2) + "]";
    const std::string rs_marker = "[" + ws(1) + recase("reasoning") + ws(1) + "]";
    const std::string bg = body();
    const std::string rs = body();
    const std::string text = (rng.bernoulli(0.5) ? "1) " : "") + bg_marker +
                             seps[rng.uniform_index(seps.size())] + " " + bg +
                             numbering[rng.uniform_index(numbering.size())] + rs_marker +
                             seps[rng.uniform_index(seps.size())] + " " + rs + ws(2);
    const ParsedAnalysis got = parse_analysis(text);
    const ParsedAnalysis want = regex_oracle(text);
    ASSERT_EQ(got, want) << text;
    ASSERT_EQ(got.background, bg) << text;
    ASSERT_EQ(got.reasoning, rs) << text;
  }
}

TEST(ParseAnalysis, RenderRoundTrip) {
  const std::vector<std::pair<std::string, std::string>> cases{
      {"A", "B"},
      {"multi\nline background", "reasoning with: colons"},
      {"mentions [brackets] inside", "ends with a number 3"},
  };
  for (const auto& [b, r] : cases) {
    EXPECT_EQ(parse_analysis(render_analysis(b, r)), (ParsedAnalysis{b, r}));
  }
}

TEST(ParseContexts, SortedByLevelWithProseAround) {
  const auto cs = parse_contexts(std::string("Here you go:\n```json\n") + kContextsJson + "\n```", "m1");
  ASSERT_EQ(cs.size(), 3u);
  EXPECT_EQ(cs[0].relevance, Relevance::kHighlyRelevant);
  EXPECT_EQ(cs[0].profile, "P-high");
  EXPECT_EQ(cs[1].profile, "P-moderate");
  EXPECT_EQ(cs[2].profile, "P-unrelated");
  for (const auto& c : cs) EXPECT_EQ(c.meme_id, "m1");
}

TEST(ParseContexts, AcceptsWrappedObject) {
  const auto cs = parse_contexts(std::string(R"({"contexts": )") + kContextsJson + "}", "m1");
  EXPECT_EQ(cs.size(), 3u);
}

TEST(ParseContexts, RejectsBadShapes) {
  EXPECT_THROW(parse_contexts("no json", "m"), ParseError);
  EXPECT_THROW(parse_contexts(R"([{"relevance":"unrelated","profile":"p"}])", "m"), ParseError);
  EXPECT_THROW(parse_contexts(R"([{"relevance":"unrelated","profile":"p"},
                                  {"relevance":"unrelated","profile":"q"},
                                  {"relevance":"highly_relevant","profile":"r"}])",
                              "m"),
               ParseError);
  EXPECT_THROW(parse_contexts(R"([{"relevance":"sideways","profile":"p"},
                                  {"relevance":"unrelated","profile":"q"},
                                  {"relevance":"highly_relevant","profile":"r"}])",
                              "m"),
               ParseError);
}

TEST(ParseInstruction, Variants) {
  EXPECT_EQ(parse_instruction(R"({"instruction": "do it"})"), "do it");
  EXPECT_EQ(parse_instruction(R"(ok {"task": "do it"} bye)"), "do it");
  EXPECT_THROW(parse_instruction(R"({"other": "x"})"), ParseError);
  EXPECT_THROW(parse_instruction(R"({"instruction": "  "})"), ParseError);
  EXPECT_THROW(parse_instruction("plain"), ParseError);
}

TEST(SimulateContexts, ScriptedProfilesVerbatim) {
  Fixture f(controller_rules());
  const auto cs = simulate_contexts(f.meme, f.controller, f.invoker, f.templates);
  ASSERT_EQ(cs.size(), 3u);
  EXPECT_EQ(cs[0].profile, "P-high");
  EXPECT_EQ(cs[1].profile, "P-moderate");
  EXPECT_EQ(cs[2].profile, "P-unrelated");
  std::set<Relevance> levels;
  for (const auto& c : cs) levels.insert(c.relevance);
  EXPECT_EQ(levels.size(), 3u);
}

TEST(SimulateContexts, RepromptsOnceThenSucceeds) {
  Json rules = Json::array({{{"tag", "ControllerSim"}, {"pattern", "could not be used"}, {"response", kContextsJson}},
                            {{"tag", "ControllerSim"}, {"response", "I would rather not use JSON."}}});
  Fixture f(rules);
  EXPECT_EQ(simulate_contexts(f.meme, f.controller, f.invoker, f.templates).size(), 3u);
  EXPECT_EQ(f.invoker.call_counts().at("ctl"), 2);
}

TEST(SimulateContexts, SecondFailureIsStageError) {
  Fixture f(Json::array({{{"tag", "ControllerSim"}, {"response", "nope"}}}));
  EXPECT_THROW(simulate_contexts(f.meme, f.controller, f.invoker, f.templates), StageError);
  EXPECT_EQ(f.invoker.call_counts().at("ctl"), 2);
}

TEST(FormulateTask, ScriptedInstructionAndProfileInPrompt) {
  Fixture f(controller_rules());
  const auto cs = simulate_contexts(f.meme, f.controller, f.invoker, f.templates);
  std::set<std::string> instructions;
  for (const auto& c : cs) {
    const ContextTask t = formulate_task(f.meme, c, f.controller, f.invoker, f.templates);
    EXPECT_EQ(t.task_id, canonical_task_id("m1", c.relevance));
    EXPECT_NE(t.task_text().find(c.profile), std::string::npos);
    instructions.insert(t.instruction);
  }
  EXPECT_EQ(instructions, (std::set<std::string>{"I-high", "I-moderate", "I-unrelated"}));
  const InterpretiveContext foreign{"other", Relevance::kUnrelated, "p"};
  EXPECT_THROW(formulate_task(f.meme, foreign, f.controller, f.invoker, f.templates), Error);
}

TEST(CotPrompt, ContainsBothMarkersAndDirective) {
  const std::string p = build_cot_prompt(make_task(Relevance::kHighlyRelevant, "Assess it."));
  EXPECT_NE(p.find("[Background Knowledge]"), std::string::npos);
  EXPECT_NE(p.find("[Reasoning]"), std::string::npos);
  EXPECT_NE(p.find(cot_directive()), std::string::npos);
  EXPECT_LT(p.find("Assess it."), p.find(cot_directive()));
}

TEST(CotPrompt, PureAndDiffersOnlyInTaskPortion) {
  const ContextTask a = make_task(Relevance::kHighlyRelevant, "Instruction one.", "Profile one.");
  const ContextTask b = make_task(Relevance::kUnrelated, "Instruction two.", "Profile two.");
  const std::string pa = build_cot_prompt(a);
  EXPECT_EQ(pa, build_cot_prompt(a));
  const std::string pb = build_cot_prompt(b);
  ASSERT_EQ(pa.rfind(a.task_text(), 0), 0u);
  ASSERT_EQ(pb.rfind(b.task_text(), 0), 0u);
  EXPECT_EQ(pa.substr(a.task_text().size()), pb.substr(b.task_text().size()));
}

TEST(CotPrompt, EmptyInstructionIsAnError) {
  EXPECT_THROW(build_cot_prompt(make_task(Relevance::kUnrelated, "")), Error);
  EXPECT_THROW(build_cot_prompt(make_task(Relevance::kUnrelated, "  \n")), Error);
}

TEST(CollectAnalysis, ParsesScriptedOutput) {
  Fixture f(Json::array({{{"tag", "TargetAnalysis"}, {"response", "[Background Knowledge]: A [Reasoning]: B"}}}));
  const ModelRef t = harmarena::testing::model("t1");
  const ContextTask task = make_task(Relevance::kHighlyRelevant, "go");
  const Analysis a = collect_analysis(t, task, f.meme, f.invoker, f.templates);
  EXPECT_EQ(a.background, "A");
  EXPECT_EQ(a.reasoning, "B");
  EXPECT_EQ(a.author, "t1");
  EXPECT_EQ(a.task_id, task.task_id);
  EXPECT_EQ(a.raw, "[Background Knowledge]: A [Reasoning]: B");
}

TEST(CollectAnalysis, ParseFailureAfterOneReprompt) {
  Fixture f(Json::array({{{"tag", "TargetAnalysis"}, {"response", "just an opinion"}}}));
  const ModelRef t = harmarena::testing::model("t1");
  EXPECT_THROW(collect_analysis(t, make_task(Relevance::kUnrelated, "go"), f.meme, f.invoker, f.templates),
               ParseError);
  EXPECT_EQ(f.invoker.call_counts().at("t1"), 2);
}

TEST(SimulateMeme, ProducesThreeTasksAndThreeNAnalyses) {
  Json rules = controller_rules();
  rules.push_back({{"tag", "TargetAnalysis"}, {"response", "[Background Knowledge]: bg [Reasoning]: rs"}});
  Fixture f(rules);
  std::vector<ModelRef> targets;
  for (const char* n : {"t1", "t2", "t3", "t4"}) targets.push_back(harmarena::testing::model(n));
  const auto sim = simulate_meme(f.meme, f.controller, targets, f.invoker, f.templates);
  EXPECT_TRUE(sim.completed);
  EXPECT_EQ(sim.contexts.size(), 3u);
  EXPECT_EQ(sim.tasks.size(), 3u);
  EXPECT_EQ(sim.analyses.size(), 12u);
  EXPECT_TRUE(sim.failures.empty());
}

TEST(SimulateMeme, RefusalLeavesAnalysisOutAndLogsIt) {
  Json rules = controller_rules();
  rules.push_back({{"tag", "TargetAnalysis"}, {"model", "t2"}, {"pattern", "I-high"}, {"error", "refusal"}});
  rules.push_back({{"tag", "TargetAnalysis"}, {"model", "t3"}, {"response", "garbage"}});
  rules.push_back({{"tag", "TargetAnalysis"}, {"response", "[Background Knowledge]: bg [Reasoning]: rs"}});
  Fixture f(rules);
  std::vector<ModelRef> targets{harmarena::testing::model("t1"), harmarena::testing::model("t2"),
                                harmarena::testing::model("t3")};
  const auto sim = simulate_meme(f.meme, f.controller, targets, f.invoker, f.templates);
  EXPECT_TRUE(sim.completed);
  // 9 slots: one refusal and three parse failures.
  EXPECT_EQ(sim.analyses.size(), 5u);
  ASSERT_EQ(sim.failures.size(), 4u);
  EXPECT_EQ(sim.analyses.size() + sim.failures.size(), 9u);
  int refusals = 0;
  for (const auto& fl : sim.failures) {
    EXPECT_EQ(fl.stage, "simulate");
    EXPECT_EQ(fl.meme_id, "m1");
    if (fl.kind == "refusal") {
      ++refusals;
      EXPECT_EQ(fl.model, "t2");
      EXPECT_EQ(fl.task_id, canonical_task_id("m1", Relevance::kHighlyRelevant));
    } else {
      EXPECT_EQ(fl.kind, "parse");
      EXPECT_EQ(fl.model, "t3");
    }
  }
  EXPECT_EQ(refusals, 1);
}

TEST(SimulateMeme, ControllerFailureSkipsMeme) {
  Fixture f(Json::array({{{"tag", "ControllerSim"}, {"error", "auth"}}}));
  std::vector<ModelRef> targets{harmarena::testing::model("t1")};
  const auto sim = simulate_meme(f.meme, f.controller, targets, f.invoker, f.templates);
  EXPECT_FALSE(sim.completed);
  EXPECT_TRUE(sim.tasks.empty());
  ASSERT_EQ(sim.failures.size(), 1u);
  EXPECT_EQ(sim.failures[0].kind, "auth");
}
