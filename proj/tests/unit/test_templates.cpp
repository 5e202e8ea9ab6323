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

#include "harmarena/datamodel.hpp"
#include "harmarena/error.hpp"
#include "harmarena/templates.hpp"
#include "test_support.hpp"

using namespace harmarena;

TEST(RenderTemplate, SubstitutesNamedValues) {
  EXPECT_EQ(render_template("a {x} b {y}", {{"x", "1"}, {"y", "2"}}), "a 1 b 2");
  EXPECT_EQ(render_template("{x}{x}", {{"x", "ab"}}), "abab");
}

TEST(RenderTemplate, ValuesAreNotReinterpreted) {
  EXPECT_EQ(render_template("[{x}]", {{"x", "{y} }}"}}), "[{y} }}]");
}

TEST(RenderTemplate, BraceEscapes) {
  EXPECT_EQ(render_template("{{\"k\": {v}}}", {{"v", "1"}}), "{\"k\": 1}");
}

TEST(RenderTemplate, OptionalBlocks) {
  const std::string t = "head\n{?g}[G] {g}\n{/g}tail";
  EXPECT_EQ(render_template(t, {{"g", "ref"}}), "head\n[G] ref\ntail");
  EXPECT_EQ(render_template(t, {{"g", ""}}), "head\ntail");
  EXPECT_EQ(render_template(t, {}), "head\ntail");
}

TEST(RenderTemplate, Errors) {
  EXPECT_THROW(render_template("{missing}", {}), Error);
  EXPECT_THROW(render_template("{open", {}), Error);
  EXPECT_THROW(render_template("close}", {}), Error);
  EXPECT_THROW(render_template("{?g} never closed", {{"g", "x"}}), Error);
  EXPECT_THROW(render_template("{bad name}", {}), Error);
}

TEST(Templates, DefaultsRenderWithTheirPlaceholders) {
  const TemplateSet t = TemplateSet::defaults();
  EXPECT_NO_THROW(render_template(t.context_simulation, {{"meme_text", "m"}}));
  EXPECT_NO_THROW(render_template(t.task_formulation,
                                  {{"meme_text", "m"}, {"relevance", "r"}, {"profile", "p"}}));
  EXPECT_NO_THROW(render_template(t.fusion, {{"meme_text", "m"}, {"analysis_1", "a"}, {"analysis_2", "b"}}));
  const std::map<std::string, std::string> judge{{"task", "t"},
                                                 {"guideline", ""},
                                                 {"answer_1", "a"},
                                                 {"answer_2", "b"},
                                                 {"criteria", "c"},
                                                 {"dimension", "overall"}};
  EXPECT_NO_THROW(render_template(t.judge, judge));
  EXPECT_NO_THROW(render_template(t.judge_dimension, judge));
}

TEST(Templates, CotDirectiveRendersVerbatim) {
  const TemplateSet t = TemplateSet::defaults();
  const std::string out = render_template(t.cot_analysis, {{"instruction", "INSTR"}});
  EXPECT_EQ(out.rfind("INSTR", 0), 0u);
  EXPECT_NE(out.find(cot_directive()), std::string::npos);
  EXPECT_NE(out.find("[Background Knowledge]"), std::string::npos);
  EXPECT_NE(out.find("[Reasoning]"), std::string::npos);
}

TEST(Templates, CriteriaCoverEveryDimension) {
  const std::string c = criteria_text();
  for (Dimension d : kAllDimensions) {
    EXPECT_NE(c.find(std::string(dimension_key(d))), std::string::npos) << dimension_key(d);
  }
  EXPECT_EQ(std::count(c.begin(), c.end(), '\n'), 6);
}

TEST(Templates, SaveLoadRoundTripAndPartialOverride) {
  harmarena::testing::TempDir dir;
  TemplateSet t = TemplateSet::defaults();
  t.judge = "custom {task} {answer_1} {answer_2} {criteria}";
  t.save(dir.path());
  const TemplateSet loaded = TemplateSet::load(dir.path());
  EXPECT_EQ(loaded.judge, t.judge);
  EXPECT_EQ(loaded.fusion, t.fusion);

  harmarena::testing::TempDir partial;
  harmarena::testing::write_file(partial / "fusion.txt", "only fusion {analysis_1}");
  const TemplateSet p = TemplateSet::load(partial.path());
  EXPECT_EQ(p.fusion, "only fusion {analysis_1}");
  EXPECT_EQ(p.judge, TemplateSet::defaults().judge);

  EXPECT_THROW(TemplateSet::load(dir / "nope"), Error);
}
