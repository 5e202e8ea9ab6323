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

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace harmarena {

// Renders a prompt template.
//
//   {name}          value of `name`; unknown names are an error
//   {?name} ... {/name}  block kept only when `name` is non-empty
//   {{ and }}       literal braces
std::string render_template(std::string_view tmpl,
                            const std::map<std::string, std::string>& values);

// The editable prompt set used by every stage. Each field is the user-turn
// template; system turns are fixed per role.
struct TemplateSet {
  std::string context_simulation;  // {meme_text}
  std::string task_formulation;    // {meme_text} {relevance} {profile}
  std::string cot_analysis;        // {instruction}
  std::string fusion;              // {meme_text} {analysis_1} {analysis_2}
  std::string judge;               // {task} {guideline} {answer_1} {answer_2} {criteria}
  std::string judge_dimension;     // as judge, plus {dimension}

  static TemplateSet defaults();
  // Reads <dir>/<field>.txt for each field; missing files keep the default.
  static TemplateSet load(const std::filesystem::path& dir);
  void save(const std::filesystem::path& dir) const;
};

// The two-part chain-of-thought directive appended to every target prompt.
std::string_view cot_directive();

// Judging criteria text, one bullet per dimension.
std::string criteria_text();

}  // namespace harmarena
