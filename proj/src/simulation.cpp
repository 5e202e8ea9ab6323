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

#include "harmarena/simulation.hpp"

#include <algorithm>
#include <cctype>
#include <optional>

#include "harmarena/error.hpp"
#include "harmarena/extract.hpp"

namespace harmarena {

namespace {

constexpr std::string_view kControllerSystem =
    "You design evaluation tasks that study how different audiences interpret "
    "memes. Every persona you describe is fictional.";
constexpr std::string_view kTargetSystem =
    "You are an analyst of online memes and their potential social harms.";

constexpr std::string_view kReprompt =
    "\n\nYour previous reply could not be used ({reason}). Reply again and follow "
    "the required output format exactly.";

std::string with_reprompt(const std::string& user, const std::string& reason) {
  std::string note(kReprompt);
  note.replace(note.find("{reason}"), 8, reason);
  return user + note;
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

char ascii_lower(char c) {
  return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
}

// Matches "[ word1 word2 ... ]" case-insensitively at `pos`; returns the
// offset just past ']' or npos.
std::size_t match_marker(std::string_view text, std::size_t pos,
                         std::initializer_list<std::string_view> words) {
  if (pos >= text.size() || text[pos] != '[') return std::string_view::npos;
  std::size_t i = pos + 1;
  bool first = true;
  for (std::string_view word : words) {
    const std::size_t ws_start = i;
    while (i < text.size() && is_space(text[i])) ++i;
    if (!first && i == ws_start) return std::string_view::npos;
    first = false;
    if (i + word.size() > text.size()) return std::string_view::npos;
    for (std::size_t k = 0; k < word.size(); ++k) {
      if (ascii_lower(text[i + k]) != word[k]) return std::string_view::npos;
    }
    i += word.size();
  }
  while (i < text.size() && is_space(text[i])) ++i;
  if (i >= text.size() || text[i] != ']') return std::string_view::npos;
  return i + 1;
}

struct MarkerSpan {
  std::size_t begin;
  std::size_t end;
};

std::optional<MarkerSpan> find_marker(std::string_view text, std::size_t from,
                                      std::initializer_list<std::string_view> words) {
  for (std::size_t pos = text.find('[', from); pos != std::string_view::npos;
       pos = text.find('[', pos + 1)) {
    const std::size_t end = match_marker(text, pos, words);
    if (end != std::string_view::npos) return MarkerSpan{pos, end};
  }
  return std::nullopt;
}

bool is_emphasis(char c) { return c == '*' || c == '_' || c == '#'; }

// Skips the separator after a marker: whitespace, emphasis and a colon.
std::size_t skip_after_marker(std::string_view text, std::size_t i) {
  while (i < text.size()) {
    const char c = text[i];
    if (is_space(c) || c == '*' || c == '_' || c == ':') {
      ++i;
    } else if (text.compare(i, 3, "\xEF\xBC\x9A") == 0) {  // fullwidth colon
      i += 3;
    } else {
      break;
    }
  }
  return i;
}

// Drops what typically precedes a section marker on its line: whitespace,
// emphasis, and one list number such as "2)", "2." or "(2)".
std::string_view strip_marker_prefix(std::string_view s) {
  auto strip_decoration = [](std::string_view v) {
    while (!v.empty() && (is_space(v.back()) || is_emphasis(v.back()))) v.remove_suffix(1);
    return v;
  };
  s = strip_decoration(s);
  std::string_view t = s;
  bool paren = false;
  if (!t.empty() && (t.back() == ')' || t.back() == '.')) {
    t.remove_suffix(1);
    std::size_t digits = 0;
    while (!t.empty() && std::isdigit(static_cast<unsigned char>(t.back())) && digits < 3) {
      t.remove_suffix(1);
      ++digits;
    }
    if (!t.empty() && t.back() == '(' && s.back() == ')') {
      t.remove_suffix(1);
      paren = true;
    }
    // "2)" may follow text on the same line; "2." only counts at a line start,
    // since it is indistinguishable from a sentence ending in a number.
    const std::string_view before = strip_decoration(t);
    const bool line_start = before.empty() || before.back() == '\n' ||
                            (t.size() > before.size() && t.substr(before.size()).find('\n') !=
                                                             std::string_view::npos);
    const bool bounded = s.back() == ')'
                             ? t.empty() || is_space(t.back()) || is_emphasis(t.back()) || paren
                             : line_start && (t.empty() || is_space(t.back()) || is_emphasis(t.back()));
    if (digits >= 1 && digits <= 2 && bounded) s = strip_decoration(t);
  }
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------

ParsedAnalysis parse_analysis(std::string_view text) {
  const auto bg = find_marker(text, 0, {"background", "knowledge"});
  if (!bg) throw ParseError("missing [Background Knowledge] marker");
  const auto rs = find_marker(text, bg->end, {"reasoning"});
  if (!rs) throw ParseError("missing [Reasoning] marker after [Background Knowledge]");
  const std::size_t bg_start = skip_after_marker(text, bg->end);
  std::string_view background =
      bg_start <= rs->begin ? text.substr(bg_start, rs->begin - bg_start) : std::string_view{};
  background = trim(strip_marker_prefix(background));
  const std::string_view reasoning = trim(text.substr(skip_after_marker(text, rs->end)));
  if (background.empty()) throw ParseError("empty [Background Knowledge] section");
  if (reasoning.empty()) throw ParseError("empty [Reasoning] section");
  return {std::string(background), std::string(reasoning)};
}

std::string render_analysis(std::string_view background, std::string_view reasoning) {
  std::string out = "[Background Knowledge]: ";
  out += background;
  out += "\n[Reasoning]: ";
  out += reasoning;
  return out;
}

std::string render_analysis(const Analysis& analysis) {
  return render_analysis(analysis.background, analysis.reasoning);
}

std::vector<InterpretiveContext> parse_contexts(std::string_view text, std::string_view meme_id) {
  std::optional<Json> parsed = extract_first_json(text, '[');
  if (!parsed) {
    if (auto obj = extract_first_json(text, '{'); obj && obj->contains("contexts")) {
      parsed = (*obj)["contexts"];
    }
  }
  if (!parsed || !parsed->is_array()) throw ParseError("no JSON array of contexts found");
  if (parsed->size() != 3) {
    throw ParseError("expected 3 contexts, got " + std::to_string(parsed->size()));
  }
  std::vector<std::optional<InterpretiveContext>> by_level(3);
  for (const auto& item : *parsed) {
    if (!item.is_object()) throw ParseError("context entry is not an object");
    const std::string rel = item.value("relevance", "");
    auto level = parse_relevance(rel);
    if (!level) throw ParseError("unknown relevance level '" + rel + "'");
    std::string profile;
    for (const char* key : {"profile", "context", "description"}) {
      if (item.contains(key) && item[key].is_string()) {
        profile = item[key].get<std::string>();
        break;
      }
    }
    profile = std::string(trim(profile));
    if (profile.empty()) throw ParseError("context has an empty profile");
    auto& slot = by_level[static_cast<std::size_t>(*level)];
    if (slot) throw ParseError("relevance level '" + rel + "' appears twice");
    slot = InterpretiveContext{std::string(meme_id), *level, std::move(profile)};
  }
  std::vector<InterpretiveContext> out;
  for (auto& slot : by_level) out.push_back(std::move(*slot));
  return out;
}

std::string parse_instruction(std::string_view text) {
  auto parsed = extract_first_json(text, '{');
  if (!parsed) throw ParseError("no JSON object with an instruction found");
  for (const char* key : {"instruction", "task"}) {
    if (parsed->contains(key) && (*parsed)[key].is_string()) {
      std::string s(trim((*parsed)[key].get<std::string>()));
      if (s.empty()) throw ParseError("empty instruction");
      return s;
    }
  }
  throw ParseError("JSON object has no \"instruction\" field");
}

namespace {

// Calls the controller, reprompting once if `parse` throws ParseError.
template <typename Parse>
auto controller_call(const ModelRef& controller, Invoker& invoker, const std::string& user,
                     const std::optional<ImageRef>& image, Parse parse,
                     const std::string& what) -> decltype(parse(std::string_view{})) {
  std::string prompt = user;
  for (int attempt = 0;; ++attempt) {
    const auto resp = invoker.call(controller, RequestTag::kControllerSim,
                                   std::string(kControllerSystem), prompt, image);
    try {
      return parse(resp.text);
    } catch (const ParseError& e) {
      if (attempt >= 1) throw StageError(what + ": " + e.what());
      prompt = with_reprompt(user, e.what());
    }
  }
}

}  // namespace

std::vector<InterpretiveContext> simulate_contexts(const Meme& meme, const ModelRef& controller,
                                                   Invoker& invoker,
                                                   const TemplateSet& templates) {
  const std::string user =
      render_template(templates.context_simulation, {{"meme_text", meme.text}});
  return controller_call(
      controller, invoker, user, meme.image,
      [&](std::string_view text) { return parse_contexts(text, meme.id); },
      "context simulation for " + meme.id);
}

ContextTask formulate_task(const Meme& meme, const InterpretiveContext& context,
                           const ModelRef& controller, Invoker& invoker,
                           const TemplateSet& templates) {
  if (context.meme_id != meme.id) throw Error("context does not belong to meme " + meme.id);
  std::string relevance(to_string(context.relevance));
  std::replace(relevance.begin(), relevance.end(), '_', ' ');
  const std::string user = render_template(
      templates.task_formulation,
      {{"meme_text", meme.text}, {"relevance", relevance}, {"profile", context.profile}});
  ContextTask task;
  task.task_id = canonical_task_id(meme.id, context.relevance);
  task.meme_id = meme.id;
  task.context = context;
  task.instruction = controller_call(controller, invoker, user, meme.image, parse_instruction,
                                     "task formulation for " + task.task_id);
  return task;
}

std::string build_cot_prompt(const ContextTask& task, const TemplateSet& templates) {
  if (trim(task.instruction).empty()) throw Error("task " + task.task_id + " has an empty instruction");
  return render_template(templates.cot_analysis, {{"instruction", task.task_text()},
                                                  {"profile", task.context.profile},
                                                  {"meme_text", ""}});
}

Analysis collect_analysis(const ModelRef& target, const ContextTask& task, const Meme& meme,
                          Invoker& invoker, const TemplateSet& templates) {
  const std::string user = build_cot_prompt(task, templates);
  std::string prompt = user;
  for (int attempt = 0;; ++attempt) {
    const auto resp = invoker.call(target, RequestTag::kTargetAnalysis,
                                   std::string(kTargetSystem), prompt, meme.image);
    try {
      ParsedAnalysis parts = parse_analysis(resp.text);
      return Analysis{task.task_id, target.name, std::move(parts.background),
                      std::move(parts.reasoning), resp.text};
    } catch (const ParseError& e) {
      if (attempt >= 1) throw;
      prompt = with_reprompt(user, e.what());
    }
  }
}

MemeSimulation simulate_meme(const Meme& meme, const ModelRef& controller,
                             std::span<const ModelRef> targets, Invoker& invoker,
                             const TemplateSet& templates) {
  MemeSimulation out;
  auto fail = [&](std::string task_id, std::string model, std::string kind, std::string msg) {
    out.failures.push_back(StageFailure{"simulate", meme.id, std::move(task_id), std::move(model),
                                        std::move(kind), std::move(msg)});
  };
  try {
    out.contexts = simulate_contexts(meme, controller, invoker, templates);
    for (const auto& ctx : out.contexts) {
      out.tasks.push_back(formulate_task(meme, ctx, controller, invoker, templates));
    }
  } catch (const BackendError& e) {
    fail("", controller.name, std::string(to_string(e.kind())), e.what());
    out.contexts.clear();
    out.tasks.clear();
    return out;
  } catch (const StageError& e) {
    fail("", controller.name, "parse", e.what());
    out.contexts.clear();
    out.tasks.clear();
    return out;
  }
  out.completed = true;
  for (const auto& task : out.tasks) {
    for (const auto& target : targets) {
      try {
        out.analyses.push_back(collect_analysis(target, task, meme, invoker, templates));
      } catch (const BackendError& e) {
        fail(task.task_id, target.name, std::string(to_string(e.kind())), e.what());
      } catch (const ParseError& e) {
        fail(task.task_id, target.name, "parse", e.what());
      }
    }
  }
  return out;
}

}  // namespace harmarena
