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

#include "harmarena/fusion.hpp"

#include <algorithm>
#include <cctype>
#include <functional>

#include "harmarena/error.hpp"
#include "harmarena/simulation.hpp"

namespace harmarena {

namespace {

constexpr std::string_view kFusionSystem =
    "You are one of several judge agents building a shared reference for assessing "
    "how harmful a meme is.";

AnalysisKey key_of(const Analysis& a) { return {a.task_id, a.author}; }

bool contains(const std::vector<std::string>& v, std::string_view s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

// Kuhn's augmenting-path matching of judge families onto analysis author
// families. `skip` marks an analysis that is no longer available.
bool families_coverable(const std::vector<std::string>& authors,
                        const std::vector<std::string>& judges, std::size_t skip) {
  const std::size_t available = authors.size() - (skip < authors.size() ? 1 : 0);
  if (judges.size() > available) return false;
  std::vector<int> match(authors.size(), -1);
  std::vector<bool> seen;
  std::function<bool(std::size_t)> augment = [&](std::size_t j) {
    for (std::size_t a = 0; a < authors.size(); ++a) {
      if (a == skip || seen[a] || authors[a] == judges[j]) continue;
      seen[a] = true;
      if (match[a] < 0 || augment(static_cast<std::size_t>(match[a]))) {
        match[a] = static_cast<int>(j);
        return true;
      }
    }
    return false;
  };
  for (std::size_t j = 0; j < judges.size(); ++j) {
    seen.assign(authors.size(), false);
    if (!augment(j)) return false;
  }
  return true;
}

std::vector<ModelRef> unused_judges(const FusionState& state, std::span<const ModelRef> panel) {
  std::vector<ModelRef> out;
  for (const auto& j : panel) {
    if (!contains(state.used_judges, j.name)) out.push_back(j);
  }
  return out;
}

std::vector<std::string> author_families(std::span<const Analysis> pool, const Roster& roster) {
  std::vector<std::string> out;
  out.reserve(pool.size());
  for (const auto& a : pool) out.push_back(roster.family_of(a.author));
  return out;
}

std::string_view trim(std::string_view s) {
  auto space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!s.empty() && space(s.front())) s.remove_prefix(1);
  while (!s.empty() && space(s.back())) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string family_of(const ModelRef& model) {
  return model.family.empty() ? model.name : model.family;
}

std::vector<ModelRef> eligible_judges(std::span<const ModelRef> panel,
                                      std::string_view author_family) {
  std::vector<ModelRef> out;
  for (const auto& j : panel) {
    if (family_of(j) != author_family) out.push_back(j);
  }
  if (out.empty()) {
    throw StageError("no eligible judge for an analysis from family '" +
                     std::string(author_family) + "'");
  }
  return out;
}

bool coverage_feasible(std::span<const Analysis> pool, std::span<const ModelRef> unused,
                       const Roster& roster) {
  std::vector<std::string> judges;
  for (const auto& j : unused) judges.push_back(family_of(j));
  return families_coverable(author_families(pool, roster), judges, pool.size());
}

FusionState init_guideline(const std::string& meme_id, std::vector<Analysis> pool,
                           std::span<const ModelRef> panel, const Roster& roster, Rng& rng) {
  std::sort(pool.begin(), pool.end(),
            [](const Analysis& a, const Analysis& b) { return key_of(a) < key_of(b); });
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const std::string fam = roster.family_of(pool[i].author);
    if (std::any_of(panel.begin(), panel.end(),
                    [&](const ModelRef& j) { return family_of(j) == fam; })) {
      candidates.push_back(i);
    }
  }
  if (candidates.empty()) {
    throw StageError("meme " + meme_id + ": no judge-authored analysis to seed the guideline");
  }
  const std::size_t pick = candidates[rng.uniform_index(candidates.size())];
  FusionState state;
  state.guideline.meme_id = meme_id;
  state.guideline.version = 0;
  state.guideline.text = render_analysis(pool[pick]);
  state.guideline.seed = key_of(pool[pick]);
  pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
  state.pool = std::move(pool);
  return state;
}

std::string parse_guideline_reply(std::string_view text) {
  constexpr std::string_view kOpen = "<guideline>";
  constexpr std::string_view kClose = "</guideline>";
  std::string_view body = text;
  if (const auto open = text.find(kOpen); open != std::string_view::npos) {
    const auto start = open + kOpen.size();
    const auto close = text.find(kClose, start);
    body = text.substr(start, close == std::string_view::npos ? std::string_view::npos
                                                               : close - start);
  }
  body = trim(body);
  if (body.empty()) throw ParseError("empty guideline");
  return std::string(body);
}

std::string build_fusion_prompt(const Meme& meme, std::string_view guideline,
                                const Analysis& analysis, bool guideline_first,
                                const TemplateSet& templates) {
  std::string g(guideline);
  std::string a = render_analysis(analysis);
  return render_template(templates.fusion,
                         {{"meme_text", meme.text},
                          {"analysis_1", guideline_first ? g : a},
                          {"analysis_2", guideline_first ? a : g}});
}

RoundOutcome fusion_round(FusionState& state, const Meme& meme, std::span<const ModelRef> panel,
                          const Roster& roster, Invoker& invoker, const TemplateSet& templates,
                          Rng& rng, std::vector<StageFailure>& failures) {
  if (state.pool.empty()) throw Error("fusion round on an empty pool");

  // Each candidate analysis with the judges that keep full panel coverage
  // reachable. Falls back to plain eligibility when coverage is already lost.
  std::vector<std::size_t> allowed;
  std::vector<std::vector<ModelRef>> judges_for;
  const auto unused = unused_judges(state, panel);
  const auto authors = author_families(state.pool, roster);
  const bool enforce = !unused.empty() && coverage_feasible(state.pool, unused, roster);
  for (std::size_t i = 0; i < state.pool.size(); ++i) {
    std::vector<ModelRef> js;
    for (const auto& j : panel) {
      if (family_of(j) == authors[i]) continue;
      if (enforce) {
        std::vector<std::string> rest;
        for (const auto& u : unused) {
          if (u.name != j.name) rest.push_back(family_of(u));
        }
        if (!families_coverable(authors, rest, i)) continue;
      }
      js.push_back(j);
    }
    if (!js.empty()) {
      allowed.push_back(i);
      judges_for.push_back(std::move(js));
    }
  }
  if (allowed.empty()) {
    throw StageError("meme " + meme.id + ": no eligible judge for any remaining analysis");
  }

  const std::size_t slot = rng.uniform_index(allowed.size());
  const std::size_t index = allowed[slot];
  std::vector<ModelRef> candidates = std::move(judges_for[slot]);
  const ModelRef first_judge = candidates[rng.uniform_index(candidates.size())];
  const bool guideline_first = rng.bernoulli(0.5);

  Analysis analysis = state.pool[index];
  state.pool.erase(state.pool.begin() + static_cast<std::ptrdiff_t>(index));
  const std::string prompt =
      build_fusion_prompt(meme, state.guideline.text, analysis, guideline_first, templates);

  auto attempt = [&](const ModelRef& judge) -> std::optional<std::string> {
    auto record = [&](std::string kind, std::string message) {
      failures.push_back(StageFailure{"fuse", meme.id, analysis.task_id, judge.name,
                                      std::move(kind), std::move(message)});
    };
    try {
      const auto resp = invoker.call(judge, RequestTag::kJudgeFusion, std::string(kFusionSystem),
                                     prompt, meme.image);
      return parse_guideline_reply(resp.text);
    } catch (const BackendError& e) {
      record(std::string(to_string(e.kind())), e.what());
    } catch (const ParseError& e) {
      record("parse", e.what());
    }
    return std::nullopt;
  };

  ModelRef judge = first_judge;
  std::optional<std::string> text = attempt(judge);
  if (!text) {
    std::vector<ModelRef> others;
    for (const auto& j : candidates) {
      if (j.name != first_judge.name) others.push_back(j);
    }
    if (others.empty()) {
      for (const auto& j : eligible_judges(panel, roster.family_of(analysis.author))) {
        if (j.name != first_judge.name) others.push_back(j);
      }
    }
    if (!others.empty()) {
      judge = others[rng.uniform_index(others.size())];
      text = attempt(judge);
    }
  }

  if (!text) {
    const AnalysisKey key = key_of(analysis);
    if (std::find(state.requeued.begin(), state.requeued.end(), key) != state.requeued.end()) {
      failures.push_back(StageFailure{"fuse", meme.id, analysis.task_id, analysis.author,
                                      "dropped", "analysis discarded after a second failed round"});
      return RoundOutcome::kDropped;
    }
    state.requeued.push_back(key);
    state.pool.push_back(std::move(analysis));
    failures.push_back(StageFailure{"fuse", meme.id, key.task_id, key.author, "requeued",
                                    "round skipped; analysis returned to the pool"});
    return RoundOutcome::kRequeued;
  }

  state.guideline.version += 1;
  state.guideline.text = std::move(*text);
  state.guideline.trail.push_back(
      TrailEntry{state.guideline.version, judge.name, key_of(analysis), guideline_first});
  if (!contains(state.used_judges, judge.name)) state.used_judges.push_back(judge.name);
  return RoundOutcome::kFused;
}

Guideline fuse(const Meme& meme, std::vector<Analysis> analyses, std::span<const ModelRef> panel,
               const Roster& roster, Invoker& invoker, const TemplateSet& templates,
               std::uint64_t seed, std::vector<StageFailure>& failures) {
  std::erase_if(analyses, [&](const Analysis& a) { return !a.valid(); });
  if (analyses.size() < 2) {
    throw StageError("meme " + meme.id + ": fusion needs at least two analyses");
  }
  if (panel.size() < 2) throw StageError("fusion needs a panel of at least two judges");
  Rng rng(derive_seed(seed, meme.id));
  FusionState state = init_guideline(meme.id, std::move(analyses), panel, roster, rng);
  while (!state.pool.empty()) {
    fusion_round(state, meme, panel, roster, invoker, templates, rng, failures);
  }
  return state.guideline;
}

}  // namespace harmarena
