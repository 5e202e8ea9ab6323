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

#include "harmarena/pipeline.hpp"

#include <algorithm>
#include <future>
#include <map>
#include <set>

#include <fmt/format.h>

#include "harmarena/arena.hpp"
#include "harmarena/error.hpp"
#include "harmarena/fusion.hpp"
#include "harmarena/simulation.hpp"

namespace harmarena {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::pair<Stage, std::string_view>, 6> kStageNames{{
    {Stage::kSimulate, "simulate"},
    {Stage::kFuse, "fuse"},
    {Stage::kBattle, "battle"},
    {Stage::kRank, "rank"},
    {Stage::kBias, "bias"},
    {Stage::kReport, "report"},
}};

// Applies fn(i) for i in [0, n) on up to `workers` threads.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  const auto w = static_cast<std::size_t>(std::max(1, workers));
  if (w == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::future<void>> futures;
  for (std::size_t t = 0; t < std::min(w, n); ++t) {
    futures.push_back(std::async(std::launch::async, [&, t] {
      for (std::size_t i = t; i < n; i += w) fn(i);
    }));
  }
  for (auto& f : futures) f.get();
}

void require(const fs::path& path, Stage stage, std::string_view needs) {
  if (!fs::exists(path)) {
    throw PrerequisiteError(fmt::format("stage '{}' needs {} ({} not found); run '{}' first",
                                        to_string(stage), path.filename().string(),
                                        path.string(), needs));
  }
}

std::string safe_file_name(const std::string& id) {
  std::string out;
  for (char c : id) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    out += ok ? c : '_';
  }
  return out;
}

std::size_t count_lines(const fs::path& path) {
  if (!fs::exists(path)) return 0;
  std::size_t n = 0;
  for_each_jsonl(path, [&](std::size_t, const Json&) { ++n; }, true);
  return n;
}

}  // namespace

std::string_view to_string(Stage s) {
  for (const auto& [stage, name] : kStageNames) {
    if (stage == s) return name;
  }
  return "?";
}

std::optional<Stage> parse_stage(std::string_view text) {
  for (const auto& [stage, name] : kStageNames) {
    if (name == text) return stage;
  }
  if (text == "arena") return Stage::kBattle;
  return std::nullopt;
}

Pipeline::Pipeline(RunManifest manifest, PipelineOptions options)
    : Pipeline(manifest, std::make_shared<BackendRegistry>(make_registry(manifest)),
               std::move(options)) {}

Pipeline::Pipeline(RunManifest manifest, std::shared_ptr<const BackendRegistry> registry,
                   PipelineOptions options)
    : manifest_(std::move(manifest)),
      options_(std::move(options)),
      paths_{manifest_.output_dir},
      templates_(manifest_.template_dir ? TemplateSet::load(*manifest_.template_dir)
                                        : TemplateSet::defaults()),
      registry_(std::move(registry)) {
  manifest_.validate();
  fs::create_directories(paths_.root);
  cache_ = std::make_unique<ResponseCache>(paths_.responses());
  RetryPolicy retry;
  retry.budget = manifest_.retry_budget;
  retry.backoff.clear();
  for (int ms : manifest_.backoff_ms) retry.backoff.emplace_back(ms);
  retry.sleep = options_.sleep;
  invoker_ = std::make_unique<Invoker>(*registry_, manifest_.generation, retry, cache_.get());
}

Pipeline::~Pipeline() = default;

void Pipeline::log(const std::string& message) const {
  if (options_.log) options_.log(message);
}

StageResult Pipeline::simulate() {
  const auto memes = load_meme_dataset(manifest_.dataset);
  const auto targets = manifest_.targets();
  const ModelRef controller = manifest_.roster().at(manifest_.controller);
  std::vector<MemeSimulation> results(memes.size());
  parallel_for(memes.size(), manifest_.workers, [&](std::size_t i) {
    results[i] = simulate_meme(memes[i], controller, targets, *invoker_, templates_);
  });

  std::vector<InterpretiveContext> contexts;
  std::vector<ContextTask> tasks;
  std::vector<Analysis> analyses;
  std::vector<StageFailure> failures;
  std::size_t completed = 0;
  for (auto& r : results) {
    completed += r.completed ? 1 : 0;
    std::move(r.contexts.begin(), r.contexts.end(), std::back_inserter(contexts));
    std::move(r.tasks.begin(), r.tasks.end(), std::back_inserter(tasks));
    std::move(r.analyses.begin(), r.analyses.end(), std::back_inserter(analyses));
    std::move(r.failures.begin(), r.failures.end(), std::back_inserter(failures));
  }
  write_jsonl_atomic(paths_.contexts(), contexts);
  write_jsonl_atomic(paths_.tasks(), tasks);
  write_jsonl_atomic(paths_.analyses(), analyses);
  fs::create_directories(paths_.failures(Stage::kSimulate).parent_path());
  write_jsonl_atomic(paths_.failures(Stage::kSimulate), failures);
  log(fmt::format("simulate: {}/{} memes, {} tasks, {} analyses, {} failures", completed,
                  memes.size(), tasks.size(), analyses.size(), failures.size()));
  return {Stage::kSimulate, analyses.size(), failures.size()};
}

StageResult Pipeline::fuse() {
  require(paths_.analyses(), Stage::kFuse, "simulate");
  require(paths_.tasks(), Stage::kFuse, "simulate");
  const auto memes = load_meme_dataset(manifest_.dataset);
  const auto tasks = read_jsonl_as<ContextTask>(paths_.tasks());
  const auto analyses = read_jsonl_as<Analysis>(paths_.analyses());
  std::map<std::string, std::string> meme_of_task;
  for (const auto& t : tasks) meme_of_task[t.task_id] = t.meme_id;
  std::map<std::string, std::vector<Analysis>> pools;
  for (const auto& a : analyses) {
    auto it = meme_of_task.find(a.task_id);
    if (it != meme_of_task.end()) pools[it->second].push_back(a);
  }

  const auto panel = manifest_.panel_models();
  const Roster roster = manifest_.roster();
  std::vector<std::optional<Guideline>> results(memes.size());
  std::vector<std::vector<StageFailure>> failures(memes.size());
  parallel_for(memes.size(), manifest_.workers, [&](std::size_t i) {
    const auto& meme = memes[i];
    auto pool = pools.find(meme.id);
    if (pool == pools.end()) return;
    try {
      results[i] = harmarena::fuse(meme, pool->second, panel, roster, *invoker_, templates_,
                                   manifest_.seeds.fusion, failures[i]);
    } catch (const StageError& e) {
      failures[i].push_back(StageFailure{"fuse", meme.id, "", "", "stage", e.what()});
    }
  });

  std::vector<Guideline> guidelines;
  std::vector<StageFailure> all_failures;
  fs::create_directories(paths_.guideline_dir());
  for (std::size_t i = 0; i < memes.size(); ++i) {
    all_failures.insert(all_failures.end(), failures[i].begin(), failures[i].end());
    if (!results[i]) continue;
    write_text_atomic(paths_.guideline_dir() / (safe_file_name(memes[i].id) + ".txt"),
                      results[i]->text + "\n");
    guidelines.push_back(std::move(*results[i]));
  }
  write_jsonl_atomic(paths_.guidelines(), guidelines);
  fs::create_directories(paths_.failures(Stage::kFuse).parent_path());
  write_jsonl_atomic(paths_.failures(Stage::kFuse), all_failures);
  log(fmt::format("fuse: {} guidelines, {} failures", guidelines.size(), all_failures.size()));
  return {Stage::kFuse, guidelines.size(), all_failures.size()};
}

StageResult Pipeline::battle() {
  require(paths_.tasks(), Stage::kBattle, "simulate");
  require(paths_.analyses(), Stage::kBattle, "simulate");
  ArenaInputs inputs;
  for (auto& m : load_meme_dataset(manifest_.dataset)) inputs.memes.emplace(m.id, std::move(m));
  const auto tasks = read_jsonl_as<ContextTask>(paths_.tasks());
  for (const auto& t : tasks) inputs.tasks.emplace(t.task_id, t);
  for (auto& a : read_jsonl_as<Analysis>(paths_.analyses())) {
    inputs.analyses.emplace(AnalysisKey{a.task_id, a.author}, std::move(a));
  }
  if (manifest_.setting == Setting::kMemeArena) {
    require(paths_.guidelines(), Stage::kBattle, "fuse");
    for (auto& g : read_jsonl_as<Guideline>(paths_.guidelines())) {
      inputs.guidelines[g.meme_id] = std::move(g.text);
    }
  } else if (manifest_.setting == Setting::kExternalGuideline) {
    const fs::path dir = *manifest_.external_guideline_dir;
    for (const auto& [id, meme] : inputs.memes) {
      const fs::path file = dir / (safe_file_name(id) + ".txt");
      if (!fs::exists(file)) {
        throw PrerequisiteError("external guideline missing for meme " + id + ": " +
                                file.string());
      }
      inputs.guidelines[id] = read_text_file(file);
    }
  }

  std::vector<TaskEntrants> entrants;
  const auto targets = manifest_.targets();
  for (const auto& t : tasks) {
    TaskEntrants e{t.task_id, t.meme_id, {}};
    for (const auto& m : targets) {
      auto it = inputs.analyses.find(AnalysisKey{t.task_id, m.name});
      if (it != inputs.analyses.end() && it->second.valid()) e.models.push_back(m.name);
    }
    entrants.push_back(std::move(e));
  }
  const Schedule schedule = schedule_battles(entrants, manifest_.per_task,
                                             manifest_.seeds.scheduler,
                                             manifest_.seeds.presentation);
  std::vector<StageFailure> failures;
  for (const auto& task_id : schedule.skipped_tasks) {
    failures.push_back(StageFailure{"battle", inputs.tasks.at(task_id).meme_id, task_id, "",
                                    "skipped", "fewer than two valid analyses"});
  }

  JudgingConfig config = manifest_.judging;
  config.setting = manifest_.setting;
  ArenaOptions options;
  options.workers = manifest_.workers;
  options.max_new_battles = options_.max_new_battles;
  const auto panel = manifest_.panel_models();
  const auto summary = run_arena(schedule.pairings, panel, manifest_.roster(), inputs, config,
                                 *invoker_, templates_, paths_.battles(), options);
  fs::create_directories(paths_.failures(Stage::kBattle).parent_path());
  write_jsonl_atomic(paths_.failures(Stage::kBattle), failures);
  log(fmt::format("battle: {} scheduled, {} already logged, {} judged ({} valid), {} remaining",
                  schedule.pairings.size(), summary.already_logged, summary.judged, summary.valid,
                  summary.remaining));
  return {Stage::kBattle, summary.judged, summary.judged - summary.valid};
}

StageResult Pipeline::rank() {
  require(paths_.battles(), Stage::kRank, "battle");
  const auto log_records = read_battle_log(paths_.battles());
  std::vector<std::string> names;
  for (const auto& m : manifest_.targets()) names.push_back(m.name);
  const Leaderboard board = leaderboard(log_records, manifest_.rating, names);
  write_text_atomic(paths_.leaderboard_csv(), leaderboard_csv(board));
  write_text_atomic(paths_.leaderboard_md(), leaderboard_markdown(board));
  std::array<RatingTable, 6> elo;
  for (std::size_t i = 0; i < kAllDimensions.size(); ++i) {
    elo[i] = elo_sequential(joint_outcomes(log_records, kAllDimensions[i]), kAllDimensions[i],
                            manifest_.rating, names);
  }
  write_text_atomic(paths_.elo_csv(), elo_csv(elo));
  const auto& excluded = board.table(Dimension::kOverall).excluded;
  log(fmt::format("rank: {} models ranked{}", board.ranking.size(),
                  excluded.empty() ? std::string()
                                   : fmt::format(", {} without valid battles", excluded.size())));
  return {Stage::kRank, board.ranking.size(), excluded.size()};
}

std::optional<BiasReport> Pipeline::compute_bias() const {
  std::vector<SettingLog> logs;
  const std::string current(to_string(manifest_.setting));
  if (fs::exists(paths_.battles()) && !manifest_.bias_logs.count(current)) {
    logs.push_back({current, read_battle_log(paths_.battles())});
  }
  for (const auto& [name, path] : manifest_.bias_logs) {
    if (!fs::exists(path)) throw PrerequisiteError("bias log not found: " + path.string());
    logs.push_back({name, read_battle_log(path)});
  }
  if (logs.empty()) return std::nullopt;
  auto order = [](const SettingLog& s) { return static_cast<int>(*parse_setting(s.setting)); };
  std::stable_sort(logs.begin(), logs.end(),
                   [&](const auto& a, const auto& b) { return order(a) < order(b); });
  return bias_report(logs, manifest_.panel, manifest_.bias_p, Dimension::kOverall,
                     manifest_.rating);
}

StageResult Pipeline::bias() {
  if (manifest_.bias_logs.empty()) require(paths_.battles(), Stage::kBias, "battle");
  auto report = compute_bias();
  if (!report) throw PrerequisiteError("stage 'bias' has no battle logs to compare");
  write_text_atomic(paths_.bias_csv(), bias_csv(*report));
  write_text_atomic(paths_.bias_md(), bias_markdown(*report));
  log(fmt::format("bias: {} settings x {} judges", report->rows.size(), report->judges.size()));
  return {Stage::kBias, report->rows.size(), 0};
}

StageResult Pipeline::report() {
  require(paths_.battles(), Stage::kReport, "battle");
  const auto log_records = read_battle_log(paths_.battles());
  std::vector<std::string> names;
  for (const auto& m : manifest_.targets()) names.push_back(m.name);
  const Leaderboard board = leaderboard(log_records, manifest_.rating, names);
  RunCounts counts;
  counts.memes = load_meme_dataset(manifest_.dataset).size();
  counts.tasks = count_lines(paths_.tasks());
  counts.analyses = count_lines(paths_.analyses());
  counts.guidelines = count_lines(paths_.guidelines());
  counts.battles = log_records.size();
  counts.valid_battles = static_cast<std::size_t>(
      std::count_if(log_records.begin(), log_records.end(), [](const auto& b) { return b.valid; }));
  for (Stage s : {Stage::kSimulate, Stage::kFuse, Stage::kBattle}) {
    counts.failures += count_lines(paths_.failures(s));
  }
  std::optional<BiasReport> bias_table;
  if (fs::exists(paths_.bias_csv())) bias_table = compute_bias();
  write_text_atomic(paths_.report(), render_report(std::string(to_string(manifest_.setting)),
                                                   counts, board, bias_table));
  log("report: " + paths_.report().string());
  return {Stage::kReport, 1, 0};
}

StageResult Pipeline::run_stage(Stage s) {
  switch (s) {
    case Stage::kSimulate:
      return simulate();
    case Stage::kFuse:
      return fuse();
    case Stage::kBattle:
      return battle();
    case Stage::kRank:
      return rank();
    case Stage::kBias:
      return bias();
    case Stage::kReport:
      return report();
  }
  throw Error("unknown stage");
}

std::vector<StageResult> Pipeline::run(std::span<const Stage> stages) {
  std::vector<Stage> plan(stages.begin(), stages.end());
  if (plan.empty()) {
    plan.push_back(Stage::kSimulate);
    if (manifest_.setting == Setting::kMemeArena) plan.push_back(Stage::kFuse);
    plan.push_back(Stage::kBattle);
    plan.push_back(Stage::kRank);
    if (!manifest_.bias_logs.empty()) plan.push_back(Stage::kBias);
    plan.push_back(Stage::kReport);
  }
  std::vector<StageResult> out;
  for (Stage s : plan) out.push_back(run_stage(s));
  return out;
}

std::vector<StageResult> run_pipeline(const RunManifest& manifest, std::span<const Stage> stages,
                                      PipelineOptions options) {
  Pipeline pipeline(manifest, std::move(options));
  return pipeline.run(stages);
}

}  // namespace harmarena
