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

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "harmarena/backend.hpp"
#include "harmarena/bias.hpp"
#include "harmarena/manifest.hpp"
#include "harmarena/rating.hpp"
#include "harmarena/report.hpp"
#include "harmarena/templates.hpp"

namespace harmarena {

enum class Stage { kSimulate, kFuse, kBattle, kRank, kBias, kReport };

std::string_view to_string(Stage s);
std::optional<Stage> parse_stage(std::string_view text);

// Artifact locations inside the output directory.
struct RunPaths {
  std::filesystem::path root;

  std::filesystem::path responses() const { return root / "responses.jsonl"; }
  std::filesystem::path contexts() const { return root / "contexts.jsonl"; }
  std::filesystem::path tasks() const { return root / "tasks.jsonl"; }
  std::filesystem::path analyses() const { return root / "analyses.jsonl"; }
  std::filesystem::path guidelines() const { return root / "guidelines.jsonl"; }
  std::filesystem::path guideline_dir() const { return root / "guidelines"; }
  std::filesystem::path battles() const { return root / "battles.jsonl"; }
  std::filesystem::path failures(Stage s) const {
    return root / "failures" / (std::string(to_string(s)) + ".jsonl");
  }
  std::filesystem::path leaderboard_csv() const { return root / "leaderboard.csv"; }
  std::filesystem::path leaderboard_md() const { return root / "leaderboard.md"; }
  std::filesystem::path elo_csv() const { return root / "elo_sequential.csv"; }
  std::filesystem::path bias_csv() const { return root / "bias.csv"; }
  std::filesystem::path bias_md() const { return root / "bias.md"; }
  std::filesystem::path report() const { return root / "report.md"; }
};

struct PipelineOptions {
  // Limits new battles in this invocation; simulates an interruption.
  std::size_t max_new_battles = static_cast<std::size_t>(-1);
  // Progress messages.
  std::function<void(const std::string&)> log;
  // Replaces the retry sleep (tests).
  std::function<void(std::chrono::milliseconds)> sleep;
};

struct StageResult {
  Stage stage;
  std::size_t produced = 0;
  std::size_t failures = 0;
};

// Runs stages over one manifest. Every stage reads its inputs from the
// output directory, so stages can be invoked separately; model responses are
// cached there, so repeating a stage does not repeat model calls.
class Pipeline {
 public:
  explicit Pipeline(RunManifest manifest, PipelineOptions options = {});
  // Uses an existing registry instead of building one from the manifest.
  Pipeline(RunManifest manifest, std::shared_ptr<const BackendRegistry> registry,
           PipelineOptions options = {});
  ~Pipeline();

  StageResult simulate();
  StageResult fuse();
  StageResult battle();
  StageResult rank();
  StageResult bias();
  StageResult report();
  StageResult run_stage(Stage s);

  // Runs the stages in order. `run` with no stages means all of them, with
  // fuse only for the fused-guideline setting and bias only when configured.
  std::vector<StageResult> run(std::span<const Stage> stages = {});

  const RunManifest& manifest() const { return manifest_; }
  const RunPaths& paths() const { return paths_; }
  Invoker& invoker() { return *invoker_; }

 private:
  void log(const std::string& message) const;
  std::optional<BiasReport> compute_bias() const;

  RunManifest manifest_;
  PipelineOptions options_;
  RunPaths paths_;
  TemplateSet templates_;
  std::shared_ptr<const BackendRegistry> registry_;
  std::unique_ptr<ResponseCache> cache_;
  std::unique_ptr<Invoker> invoker_;
};

// Loads the manifest and runs the requested stages (all when empty).
std::vector<StageResult> run_pipeline(const RunManifest& manifest,
                                      std::span<const Stage> stages = {},
                                      PipelineOptions options = {});

}  // namespace harmarena
