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

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "harmarena/bias.hpp"
#include "harmarena/error.hpp"
#include "harmarena/pipeline.hpp"
#include "harmarena/report.hpp"
#include "harmarena/templates.hpp"

namespace fs = std::filesystem;
using namespace harmarena;

namespace {

struct Overrides {
  std::string output_dir;
  std::string setting;
  int workers = 0;
  std::size_t max_new_battles = static_cast<std::size_t>(-1);
};

RunManifest load_with_overrides(const std::string& path, const Overrides& o) {
  RunManifest m = load_manifest(path);
  if (!o.output_dir.empty()) m.output_dir = o.output_dir;
  if (!o.setting.empty()) {
    auto s = parse_setting(o.setting);
    if (!s) throw ValidationError("--setting", "unknown setting '" + o.setting + "'");
    m.setting = *s;
    m.judging.setting = *s;
  }
  if (o.workers > 0) m.workers = o.workers;
  m.validate();
  return m;
}

void print_line(const std::string& s) { std::fprintf(stderr, "%s\n", s.c_str()); }

int run_stages(const std::string& manifest_path, const Overrides& o, std::vector<Stage> stages) {
  PipelineOptions options;
  options.log = print_line;
  options.max_new_battles = o.max_new_battles;
  Pipeline pipeline(load_with_overrides(manifest_path, o), options);
  std::size_t failures = 0;
  for (const auto& r : pipeline.run(stages)) failures += r.failures;
  const auto counts = pipeline.invoker().call_counts();
  for (const auto& [model, n] : counts) print_line("calls " + model + ": " + std::to_string(n));
  if (failures > 0) print_line(std::to_string(failures) + " unit(s) failed; see the failures/ directory and battle notes");
  return 0;
}

int simulate_bias(const std::string& scenario_path, const std::string& mode,
                  const std::string& out_dir) {
  const BiasScenario scenario = BiasScenario::load(scenario_path);
  std::vector<GuidelineMode> modes;
  if (mode == "both") {
    modes = {GuidelineMode::kShared, GuidelineMode::kSelf};
  } else if (auto m = parse_guideline_mode(mode)) {
    modes = {*m};
  } else {
    throw ValidationError("--mode", "expected self, shared or both");
  }
  fs::create_directories(out_dir);
  std::vector<SettingLog> logs;
  std::vector<std::string> judges;
  for (const auto& j : scenario.judges) judges.push_back(j.name);
  for (GuidelineMode gm : modes) {
    auto battles = simulate_biased_judges(scenario, gm);
    const std::string name(
        to_string(gm == GuidelineMode::kShared ? Setting::kMemeArena : Setting::kSelfGuideline));
    write_jsonl_atomic(fs::path(out_dir) / ("battles_" + std::string(to_string(gm)) + ".jsonl"),
                       battles);
    logs.push_back({name, std::move(battles)});
  }
  const BiasReport report = bias_report(logs, judges);
  write_text_atomic(fs::path(out_dir) / "bias.csv", bias_csv(report));
  write_text_atomic(fs::path(out_dir) / "bias.md", bias_markdown(report));
  std::fputs(bias_markdown(report).c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Context-aware meme harmfulness arena: simulate, fuse, battle, rank"};
  app.require_subcommand(1);

  std::string manifest_path;
  Overrides overrides;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("manifest", manifest_path, "Run manifest (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--output-dir", overrides.output_dir, "Override the manifest's output directory");
    cmd->add_option("--setting", overrides.setting,
                    "Override the guideline setting (MemeArena, SelfGuideline, NoGuideline, ExternalGuideline)");
    cmd->add_option("--workers", overrides.workers, "Concurrent units of work");
  };

  struct Command {
    const char* name;
    const char* help;
    std::optional<Stage> stage;
  };
  const Command commands[] = {
      {"simulate", "Simulate contexts, formulate tasks, collect analyses", Stage::kSimulate},
      {"fuse", "Fuse analyses into per-meme guidelines", Stage::kFuse},
      {"battle", "Schedule and judge pairwise battles (resumable)", Stage::kBattle},
      {"rank", "Fit ratings and write the leaderboard", Stage::kRank},
      {"bias", "Score judge rankings against the joint ranking", Stage::kBias},
      {"report", "Write the markdown report", Stage::kReport},
      {"run", "Run every stage in order", std::nullopt},
  };
  std::vector<std::pair<CLI::App*, std::optional<Stage>>> stage_cmds;
  for (const auto& c : commands) {
    CLI::App* cmd = app.add_subcommand(c.name, c.help);
    add_common(cmd);
    if (!c.stage || *c.stage == Stage::kBattle) {
      cmd->add_option("--max-new-battles", overrides.max_new_battles,
                      "Stop after judging this many new battles");
    }
    stage_cmds.emplace_back(cmd, c.stage);
  }

  std::string scenario_path;
  std::string mode = "both";
  std::string bias_out = "bias_sim";
  CLI::App* sim = app.add_subcommand("simulate-bias", "Run the biased-judge simulator on a scenario");
  sim->add_option("scenario", scenario_path, "Scenario file (JSON)")->required()->check(CLI::ExistingFile);
  sim->add_option("--mode", mode, "self, shared or both")->capture_default_str();
  sim->add_option("--out", bias_out, "Output directory")->capture_default_str();

  std::string template_out;
  CLI::App* exp = app.add_subcommand("export-templates", "Write the default prompt templates");
  exp->add_option("dir", template_out, "Destination directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    for (const auto& [cmd, stage] : stage_cmds) {
      if (!cmd->parsed()) continue;
      std::vector<Stage> stages;
      if (stage) stages.push_back(*stage);
      return run_stages(manifest_path, overrides, stages);
    }
    if (sim->parsed()) return simulate_bias(scenario_path, mode, bias_out);
    if (exp->parsed()) {
      TemplateSet::defaults().save(template_out);
      print_line("templates written to " + template_out);
      return 0;
    }
  } catch (const PrerequisiteError& e) {
    print_line(std::string("prerequisite missing: ") + e.what());
    return 3;
  } catch (const ValidationError& e) {
    print_line(std::string("invalid input: ") + e.what());
    return 2;
  } catch (const std::exception& e) {
    print_line(std::string("error: ") + e.what());
    return 1;
  }
  return 0;
}
