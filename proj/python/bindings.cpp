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

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "harmarena/bias.hpp"
#include "harmarena/error.hpp"
#include "harmarena/pipeline.hpp"
#include "harmarena/rating.hpp"
#include "harmarena/report.hpp"

namespace py = pybind11;
using namespace harmarena;

namespace {

using OutcomeTuple = std::tuple<std::string, std::string, double>;

std::vector<Outcome> to_outcomes(const std::vector<OutcomeTuple>& rows) {
  std::vector<Outcome> out;
  out.reserve(rows.size());
  for (const auto& [a, b, s] : rows) out.push_back({a, b, s});
  return out;
}

RatingOptions rating_options(double k, double alpha, double anchor) {
  RatingOptions o;
  o.k = k;
  o.alpha = alpha;
  o.anchor = anchor;
  return o;
}

WinRateTies ties_from(const std::string& text) {
  auto t = parse_win_rate_ties(text);
  if (!t) throw ValidationError("ties", "expected 'half' or 'exclude'");
  return *t;
}

Stage stage_from(const std::string& text) {
  auto s = parse_stage(text);
  if (!s) throw ValidationError("stages", "unknown stage '" + text + "'");
  return *s;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Pairwise arena evaluation: ratings, ranking agreement and the mock pipeline.";

  auto error = py::register_exception<Error>(m, "Error");
  py::register_exception<ValidationError>(m, "ValidationError", error.ptr());
  py::register_exception<PrerequisiteError>(m, "PrerequisiteError", error.ptr());

  m.def("elo_expected", &elo_expected, py::arg("ra"), py::arg("rb"), py::arg("alpha") = 400.0);
  m.def("elo_update", &elo_update, py::arg("ra"), py::arg("rb"), py::arg("score_a"), py::arg("k") = 4.0,
        py::arg("alpha") = 400.0);

  m.def(
      "elo_sequential",
      [](const std::vector<OutcomeTuple>& outcomes, double k, double alpha, double anchor) {
        return elo_sequential(to_outcomes(outcomes), Dimension::kOverall, rating_options(k, alpha, anchor)).ratings;
      },
      py::arg("outcomes"), py::arg("k") = 4.0, py::arg("alpha") = 400.0, py::arg("anchor") = 1000.0,
      "Ratings after one ordered pass over (a, b, score_a) tuples.");

  m.def(
      "bt_fit",
      [](const std::vector<OutcomeTuple>& outcomes, double alpha, double anchor) {
        return bt_fit(to_outcomes(outcomes), Dimension::kOverall, rating_options(4.0, alpha, anchor)).ratings;
      },
      py::arg("outcomes"), py::arg("alpha") = 400.0, py::arg("anchor") = 1000.0,
      "Bradley-Terry ratings on the Elo scale from (a, b, score_a) tuples.");

  m.def(
      "win_rate",
      [](const std::vector<OutcomeTuple>& outcomes, const std::string& model, const std::string& ties) {
        return win_rate(to_outcomes(outcomes), model, ties_from(ties));
      },
      py::arg("outcomes"), py::arg("model"), py::arg("ties") = "half");

  m.def(
      "dcg", [](const std::vector<double>& rel) { return dcg(rel); }, py::arg("relevances"));
  m.def(
      "ndcg",
      [](const std::vector<std::string>& actual, const std::vector<std::string>& ideal, std::size_t p) {
        return ndcg(actual, ideal, p);
      },
      py::arg("actual"), py::arg("ideal"), py::arg("p") = 0);

  m.def(
      "leaderboard_rows",
      [](const std::filesystem::path& battle_log) {
        const auto log = read_battle_log(battle_log);
        return leaderboard_cells(leaderboard(log));
      },
      py::arg("battle_log"), "Leaderboard table (header first) fitted from a battle log file.");

  m.def(
      "run_pipeline",
      [](const std::filesystem::path& manifest_path, std::optional<std::filesystem::path> output_dir,
         const std::vector<std::string>& stages) {
        RunManifest manifest = load_manifest(manifest_path);
        if (output_dir) manifest.output_dir = *output_dir;
        std::vector<Stage> plan;
        for (const auto& s : stages) plan.push_back(stage_from(s));
        PipelineOptions options;
        options.log = [](const std::string&) {};
        std::vector<std::tuple<std::string, std::size_t, std::size_t>> out;
        {
          py::gil_scoped_release release;
          for (const auto& r : run_pipeline(manifest, plan, options)) {
            out.emplace_back(std::string(to_string(r.stage)), r.produced, r.failures);
          }
        }
        return out;
      },
      py::arg("manifest"), py::arg("output_dir") = std::nullopt, py::arg("stages") = std::vector<std::string>{},
      "Runs pipeline stages; returns (stage, produced, failures) per stage.");

  m.def(
      "simulate_bias",
      [](const std::filesystem::path& scenario_path, std::optional<std::uint64_t> seed) {
        BiasScenario scenario = BiasScenario::load(scenario_path);
        if (seed) scenario.seed = *seed;
        std::vector<std::string> judges;
        for (const auto& j : scenario.judges) judges.push_back(j.name);
        const std::vector<SettingLog> logs{
            {"self", simulate_biased_judges(scenario, GuidelineMode::kSelf)},
            {"shared", simulate_biased_judges(scenario, GuidelineMode::kShared)}};
        std::map<std::string, std::map<std::string, double>> out;
        for (const auto& row : bias_report(logs, judges).rows) {
          out[row.setting] = row.ndcg;
          out[row.setting]["Avg"] = row.average;
        }
        return out;
      },
      py::arg("scenario"), py::arg("seed") = std::nullopt,
      "Per-judge NDCG for the self and shared guideline modes of a biased-judge scenario.");
}
