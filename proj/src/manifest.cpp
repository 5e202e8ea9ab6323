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

#include "harmarena/manifest.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>

#include "harmarena/error.hpp"

namespace harmarena {

namespace fs = std::filesystem;

namespace {

std::optional<Role> parse_role(std::string_view s) {
  if (s == "target") return Role::kTarget;
  if (s == "judge") return Role::kJudge;
  if (s == "controller") return Role::kController;
  return std::nullopt;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() || base.empty() ? path : (base / path).lexically_normal();
}

template <typename T>
T get_or(const Json& j, const char* key, T fallback, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const Json::exception& e) {
    throw ValidationError(where.empty() ? key : where + "." + key, e.what());
  }
}

const Json& object_or_empty(const Json& j, const char* key) {
  static const Json kEmpty = Json::object();
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return kEmpty;
  if (!it->is_object()) throw ValidationError(key, "must be an object");
  return *it;
}

}  // namespace

Roster RunManifest::roster() const { return Roster(models); }

std::vector<ModelRef> RunManifest::targets() const {
  const Roster r = roster();
  std::vector<ModelRef> out;
  for (const auto& m : r.models()) {
    if (m.has(Role::kTarget)) out.push_back(m);
  }
  return out;
}

std::vector<ModelRef> RunManifest::panel_models() const {
  const Roster r = roster();
  std::vector<ModelRef> out;
  for (const auto& name : panel) out.push_back(r.at(name));
  return out;
}

const ModelRef& RunManifest::controller_model() const {
  auto it = std::find_if(models.begin(), models.end(),
                         [&](const ModelRef& m) { return m.name == controller; });
  if (it == models.end()) throw ValidationError("controller", "unknown model '" + controller + "'");
  return *it;
}

void RunManifest::validate() const {
  if (dataset.empty()) throw ValidationError("dataset", "required");
  if (output_dir.empty()) throw ValidationError("output_dir", "required");
  if (models.empty()) throw ValidationError("models", "at least one model required");
  std::set<std::string> names;
  for (std::size_t i = 0; i < models.size(); ++i) {
    const auto& m = models[i];
    const std::string where = fmt::format("models[{}]", i);
    if (m.name.empty()) throw ValidationError(where + ".name", "must be non-empty");
    if (!names.insert(m.name).second) {
      throw ValidationError(where + ".name", "duplicate model '" + m.name + "'");
    }
    if (!backends.count(m.backend)) {
      throw ValidationError(where + ".backend", "unknown backend '" + m.backend + "'");
    }
  }
  if (controller.empty()) throw ValidationError("controller", "required");
  if (!names.count(controller)) {
    throw ValidationError("controller", "unknown model '" + controller + "'");
  }
  const Roster r = roster();
  std::set<std::string> seen;
  for (std::size_t i = 0; i < panel.size(); ++i) {
    const std::string where = fmt::format("panel[{}]", i);
    if (!r.contains(panel[i])) throw ValidationError(where, "unknown model '" + panel[i] + "'");
    if (!r.at(panel[i]).has(Role::kTarget)) {
      throw ValidationError(where, "judge '" + panel[i] + "' must also be a target");
    }
    if (!seen.insert(panel[i]).second) throw ValidationError(where, "duplicate judge");
  }
  if (panel.empty()) throw ValidationError("panel", "at least one judge required");
  const std::size_t n = targets().size();
  if (n <= panel.size()) {
    throw ValidationError("panel", fmt::format("need more targets than judges (n = {}, k = {})",
                                               n, panel.size()));
  }
  if (per_task < 2) throw ValidationError("scheduler.per_task", "must be at least 2");
  if (rating.k <= 0) throw ValidationError("rating.k", "must be positive");
  if (rating.alpha <= 0) throw ValidationError("rating.alpha", "must be positive");
  if (rating.tolerance <= 0) throw ValidationError("rating.tolerance", "must be positive");
  for (const auto* t : {&generation.controller_temperature, &generation.target_temperature,
                        &generation.judge_temperature}) {
    if (*t < 0 || *t > 2) throw ValidationError("generation", "temperatures must be in [0, 2]");
  }
  if (generation.max_tokens <= 0) throw ValidationError("generation.max_tokens", "must be positive");
  if (retry_budget < 0) throw ValidationError("retry.budget", "must be >= 0");
  if (workers < 1) throw ValidationError("workers", "must be >= 1");
  if (setting == Setting::kExternalGuideline && !external_guideline_dir) {
    throw ValidationError("external_guideline_dir", "required for the ExternalGuideline setting");
  }
}

RunManifest parse_manifest(const Json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ValidationError("", "manifest must be a JSON object");
  RunManifest m;
  m.base_dir = base_dir;
  m.dataset = resolve(base_dir, get_or<std::string>(j, "dataset", "", ""));
  m.output_dir = resolve(base_dir, get_or<std::string>(j, "output_dir", "out", ""));
  if (auto t = get_or<std::string>(j, "template_dir", "", ""); !t.empty()) {
    m.template_dir = resolve(base_dir, t);
  }
  if (auto t = get_or<std::string>(j, "external_guideline_dir", "", ""); !t.empty()) {
    m.external_guideline_dir = resolve(base_dir, t);
  }

  const auto& backends = object_or_empty(j, "backends");
  for (const auto& [id, b] : backends.items()) {
    const std::string where = "backends." + id;
    BackendConfig cfg;
    const std::string type = get_or<std::string>(b, "type", "mock", where);
    if (type == "mock") {
      cfg.type = BackendConfig::Type::kMock;
      const std::string script = get_or<std::string>(b, "script", "", where);
      if (script.empty()) throw ValidationError(where + ".script", "required for mock backends");
      cfg.script = resolve(base_dir, script);
      if (b.contains("seed")) cfg.seed = get_or<std::uint64_t>(b, "seed", 0, where);
    } else if (type == "openai" || type == "remote") {
      cfg.type = BackendConfig::Type::kRemote;
      cfg.remote.endpoint = get_or<std::string>(b, "endpoint", "", where);
      if (cfg.remote.endpoint.empty()) throw ValidationError(where + ".endpoint", "required");
      cfg.remote.api_key_env = get_or<std::string>(b, "api_key_env", "", where);
      cfg.remote.timeout =
          std::chrono::milliseconds(get_or<int>(b, "timeout_ms", 120000, where));
      cfg.remote.throttle.max_concurrency = get_or<int>(b, "max_concurrency", 0, where);
      cfg.remote.throttle.rate_per_second = get_or<double>(b, "rate_per_second", 0.0, where);
      cfg.remote.throttle.burst = get_or<double>(b, "burst", 1.0, where);
    } else {
      throw ValidationError(where + ".type", "unknown backend type '" + type + "'");
    }
    m.backends[id] = std::move(cfg);
  }

  auto models_it = j.find("models");
  if (models_it == j.end() || !models_it->is_array()) {
    throw ValidationError("models", "required array");
  }
  for (std::size_t i = 0; i < models_it->size(); ++i) {
    const Json& mj = (*models_it)[i];
    const std::string where = fmt::format("models[{}]", i);
    ModelRef ref;
    ref.name = get_or<std::string>(mj, "name", "", where);
    ref.family = get_or<std::string>(mj, "family", ref.name, where);
    ref.backend = get_or<std::string>(mj, "backend", "", where);
    const auto roles = get_or<std::vector<std::string>>(mj, "roles", {"target"}, where);
    for (const auto& r : roles) {
      auto role = parse_role(r);
      if (!role) throw ValidationError(where + ".roles", "unknown role '" + r + "'");
      ref.roles.insert(*role);
    }
    if (auto api = get_or<std::string>(mj, "api_model", "", where); !api.empty()) {
      m.api_models[ref.name] = api;
    }
    m.models.push_back(std::move(ref));
  }

  m.controller = get_or<std::string>(j, "controller", "", "");
  if (j.contains("panel")) {
    m.panel = get_or<std::vector<std::string>>(j, "panel", {}, "");
  } else {
    for (const auto& ref : m.models) {
      if (ref.has(Role::kJudge)) m.panel.push_back(ref.name);
    }
  }
  for (auto& ref : m.models) {
    if (std::find(m.panel.begin(), m.panel.end(), ref.name) != m.panel.end()) {
      ref.roles.insert(Role::kJudge);
    }
    if (ref.name == m.controller) ref.roles.insert(Role::kController);
  }

  const auto& gen = object_or_empty(j, "generation");
  m.generation.controller_temperature =
      get_or<double>(gen, "controller_temperature", 1.0, "generation");
  m.generation.target_temperature = get_or<double>(gen, "target_temperature", 0.0, "generation");
  m.generation.judge_temperature = get_or<double>(gen, "judge_temperature", 0.0, "generation");
  m.generation.max_tokens = get_or<int>(gen, "max_tokens", 2048, "generation");

  const auto& retry = object_or_empty(j, "retry");
  m.retry_budget = get_or<int>(retry, "budget", 3, "retry");
  m.backoff_ms = get_or<std::vector<int>>(retry, "backoff_ms", m.backoff_ms, "retry");
  if (m.backoff_ms.empty()) m.backoff_ms = {0};

  m.per_task = get_or<int>(object_or_empty(j, "scheduler"), "per_task", 3, "scheduler");

  const auto& rating = object_or_empty(j, "rating");
  m.rating.k = get_or<double>(rating, "k", 4.0, "rating");
  m.rating.alpha = get_or<double>(rating, "alpha", 400.0, "rating");
  m.rating.anchor = get_or<double>(rating, "anchor", 1000.0, "rating");
  m.rating.tolerance = get_or<double>(rating, "tolerance", 1e-8, "rating");
  const std::string ties = get_or<std::string>(rating, "win_rate_ties", "half", "rating");
  auto wt = parse_win_rate_ties(ties);
  if (!wt) throw ValidationError("rating.win_rate_ties", "expected 'half' or 'exclude'");
  m.rating.win_rate_ties = *wt;

  const auto& seeds = object_or_empty(j, "seeds");
  m.seeds.simulation = get_or<std::uint64_t>(seeds, "simulation", 1, "seeds");
  m.seeds.fusion = get_or<std::uint64_t>(seeds, "fusion", 2, "seeds");
  m.seeds.scheduler = get_or<std::uint64_t>(seeds, "scheduler", 3, "seeds");
  m.seeds.presentation = get_or<std::uint64_t>(seeds, "presentation", 4, "seeds");

  const std::string setting = get_or<std::string>(j, "setting", "MemeArena", "");
  auto s = parse_setting(setting);
  if (!s) throw ValidationError("setting", "unknown setting '" + setting + "'");
  m.setting = *s;

  const auto& judging = object_or_empty(j, "judging");
  m.judging.setting = m.setting;
  m.judging.exclude_contestant_judges =
      get_or<bool>(judging, "exclude_contestant_judges", true, "judging");
  m.judging.per_dimension_calls = get_or<bool>(judging, "per_dimension_calls", false, "judging");
  const std::string rule = get_or<std::string>(judging, "vote_rule", "abstain", "judging");
  auto vr = parse_vote_rule(rule);
  if (!vr) throw ValidationError("judging.vote_rule", "unknown rule '" + rule + "'");
  m.judging.vote_rule = *vr;

  m.workers = get_or<int>(j, "workers", 1, "");
  for (const auto& [name, path] : object_or_empty(j, "bias_logs").items()) {
    if (!parse_setting(name)) throw ValidationError("bias_logs." + name, "unknown setting");
    m.bias_logs[name] = resolve(base_dir, path.get<std::string>());
  }
  m.bias_p = get_or<std::size_t>(j, "bias_p", 0, "");

  m.validate();
  return m;
}

RunManifest load_manifest(const fs::path& path) {
  Json j;
  try {
    j = Json::parse(read_text_file(path));
  } catch (const Json::parse_error& e) {
    throw ValidationError(path.string(), e.what());
  }
  return parse_manifest(j, path.parent_path());
}

BackendRegistry make_registry(const RunManifest& manifest) {
  BackendRegistry registry;
  for (const auto& [id, cfg] : manifest.backends) {
    if (cfg.type == BackendConfig::Type::kMock) {
      MockScript script = MockScript::load(cfg.script);
      if (cfg.seed) script.seed = *cfg.seed;
      registry.add(id, std::make_shared<MockBackend>(std::move(script)));
    } else {
      auto remote = std::make_shared<RemoteBackend>(cfg.remote);
      for (const auto& m : manifest.models) {
        auto it = manifest.api_models.find(m.name);
        if (m.backend == id && it != manifest.api_models.end()) {
          remote->set_api_model(m.name, it->second);
        }
      }
      registry.add(id, std::move(remote));
    }
  }
  return registry;
}

}  // namespace harmarena
