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

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "harmarena/arena.hpp"
#include "harmarena/backend.hpp"
#include "harmarena/datamodel.hpp"
#include "harmarena/jsonl.hpp"
#include "harmarena/rating.hpp"

namespace harmarena {

struct BackendConfig {
  enum class Type { kMock, kRemote };
  Type type = Type::kMock;
  // Mock
  std::filesystem::path script;
  std::optional<std::uint64_t> seed;  // overrides the script's seed
  // Remote
  RemoteOptions remote;
};

struct Seeds {
  std::uint64_t simulation = 1;
  std::uint64_t fusion = 2;
  std::uint64_t scheduler = 3;
  std::uint64_t presentation = 4;
};

struct RunManifest {
  std::filesystem::path base_dir;  // relative paths below resolve against it
  std::filesystem::path dataset;
  std::filesystem::path output_dir;
  std::optional<std::filesystem::path> template_dir;
  std::optional<std::filesystem::path> external_guideline_dir;

  std::vector<ModelRef> models;
  // Provider model id per model name, for remote backends.
  std::map<std::string, std::string> api_models;
  std::map<std::string, BackendConfig> backends;
  std::vector<std::string> panel;
  std::string controller;

  GenerationSettings generation;
  int retry_budget = 3;
  std::vector<int> backoff_ms{1000, 4000, 16000};
  int per_task = 3;
  RatingOptions rating;
  Seeds seeds;
  Setting setting = Setting::kMemeArena;
  JudgingConfig judging;
  int workers = 1;

  // Battle logs of other settings for the consistency table, by setting name.
  std::map<std::string, std::filesystem::path> bias_logs;
  std::size_t bias_p = 0;  // 0 = number of ranked models

  Roster roster() const;
  std::vector<ModelRef> targets() const;
  std::vector<ModelRef> panel_models() const;
  const ModelRef& controller_model() const;

  // Throws ValidationError with a field path.
  void validate() const;
};

// Parses and validates; missing fields take their defaults.
RunManifest parse_manifest(const Json& j, const std::filesystem::path& base_dir = {});
RunManifest load_manifest(const std::filesystem::path& path);

// Instantiates every configured backend.
BackendRegistry make_registry(const RunManifest& manifest);

}  // namespace harmarena
