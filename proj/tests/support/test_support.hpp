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

#include <atomic>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "harmarena/backend.hpp"
#include "harmarena/datamodel.hpp"
#include "harmarena/jsonl.hpp"

namespace harmarena::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("harmarena-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline ModelRef model(const std::string& name, std::string family = "",
                      std::string backend = "mock") {
  ModelRef m;
  m.name = name;
  m.family = family.empty() ? name : std::move(family);
  m.backend = std::move(backend);
  m.roles = {Role::kTarget};
  return m;
}

inline Analysis analysis(const std::string& task_id, const std::string& author,
                         const std::string& tag = "") {
  Analysis a;
  a.task_id = task_id;
  a.author = author;
  a.background = "background of " + author + " on " + task_id + tag;
  a.reasoning = "reasoning of " + author + " on " + task_id + tag;
  a.raw = "[Background Knowledge]: " + a.background + "\n[Reasoning]: " + a.reasoning;
  return a;
}

// A one-pixel PNG as an inline data URL.
inline std::string tiny_png_data_url() {
  return "data:image/png;base64,"
         "iVBORw0KGgoAAAANSUhEUgAAAAEAAAABCAIAAACQd1PeAAAADElEQVR4nGP4z8AAAAMBAQDJ/pLvAAAAAElFTkSuQmCC";
}

inline Meme meme(const std::string& id, const std::string& text = "a meme caption") {
  Meme m;
  m.id = id;
  m.image = ImageRef::from_data_url(tiny_png_data_url());
  m.text = text;
  m.source = "test";
  return m;
}

inline Verdict uniform_verdict(Winner w) {
  Verdict v;
  v.winners.fill(w);
  return v;
}

// Registry with one mock backend named "mock".
inline std::shared_ptr<BackendRegistry> mock_registry(const Json& script) {
  auto registry = std::make_shared<BackendRegistry>();
  registry->add("mock", std::make_shared<MockBackend>(MockScript::from_json(script)));
  return registry;
}

inline RetryPolicy no_sleep_retry(int budget = 3) {
  RetryPolicy p;
  p.budget = budget;
  p.sleep = [](std::chrono::milliseconds) {};
  return p;
}

inline std::filesystem::path demo_dir() { return HARMARENA_DEMO_DIR; }

}  // namespace harmarena::testing
