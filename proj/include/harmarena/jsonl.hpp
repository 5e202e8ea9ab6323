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
#include <fstream>
#include <functional>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace harmarena {

using Json = nlohmann::json;

// Calls `fn(line_number, record)` for every non-blank line of a
// newline-delimited JSON file. Parse failures throw ValidationError naming
// the line. When `tolerate_torn_tail` is set, a final line that has no
// trailing newline and does not parse is treated as an interrupted write and
// skipped; the return value is then the byte offset where valid data ends.
std::size_t for_each_jsonl(const std::filesystem::path& path,
                           const std::function<void(std::size_t, const Json&)>& fn,
                           bool tolerate_torn_tail = false);

// Writes `lines` to `path` via a temporary file and rename.
void write_lines_atomic(const std::filesystem::path& path,
                        const std::vector<std::string>& lines);
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

std::string read_text_file(const std::filesystem::path& path);

// Append-only JSONL sink. Each append writes one full line and flushes;
// appends from several threads are serialized.
class JsonlAppender {
 public:
  explicit JsonlAppender(const std::filesystem::path& path);

  void append(const Json& record);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::mutex mu_;
};

}  // namespace harmarena
