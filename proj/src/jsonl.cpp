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

#include "harmarena/jsonl.hpp"

#include <sstream>

#include "harmarena/error.hpp"

namespace harmarena {

namespace fs = std::filesystem;

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t for_each_jsonl(const fs::path& path,
                           const std::function<void(std::size_t, const Json&)>& fn,
                           bool tolerate_torn_tail) {
  const std::string content = read_text_file(path);
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < content.size()) {
    const std::size_t eol = content.find('\n', pos);
    const bool terminated = eol != std::string::npos;
    const std::size_t end = terminated ? eol : content.size();
    std::string_view line(content.data() + pos, end - pos);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") != std::string_view::npos) {
      Json record;
      try {
        record = Json::parse(line);
      } catch (const Json::parse_error& e) {
        if (tolerate_torn_tail && !terminated) return pos;
        throw ValidationError("line " + std::to_string(line_no),
                              std::string("invalid JSON: ") + e.what());
      }
      try {
        fn(line_no, record);
      } catch (const ValidationError&) {
        throw;
      } catch (const std::exception& e) {
        throw ValidationError("line " + std::to_string(line_no), e.what());
      }
    }
    pos = terminated ? eol + 1 : content.size();
  }
  return content.size();
}

void write_text_atomic(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

void write_lines_atomic(const fs::path& path, const std::vector<std::string>& lines) {
  std::string text;
  for (const auto& line : lines) {
    text += line;
    text += '\n';
  }
  write_text_atomic(path, text);
}

JsonlAppender::JsonlAppender(const fs::path& path) : path_(path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  out_.open(path, std::ios::binary | std::ios::app);
  if (!out_) throw Error("cannot open " + path.string() + " for append");
}

void JsonlAppender::append(const Json& record) {
  const std::string line = record.dump() + "\n";
  std::lock_guard lock(mu_);
  out_.write(line.data(), static_cast<std::streamsize>(line.size()));
  out_.flush();
  if (!out_) throw Error("append failed on " + path_.string());
}

}  // namespace harmarena
