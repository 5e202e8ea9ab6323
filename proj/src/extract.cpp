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

#include "harmarena/extract.hpp"

namespace harmarena {

namespace {

// End offset (exclusive) of the balanced value starting at `begin`, or npos.
std::size_t balanced_end(std::string_view text, std::size_t begin) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = begin; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{' || c == '[') {
      ++depth;
    } else if (c == '}' || c == ']') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

}  // namespace

std::optional<Json> extract_first_json(std::string_view text, char open) {
  std::size_t pos = text.find(open);
  while (pos != std::string_view::npos) {
    const std::size_t end = balanced_end(text, pos);
    if (end != std::string_view::npos) {
      try {
        return Json::parse(text.substr(pos, end - pos));
      } catch (const Json::parse_error&) {
      }
    }
    pos = text.find(open, pos + 1);
  }
  return std::nullopt;
}

}  // namespace harmarena
