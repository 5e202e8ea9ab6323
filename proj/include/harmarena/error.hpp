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

#include <stdexcept>
#include <string>
#include <string_view>

namespace harmarena {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input data: dataset records, manifests, logs. `where` is a line number
// ("line 3") or a field path ("models[2].roles").
class ValidationError : public Error {
 public:
  ValidationError(std::string where, const std::string& message)
      : Error(where.empty() ? message : where + ": " + message),
        where_(std::move(where)) {}

  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

// Model output that does not follow the requested format.
class ParseError : public Error {
 public:
  using Error::Error;
};

// A pipeline stage cannot proceed for one unit of work (a meme, a task).
class StageError : public Error {
 public:
  using Error::Error;
};

// A requested stage is missing the artifacts of an earlier stage.
class PrerequisiteError : public Error {
 public:
  using Error::Error;
};

enum class BackendErrorKind {
  kTransport,  // network failure, 429, 5xx; retryable
  kAuth,       // 401/403 or missing key; never retried
  kRefusal,    // provider safety block
  kProvider,   // other non-retryable provider error
  kNoMatch,    // mock script has no rule for the request
};

std::string_view to_string(BackendErrorKind kind);

class BackendError : public Error {
 public:
  BackendError(BackendErrorKind kind, const std::string& message)
      : Error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  BackendErrorKind kind() const { return kind_; }
  bool retryable() const { return kind_ == BackendErrorKind::kTransport; }

 private:
  BackendErrorKind kind_;
};

}  // namespace harmarena
