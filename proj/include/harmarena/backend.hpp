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

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "harmarena/datamodel.hpp"
#include "harmarena/error.hpp"
#include "harmarena/jsonl.hpp"

namespace harmarena {

enum class RequestTag { kControllerSim, kTargetAnalysis, kJudgeFusion, kJudgeVerdict };

std::string_view to_string(RequestTag tag);
std::optional<RequestTag> parse_request_tag(std::string_view text);

struct GenerationRequest {
  std::string model;
  std::string system;
  std::string user;
  std::optional<ImageRef> image;
  double temperature = 0.0;
  int max_tokens = 2048;
  RequestTag tag = RequestTag::kTargetAnalysis;
};

// Per-tag sampling defaults: the controller samples at 1.0 for diverse
// contexts, every other role is pinned to 0 for reproducible judgments.
struct GenerationSettings {
  double controller_temperature = 1.0;
  double target_temperature = 0.0;
  double judge_temperature = 0.0;
  int max_tokens = 2048;

  double temperature_for(RequestTag tag) const;
};

struct GenerationResponse {
  std::string text;
  std::string finish_reason;
  std::chrono::milliseconds latency{0};
  int attempts = 1;
  bool cached = false;
};

// Stable digest over model, system text, user text, image bytes and
// temperature. Used to key mock responses and to deduplicate on resume.
std::string request_fingerprint(const GenerationRequest& request);

class Backend {
 public:
  virtual ~Backend() = default;
  // Throws BackendError.
  virtual GenerationResponse generate(const GenerationRequest& request) = 0;
};

// ---------------------------------------------------------------------------
// Throttling

struct ThrottleOptions {
  int max_concurrency = 0;     // 0 = unlimited
  double rate_per_second = 0;  // 0 = unlimited
  double burst = 1;
};

// Concurrency cap plus token-bucket rate limit.
class Throttle {
 public:
  explicit Throttle(ThrottleOptions options);

  class Permit {
   public:
    explicit Permit(Throttle* owner) : owner_(owner) {}
    Permit(Permit&& other) noexcept : owner_(std::exchange(other.owner_, nullptr)) {}
    Permit(const Permit&) = delete;
    Permit& operator=(const Permit&) = delete;
    Permit& operator=(Permit&&) = delete;
    ~Permit();

   private:
    Throttle* owner_;
  };

  Permit acquire();
  int in_flight() const;
  int peak_in_flight() const;

 private:
  void release();

  ThrottleOptions options_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  int in_flight_ = 0;
  int peak_ = 0;
  double tokens_;
  std::chrono::steady_clock::time_point last_refill_;
};

// ---------------------------------------------------------------------------
// Scripted mock

struct MockRule {
  std::optional<RequestTag> tag;  // nullopt matches every tag
  std::string model = "*";
  std::string pattern = "*";  // "*" or a substring of system + "\n" + user
  // One response is chosen per request, keyed by the request fingerprint.
  std::vector<std::string> responses;
  // When set, matching requests fail with this kind...
  std::optional<BackendErrorKind> error;
  // ...or, with fail_first > 0, only the first N attempts of each distinct
  // request fail (kind defaults to transport).
  int fail_first = 0;
};

struct MockScript {
  std::vector<MockRule> rules;
  // Used when no rule matches; without it an unmatched request is an error.
  std::vector<std::string> fallback;
  std::uint64_t seed = 0;

  static MockScript from_json(const Json& j);
  static MockScript load(const std::filesystem::path& path);
  Json to_json() const;
};

class MockBackend : public Backend {
 public:
  explicit MockBackend(MockScript script, ThrottleOptions throttle = {});

  GenerationResponse generate(const GenerationRequest& request) override;

  int calls() const;
  const MockScript& script() const { return script_; }
  Throttle& throttle() { return throttle_; }

 private:
  MockScript script_;
  Throttle throttle_;
  mutable std::mutex mu_;
  int calls_ = 0;
  std::map<std::string, int> failures_;  // (rule, fingerprint) -> failures served
};

// ---------------------------------------------------------------------------
// Remote chat-completion client

struct RemoteOptions {
  // Full URL of the chat-completion endpoint, e.g.
  // https://api.example.com/v1/chat/completions
  std::string endpoint;
  // Name of the environment variable holding the API key; empty = no auth.
  std::string api_key_env;
  std::chrono::milliseconds timeout{120000};
  ThrottleOptions throttle;
};

// Builds the chat-completion request body: system and user messages, the
// image as a base64 data-URL content part.
Json build_chat_body(const GenerationRequest& request, std::string_view api_model);

class RemoteBackend : public Backend {
 public:
  explicit RemoteBackend(RemoteOptions options);

  GenerationResponse generate(const GenerationRequest& request) override;

  // Maps model names to provider model ids; unmapped names are sent as-is.
  void set_api_model(const std::string& model, const std::string& api_model);

 private:
  RemoteOptions options_;
  std::string base_;  // scheme://host:port
  std::string path_;
  Throttle throttle_;
  std::map<std::string, std::string> api_models_;
};

// ---------------------------------------------------------------------------
// Retries

struct RetryPolicy {
  int budget = 3;
  // Delay before retry i uses backoff[min(i, size - 1)].
  std::vector<std::chrono::milliseconds> backoff{std::chrono::milliseconds(1000),
                                                 std::chrono::milliseconds(4000),
                                                 std::chrono::milliseconds(16000)};
  std::function<void(std::chrono::milliseconds)> sleep;  // defaults to sleep_for
};

// At most budget + 1 attempts; non-retryable errors propagate immediately,
// an exhausted budget rethrows the last error.
GenerationResponse with_retry(Backend& backend, const GenerationRequest& request,
                              const RetryPolicy& policy);

class BackendRegistry {
 public:
  void add(std::string id, std::shared_ptr<Backend> backend);
  Backend& get(std::string_view id) const;
  bool contains(std::string_view id) const;
  GenerationResponse generate(std::string_view id, const GenerationRequest& request) const;

 private:
  std::map<std::string, std::shared_ptr<Backend>, std::less<>> backends_;
};

// Fingerprint-keyed response store, persisted as append-only JSONL. Lets an
// interrupted run resume without repeating model calls.
class ResponseCache {
 public:
  ResponseCache() = default;  // in-memory only
  explicit ResponseCache(const std::filesystem::path& path);

  std::optional<std::string> find(const std::string& fingerprint) const;
  void put(const std::string& fingerprint, const GenerationRequest& request,
           const std::string& text);
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::string> entries_;
  std::unique_ptr<JsonlAppender> sink_;
};

// Routes a model's requests to its backend with the run's sampling settings,
// retry policy and response cache.
class Invoker {
 public:
  Invoker(const BackendRegistry& registry, GenerationSettings settings = {},
          RetryPolicy retry = {}, ResponseCache* cache = nullptr);

  GenerationRequest make_request(const ModelRef& model, RequestTag tag,
                                 std::string system, std::string user,
                                 std::optional<ImageRef> image) const;

  GenerationResponse call(const ModelRef& model, const GenerationRequest& request);
  GenerationResponse call(const ModelRef& model, RequestTag tag, std::string system,
                          std::string user, std::optional<ImageRef> image = std::nullopt);

  const GenerationSettings& settings() const { return settings_; }
  // Backend calls made (cache hits excluded), per model name.
  std::map<std::string, int> call_counts() const;

 private:
  const BackendRegistry& registry_;
  GenerationSettings settings_;
  RetryPolicy retry_;
  ResponseCache* cache_;
  mutable std::mutex mu_;
  std::map<std::string, int> calls_;
};

}  // namespace harmarena
