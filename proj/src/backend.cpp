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

#include "harmarena/backend.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <thread>

#include "harmarena/digest.hpp"
#include "harmarena/rng.hpp"

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include "httplib.h"

namespace harmarena {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

std::string_view to_string(RequestTag tag) {
  switch (tag) {
    case RequestTag::kControllerSim: return "ControllerSim";
    case RequestTag::kTargetAnalysis: return "TargetAnalysis";
    case RequestTag::kJudgeFusion: return "JudgeFusion";
    case RequestTag::kJudgeVerdict: return "JudgeVerdict";
  }
  return "Unknown";
}

std::optional<RequestTag> parse_request_tag(std::string_view text) {
  for (RequestTag t : {RequestTag::kControllerSim, RequestTag::kTargetAnalysis,
                       RequestTag::kJudgeFusion, RequestTag::kJudgeVerdict}) {
    if (to_string(t) == text) return t;
  }
  return std::nullopt;
}

double GenerationSettings::temperature_for(RequestTag tag) const {
  switch (tag) {
    case RequestTag::kControllerSim: return controller_temperature;
    case RequestTag::kTargetAnalysis: return target_temperature;
    case RequestTag::kJudgeFusion:
    case RequestTag::kJudgeVerdict: return judge_temperature;
  }
  return 0.0;
}

std::string request_fingerprint(const GenerationRequest& request) {
  // Length-prefixed fields so that no two field tuples share an encoding.
  std::string key;
  auto field = [&key](std::string_view v) {
    key += std::to_string(v.size());
    key += ':';
    key += v;
  };
  char temp[32];
  std::snprintf(temp, sizeof temp, "%.17g", request.temperature);
  field(request.model);
  field(request.system);
  field(request.user);
  field(request.image ? request.image->digest() : std::string());
  field(temp);
  return sha256_hex(key);
}

// ---------------------------------------------------------------------------
// Throttle

Throttle::Throttle(ThrottleOptions options)
    : options_(options), tokens_(std::max(1.0, options.burst)), last_refill_(Clock::now()) {}

Throttle::Permit::~Permit() {
  if (owner_ != nullptr) owner_->release();
}

Throttle::Permit Throttle::acquire() {
  std::unique_lock lock(mu_);
  if (options_.max_concurrency > 0) {
    cv_.wait(lock, [this] { return in_flight_ < options_.max_concurrency; });
  }
  if (options_.rate_per_second > 0) {
    const double capacity = std::max(1.0, options_.burst);
    for (;;) {
      const auto now = Clock::now();
      const double elapsed = std::chrono::duration<double>(now - last_refill_).count();
      tokens_ = std::min(capacity, tokens_ + elapsed * options_.rate_per_second);
      last_refill_ = now;
      if (tokens_ >= 1.0) break;
      const auto wait = std::chrono::duration<double>((1.0 - tokens_) / options_.rate_per_second);
      cv_.wait_for(lock, wait);
    }
    tokens_ -= 1.0;
  }
  ++in_flight_;
  peak_ = std::max(peak_, in_flight_);
  return Permit(this);
}

void Throttle::release() {
  {
    std::lock_guard lock(mu_);
    --in_flight_;
  }
  cv_.notify_one();
}

int Throttle::in_flight() const {
  std::lock_guard lock(mu_);
  return in_flight_;
}

int Throttle::peak_in_flight() const {
  std::lock_guard lock(mu_);
  return peak_;
}

// ---------------------------------------------------------------------------
// Mock

namespace {

std::optional<BackendErrorKind> parse_error_kind(std::string_view s) {
  for (auto k : {BackendErrorKind::kTransport, BackendErrorKind::kAuth,
                 BackendErrorKind::kRefusal, BackendErrorKind::kProvider,
                 BackendErrorKind::kNoMatch}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

std::vector<std::string> responses_from(const Json& j) {
  if (j.is_string()) return {j.get<std::string>()};
  if (j.is_array()) return j.get<std::vector<std::string>>();
  throw ValidationError("response", "expected a string or an array of strings");
}

}  // namespace

MockScript MockScript::from_json(const Json& j) {
  MockScript script;
  script.seed = j.value("seed", std::uint64_t{0});
  if (auto it = j.find("rules"); it != j.end()) {
    std::size_t i = 0;
    for (const auto& r : *it) {
      const std::string where = "rules[" + std::to_string(i++) + "]";
      MockRule rule;
      const std::string tag = r.value("tag", std::string("*"));
      if (tag != "*") {
        rule.tag = parse_request_tag(tag);
        if (!rule.tag) throw ValidationError(where + ".tag", "unknown tag '" + tag + "'");
      }
      rule.model = r.value("model", std::string("*"));
      rule.pattern = r.value("pattern", std::string("*"));
      if (auto resp = r.find("response"); resp != r.end()) {
        rule.responses = responses_from(*resp);
      }
      if (auto resp = r.find("responses"); resp != r.end()) {
        rule.responses = responses_from(*resp);
      }
      if (auto err = r.find("error"); err != r.end()) {
        rule.error = parse_error_kind(err->get<std::string>());
        if (!rule.error) throw ValidationError(where + ".error", "unknown error kind");
      }
      rule.fail_first = r.value("fail_first", 0);
      if (rule.responses.empty() && !rule.error) {
        throw ValidationError(where, "rule needs \"response\", \"responses\" or \"error\"");
      }
      script.rules.push_back(std::move(rule));
    }
  }
  if (auto it = j.find("fallback"); it != j.end() && !it->is_null()) {
    script.fallback = responses_from(*it);
  }
  return script;
}

MockScript MockScript::load(const fs::path& path) {
  Json j;
  try {
    j = Json::parse(read_text_file(path));
  } catch (const Json::parse_error& e) {
    throw ValidationError(path.string(), e.what());
  }
  return from_json(j);
}

Json MockScript::to_json() const {
  Json rules_json = Json::array();
  for (const auto& r : rules) {
    Json jr{{"tag", r.tag ? std::string(harmarena::to_string(*r.tag)) : "*"},
            {"model", r.model},
            {"pattern", r.pattern}};
    if (!r.responses.empty()) jr["responses"] = r.responses;
    if (r.error) jr["error"] = std::string(harmarena::to_string(*r.error));
    if (r.fail_first > 0) jr["fail_first"] = r.fail_first;
    rules_json.push_back(std::move(jr));
  }
  Json j{{"seed", seed}, {"rules", rules_json}};
  if (!fallback.empty()) j["fallback"] = fallback;
  return j;
}

MockBackend::MockBackend(MockScript script, ThrottleOptions throttle)
    : script_(std::move(script)), throttle_(throttle) {}

int MockBackend::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

GenerationResponse MockBackend::generate(const GenerationRequest& request) {
  auto permit = throttle_.acquire();
  const auto start = Clock::now();
  {
    std::lock_guard lock(mu_);
    ++calls_;
  }
  const std::string fp = request_fingerprint(request);
  const std::string haystack = request.system + "\n" + request.user;
  auto pick = [&](const std::vector<std::string>& options) {
    const std::uint64_t h = derive_seed(script_.seed, fp);
    return options[h % options.size()];
  };
  for (std::size_t i = 0; i < script_.rules.size(); ++i) {
    const MockRule& rule = script_.rules[i];
    if (rule.tag && *rule.tag != request.tag) continue;
    if (rule.model != "*" && rule.model != request.model) continue;
    if (rule.pattern != "*" && haystack.find(rule.pattern) == std::string::npos) continue;
    if (rule.fail_first > 0) {
      std::lock_guard lock(mu_);
      int& served = failures_[std::to_string(i) + "/" + fp];
      if (served < rule.fail_first) {
        ++served;
        throw BackendError(rule.error.value_or(BackendErrorKind::kTransport),
                           "scripted failure " + std::to_string(served));
      }
    } else if (rule.error) {
      throw BackendError(*rule.error, "scripted error");
    }
    if (rule.responses.empty()) {
      throw BackendError(BackendErrorKind::kNoMatch, "rule has no response");
    }
    GenerationResponse resp;
    resp.text = pick(rule.responses);
    resp.finish_reason = "stop";
    resp.latency = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start);
    return resp;
  }
  if (!script_.fallback.empty()) {
    GenerationResponse resp;
    resp.text = pick(script_.fallback);
    resp.finish_reason = "stop";
    return resp;
  }
  throw BackendError(BackendErrorKind::kNoMatch,
                     "no mock rule for " + std::string(to_string(request.tag)) +
                         " request to " + request.model);
}

// ---------------------------------------------------------------------------
// Remote

Json build_chat_body(const GenerationRequest& request, std::string_view api_model) {
  Json messages = Json::array();
  if (!request.system.empty()) {
    messages.push_back({{"role", "system"}, {"content", request.system}});
  }
  Json content = Json::array();
  content.push_back({{"type", "text"}, {"text", request.user}});
  if (request.image) {
    content.push_back(
        {{"type", "image_url"}, {"image_url", {{"url", request.image->data_url()}}}});
  }
  messages.push_back({{"role", "user"}, {"content", content}});
  return Json{{"model", api_model.empty() ? request.model : std::string(api_model)},
              {"messages", messages},
              {"temperature", request.temperature},
              {"max_tokens", request.max_tokens}};
}

RemoteBackend::RemoteBackend(RemoteOptions options)
    : options_(std::move(options)), throttle_(options_.throttle) {
  const std::string& url = options_.endpoint;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ValidationError("endpoint", "expected an absolute URL, got '" + url + "'");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  base_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
}

void RemoteBackend::set_api_model(const std::string& model, const std::string& api_model) {
  api_models_[model] = api_model;
}

namespace {

bool mentions_safety(std::string_view body) {
  for (std::string_view needle : {"content_filter", "content_policy", "safety", "refus"}) {
    if (body.find(needle) != std::string_view::npos) return true;
  }
  return false;
}

std::string extract_content(const Json& message) {
  const Json& content = message.at("content");
  if (content.is_string()) return content.get<std::string>();
  std::string out;
  if (content.is_array()) {
    for (const auto& part : content) {
      if (part.value("type", "") == "text") out += part.value("text", "");
    }
  }
  return out;
}

}  // namespace

GenerationResponse RemoteBackend::generate(const GenerationRequest& request) {
  httplib::Headers headers;
  if (!options_.api_key_env.empty()) {
    const char* key = std::getenv(options_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw BackendError(BackendErrorKind::kAuth,
                         "environment variable " + options_.api_key_env + " is not set");
    }
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  auto it = api_models_.find(request.model);
  const std::string body =
      build_chat_body(request, it == api_models_.end() ? "" : it->second).dump();

  auto permit = throttle_.acquire();
  const auto start = Clock::now();
  httplib::Client client(base_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
  client.set_connection_timeout(secs);
  client.set_read_timeout(secs);
  client.set_write_timeout(secs);
  auto res = client.Post(path_, headers, body, "application/json");
  if (!res) {
    throw BackendError(BackendErrorKind::kTransport,
                       "request to " + options_.endpoint + " failed: " + httplib::to_string(res.error()));
  }
  const int status = res->status;
  if (status == 401 || status == 403) {
    throw BackendError(BackendErrorKind::kAuth, "HTTP " + std::to_string(status));
  }
  if (status == 408 || status == 429 || status >= 500) {
    throw BackendError(BackendErrorKind::kTransport, "HTTP " + std::to_string(status));
  }
  if (status >= 400) {
    if (mentions_safety(res->body)) {
      throw BackendError(BackendErrorKind::kRefusal, "HTTP " + std::to_string(status) + ": " + res->body);
    }
    throw BackendError(BackendErrorKind::kProvider, "HTTP " + std::to_string(status) + ": " + res->body);
  }
  Json reply;
  try {
    reply = Json::parse(res->body);
  } catch (const Json::parse_error&) {
    throw BackendError(BackendErrorKind::kProvider, "response body is not JSON");
  }
  try {
    const Json& choice = reply.at("choices").at(0);
    GenerationResponse out;
    out.finish_reason = choice.value("finish_reason", "");
    const Json& message = choice.at("message");
    if (out.finish_reason == "content_filter" ||
        (message.contains("refusal") && message["refusal"].is_string())) {
      throw BackendError(BackendErrorKind::kRefusal, "provider blocked the request");
    }
    out.text = extract_content(message);
    if (out.text.empty()) throw BackendError(BackendErrorKind::kProvider, "empty completion");
    out.latency = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start);
    return out;
  } catch (const Json::exception& e) {
    throw BackendError(BackendErrorKind::kProvider, std::string("unexpected response shape: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Retries, registry, cache, invoker

GenerationResponse with_retry(Backend& backend, const GenerationRequest& request,
                              const RetryPolicy& policy) {
  if (policy.budget < 0) throw Error("retry budget must be >= 0");
  for (int attempt = 1;; ++attempt) {
    try {
      GenerationResponse resp = backend.generate(request);
      resp.attempts = attempt;
      return resp;
    } catch (const BackendError& e) {
      if (!e.retryable() || attempt > policy.budget) throw;
      std::chrono::milliseconds delay{0};
      if (!policy.backoff.empty()) {
        delay = policy.backoff[std::min<std::size_t>(attempt - 1, policy.backoff.size() - 1)];
      }
      if (policy.sleep) {
        policy.sleep(delay);
      } else {
        std::this_thread::sleep_for(delay);
      }
    }
  }
}

void BackendRegistry::add(std::string id, std::shared_ptr<Backend> backend) {
  backends_[std::move(id)] = std::move(backend);
}

Backend& BackendRegistry::get(std::string_view id) const {
  auto it = backends_.find(id);
  if (it == backends_.end()) throw Error("unknown backend '" + std::string(id) + "'");
  return *it->second;
}

bool BackendRegistry::contains(std::string_view id) const { return backends_.find(id) != backends_.end(); }

GenerationResponse BackendRegistry::generate(std::string_view id,
                                             const GenerationRequest& request) const {
  return get(id).generate(request);
}

ResponseCache::ResponseCache(const fs::path& path) {
  if (fs::exists(path)) {
    const std::size_t good = for_each_jsonl(
        path,
        [this](std::size_t, const Json& j) {
          entries_[j.at("fingerprint").get<std::string>()] = j.at("text").get<std::string>();
        },
        /*tolerate_torn_tail=*/true);
    if (good < fs::file_size(path)) fs::resize_file(path, good);
  }
  sink_ = std::make_unique<JsonlAppender>(path);
}

std::optional<std::string> ResponseCache::find(const std::string& fingerprint) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(fingerprint);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ResponseCache::put(const std::string& fingerprint, const GenerationRequest& request,
                        const std::string& text) {
  {
    std::lock_guard lock(mu_);
    if (!entries_.emplace(fingerprint, text).second) return;
  }
  if (sink_) {
    sink_->append(Json{{"fingerprint", fingerprint},
                       {"model", request.model},
                       {"tag", std::string(to_string(request.tag))},
                       {"temperature", request.temperature},
                       {"text", text}});
  }
}

std::size_t ResponseCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

Invoker::Invoker(const BackendRegistry& registry, GenerationSettings settings,
                 RetryPolicy retry, ResponseCache* cache)
    : registry_(registry), settings_(settings), retry_(std::move(retry)), cache_(cache) {}

GenerationRequest Invoker::make_request(const ModelRef& model, RequestTag tag,
                                        std::string system, std::string user,
                                        std::optional<ImageRef> image) const {
  GenerationRequest req;
  req.model = model.name;
  req.system = std::move(system);
  req.user = std::move(user);
  req.image = std::move(image);
  req.temperature = settings_.temperature_for(tag);
  req.max_tokens = settings_.max_tokens;
  req.tag = tag;
  return req;
}

GenerationResponse Invoker::call(const ModelRef& model, const GenerationRequest& request) {
  std::string fp;
  if (cache_ != nullptr) {
    fp = request_fingerprint(request);
    if (auto hit = cache_->find(fp)) {
      GenerationResponse resp;
      resp.text = *hit;
      resp.finish_reason = "cached";
      resp.attempts = 0;
      resp.cached = true;
      return resp;
    }
  }
  {
    std::lock_guard lock(mu_);
    ++calls_[model.name];
  }
  GenerationResponse resp = with_retry(registry_.get(model.backend), request, retry_);
  if (cache_ != nullptr) cache_->put(fp, request, resp.text);
  return resp;
}

GenerationResponse Invoker::call(const ModelRef& model, RequestTag tag, std::string system,
                                 std::string user, std::optional<ImageRef> image) {
  return call(model, make_request(model, tag, std::move(system), std::move(user), std::move(image)));
}

std::map<std::string, int> Invoker::call_counts() const {
  std::lock_guard lock(mu_);
  return calls_;
}

}  // namespace harmarena
