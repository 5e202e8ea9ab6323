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

#include "harmarena/datamodel.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <unordered_set>

#include "harmarena/digest.hpp"
#include "harmarena/error.hpp"

namespace harmarena {

namespace fs = std::filesystem;

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// Lowercase with separators removed: "Highly_Relevant" -> "highlyrelevant".
std::string squash(std::string_view s) {
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c)) out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

const Json& require(const Json& j, const char* key) {
  if (!j.is_object()) throw ValidationError("", "expected a JSON object");
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) {
    throw ValidationError(key, "missing required field");
  }
  return *it;
}

std::string require_string(const Json& j, const char* key) {
  const Json& v = require(j, key);
  if (!v.is_string()) throw ValidationError(key, "expected a string");
  return v.get<std::string>();
}

std::string optional_string(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return {};
  if (!it->is_string()) throw ValidationError(key, "expected a string");
  return it->get<std::string>();
}

}  // namespace

std::string_view to_string(BackendErrorKind kind) {
  switch (kind) {
    case BackendErrorKind::kTransport: return "transport";
    case BackendErrorKind::kAuth: return "auth";
    case BackendErrorKind::kRefusal: return "refusal";
    case BackendErrorKind::kProvider: return "provider";
    case BackendErrorKind::kNoMatch: return "no_match";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// ImageRef

ImageRef ImageRef::from_path(fs::path path) {
  ImageRef ref;
  ref.kind_ = Kind::kPath;
  ref.value_ = path.string();
  return ref;
}

ImageRef ImageRef::from_data_url(std::string data_url) {
  if (data_url.rfind("data:", 0) != 0 || data_url.find(";base64,") == std::string::npos) {
    throw ValidationError("image", "inline image must be a base64 data URL");
  }
  ImageRef ref;
  ref.kind_ = Kind::kInline;
  ref.value_ = std::move(data_url);
  return ref;
}

ImageRef ImageRef::parse(std::string_view value) {
  if (value.rfind("data:", 0) == 0) return from_data_url(std::string(value));
  return from_path(fs::path(value));
}

std::string ImageRef::mime_type() const {
  if (kind_ == Kind::kInline) {
    const auto semi = value_.find(';');
    return value_.substr(5, semi - 5);
  }
  const std::string ext = lower(fs::path(value_).extension().string());
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".gif") return "image/gif";
  if (ext == ".webp") return "image/webp";
  return "application/octet-stream";
}

std::vector<std::uint8_t> ImageRef::bytes() const {
  if (kind_ == Kind::kInline) {
    const auto comma = value_.find(";base64,");
    return base64_decode(std::string_view(value_).substr(comma + 8));
  }
  const std::string content = read_text_file(value_);
  return {content.begin(), content.end()};
}

std::string ImageRef::data_url() const {
  if (kind_ == Kind::kInline) return value_;
  return "data:" + mime_type() + ";base64," + base64_encode(bytes());
}

std::string ImageRef::digest() const { return sha256_hex(bytes()); }

// ---------------------------------------------------------------------------
// Roster

Roster::Roster(std::vector<ModelRef> models) : models_(std::move(models)) {
  for (std::size_t i = 0; i < models_.size(); ++i) {
    if (models_[i].family.empty()) models_[i].family = models_[i].name;
    if (!index_.emplace(models_[i].name, i).second) {
      throw ValidationError("models", "duplicate model name '" + models_[i].name + "'");
    }
  }
}

const ModelRef& Roster::at(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("unknown model '" + std::string(name) + "'");
  return models_[it->second];
}

bool Roster::contains(std::string_view name) const { return index_.find(name) != index_.end(); }

std::string Roster::family_of(std::string_view name) const {
  auto it = index_.find(name);
  return it == index_.end() ? std::string(name) : models_[it->second].family;
}

std::vector<ModelRef> Roster::with_role(Role r) const {
  std::vector<ModelRef> out;
  for (const auto& m : models_) {
    if (m.has(r)) out.push_back(m);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Enums

std::string_view to_string(Relevance r) {
  switch (r) {
    case Relevance::kHighlyRelevant: return "highly_relevant";
    case Relevance::kModeratelyRelevant: return "moderately_relevant";
    case Relevance::kUnrelated: return "unrelated";
  }
  return "unknown";
}

std::optional<Relevance> parse_relevance(std::string_view text) {
  const std::string s = squash(text);
  if (s == "highlyrelevant" || s == "high" || s == "highrelevance" || s == "1") {
    return Relevance::kHighlyRelevant;
  }
  if (s == "moderatelyrelevant" || s == "moderate" || s == "moderaterelevance" ||
      s == "2") {
    return Relevance::kModeratelyRelevant;
  }
  if (s == "unrelated" || s == "none" || s == "norelevance" || s == "irrelevant" ||
      s == "3") {
    return Relevance::kUnrelated;
  }
  return std::nullopt;
}

std::string_view dimension_key(Dimension d) {
  switch (d) {
    case Dimension::kInstructionFollowing: return "instruction_following";
    case Dimension::kRedundancy: return "redundancy";
    case Dimension::kCorrectness: return "correctness";
    case Dimension::kRelevance: return "relevance";
    case Dimension::kAccuracy: return "accuracy";
    case Dimension::kOverall: return "overall";
  }
  return "unknown";
}

std::string_view dimension_title(Dimension d) {
  switch (d) {
    case Dimension::kInstructionFollowing: return "Instruction Following";
    case Dimension::kRedundancy: return "Redundancy";
    case Dimension::kCorrectness: return "Correctness";
    case Dimension::kRelevance: return "Relevance";
    case Dimension::kAccuracy: return "Accuracy";
    case Dimension::kOverall: return "Overall";
  }
  return "Unknown";
}

std::optional<Dimension> parse_dimension(std::string_view key) {
  const std::string s = squash(key);
  for (Dimension d : kAllDimensions) {
    if (squash(dimension_key(d)) == s) return d;
  }
  return std::nullopt;
}

std::string_view to_string(Winner w) {
  switch (w) {
    case Winner::kA: return "A";
    case Winner::kB: return "B";
    case Winner::kTie: return "Tie";
  }
  return "?";
}

std::optional<Winner> parse_winner(std::string_view text) {
  const std::string s = squash(text);
  if (s == "a") return Winner::kA;
  if (s == "b") return Winner::kB;
  if (s == "tie") return Winner::kTie;
  return std::nullopt;
}

Verdict remap_verdict(const Verdict& v, bool swapped) {
  if (!swapped) return v;
  Verdict out = v;
  for (auto& w : out.winners) {
    if (w == Winner::kA) {
      w = Winner::kB;
    } else if (w == Winner::kB) {
      w = Winner::kA;
    }
  }
  return out;
}

std::string_view to_string(Setting s) {
  switch (s) {
    case Setting::kMemeArena: return "MemeArena";
    case Setting::kSelfGuideline: return "SelfGuideline";
    case Setting::kNoGuideline: return "NoGuideline";
    case Setting::kExternalGuideline: return "ExternalGuideline";
  }
  return "Unknown";
}

std::optional<Setting> parse_setting(std::string_view text) {
  const std::string s = squash(text);
  if (s == "memearena" || s == "fused" || s == "fusedguideline") return Setting::kMemeArena;
  if (s == "selfguideline" || s == "self" || s == "llmasajudge") {
    return Setting::kSelfGuideline;
  }
  if (s == "noguideline" || s == "none" || s == "woguideline") return Setting::kNoGuideline;
  if (s == "externalguideline" || s == "external" || s == "humanwritten") {
    return Setting::kExternalGuideline;
  }
  return std::nullopt;
}

std::string_view to_string(VoteRule r) {
  return r == VoteRule::kAbstain ? "abstain" : "plurality";
}

std::optional<VoteRule> parse_vote_rule(std::string_view text) {
  const std::string s = squash(text);
  if (s == "abstain") return VoteRule::kAbstain;
  if (s == "plurality") return VoteRule::kPlurality;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Tasks, votes, battles

std::string canonical_task_id(std::string_view meme_id, Relevance relevance) {
  std::string id(meme_id);
  id += '#';
  id += to_string(relevance);
  return id;
}

std::string ContextTask::task_text() const {
  return "[Context] " + context.profile + "\n[Task] " + instruction;
}

Verdict joint_vote(std::span<const Verdict> verdicts, VoteRule rule) {
  Verdict out;
  for (Dimension d : kAllDimensions) {
    int a = 0, b = 0, tie = 0;
    for (const auto& v : verdicts) {
      switch (v[d]) {
        case Winner::kA: ++a; break;
        case Winner::kB: ++b; break;
        case Winner::kTie: ++tie; break;
      }
    }
    Winner w = Winner::kTie;
    if (rule == VoteRule::kAbstain) {
      if (a > b) w = Winner::kA;
      if (b > a) w = Winner::kB;
    } else {
      if (a > b && a > tie) w = Winner::kA;
      if (b > a && b > tie) w = Winner::kB;
    }
    out[d] = w;
  }
  return out;
}

std::string canonical_battle_id(Setting setting, std::string_view task_id,
                                std::string_view model_a, std::string_view model_b) {
  std::string key(to_string(setting));
  key += '\x1f';
  key += task_id;
  key += '\x1f';
  key += model_a;
  key += '\x1f';
  key += model_b;
  return "b-" + sha256_hex(key).substr(0, 20);
}

bool validate_battle(const BattleRecord& record) {
  if (record.model_a == record.model_b) return false;
  if (record.judges.empty()) return false;
  for (const auto& judge : record.judges) {
    if (record.judge_verdicts.count(judge) == 0) return false;
  }
  return record.judge_verdicts.size() == record.judges.size();
}

void finalize_battle(BattleRecord& record) {
  record.valid = validate_battle(record);
  if (record.judge_verdicts.empty()) {
    record.joint.reset();
    return;
  }
  std::vector<Verdict> votes;
  votes.reserve(record.judge_verdicts.size());
  for (const auto& judge : record.judges) {
    auto it = record.judge_verdicts.find(judge);
    if (it != record.judge_verdicts.end()) votes.push_back(it->second);
  }
  record.joint = joint_vote(votes, record.vote_rule);
}

// ---------------------------------------------------------------------------
// JSON

void to_json(Json& j, const Meme& m) {
  j = Json{{"id", m.id}, {"image", m.image.value()}, {"text", m.text}, {"source", m.source}};
  if (m.allow_empty_text) j["allow_empty_text"] = true;
}

void from_json(const Json& j, Meme& m) {
  m.id = require_string(j, "id");
  if (m.id.empty()) throw ValidationError("id", "must be non-empty");
  m.image = ImageRef::parse(require_string(j, "image"));
  m.text = require_string(j, "text");
  m.source = optional_string(j, "source");
  m.allow_empty_text = j.value("allow_empty_text", false);
  if (m.text.empty() && !m.allow_empty_text) {
    throw ValidationError("text", "empty text requires \"allow_empty_text\": true");
  }
}

void to_json(Json& j, const InterpretiveContext& c) {
  j = Json{{"meme_id", c.meme_id},
           {"relevance", std::string(to_string(c.relevance))},
           {"profile", c.profile}};
}

void from_json(const Json& j, InterpretiveContext& c) {
  c.meme_id = require_string(j, "meme_id");
  const std::string rel = require_string(j, "relevance");
  auto parsed = parse_relevance(rel);
  if (!parsed) throw ValidationError("relevance", "unknown level '" + rel + "'");
  c.relevance = *parsed;
  c.profile = require_string(j, "profile");
}

void to_json(Json& j, const ContextTask& t) {
  j = Json{{"task_id", t.task_id},
           {"meme_id", t.meme_id},
           {"context", t.context},
           {"instruction", t.instruction}};
}

void from_json(const Json& j, ContextTask& t) {
  t.task_id = require_string(j, "task_id");
  t.meme_id = require_string(j, "meme_id");
  t.context = require(j, "context").get<InterpretiveContext>();
  t.instruction = require_string(j, "instruction");
  if (t.instruction.empty()) throw ValidationError("instruction", "must be non-empty");
  if (t.task_id != canonical_task_id(t.meme_id, t.context.relevance)) {
    throw ValidationError("task_id", "does not match meme id and relevance");
  }
}

void to_json(Json& j, const Analysis& a) {
  j = Json{{"task_id", a.task_id},     {"author", a.author},
           {"background", a.background}, {"reasoning", a.reasoning},
           {"raw", a.raw}};
}

void from_json(const Json& j, Analysis& a) {
  a.task_id = require_string(j, "task_id");
  a.author = require_string(j, "author");
  a.background = optional_string(j, "background");
  a.reasoning = optional_string(j, "reasoning");
  a.raw = optional_string(j, "raw");
}

void to_json(Json& j, const AnalysisKey& k) {
  j = Json{{"task_id", k.task_id}, {"author", k.author}};
}

void from_json(const Json& j, AnalysisKey& k) {
  k.task_id = require_string(j, "task_id");
  k.author = require_string(j, "author");
}

void to_json(Json& j, const TrailEntry& e) {
  j = Json{{"round", e.round},
           {"judge", e.judge},
           {"consumed", e.consumed},
           {"guideline_first", e.guideline_first}};
}

void from_json(const Json& j, TrailEntry& e) {
  e.round = require(j, "round").get<int>();
  e.judge = require_string(j, "judge");
  e.consumed = require(j, "consumed").get<AnalysisKey>();
  e.guideline_first = j.value("guideline_first", true);
}

void to_json(Json& j, const Guideline& g) {
  j = Json{{"meme_id", g.meme_id}, {"version", g.version}, {"text", g.text},
           {"seed", g.seed},       {"trail", g.trail}};
}

void from_json(const Json& j, Guideline& g) {
  g.meme_id = require_string(j, "meme_id");
  g.version = require(j, "version").get<int>();
  g.text = require_string(j, "text");
  g.seed = require(j, "seed").get<AnalysisKey>();
  g.trail = require(j, "trail").get<std::vector<TrailEntry>>();
  if (g.version < 0 || static_cast<std::size_t>(g.version) != g.trail.size()) {
    throw ValidationError("trail", "trail length must equal version");
  }
  for (std::size_t i = 0; i < g.trail.size(); ++i) {
    if (g.trail[i].round != static_cast<int>(i) + 1) {
      throw ValidationError("trail", "rounds must be contiguous from 1");
    }
  }
}

void to_json(Json& j, const Verdict& v) {
  j = Json::object();
  for (Dimension d : kAllDimensions) {
    j[std::string(dimension_key(d))] = std::string(to_string(v[d]));
  }
}

void from_json(const Json& j, Verdict& v) {
  if (!j.is_object()) throw ParseError("verdict must be a JSON object");
  for (Dimension d : kAllDimensions) {
    const std::string key(dimension_key(d));
    auto it = j.find(key);
    if (it == j.end()) throw ParseError("verdict missing '" + key + "'");
    if (!it->is_string()) throw ParseError("verdict '" + key + "' must be a string");
    auto w = parse_winner(it->get<std::string>());
    if (!w) throw ParseError("verdict '" + key + "' has bad value '" + it->get<std::string>() + "'");
    v[d] = *w;
  }
}

void to_json(Json& j, const BattleRecord& b) {
  Json verdicts = Json::object();
  for (const auto& [judge, v] : b.judge_verdicts) verdicts[judge] = v;
  j = Json{{"v", kBattleLogVersion},
           {"battle_id", b.battle_id},
           {"task_id", b.task_id},
           {"meme_id", b.meme_id},
           {"model_a", b.model_a},
           {"model_b", b.model_b},
           {"swapped", b.swapped},
           {"setting", std::string(to_string(b.setting))},
           {"vote_rule", std::string(to_string(b.vote_rule))},
           {"judges", b.judges},
           {"verdicts", verdicts},
           {"joint", b.joint ? Json(*b.joint) : Json(nullptr)},
           {"valid", b.valid},
           {"note", b.note}};
}

void from_json(const Json& j, BattleRecord& b) {
  const int version = require(j, "v").get<int>();
  if (version != kBattleLogVersion) {
    throw ValidationError("v", "unsupported battle log version " + std::to_string(version));
  }
  b.battle_id = require_string(j, "battle_id");
  b.task_id = require_string(j, "task_id");
  b.meme_id = require_string(j, "meme_id");
  b.model_a = require_string(j, "model_a");
  b.model_b = require_string(j, "model_b");
  b.swapped = require(j, "swapped").get<bool>();
  auto setting = parse_setting(require_string(j, "setting"));
  if (!setting) throw ValidationError("setting", "unknown setting");
  b.setting = *setting;
  auto rule = parse_vote_rule(require_string(j, "vote_rule"));
  if (!rule) throw ValidationError("vote_rule", "unknown vote rule");
  b.vote_rule = *rule;
  b.judges = require(j, "judges").get<std::vector<std::string>>();
  b.judge_verdicts.clear();
  for (const auto& [judge, v] : require(j, "verdicts").items()) {
    b.judge_verdicts[judge] = v.get<Verdict>();
  }
  b.note = optional_string(j, "note");
  finalize_battle(b);
  const bool stored_valid = require(j, "valid").get<bool>();
  std::optional<Verdict> stored_joint;
  if (auto it = j.find("joint"); it != j.end() && !it->is_null()) {
    stored_joint = it->get<Verdict>();
  }
  if (stored_valid != b.valid || stored_joint != b.joint) {
    throw ValidationError("joint", "stored joint verdict or validity disagrees with judges");
  }
}

void to_json(Json& j, const StageFailure& f) {
  j = Json{{"stage", f.stage},     {"meme_id", f.meme_id}, {"task_id", f.task_id},
           {"model", f.model},     {"kind", f.kind},       {"message", f.message}};
}

void from_json(const Json& j, StageFailure& f) {
  f.stage = require_string(j, "stage");
  f.meme_id = optional_string(j, "meme_id");
  f.task_id = optional_string(j, "task_id");
  f.model = optional_string(j, "model");
  f.kind = optional_string(j, "kind");
  f.message = optional_string(j, "message");
}

// ---------------------------------------------------------------------------
// Files

std::vector<Meme> load_meme_dataset(const fs::path& path) {
  if (!fs::exists(path)) throw ValidationError(path.string(), "dataset file not found");
  const fs::path base = path.parent_path();
  std::vector<Meme> memes;
  std::unordered_set<std::string> seen;
  for_each_jsonl(path, [&](std::size_t line, const Json& j) {
    const std::string where = "line " + std::to_string(line);
    Meme m;
    try {
      m = j.get<Meme>();
    } catch (const ValidationError& e) {
      throw ValidationError(where, e.what());
    }
    if (!seen.insert(m.id).second) {
      throw ValidationError(where, "duplicate meme id '" + m.id + "'");
    }
    if (m.image.kind() == ImageRef::Kind::kPath) {
      fs::path image = m.image.value();
      if (image.is_relative()) image = base / image;
      std::ifstream probe(image, std::ios::binary);
      if (!probe) {
        throw ValidationError(where, "unreadable image reference '" + m.image.value() + "'");
      }
      m.image = ImageRef::from_path(image);
    } else {
      try {
        (void)m.image.bytes();
      } catch (const std::exception& e) {
        throw ValidationError(where, std::string("unreadable inline image: ") + e.what());
      }
    }
    memes.push_back(std::move(m));
  });
  return memes;
}

std::vector<BattleRecord> read_battle_log(const fs::path& path, bool repair) {
  std::vector<BattleRecord> out;
  if (!fs::exists(path)) return out;
  const std::size_t good_end = for_each_jsonl(
      path, [&](std::size_t, const Json& j) { out.push_back(j.get<BattleRecord>()); },
      /*tolerate_torn_tail=*/true);
  if (repair && good_end < fs::file_size(path)) fs::resize_file(path, good_end);
  return out;
}

}  // namespace harmarena
