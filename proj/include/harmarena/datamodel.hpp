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

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "harmarena/jsonl.hpp"

namespace harmarena {

// ---------------------------------------------------------------------------
// Memes and images
// ---------------------------------------------------------------------------

// An image is carried by reference (a file path) or inline (a base64 data
// URL). Bytes are only materialized when a backend needs them.
class ImageRef {
 public:
  enum class Kind { kPath, kInline };

  ImageRef() = default;
  static ImageRef from_path(std::filesystem::path path);
  static ImageRef from_data_url(std::string data_url);
  // "data:..." strings are inline payloads; anything else is a path.
  static ImageRef parse(std::string_view value);

  Kind kind() const { return kind_; }
  // The path or the data URL exactly as stored.
  const std::string& value() const { return value_; }

  std::string mime_type() const;
  std::vector<std::uint8_t> bytes() const;
  // Data URL suitable for a chat-completion image content part.
  std::string data_url() const;
  // SHA-256 of the image bytes.
  std::string digest() const;

  bool operator==(const ImageRef&) const = default;

 private:
  Kind kind_ = Kind::kPath;
  std::string value_;
};

struct Meme {
  std::string id;
  ImageRef image;
  std::string text;
  std::string source;
  // Memes with no embedded text must say so explicitly.
  bool allow_empty_text = false;

  bool operator==(const Meme&) const = default;
};

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

enum class Role { kTarget, kJudge, kController };

struct ModelRef {
  std::string name;
  // Judges are never asked to weigh analyses or battles of their own family.
  // Defaults to the model name.
  std::string family;
  std::set<Role> roles;
  std::string backend;

  bool has(Role r) const { return roles.count(r) != 0; }
  bool operator==(const ModelRef&) const = default;
};

// Name-indexed set of models.
class Roster {
 public:
  Roster() = default;
  explicit Roster(std::vector<ModelRef> models);

  const ModelRef& at(std::string_view name) const;
  bool contains(std::string_view name) const;
  // Family of a model name; unknown names are their own family.
  std::string family_of(std::string_view name) const;
  const std::vector<ModelRef>& models() const { return models_; }
  std::vector<ModelRef> with_role(Role r) const;

 private:
  std::vector<ModelRef> models_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

// ---------------------------------------------------------------------------
// Contexts, tasks, analyses
// ---------------------------------------------------------------------------

enum class Relevance { kHighlyRelevant, kModeratelyRelevant, kUnrelated };

inline constexpr std::array<Relevance, 3> kAllRelevance = {
    Relevance::kHighlyRelevant, Relevance::kModeratelyRelevant,
    Relevance::kUnrelated};

std::string_view to_string(Relevance r);
// Accepts the canonical snake_case names plus a few common spellings
// ("HighlyRelevant", "high", "moderate", "unrelated", ...).
std::optional<Relevance> parse_relevance(std::string_view text);

struct InterpretiveContext {
  std::string meme_id;
  Relevance relevance = Relevance::kHighlyRelevant;
  std::string profile;

  bool operator==(const InterpretiveContext&) const = default;
};

// Deterministic and injective over (meme id, relevance): "<meme id>#<level>".
std::string canonical_task_id(std::string_view meme_id, Relevance relevance);

struct ContextTask {
  std::string task_id;
  std::string meme_id;
  InterpretiveContext context;
  std::string instruction;

  // The perspective-specific part of the target prompt: the profile followed
  // by the instruction.
  std::string task_text() const;

  bool operator==(const ContextTask&) const = default;
};

struct Analysis {
  std::string task_id;
  std::string author;
  std::string background;
  std::string reasoning;
  std::string raw;

  bool valid() const { return !background.empty() && !reasoning.empty(); }
  bool operator==(const Analysis&) const = default;
};

// Identifies one analysis in a per-meme pool.
struct AnalysisKey {
  std::string task_id;
  std::string author;

  auto operator<=>(const AnalysisKey&) const = default;
};

// ---------------------------------------------------------------------------
// Guidelines
// ---------------------------------------------------------------------------

struct TrailEntry {
  int round = 0;  // version produced by this entry
  std::string judge;
  AnalysisKey consumed;
  bool guideline_first = true;  // presentation order in the fusion prompt

  bool operator==(const TrailEntry&) const = default;
};

struct Guideline {
  std::string meme_id;
  int version = 0;
  std::string text;
  AnalysisKey seed;  // analysis adopted as version 0
  std::vector<TrailEntry> trail;

  bool operator==(const Guideline&) const = default;
};

// ---------------------------------------------------------------------------
// Verdicts and battles
// ---------------------------------------------------------------------------

enum class Dimension {
  kInstructionFollowing,
  kRedundancy,
  kCorrectness,
  kRelevance,
  kAccuracy,
  kOverall,
};

inline constexpr std::array<Dimension, 6> kAllDimensions = {
    Dimension::kInstructionFollowing, Dimension::kRedundancy,
    Dimension::kCorrectness,          Dimension::kRelevance,
    Dimension::kAccuracy,             Dimension::kOverall};

// JSON key, e.g. "instruction_following".
std::string_view dimension_key(Dimension d);
// Column title, e.g. "Instruction Following".
std::string_view dimension_title(Dimension d);
std::optional<Dimension> parse_dimension(std::string_view key);

enum class Winner { kA, kB, kTie };

std::string_view to_string(Winner w);
std::optional<Winner> parse_winner(std::string_view text);

struct Verdict {
  std::array<Winner, 6> winners{Winner::kTie, Winner::kTie, Winner::kTie,
                                Winner::kTie, Winner::kTie, Winner::kTie};

  Winner& operator[](Dimension d) { return winners[static_cast<std::size_t>(d)]; }
  Winner operator[](Dimension d) const {
    return winners[static_cast<std::size_t>(d)];
  }
  bool operator==(const Verdict&) const = default;
};

// Swaps A and B in every dimension when `swapped`; identity otherwise.
Verdict remap_verdict(const Verdict& v, bool swapped);

enum class Setting { kMemeArena, kSelfGuideline, kNoGuideline, kExternalGuideline };

std::string_view to_string(Setting s);
std::optional<Setting> parse_setting(std::string_view text);

// How a panel's per-dimension votes combine.
enum class VoteRule {
  kAbstain,    // Tie votes abstain; strict majority of A/B votes, else Tie.
  kPlurality,  // Tie is a third option; unique plurality winner, else Tie.
};

std::string_view to_string(VoteRule r);
std::optional<VoteRule> parse_vote_rule(std::string_view text);

Verdict joint_vote(std::span<const Verdict> verdicts, VoteRule rule = VoteRule::kAbstain);

inline constexpr int kBattleLogVersion = 1;

struct BattleRecord {
  std::string battle_id;
  std::string task_id;
  std::string meme_id;
  std::string model_a;
  std::string model_b;
  // When set, model_b's answer was shown first.
  bool swapped = false;
  Setting setting = Setting::kMemeArena;
  VoteRule vote_rule = VoteRule::kAbstain;
  // Judges assigned to the battle, in panel order.
  std::vector<std::string> judges;
  // Parsed verdicts, already mapped to true model identities.
  std::map<std::string, Verdict> judge_verdicts;
  // Derived by finalize_battle(); absent when no verdict was collected.
  std::optional<Verdict> joint;
  bool valid = false;
  std::string note;

  bool operator==(const BattleRecord&) const = default;
};

std::string canonical_battle_id(Setting setting, std::string_view task_id,
                                std::string_view model_a, std::string_view model_b);

// A battle is valid iff the two models differ, at least one judge was
// assigned, and every assigned judge produced a verdict.
bool validate_battle(const BattleRecord& record);

// Recomputes `joint` and `valid` from the per-judge verdicts.
void finalize_battle(BattleRecord& record);

// A failed unit of work, kept for audit.
struct StageFailure {
  std::string stage;
  std::string meme_id;
  std::string task_id;
  std::string model;
  std::string kind;
  std::string message;

  bool operator==(const StageFailure&) const = default;
};

// ---------------------------------------------------------------------------
// Ratings
// ---------------------------------------------------------------------------

enum class RatingMethod { kEloSequential, kBradleyTerry };

struct RatingTable {
  Dimension dimension = Dimension::kOverall;
  RatingMethod method = RatingMethod::kBradleyTerry;
  std::map<std::string, double> ratings;
  std::map<std::string, int> battles;
  std::map<std::string, double> win_rate;  // percent
  // Models that were requested but had no valid battles.
  std::vector<std::string> excluded;
};

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

void to_json(Json& j, const Meme& m);
void from_json(const Json& j, Meme& m);
void to_json(Json& j, const InterpretiveContext& c);
void from_json(const Json& j, InterpretiveContext& c);
void to_json(Json& j, const ContextTask& t);
void from_json(const Json& j, ContextTask& t);
void to_json(Json& j, const Analysis& a);
void from_json(const Json& j, Analysis& a);
void to_json(Json& j, const AnalysisKey& k);
void from_json(const Json& j, AnalysisKey& k);
void to_json(Json& j, const TrailEntry& e);
void from_json(const Json& j, TrailEntry& e);
void to_json(Json& j, const Guideline& g);
void from_json(const Json& j, Guideline& g);
void to_json(Json& j, const Verdict& v);
void from_json(const Json& j, Verdict& v);
// Decoding re-derives the joint verdict and validity flag and rejects records
// whose stored values disagree with the derivation.
void to_json(Json& j, const BattleRecord& b);
void from_json(const Json& j, BattleRecord& b);
void to_json(Json& j, const StageFailure& f);
void from_json(const Json& j, StageFailure& f);

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

// Loads a newline-delimited meme dataset. Relative image paths resolve
// against the dataset's directory. Errors name the offending line.
std::vector<Meme> load_meme_dataset(const std::filesystem::path& path);

// Reads a battle log. A torn final line (interrupted append) is dropped and,
// when `repair` is set, truncated from the file.
std::vector<BattleRecord> read_battle_log(const std::filesystem::path& path,
                                          bool repair = false);

template <typename T>
std::vector<T> read_jsonl_as(const std::filesystem::path& path) {
  std::vector<T> out;
  for_each_jsonl(path, [&](std::size_t, const Json& j) { out.push_back(j.get<T>()); });
  return out;
}

template <typename T>
void write_jsonl_atomic(const std::filesystem::path& path, const std::vector<T>& items) {
  std::vector<std::string> lines;
  lines.reserve(items.size());
  for (const auto& item : items) lines.push_back(Json(item).dump());
  write_lines_atomic(path, lines);
}

}  // namespace harmarena
