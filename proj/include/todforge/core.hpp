#pragma once

// Core value types shared across the toolkit: slot/intent schemas, belief
// states, dialogue sessions, task flows and the token-counting contract.

#include <compare>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace todforge {

// ---------------------------------------------------------------------------
// Belief values

enum class Relation { Plain, EqualTo, AtLeast, Not, OneOf };

const char* relation_name(Relation r);                       // "one_of" etc.
std::optional<Relation> relation_from_name(std::string_view);

// A slot value with an optional relation. Everything except OneOf carries
// exactly one value.
struct ValueExpr {
  Relation relation = Relation::Plain;
  std::vector<std::string> values;

  static ValueExpr plain(std::string v);
  static ValueExpr make(Relation r, std::vector<std::string> vs);

  bool operator==(const ValueExpr&) const = default;
};

// domain -> slot -> value. Inner maps are never empty in a valid state.
using SlotMap = std::map<std::string, ValueExpr>;
using BeliefState = std::map<std::string, SlotMap>;

// ---------------------------------------------------------------------------
// Schemas

struct SlotSpec {
  std::string name;
  std::vector<std::string> values;  // closed vocabulary; empty = open
  bool informable = true;
  bool requestable = false;

  bool operator==(const SlotSpec&) const = default;
};

struct DomainSchema {
  std::string domain;
  std::map<std::string, SlotSpec> slots;
  std::vector<std::string> intents;  // names owned by this domain

  bool operator==(const DomainSchema&) const = default;
};

struct IntentSchema {
  std::string intent;
  std::string domain;
  std::vector<std::string> required_slots;
  std::vector<std::string> optional_slots;
  std::vector<std::string> result_slots;

  bool operator==(const IntentSchema&) const = default;
};

// ---------------------------------------------------------------------------
// Per-turn annotations

struct ActTriple {
  std::string domain;
  std::string act;
  std::vector<std::string> slots;

  bool operator==(const ActTriple&) const = default;
};

using ActSet = std::vector<ActTriple>;

// One database row: flat attribute -> value, values normalized.
using Record = std::map<std::string, std::string>;

struct DbResultGroup {
  std::string domain;
  std::string intent;  // empty when the lookup was not intent-scoped
  long match_count = 0;
  std::vector<Record> entries;  // first min(entry_limit, match_count) rows

  bool operator==(const DbResultGroup&) const = default;
};

struct DbResult {
  std::vector<DbResultGroup> groups;

  bool operator==(const DbResult&) const = default;
};

// intents as annotated per turn: domain -> intent names
using IntentMap = std::map<std::string, std::vector<std::string>>;

struct Turn {
  std::string user;
  std::optional<std::vector<std::string>> domains;
  std::optional<IntentMap> intents;
  std::optional<BeliefState> state;
  std::optional<DbResult> db;
  std::optional<ActSet> acts;
  std::optional<std::string> delex;
  std::optional<std::string> response;

  bool operator==(const Turn&) const = default;
};

// ---------------------------------------------------------------------------
// Goals and sessions

struct DomainGoal {
  std::map<std::string, std::string> constraints;  // informable slots only
  std::vector<std::string> requestables;
  bool requires_venue = false;

  bool operator==(const DomainGoal&) const = default;
};

using Goal = std::map<std::string, DomainGoal>;

struct DialogueSession {
  std::string id;
  std::string dataset;
  std::vector<Turn> turns;
  std::optional<Goal> goal;

  bool operator==(const DialogueSession&) const = default;
};

// ---------------------------------------------------------------------------
// Task flows

enum class Task { DI, ID, DST, SAD, DelexRG, ConcRG };

const char* task_name(Task t);  // "DI", "ID", "DST", "SAD", "DelexRG", "ConcRG"
std::optional<Task> task_from_name(std::string_view name);

enum class DstFormat { Plain, Relational };

struct TaskFlowSpec {
  std::vector<Task> tasks;  // ordered, duplicate-free
  DstFormat dst_format = DstFormat::Plain;

  bool has(Task t) const;

  bool operator==(const TaskFlowSpec&) const = default;
};

// ---------------------------------------------------------------------------
// Token counting

// count("") == 0; count is deterministic and roughly subadditive:
// count(a+b) <= count(a) + count(b) + 1.
struct Tokenizer {
  std::function<std::size_t(std::string_view)> count;

  static Tokenizer byte_len();  // ceil(bytes / 4)
};

// Default proxy: ceil(byte_length / 4). Deterministic across platforms.
std::size_t default_token_count(std::string_view text);

// ---------------------------------------------------------------------------
// Text normalization for slot values: lowercase, trim, collapse whitespace;
// "dont care"/"don't care"/"do not care" -> "dontcare"; ""/"none"/
// "not mentioned" -> "". Idempotent.
std::string normalize_value(std::string_view raw);

}  // namespace todforge
