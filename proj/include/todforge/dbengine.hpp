#pragma once

// Constraint matching over flat attribute/value tables.

#include <map>
#include <string>
#include <vector>

#include "todforge/core.hpp"

namespace todforge::db {

struct DbTable {
  std::string domain;
  std::vector<Record> records;  // shared key set, values normalized
};

// True when the record satisfies the constraint for `slot`. Constraints on
// attributes the table does not carry are handled by the caller (query skips
// them); this predicate assumes the attribute exists.
// plain/equal_to: normalized equality ("dontcare" always holds);
// at_least: numeric >= on leading integers (TypeMismatch on non-numeric);
// not: inequality; one_of: membership.
bool matches(const Record& record, const std::string& slot, const ValueExpr& value);

// Filter preserving record order. Constraint slots absent from the table's
// attribute set are ignored. Throws TypeMismatch (see matches).
std::vector<Record> query(const DbTable& table, const SlotMap& constraints);

// Like query, but constraints that raise TypeMismatch are dropped (their
// slot names appended to `dropped` when given) instead of propagating.
std::vector<Record> query_lenient(const DbTable& table, const SlotMap& constraints,
                                  std::vector<std::string>* dropped = nullptr);

// One context line over full query results, domains sorted by name and
// joined by "; ": "<domain>: <count>" plus, when entry_limit > 0, the first
// min(entry_limit, count) records as a JSON array. Empty input -> "".
std::string render_db_line(const std::map<std::string, std::vector<Record>>& results,
                           int entry_limit);

// Same line shape from already-bounded result groups (labels carry the
// intent for intent-scoped lookups: "<domain>/<intent>").
std::string render_db_line(const DbResult& result);

}  // namespace todforge::db
