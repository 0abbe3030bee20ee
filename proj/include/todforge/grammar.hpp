#pragma once

// The line-oriented prompt grammar. Every structure lives on one line
// under a fixed tag ("TAG: <content>\n"). Serializers here are the single
// canonical rendering used by the corpus builder, the session runtime and
// the gold-echo backend; the parsers are total (strict grammar, any
// violation yields the empty structure, never an exception).

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "todforge/core.hpp"

namespace todforge {

enum class Tag {
  Instructions,
  User,
  Domains,
  DomainSchema,
  Intents,
  IntentSchema,
  State,
  Db,
  Acts,
  Delex,
  Response,
};

const char* tag_name(Tag t);  // "USER", "DOMAIN_SCHEMA", ...
std::optional<Tag> tag_from_name(std::string_view name);

// Only recognition/generation targets carry loss in training samples.
bool tag_supervisable(Tag t);

// tag for a task's output line (DI -> Domains, ... ConcRG -> Response)
Tag tag_for_task(Task t);

// "TAG: <content>\n"
std::string render_line(Tag t, std::string_view content);

// --------------------------------------------------------------------------
// Serializers (compact JSON, keys sorted; acts use the bracket grammar).

std::string serialize_domains(const std::vector<std::string>& domains);
std::string serialize_intents(const IntentMap& intents);
std::string serialize_value_expr(const ValueExpr& v);
std::string serialize_state(const BeliefState& state, DstFormat fmt);
std::string serialize_acts(const ActSet& acts);
std::string serialize_domain_schema(const DomainSchema& schema);
std::string serialize_intent_schema(const IntentSchema& schema);

// "one_of(a, b)" etc. back into a ValueExpr; bare text becomes Plain.
ValueExpr parse_value_expr(std::string_view text);

// --------------------------------------------------------------------------
// Total parsers. Strict shape checks; empty structure on any violation.
// `ok` (optional) reports whether the text was well-formed.

std::vector<std::string> parse_domains(std::string_view text, bool* ok = nullptr);
IntentMap parse_intents(std::string_view text, bool* ok = nullptr);
BeliefState parse_state(std::string_view text, DstFormat fmt, bool* ok = nullptr);
ActSet parse_acts(std::string_view text, bool* ok = nullptr);

}  // namespace todforge
