#include "todforge/core.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace todforge {

const char* relation_name(Relation r) {
  switch (r) {
    case Relation::Plain: return "plain";
    case Relation::EqualTo: return "equal_to";
    case Relation::AtLeast: return "at_least";
    case Relation::Not: return "not";
    case Relation::OneOf: return "one_of";
  }
  return "plain";
}

std::optional<Relation> relation_from_name(std::string_view name) {
  if (name == "plain") return Relation::Plain;
  if (name == "equal_to") return Relation::EqualTo;
  if (name == "at_least") return Relation::AtLeast;
  if (name == "not") return Relation::Not;
  if (name == "one_of") return Relation::OneOf;
  return std::nullopt;
}

ValueExpr ValueExpr::plain(std::string v) {
  return ValueExpr{Relation::Plain, {std::move(v)}};
}

ValueExpr ValueExpr::make(Relation r, std::vector<std::string> vs) {
  return ValueExpr{r, std::move(vs)};
}

const char* task_name(Task t) {
  switch (t) {
    case Task::DI: return "DI";
    case Task::ID: return "ID";
    case Task::DST: return "DST";
    case Task::SAD: return "SAD";
    case Task::DelexRG: return "DelexRG";
    case Task::ConcRG: return "ConcRG";
  }
  return "DI";
}

std::optional<Task> task_from_name(std::string_view name) {
  static constexpr std::array<Task, 6> all{Task::DI,  Task::ID,      Task::DST,
                                           Task::SAD, Task::DelexRG, Task::ConcRG};
  for (Task t : all)
    if (name == task_name(t)) return t;
  return std::nullopt;
}

bool TaskFlowSpec::has(Task t) const {
  return std::find(tasks.begin(), tasks.end(), t) != tasks.end();
}

std::size_t default_token_count(std::string_view text) {
  return (text.size() + 3) / 4;
}

Tokenizer Tokenizer::byte_len() {
  return Tokenizer{[](std::string_view s) { return default_token_count(s); }};
}

std::string normalize_value(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (unsigned char c : raw) {
    if (std::isspace(c)) {
      if (!out.empty()) pending_space = true;
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  if (out.empty() || out == "none" || out == "not mentioned") return "";
  if (out == "dont care" || out == "don't care" || out == "do not care")
    return "dontcare";
  return out;
}

}  // namespace todforge
