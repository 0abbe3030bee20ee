#include "todforge/grammar.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <sstream>

namespace todforge {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<Tag, const char*>, 11> kTagNames{{
    {Tag::Instructions, "INSTRUCTIONS"},
    {Tag::User, "USER"},
    {Tag::Domains, "DOMAINS"},
    {Tag::DomainSchema, "DOMAIN_SCHEMA"},
    {Tag::Intents, "INTENTS"},
    {Tag::IntentSchema, "INTENT_SCHEMA"},
    {Tag::State, "STATE"},
    {Tag::Db, "DB"},
    {Tag::Acts, "ACTS"},
    {Tag::Delex, "DELEX"},
    {Tag::Response, "RESPONSE"},
}};

bool is_bracket_token(std::string_view tok) {
  if (tok.size() < 3 || tok.front() != '[' || tok.back() != ']') return false;
  for (char c : tok.substr(1, tok.size() - 2))
    if (c == '[' || c == ']') return false;
  return true;
}

std::vector<std::string> split_ws(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ' ' || c == '\t') {
      if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

}  // namespace

const char* tag_name(Tag t) {
  for (auto& [tag, name] : kTagNames)
    if (tag == t) return name;
  return "USER";
}

std::optional<Tag> tag_from_name(std::string_view name) {
  for (auto& [tag, n] : kTagNames)
    if (name == n) return tag;
  return std::nullopt;
}

bool tag_supervisable(Tag t) {
  switch (t) {
    case Tag::Domains:
    case Tag::Intents:
    case Tag::State:
    case Tag::Acts:
    case Tag::Delex:
    case Tag::Response:
      return true;
    default:
      return false;
  }
}

Tag tag_for_task(Task t) {
  switch (t) {
    case Task::DI: return Tag::Domains;
    case Task::ID: return Tag::Intents;
    case Task::DST: return Tag::State;
    case Task::SAD: return Tag::Acts;
    case Task::DelexRG: return Tag::Delex;
    case Task::ConcRG: return Tag::Response;
  }
  return Tag::Domains;
}

std::string render_line(Tag t, std::string_view content) {
  std::string out(tag_name(t));
  out += ": ";
  out += content;
  out += '\n';
  return out;
}

// --------------------------------------------------------------------------
// Serializers

std::string serialize_domains(const std::vector<std::string>& domains) {
  return json(domains).dump();
}

std::string serialize_intents(const IntentMap& intents) {
  json j = json::object();
  for (auto& [domain, names] : intents) j[domain] = names;
  return j.dump();
}

std::string serialize_value_expr(const ValueExpr& v) {
  if (v.relation == Relation::Plain) return v.values.empty() ? "" : v.values[0];
  std::string out = relation_name(v.relation);
  out += '(';
  for (std::size_t i = 0; i < v.values.size(); ++i) {
    if (i) out += ", ";
    out += v.values[i];
  }
  out += ')';
  return out;
}

std::string serialize_state(const BeliefState& state, DstFormat fmt) {
  json j = json::object();
  for (auto& [domain, slots] : state) {
    json d = json::object();
    for (auto& [slot, value] : slots) {
      if (fmt == DstFormat::Plain && value.relation == Relation::Plain)
        d[slot] = value.values.empty() ? "" : value.values[0];
      else
        d[slot] = serialize_value_expr(value);
    }
    j[domain] = std::move(d);
  }
  return j.dump();
}

std::string serialize_acts(const ActSet& acts) {
  std::string out;
  const std::string* prev_domain = nullptr;
  for (const ActTriple& a : acts) {
    if (!prev_domain || *prev_domain != a.domain) {
      if (prev_domain) out += " | ";
      out += '[';
      out += a.domain;
      out += ']';
      prev_domain = &a.domain;
    }
    out += " [";
    out += a.act;
    out += ']';
    for (const std::string& s : a.slots) {
      out += ' ';
      out += s;
    }
  }
  return out;
}

std::string serialize_domain_schema(const DomainSchema& schema) {
  json slots = json::object();
  for (auto& [name, spec] : schema.slots) {
    slots[name] = {{"informable", spec.informable},
                   {"requestable", spec.requestable},
                   {"values", spec.values}};
  }
  json j = {{"domain", schema.domain},
            {"intents", schema.intents},
            {"slots", std::move(slots)}};
  return j.dump();
}

std::string serialize_intent_schema(const IntentSchema& schema) {
  json j = {{"domain", schema.domain},
            {"intent", schema.intent},
            {"optional_slots", schema.optional_slots},
            {"required_slots", schema.required_slots},
            {"result_slots", schema.result_slots}};
  return j.dump();
}

ValueExpr parse_value_expr(std::string_view text) {
  auto open = text.find('(');
  if (open != std::string_view::npos && !text.empty() && text.back() == ')') {
    auto rel = relation_from_name(text.substr(0, open));
    if (rel && *rel != Relation::Plain) {
      std::string_view inner = text.substr(open + 1, text.size() - open - 2);
      std::vector<std::string> values;
      std::size_t pos = 0;
      while (pos <= inner.size()) {
        auto next = inner.find(", ", pos);
        if (next == std::string_view::npos) {
          values.emplace_back(inner.substr(pos));
          break;
        }
        values.emplace_back(inner.substr(pos, next - pos));
        pos = next + 2;
      }
      return ValueExpr::make(*rel, std::move(values));
    }
  }
  return ValueExpr::plain(std::string(text));
}

// --------------------------------------------------------------------------
// Total parsers

namespace {

void set_ok(bool* ok, bool value) {
  if (ok) *ok = value;
}

}  // namespace

std::vector<std::string> parse_domains(std::string_view text, bool* ok) {
  set_ok(ok, false);
  json j = json::parse(text, nullptr, false);
  if (!j.is_array()) return {};
  std::vector<std::string> out;
  for (auto& el : j) {
    if (!el.is_string()) return {};
    out.push_back(el.get<std::string>());
  }
  set_ok(ok, true);
  return out;
}

IntentMap parse_intents(std::string_view text, bool* ok) {
  set_ok(ok, false);
  json j = json::parse(text, nullptr, false);
  if (!j.is_object()) return {};
  IntentMap out;
  for (auto& [domain, names] : j.items()) {
    if (!names.is_array()) return {};
    std::vector<std::string> list;
    for (auto& el : names) {
      if (!el.is_string()) return {};
      list.push_back(el.get<std::string>());
    }
    out[domain] = std::move(list);
  }
  set_ok(ok, true);
  return out;
}

BeliefState parse_state(std::string_view text, DstFormat fmt, bool* ok) {
  set_ok(ok, false);
  json j = json::parse(text, nullptr, false);
  if (!j.is_object()) return {};
  BeliefState out;
  for (auto& [domain, slots] : j.items()) {
    if (!slots.is_object() || slots.empty()) return {};
    SlotMap m;
    for (auto& [slot, value] : slots.items()) {
      if (!value.is_string()) return {};
      ValueExpr expr = fmt == DstFormat::Relational
                           ? parse_value_expr(value.get<std::string>())
                           : ValueExpr::plain(value.get<std::string>());
      std::vector<std::string> vals;
      for (const std::string& v : expr.values) {
        std::string n = normalize_value(v);
        if (!n.empty()) vals.push_back(std::move(n));
      }
      if (vals.empty()) continue;  // value normalized away, drop the slot
      m[slot] = ValueExpr::make(expr.relation, std::move(vals));
    }
    if (!m.empty()) out[domain] = std::move(m);
  }
  set_ok(ok, true);
  return out;
}

ActSet parse_acts(std::string_view text, bool* ok) {
  set_ok(ok, true);
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t'))
    text.remove_prefix(1);
  if (text.empty()) return {};  // no acts is a valid (empty) decision
  set_ok(ok, false);
  ActSet out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto next = text.find(" | ", pos);
    std::string_view group = next == std::string_view::npos
                                 ? text.substr(pos)
                                 : text.substr(pos, next - pos);
    std::vector<std::string> toks = split_ws(group);
    if (toks.empty() || !is_bracket_token(toks[0])) return {};
    std::string domain = toks[0].substr(1, toks[0].size() - 2);
    std::size_t i = 1;
    if (i >= toks.size() || !is_bracket_token(toks[i])) return {};  // need an act
    while (i < toks.size()) {
      if (!is_bracket_token(toks[i])) return {};
      ActTriple triple{domain, toks[i].substr(1, toks[i].size() - 2), {}};
      ++i;
      while (i < toks.size() && !is_bracket_token(toks[i]))
        triple.slots.push_back(toks[i++]);
      out.push_back(std::move(triple));
    }
    if (next == std::string_view::npos) break;
    pos = next + 3;
  }
  set_ok(ok, true);
  return out;
}

}  // namespace todforge
