#include "todforge/dbengine.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <optional>

#include "todforge/errors.hpp"

namespace todforge::db {

using nlohmann::json;

namespace {

// Leading integer with optional sign; nullopt when the text has none.
std::optional<long> leading_int(const std::string& text) {
  std::size_t i = 0;
  while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
  std::size_t start = i;
  if (i < text.size() && (text[i] == '-' || text[i] == '+')) ++i;
  std::size_t digits = i;
  while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
  if (i == digits) return std::nullopt;
  return std::stol(text.substr(start, i - start));
}

bool is_dontcare(const ValueExpr& v) {
  return (v.relation == Relation::Plain || v.relation == Relation::EqualTo) &&
         v.values.size() == 1 && v.values[0] == "dontcare";
}

std::string entries_json(const std::vector<Record>& entries) {
  json arr = json::array();
  for (const Record& r : entries) arr.push_back(r);
  return arr.dump();
}

void append_group(std::string& out, const std::string& label, long count,
                  const std::vector<Record>& entries) {
  if (!out.empty()) out += "; ";
  out += label;
  out += ": ";
  out += std::to_string(count);
  if (!entries.empty()) {
    out += ' ';
    out += entries_json(entries);
  }
}

}  // namespace

bool matches(const Record& record, const std::string& slot, const ValueExpr& value) {
  if (is_dontcare(value)) return true;
  const std::string& field = record.at(slot);
  switch (value.relation) {
    case Relation::Plain:
    case Relation::EqualTo:
      return !value.values.empty() &&
             normalize_value(field) == normalize_value(value.values[0]);
    case Relation::AtLeast: {
      auto lhs = leading_int(field);
      if (!lhs)
        throw TypeMismatch("at_least on non-numeric field '" + slot + "' = '" +
                           field + "'");
      auto rhs = value.values.empty() ? std::nullopt : leading_int(value.values[0]);
      if (!rhs)
        throw TypeMismatch("at_least with non-numeric bound on '" + slot + "'");
      return *lhs >= *rhs;
    }
    case Relation::Not:
      return value.values.empty() ||
             normalize_value(field) != normalize_value(value.values[0]);
    case Relation::OneOf:
      return std::any_of(value.values.begin(), value.values.end(),
                         [&](const std::string& v) {
                           return normalize_value(field) == normalize_value(v);
                         });
  }
  return false;
}

std::vector<Record> query(const DbTable& table, const SlotMap& constraints) {
  std::vector<Record> out;
  for (const Record& r : table.records) {
    bool ok = true;
    for (const auto& [slot, value] : constraints) {
      if (!r.count(slot)) continue;  // unknown constraint slot: ignored
      if (!matches(r, slot, value)) {
        ok = false;
        break;
      }
    }
    if (ok) out.push_back(r);
  }
  return out;
}

std::vector<Record> query_lenient(const DbTable& table, const SlotMap& constraints,
                                  std::vector<std::string>* dropped) {
  SlotMap safe;
  for (const auto& [slot, value] : constraints) {
    try {
      query(table, SlotMap{{slot, value}});
      safe.emplace(slot, value);
    } catch (const TypeMismatch&) {
      if (dropped) dropped->push_back(slot);
    }
  }
  return query(table, safe);
}

std::string render_db_line(const std::map<std::string, std::vector<Record>>& results,
                           int entry_limit) {
  std::string out;
  for (const auto& [domain, records] : results) {  // std::map: sorted by name
    std::vector<Record> shown;
    if (entry_limit > 0) {
      std::size_t n = std::min<std::size_t>(entry_limit, records.size());
      shown.assign(records.begin(), records.begin() + n);
    }
    append_group(out, domain, static_cast<long>(records.size()), shown);
  }
  return out;
}

std::string render_db_line(const DbResult& result) {
  std::vector<const DbResultGroup*> groups;
  for (const DbResultGroup& g : result.groups) groups.push_back(&g);
  std::sort(groups.begin(), groups.end(), [](auto* a, auto* b) {
    return std::tie(a->domain, a->intent) < std::tie(b->domain, b->intent);
  });
  std::string out;
  for (auto* g : groups) {
    std::string label = g->intent.empty() ? g->domain : g->domain + "/" + g->intent;
    append_group(out, label, g->match_count, g->entries);
  }
  return out;
}

}  // namespace todforge::db
