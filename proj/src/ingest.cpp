#include "todforge/ingest.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "todforge/dbengine.hpp"
#include "todforge/errors.hpp"
#include "todforge/grammar.hpp"

namespace todforge::ingest {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// File helpers

std::string read_file(const fs::path& p) {
  std::error_code ec;
  if (!fs::exists(p, ec)) throw MissingFile(p.string());
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed for " + p.string());
  return ss.str();
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + p.string() + " for writing");
  out << content;
  out.flush();
  if (!out) throw IoError("write failed for " + p.string());
}

long line_of_offset(const std::string& text, std::size_t byte) {
  long line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

json parse_json_file(const fs::path& p) {
  std::string text = read_file(p);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(p.filename().string() + ": " + e.what(),
                      line_of_offset(text, e.byte));
  }
}

// ---------------------------------------------------------------------------
// JSON <-> value conversions. Loaders throw SchemaViolation tagged with the
// session id on shape problems.

struct Shape {
  const std::string& session_id;

  [[noreturn]] void fail(const std::string& detail) const {
    throw SchemaViolation(session_id, detail);
  }
  const json& object(const json& j, const char* what) const {
    if (!j.is_object()) fail(std::string(what) + " must be a JSON object");
    return j;
  }
  const json& array(const json& j, const char* what) const {
    if (!j.is_array()) fail(std::string(what) + " must be a JSON array");
    return j;
  }
  std::string str(const json& j, const char* what) const {
    if (!j.is_string()) fail(std::string(what) + " must be a string");
    return j.get<std::string>();
  }
  std::vector<std::string> str_list(const json& j, const char* what) const {
    std::vector<std::string> out;
    for (auto& el : array(j, what)) out.push_back(str(el, what));
    return out;
  }
};

ValueExpr normalized_expr(const std::string& raw) {
  ValueExpr e = parse_value_expr(raw);
  std::vector<std::string> vals;
  for (const std::string& v : e.values) {
    std::string n = normalize_value(v);
    if (!n.empty()) vals.push_back(std::move(n));
  }
  return ValueExpr::make(e.relation, std::move(vals));
}

BeliefState state_from_json(const json& j, const Shape& sh) {
  BeliefState out;
  for (auto& [domain, slots] : sh.object(j, "state").items()) {
    SlotMap m;
    for (auto& [slot, value] : sh.object(slots, "state domain").items()) {
      ValueExpr e = normalized_expr(sh.str(value, "state value"));
      if (!e.values.empty()) m[slot] = std::move(e);
    }
    if (!m.empty()) out[domain] = std::move(m);
  }
  return out;
}

json state_to_json(const BeliefState& s) {
  json j = json::object();
  for (auto& [domain, slots] : s) {
    json m = json::object();
    for (auto& [slot, value] : slots)
      m[slot] = value.relation == Relation::Plain
                    ? (value.values.empty() ? "" : value.values[0])
                    : serialize_value_expr(value);
    j[domain] = std::move(m);
  }
  return j;
}

Record record_from_json(const json& j, const Shape& sh) {
  Record r;
  for (auto& [key, value] : sh.object(j, "db record").items())
    r[key] = normalize_value(sh.str(value, "db record value"));
  return r;
}

DbResult db_from_json(const json& j, const Shape& sh) {
  DbResult out;
  for (auto& el : sh.array(j, "db")) {
    const json& g = sh.object(el, "db group");
    DbResultGroup group;
    if (!g.contains("domain") || !g.contains("match_count"))
      sh.fail("db group needs domain and match_count");
    group.domain = sh.str(g["domain"], "db group domain");
    if (g.contains("intent")) group.intent = sh.str(g["intent"], "db group intent");
    if (!g["match_count"].is_number_integer())
      sh.fail("db group match_count must be an integer");
    group.match_count = g["match_count"].get<long>();
    if (g.contains("entries"))
      for (auto& rec : sh.array(g["entries"], "db entries"))
        group.entries.push_back(record_from_json(rec, sh));
    out.groups.push_back(std::move(group));
  }
  return out;
}

json db_to_json(const DbResult& r) {
  json arr = json::array();
  for (const DbResultGroup& g : r.groups) {
    json jg = {{"domain", g.domain}, {"match_count", g.match_count}};
    if (!g.intent.empty()) jg["intent"] = g.intent;
    json entries = json::array();
    for (const Record& rec : g.entries) entries.push_back(rec);
    jg["entries"] = std::move(entries);
    arr.push_back(std::move(jg));
  }
  return arr;
}

Goal goal_from_json(const json& j, const Shape& sh) {
  Goal out;
  for (auto& [domain, spec] : sh.object(j, "goal").items()) {
    const json& g = sh.object(spec, "goal domain");
    DomainGoal dg;
    if (g.contains("constraints"))
      for (auto& [slot, value] : sh.object(g["constraints"], "goal constraints").items())
        dg.constraints[slot] = normalize_value(sh.str(value, "goal constraint value"));
    if (g.contains("requestables"))
      dg.requestables = sh.str_list(g["requestables"], "goal requestables");
    if (g.contains("requires_venue")) {
      if (!g["requires_venue"].is_boolean()) sh.fail("requires_venue must be a bool");
      dg.requires_venue = g["requires_venue"].get<bool>();
    }
    out[domain] = std::move(dg);
  }
  return out;
}

json goal_to_json(const Goal& goal) {
  json j = json::object();
  for (auto& [domain, g] : goal) {
    j[domain] = {{"constraints", g.constraints},
                 {"requestables", g.requestables},
                 {"requires_venue", g.requires_venue}};
  }
  return j;
}

IntentMap intents_from_json(const json& j, const Shape& sh) {
  IntentMap out;
  for (auto& [domain, names] : sh.object(j, "intents").items())
    out[domain] = sh.str_list(names, "intent names");
  return out;
}

Turn turn_from_json(const json& j, const Shape& sh) {
  Turn t;
  const json& o = sh.object(j, "turn");
  if (!o.contains("user")) sh.fail("turn missing user");
  t.user = sh.str(o["user"], "user");
  if (o.contains("domains")) t.domains = sh.str_list(o["domains"], "domains");
  if (o.contains("intents")) t.intents = intents_from_json(o["intents"], sh);
  if (o.contains("state")) t.state = state_from_json(o["state"], sh);
  if (o.contains("db")) t.db = db_from_json(o["db"], sh);
  if (o.contains("acts")) t.acts = parse_acts(sh.str(o["acts"], "acts"));
  if (o.contains("delex")) t.delex = sh.str(o["delex"], "delex");
  if (o.contains("response")) t.response = sh.str(o["response"], "response");
  return t;
}

json turn_to_json(const Turn& t) {
  json j = {{"user", t.user}};
  if (t.domains) j["domains"] = *t.domains;
  if (t.intents) {
    json m = json::object();
    for (auto& [d, names] : *t.intents) m[d] = names;
    j["intents"] = std::move(m);
  }
  if (t.state) j["state"] = state_to_json(*t.state);
  if (t.db) j["db"] = db_to_json(*t.db);
  if (t.acts) j["acts"] = serialize_acts(*t.acts);
  if (t.delex) j["delex"] = *t.delex;
  if (t.response) j["response"] = *t.response;
  return j;
}

DialogueSession session_from_json(const json& j, long line) {
  if (!j.is_object() || !j.contains("id") || !j["id"].is_string())
    throw FormatError("session line missing string id", line);
  DialogueSession s;
  s.id = j["id"].get<std::string>();
  Shape sh{s.id};
  if (j.contains("dataset")) s.dataset = sh.str(j["dataset"], "dataset");
  if (!j.contains("turns")) sh.fail("session missing turns");
  for (auto& t : sh.array(j["turns"], "turns")) s.turns.push_back(turn_from_json(t, sh));
  if (j.contains("goal")) s.goal = goal_from_json(j["goal"], sh);
  return s;
}

json session_to_json(const DialogueSession& s) {
  json j = {{"dataset", s.dataset}, {"id", s.id}};
  if (s.goal) j["goal"] = goal_to_json(*s.goal);
  json turns = json::array();
  for (const Turn& t : s.turns) turns.push_back(turn_to_json(t));
  j["turns"] = std::move(turns);
  return j;
}

}  // namespace

// ---------------------------------------------------------------------------
// Validation

void validate_bundle(const CorpusBundle& b) {
  std::set<Task> seen_tasks;
  for (Task t : b.flow.tasks)
    if (!seen_tasks.insert(t).second)
      throw SchemaViolation("", std::string("duplicate task in flow: ") + task_name(t));
  if (b.flow.dst_format == DstFormat::Relational && !b.flow.has(Task::DST))
    throw SchemaViolation("", "relational dst_format requires DST in the flow");

  for (auto& [name, schema] : b.schemas) {
    if (name.empty() || schema.domain != name)
      throw SchemaViolation("", "domain schema key/name mismatch for '" + name + "'");
    for (auto& [sname, spec] : schema.slots) {
      if (sname.empty() || spec.name != sname)
        throw SchemaViolation("", "slot key/name mismatch in domain " + name);
      std::set<std::string> vals;
      for (const std::string& v : spec.values)
        if (!vals.insert(normalize_value(v)).second)
          throw SchemaViolation("", "duplicate normalized value '" + v + "' for slot " +
                                        name + "." + sname);
    }
  }

  for (auto& [iname, ischema] : b.intent_schemas) {
    if (ischema.intent != iname)
      throw SchemaViolation("", "intent schema key/name mismatch for '" + iname + "'");
    auto dom = b.schemas.find(ischema.domain);
    if (dom == b.schemas.end())
      throw SchemaViolation("", "intent " + iname + " references unknown domain " +
                                    ischema.domain);
    if (std::find(dom->second.intents.begin(), dom->second.intents.end(), iname) ==
        dom->second.intents.end())
      throw SchemaViolation("", "intent " + iname + " not listed by domain " +
                                    ischema.domain);
    std::set<std::string> required(ischema.required_slots.begin(),
                                   ischema.required_slots.end());
    for (const std::string& s : ischema.optional_slots)
      if (required.count(s))
        throw SchemaViolation("", "intent " + iname + " slot '" + s +
                                      "' both required and optional");
    auto check_slot = [&](const std::string& s) {
      if (!dom->second.slots.count(s))
        throw SchemaViolation("", "intent " + iname + " references unknown slot " + s);
    };
    for (auto& s : ischema.required_slots) check_slot(s);
    for (auto& s : ischema.optional_slots) check_slot(s);
    for (auto& s : ischema.result_slots) check_slot(s);
  }

  for (auto& [domain, records] : b.databases) {
    if (!b.schemas.count(domain))
      throw SchemaViolation("", "database for unknown domain " + domain);
    if (records.empty()) continue;
    auto keys_of = [](const Record& r) {
      std::vector<std::string> k;
      for (auto& [key, value] : r) k.push_back(key);
      return k;
    };
    auto first_keys = keys_of(records[0]);
    for (const Record& r : records)
      if (keys_of(r) != first_keys)
        throw SchemaViolation("", "ragged record keys in database " + domain);
  }

  auto known_domain = [&](const std::string& id, const std::string& d) {
    if (!b.schemas.count(d))
      throw SchemaViolation(id, "unknown domain '" + d + "'");
  };

  std::set<std::string> ids;
  for (const DialogueSession& s : b.sessions) {
    if (s.id.empty()) throw SchemaViolation(s.id, "empty session id");
    if (!ids.insert(s.id).second) throw SchemaViolation(s.id, "duplicate session id");
    if (s.turns.empty()) throw SchemaViolation(s.id, "session has no turns");
    for (const Turn& t : s.turns) {
      if (t.user.empty()) throw SchemaViolation(s.id, "empty user message");
      if (t.domains)
        for (auto& d : *t.domains) known_domain(s.id, d);
      if (t.intents)
        for (auto& [d, names] : *t.intents) {
          known_domain(s.id, d);
          for (auto& n : names) {
            auto& owned = b.schemas.at(d).intents;
            if (std::find(owned.begin(), owned.end(), n) == owned.end())
              throw SchemaViolation(s.id, "intent '" + n + "' not owned by domain " + d);
          }
        }
      if (t.state)
        for (auto& [d, slots] : *t.state) {
          known_domain(s.id, d);
          if (slots.empty()) throw SchemaViolation(s.id, "empty state mapping for " + d);
        }
      if (t.acts)
        for (auto& a : *t.acts) known_domain(s.id, a.domain);
      if (t.db)
        for (auto& g : t.db->groups) {
          known_domain(s.id, g.domain);
          if (static_cast<long>(g.entries.size()) > g.match_count)
            throw SchemaViolation(s.id, "db entries exceed match_count");
        }
    }
    if (s.goal)
      for (auto& [d, g] : *s.goal) {
        known_domain(s.id, d);
        for (auto& [slot, value] : g.constraints) {
          auto& slots = b.schemas.at(d).slots;
          auto it = slots.find(slot);
          if (it == slots.end())
            throw SchemaViolation(s.id, "goal constraint on unknown slot " + slot);
          if (!it->second.informable)
            throw SchemaViolation(s.id, "goal constraint on non-informable slot " + slot);
        }
      }
  }
}

// ---------------------------------------------------------------------------
// Bundle IO

CorpusBundle read_bundle(const fs::path& dir) {
  CorpusBundle b;

  std::string sessions_text = read_file(dir / "sessions.jsonl");
  std::istringstream lines(sessions_text);
  std::string line;
  long line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw FormatError("sessions.jsonl: invalid JSON", line_no);
    b.sessions.push_back(session_from_json(j, line_no));
  }

  json schemas = parse_json_file(dir / "schemas.json");
  Shape sh{std::string()};
  for (auto& [domain, spec] : sh.object(schemas, "schemas").items()) {
    DomainSchema ds;
    ds.domain = domain;
    const json& o = sh.object(spec, "domain schema");
    if (o.contains("intents")) ds.intents = sh.str_list(o["intents"], "intents");
    if (o.contains("slots"))
      for (auto& [sname, sspec] : sh.object(o["slots"], "slots").items()) {
        const json& so = sh.object(sspec, "slot spec");
        SlotSpec slot;
        slot.name = sname;
        if (so.contains("values")) {
          slot.values = sh.str_list(so["values"], "slot values");
          for (std::string& v : slot.values) v = normalize_value(v);
        }
        if (so.contains("informable")) slot.informable = so["informable"].get<bool>();
        if (so.contains("requestable")) slot.requestable = so["requestable"].get<bool>();
        ds.slots[sname] = std::move(slot);
      }
    b.schemas[domain] = std::move(ds);
  }

  json intents = parse_json_file(dir / "intents.json");
  for (auto& [name, spec] : sh.object(intents, "intents.json").items()) {
    const json& o = sh.object(spec, "intent schema");
    IntentSchema is;
    is.intent = name;
    if (!o.contains("domain")) throw SchemaViolation("", "intent missing domain: " + name);
    is.domain = sh.str(o["domain"], "intent domain");
    if (o.contains("required_slots"))
      is.required_slots = sh.str_list(o["required_slots"], "required_slots");
    if (o.contains("optional_slots"))
      is.optional_slots = sh.str_list(o["optional_slots"], "optional_slots");
    if (o.contains("result_slots"))
      is.result_slots = sh.str_list(o["result_slots"], "result_slots");
    b.intent_schemas[name] = std::move(is);
  }

  json flow = parse_json_file(dir / "flow.json");
  const json& fo = sh.object(flow, "flow.json");
  if (!fo.contains("tasks")) throw SchemaViolation("", "flow.json missing tasks");
  for (auto& name : sh.str_list(fo["tasks"], "flow tasks")) {
    auto t = task_from_name(name);
    if (!t) throw SchemaViolation("", "unknown task '" + name + "' in flow.json");
    b.flow.tasks.push_back(*t);
  }
  if (fo.contains("dst_format")) {
    std::string f = sh.str(fo["dst_format"], "dst_format");
    if (f == "plain")
      b.flow.dst_format = DstFormat::Plain;
    else if (f == "relational")
      b.flow.dst_format = DstFormat::Relational;
    else
      throw SchemaViolation("", "unknown dst_format '" + f + "'");
  }

  fs::path db_dir = dir / "db";
  std::error_code ec;
  if (fs::is_directory(db_dir, ec)) {
    std::vector<fs::path> files;
    for (auto& entry : fs::directory_iterator(db_dir))
      if (entry.path().extension() == ".json") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const fs::path& f : files) {
      json table = parse_json_file(f);
      std::vector<Record> records;
      for (auto& rec : sh.array(table, "db table")) records.push_back(record_from_json(rec, sh));
      b.databases[f.stem().string()] = std::move(records);
    }
  }

  validate_bundle(b);
  return b;
}

void write_bundle(const CorpusBundle& b, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  std::vector<const DialogueSession*> ordered;
  for (const DialogueSession& s : b.sessions) ordered.push_back(&s);
  std::sort(ordered.begin(), ordered.end(),
            [](auto* a, auto* c) { return a->id < c->id; });
  std::string lines;
  for (auto* s : ordered) {
    lines += session_to_json(*s).dump();
    lines += '\n';
  }
  write_file(dir / "sessions.jsonl", lines);

  json schemas = json::object();
  for (auto& [domain, schema] : b.schemas) {
    json slots = json::object();
    for (auto& [sname, spec] : schema.slots)
      slots[sname] = {{"informable", spec.informable},
                      {"requestable", spec.requestable},
                      {"values", spec.values}};
    schemas[domain] = {{"intents", schema.intents}, {"slots", std::move(slots)}};
  }
  write_file(dir / "schemas.json", schemas.dump(2) + "\n");

  json intents = json::object();
  for (auto& [name, is] : b.intent_schemas)
    intents[name] = {{"domain", is.domain},
                     {"optional_slots", is.optional_slots},
                     {"required_slots", is.required_slots},
                     {"result_slots", is.result_slots}};
  write_file(dir / "intents.json", intents.dump(2) + "\n");

  json flow = json::object();
  json tasks = json::array();
  for (Task t : b.flow.tasks) tasks.push_back(task_name(t));
  flow["dst_format"] = b.flow.dst_format == DstFormat::Plain ? "plain" : "relational";
  flow["tasks"] = std::move(tasks);
  write_file(dir / "flow.json", flow.dump(2) + "\n");

  if (!b.databases.empty()) {
    fs::create_directories(dir / "db", ec);
    if (ec) throw IoError("cannot create db dir: " + ec.message());
    for (auto& [domain, records] : b.databases) {
      json arr = json::array();
      for (const Record& r : records) arr.push_back(r);
      write_file(dir / "db" / (domain + ".json"), arr.dump(2) + "\n");
    }
  }
}

// ---------------------------------------------------------------------------
// Schema-guided adapter

CorpusBundle adapt_schema_guided(const fs::path& dialogues_file,
                                 const fs::path& schema_file) {
  CorpusBundle b;
  b.flow.tasks = {Task::DI, Task::ID, Task::DST, Task::SAD, Task::DelexRG,
                  Task::ConcRG};
  b.flow.dst_format = DstFormat::Plain;

  Shape top{std::string()};
  json schema_doc = parse_json_file(schema_file);
  for (auto& service : top.array(schema_doc, "schema file")) {
    const json& o = top.object(service, "service");
    if (!o.contains("service_name"))
      throw SchemaViolation("", "service entry missing service_name");
    DomainSchema ds;
    ds.domain = top.str(o["service_name"], "service_name");

    std::set<std::string> informable, requestable;
    if (o.contains("intents"))
      for (auto& intent : top.array(o["intents"], "intents")) {
        const json& io = top.object(intent, "intent");
        IntentSchema is;
        is.intent = top.str(io.at("name"), "intent name");
        is.domain = ds.domain;
        if (io.contains("required_slots"))
          is.required_slots = top.str_list(io["required_slots"], "required_slots");
        if (io.contains("optional_slots"))  // dict {slot: default} in the raw layout
          for (auto& [slot, dflt] : top.object(io["optional_slots"], "optional_slots").items())
            is.optional_slots.push_back(slot);
        if (io.contains("result_slots"))
          is.result_slots = top.str_list(io["result_slots"], "result_slots");
        for (auto& s : is.required_slots) informable.insert(s);
        for (auto& s : is.optional_slots) informable.insert(s);
        for (auto& s : is.result_slots) requestable.insert(s);
        ds.intents.push_back(is.intent);
        b.intent_schemas[is.intent] = std::move(is);
      }

    if (o.contains("slots"))
      for (auto& slot : top.array(o["slots"], "slots")) {
        const json& so = top.object(slot, "slot");
        SlotSpec spec;
        spec.name = top.str(so.at("name"), "slot name");
        if (so.contains("possible_values")) {
          spec.values = top.str_list(so["possible_values"], "possible_values");
          for (std::string& v : spec.values) v = normalize_value(v);
        }
        spec.informable = informable.empty() || informable.count(spec.name) > 0;
        spec.requestable = requestable.count(spec.name) > 0;
        ds.slots[spec.name] = std::move(spec);
      }
    b.schemas[ds.domain] = std::move(ds);
  }

  json dialogues = parse_json_file(dialogues_file);
  for (auto& dlg : top.array(dialogues, "dialogue file")) {
    const json& o = top.object(dlg, "dialogue");
    if (!o.contains("dialogue_id"))
      throw SchemaViolation("", "dialogue missing dialogue_id");
    DialogueSession sess;
    sess.id = top.str(o["dialogue_id"], "dialogue_id");
    sess.dataset = "schema_guided";
    Shape sh{sess.id};

    auto check_service = [&](const std::string& service) {
      if (!b.schemas.count(service))
        sh.fail("frame references undeclared service " + service);
    };
    auto check_slot = [&](const std::string& service, const std::string& slot) {
      // "count" is the virtual result-size slot of schema-guided exports
      if (slot.empty() || slot == "count") return;
      if (!b.schemas.at(service).slots.count(slot))
        sh.fail("frame references undeclared slot " + service + "." + slot);
    };

    BeliefState running_state;
    Turn current;
    bool open = false;
    for (auto& raw_turn : sh.array(o.at("turns"), "turns")) {
      const json& t = sh.object(raw_turn, "turn");
      std::string speaker = sh.str(t.at("speaker"), "speaker");
      std::string utterance = sh.str(t.at("utterance"), "utterance");

      if (speaker == "USER") {
        if (open) sess.turns.push_back(std::move(current));  // user turn w/o reply
        current = Turn{};
        open = true;
        current.user = utterance;
        std::vector<std::string> domains;
        IntentMap intents;
        if (t.contains("frames"))
          for (auto& frame : sh.array(t["frames"], "frames")) {
            const json& f = sh.object(frame, "frame");
            std::string service = sh.str(f.at("service"), "service");
            check_service(service);
            domains.push_back(service);
            if (f.contains("state")) {
              const json& st = sh.object(f["state"], "frame state");
              if (st.contains("active_intent")) {
                std::string intent = sh.str(st["active_intent"], "active_intent");
                if (!intent.empty() && intent != "NONE") {
                  if (!b.intent_schemas.count(intent))
                    sh.fail("frame references undeclared intent " + intent);
                  intents[service].push_back(intent);
                }
              }
              if (st.contains("slot_values"))
                for (auto& [slot, values] : sh.object(st["slot_values"], "slot_values").items()) {
                  check_slot(service, slot);
                  auto list = sh.str_list(values, "slot values");
                  if (list.empty()) continue;
                  std::string v = normalize_value(list[0]);
                  if (!v.empty()) running_state[service][slot] = ValueExpr::plain(v);
                }
            }
          }
        current.domains = std::move(domains);
        if (!intents.empty()) current.intents = std::move(intents);
        if (!running_state.empty()) current.state = running_state;
      } else if (speaker == "SYSTEM") {
        if (!open) sh.fail("system turn before any user turn");
        current.response = utterance;
        ActSet acts;
        DbResult db;
        std::string delex = utterance;
        if (t.contains("frames"))
          for (auto& frame : sh.array(t["frames"], "frames")) {
            const json& f = sh.object(frame, "frame");
            std::string service = sh.str(f.at("service"), "service");
            check_service(service);
            if (f.contains("actions")) {
              // one slot per raw action; consecutive same-act entries merge
              std::vector<std::pair<std::string, std::string>> replacements;
              for (auto& action : sh.array(f["actions"], "actions")) {
                const json& ao = sh.object(action, "action");
                std::string act = sh.str(ao.at("act"), "act");
                std::transform(act.begin(), act.end(), act.begin(), ::tolower);
                std::string slot =
                    ao.contains("slot") ? sh.str(ao["slot"], "action slot") : "";
                check_slot(service, slot);
                if (!acts.empty() && acts.back().domain == service &&
                    acts.back().act == act) {
                  if (!slot.empty()) acts.back().slots.push_back(slot);
                } else {
                  ActTriple triple{service, act, {}};
                  if (!slot.empty()) triple.slots.push_back(slot);
                  acts.push_back(std::move(triple));
                }
                if (ao.contains("values") && !slot.empty())
                  for (auto& v : sh.array(ao["values"], "action values"))
                    replacements.emplace_back(sh.str(v, "action value"), slot);
              }
              std::sort(replacements.begin(), replacements.end(),
                        [](auto& a, auto& c) { return a.first.size() > c.first.size(); });
              for (auto& [value, slot] : replacements) {
                if (value.empty()) continue;
                std::string placeholder = "[value_" + slot + "]";
                std::size_t pos = 0;
                while ((pos = delex.find(value, pos)) != std::string::npos) {
                  delex.replace(pos, value.size(), placeholder);
                  pos += placeholder.size();
                }
              }
            }
            if (f.contains("service_results")) {
              DbResultGroup group;
              group.domain = service;
              if (f.contains("service_call")) {
                const json& call = sh.object(f["service_call"], "service_call");
                if (call.contains("method"))
                  group.intent = sh.str(call["method"], "service_call method");
              }
              const json& results = sh.array(f["service_results"], "service_results");
              group.match_count = static_cast<long>(results.size());
              if (!results.empty()) group.entries.push_back(record_from_json(results[0], sh));
              db.groups.push_back(std::move(group));
            }
          }
        if (!acts.empty()) current.acts = std::move(acts);
        if (!db.groups.empty()) current.db = std::move(db);
        current.delex = std::move(delex);
        sess.turns.push_back(std::move(current));
        open = false;
      } else {
        sh.fail("unknown speaker '" + speaker + "'");
      }
    }
    if (open) sess.turns.push_back(std::move(current));
    b.sessions.push_back(std::move(sess));
  }

  validate_bundle(b);
  return b;
}

// ---------------------------------------------------------------------------
// Synthetic fixtures

namespace {

// std::mt19937_64 is bit-exact across platforms; the distributions are not,
// so map outputs with plain modulo.
struct Rng {
  std::mt19937_64 eng;
  explicit Rng(std::uint64_t seed) : eng(seed) {}
  std::size_t pick(std::size_t n) { return static_cast<std::size_t>(eng() % n); }
  bool coin() { return (eng() & 1) != 0; }
};

std::string digits(Rng& rng, int n) {
  std::string out;
  for (int i = 0; i < n; ++i) out.push_back(static_cast<char>('0' + rng.pick(10)));
  return out;
}

std::string substitute_placeholders(const std::string& delex, const Record& record) {
  std::string out = delex;
  std::size_t pos = 0;
  while ((pos = out.find("[value_", pos)) != std::string::npos) {
    std::size_t end = out.find(']', pos);
    if (end == std::string::npos) break;
    std::string slot = out.substr(pos + 7, end - pos - 7);
    auto it = record.find(slot);
    if (it == record.end()) {
      pos = end + 1;
      continue;
    }
    out.replace(pos, end - pos + 1, it->second);
    pos += it->second.size();
  }
  return out;
}

struct FixtureBuilder {
  CorpusBundle& b;
  Rng& rng;

  // Running per-session data
  DialogueSession sess;
  BeliefState state;
  Goal goal;

  void add_turn(const std::string& domain, std::string user, ActSet acts,
                std::string delex, const Record* filler) {
    Turn t;
    t.user = std::move(user);
    t.domains = std::vector<std::string>{domain};
    t.intents = IntentMap{{domain, {"find_" + domain}}};
    t.state = state;
    db::DbTable table{domain, b.databases.at(domain)};
    auto results = db::query(table, state.at(domain));
    DbResultGroup group{domain, "", static_cast<long>(results.size()), {}};
    if (!results.empty()) group.entries.push_back(results[0]);
    t.db = DbResult{{std::move(group)}};
    t.acts = std::move(acts);
    t.response = filler ? substitute_placeholders(delex, *filler) : delex;
    t.delex = std::move(delex);
    sess.turns.push_back(std::move(t));
  }

  void note_requestables(const std::string& domain, const std::string& delex) {
    auto& reqs = goal[domain].requestables;
    std::size_t pos = 0;
    while ((pos = delex.find("[value_", pos)) != std::string::npos) {
      std::size_t end = delex.find(']', pos);
      if (end == std::string::npos) break;
      std::string slot = delex.substr(pos + 7, end - pos - 7);
      if (std::find(reqs.begin(), reqs.end(), slot) == reqs.end()) reqs.push_back(slot);
      pos = end + 1;
    }
  }

  void hotel_part() {
    const auto& table = b.databases.at("hotel");
    const Record& target = table[rng.pick(table.size())];
    std::vector<std::pair<std::string, std::string>> cons = {
        {"pricerange", target.at("pricerange")}};
    bool use_area = rng.coin();
    bool use_stars = rng.coin();
    if (use_area) cons.emplace_back("area", target.at("area"));
    if (use_stars) cons.emplace_back("stars", target.at("stars"));
    bool dontcare_area = !use_area && rng.coin();
    bool split = use_stars && rng.coin();

    DomainGoal dg;
    for (auto& [slot, value] : cons) dg.constraints[slot] = value;
    dg.requires_venue = true;
    goal["hotel"] = std::move(dg);

    auto constraint_text = [&](bool with_stars) {
      std::string text = "i am looking for a " + target.at("pricerange") +
                         " place to stay";
      if (use_area) text += " in the " + target.at("area");
      if (with_stars && use_stars) text += " with " + target.at("stars") + " stars";
      text += " .";
      if (dontcare_area) text += " any area is fine .";
      return text;
    };

    auto apply_constraints = [&](bool with_stars) {
      state["hotel"]["pricerange"] = ValueExpr::plain(target.at("pricerange"));
      if (use_area) state["hotel"]["area"] = ValueExpr::plain(target.at("area"));
      if (dontcare_area) state["hotel"]["area"] = ValueExpr::plain("dontcare");
      if (with_stars && use_stars)
        state["hotel"]["stars"] = ValueExpr::plain(target.at("stars"));
    };

    std::string offer_delex =
        "how about [value_name] ? it is a [value_stars] star stay in the "
        "[value_area] .";
    ActSet offer_acts = {{"hotel", "recommend", {"name"}},
                         {"hotel", "inform", {"stars", "area"}}};

    if (split) {
      apply_constraints(false);
      add_turn("hotel", constraint_text(false), {{"hotel", "request", {"stars"}}},
               "there are several options . how many stars should it have ?", nullptr);
      apply_constraints(true);
    } else {
      apply_constraints(true);
    }
    db::DbTable hotel_table{"hotel", table};
    Record offered = db::query(hotel_table, state.at("hotel")).at(0);
    note_requestables("hotel", offer_delex);
    add_turn("hotel", split ? "it should have " + target.at("stars") + " stars ."
                            : constraint_text(true),
             offer_acts, offer_delex, &offered);

    std::string user = rng.coin() ? "what is the phone number ?"
                                  : "can i get the phone number ?";
    std::string delex = "the phone number is [value_phone] .";
    note_requestables("hotel", delex);
    add_turn("hotel", user, {{"hotel", "inform", {"phone"}}}, delex, &offered);
  }

  void train_part(bool has_hotel) {
    const auto& table = b.databases.at("train");
    const Record& target = table[rng.pick(table.size())];
    bool use_day = rng.coin();
    DomainGoal dg;
    dg.constraints["departure"] = target.at("departure");
    dg.constraints["destination"] = target.at("destination");
    if (use_day) dg.constraints["day"] = target.at("day");
    dg.requires_venue = false;
    goal["train"] = std::move(dg);

    state["train"]["departure"] = ValueExpr::plain(target.at("departure"));
    state["train"]["destination"] = ValueExpr::plain(target.at("destination"));
    if (use_day) state["train"]["day"] = ValueExpr::plain(target.at("day"));

    std::string user = std::string(has_hotel ? "i also need" : "i need") +
                       " a train from " + target.at("departure") + " to " +
                       target.at("destination");
    if (use_day) user += " on " + target.at("day");
    user += " .";

    db::DbTable train_table{"train", table};
    Record offered = db::query(train_table, state.at("train")).at(0);
    std::string delex = "i recommend [value_trainid] . it costs [value_price] .";
    note_requestables("train", delex);
    add_turn("train", user,
             {{"train", "recommend", {"trainid"}}, {"train", "inform", {"price"}}},
             delex, &offered);

    bool price_turn = !has_hotel || rng.coin();
    if (price_turn) {
      std::string d = "it costs [value_price] .";
      note_requestables("train", d);
      add_turn("train", "how much is the fare ?",
               {{"train", "inform", {"price"}}}, d, &offered);
    }
  }
};

}  // namespace

CorpusBundle synth_fixtures(int num_sessions, std::uint64_t seed) {
  CorpusBundle b;
  b.flow.tasks = {Task::DI, Task::ID,      Task::DST,
                  Task::SAD, Task::DelexRG, Task::ConcRG};
  b.flow.dst_format = DstFormat::Plain;

  DomainSchema hotel;
  hotel.domain = "hotel";
  hotel.slots["pricerange"] = {"pricerange", {"cheap", "expensive", "moderate"}, true, false};
  hotel.slots["area"] = {"area", {"centre", "east", "north", "south", "west"}, true, false};
  hotel.slots["stars"] = {"stars", {"1", "2", "3", "4", "5"}, true, false};
  hotel.slots["name"] = {"name", {}, false, true};
  hotel.slots["phone"] = {"phone", {}, false, true};
  hotel.intents = {"find_hotel"};
  b.schemas["hotel"] = std::move(hotel);

  DomainSchema train;
  train.domain = "train";
  std::vector<std::string> stations{"ely", "leeds", "london", "york"};
  train.slots["departure"] = {"departure", stations, true, false};
  train.slots["destination"] = {"destination", stations, true, false};
  train.slots["day"] = {"day",
                        {"monday", "tuesday", "wednesday", "thursday", "friday",
                         "saturday", "sunday"},
                        true,
                        false};
  train.slots["trainid"] = {"trainid", {}, false, true};
  train.slots["price"] = {"price", {}, false, true};
  train.intents = {"find_train"};
  b.schemas["train"] = std::move(train);

  b.intent_schemas["find_hotel"] = {"find_hotel",
                                    "hotel",
                                    {"pricerange"},
                                    {"area", "stars"},
                                    {"name", "phone"}};
  b.intent_schemas["find_train"] = {"find_train",
                                    "train",
                                    {"departure", "destination"},
                                    {"day"},
                                    {"trainid", "price"}};

  Rng rng(seed);

  static const std::array<const char*, 10> hotel_names{
      "acorn lodge",      "alexander house", "birchwood inn",  "carlton hotel",
      "delta guest house", "eastview hotel",  "fenside lodge",  "garden house",
      "harbour inn",      "ivy guest house"};
  static const std::array<const char*, 3> prices{"cheap", "expensive", "moderate"};
  static const std::array<const char*, 5> areas{"centre", "east", "north", "south",
                                                "west"};
  static const std::array<const char*, 7> days{
      "monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"};

  std::vector<Record> hotel_db;
  for (int i = 0; i < 10; ++i) {
    Record r;
    r["name"] = hotel_names[i];
    r["pricerange"] = prices[rng.pick(3)];
    r["area"] = areas[rng.pick(5)];
    r["stars"] = std::to_string(1 + rng.pick(5));
    r["phone"] = "01223 " + digits(rng, 6);
    hotel_db.push_back(std::move(r));
  }
  b.databases["hotel"] = std::move(hotel_db);

  std::vector<Record> train_db;
  for (int i = 0; i < 10; ++i) {
    Record r;
    r["trainid"] = "tr" + digits(rng, 4);
    std::size_t dep = rng.pick(stations.size());
    std::size_t dst = (dep + 1 + rng.pick(stations.size() - 1)) % stations.size();
    r["departure"] = stations[dep];
    r["destination"] = stations[dst];
    r["day"] = days[rng.pick(7)];
    r["price"] = std::to_string(10 + rng.pick(80)) + "." + digits(rng, 2) + " pounds";
    train_db.push_back(std::move(r));
  }
  b.databases["train"] = std::move(train_db);

  for (int i = 0; i < num_sessions; ++i) {
    FixtureBuilder fb{b, rng};
    fb.sess.dataset = "synth";
    char id[16];
    std::snprintf(id, sizeof(id), "syn-%04d", i + 1);
    fb.sess.id = id;
    switch (rng.pick(3)) {
      case 0:
        fb.hotel_part();
        break;
      case 1:
        fb.train_part(false);
        break;
      default:
        fb.hotel_part();
        fb.train_part(true);
        break;
    }
    fb.sess.goal = std::move(fb.goal);
    b.sessions.push_back(std::move(fb.sess));
  }

  validate_bundle(b);
  return b;
}

}  // namespace todforge::ingest
