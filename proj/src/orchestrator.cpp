#include "todforge/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <set>

#include <nlohmann/json.hpp>

#include "todforge/dbengine.hpp"
#include "todforge/errors.hpp"
#include "todforge/grammar.hpp"

namespace todforge::orchestrator {

const char* source_name(Source s) {
  return s == Source::Gold ? "gold" : "generated";
}

std::optional<Source> source_from_name(std::string_view name) {
  if (name == "gold") return Source::Gold;
  if (name == "generated" || name == "gen") return Source::Generated;
  return std::nullopt;
}

// --- de-repetition ------------------------------------------------------------

namespace {

// One collapse pass: find the longest trailing phrase of length >= 4 that
// tiles the tail 3+ times and cut it down to a single occurrence.
bool dedup_pass(std::string& s) {
  const std::size_t n = s.size();
  for (std::size_t len = n / 3; len >= 4; --len) {
    std::string_view tail(s.data() + n - len, len);
    std::size_t reps = 1;
    while (reps * len < n) {
      std::size_t start = n - (reps + 1) * len;
      if (std::string_view(s.data() + start, len) != tail) break;
      ++reps;
    }
    if (reps >= 3) {
      s.erase(n - (reps - 1) * len);
      return true;
    }
  }
  return false;
}

}  // namespace

std::string dedup(std::string_view text) {
  std::string s(text);
  while (dedup_pass(s)) {
  }
  return s;
}

std::string trace_record_json(const TraceRecord& rec) {
  nlohmann::json j{{"session", rec.session},
                   {"turn", rec.turn},
                   {"tag", rec.tag},
                   {"prompt_tokens", rec.prompt_tokens},
                   {"prompt", rec.prompt},
                   {"raw", rec.raw},
                   {"text", rec.text},
                   {"parsed_ok", rec.parsed_ok}};
  return j.dump();
}

std::optional<TraceRecord> trace_record_from_json(const std::string& line) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  if (!j.contains("session") || !j["session"].is_string() || !j.contains("turn") ||
      !j["turn"].is_number_integer() || !j.contains("tag") || !j["tag"].is_string())
    return std::nullopt;
  TraceRecord rec;
  rec.session = j["session"].get<std::string>();
  rec.turn = j["turn"].get<int>();
  rec.tag = j["tag"].get<std::string>();
  if (j.contains("prompt_tokens") && j["prompt_tokens"].is_number_unsigned())
    rec.prompt_tokens = j["prompt_tokens"].get<std::size_t>();
  if (j.contains("prompt") && j["prompt"].is_string())
    rec.prompt = j["prompt"].get<std::string>();
  if (j.contains("raw") && j["raw"].is_string())
    rec.raw = j["raw"].get<std::string>();
  if (j.contains("text") && j["text"].is_string())
    rec.text = j["text"].get<std::string>();
  else
    rec.text = dedup(rec.raw);
  if (j.contains("parsed_ok") && j["parsed_ok"].is_boolean())
    rec.parsed_ok = j["parsed_ok"].get<bool>();
  return rec;
}

// --- context window ------------------------------------------------------------

namespace {

// Per-line token accounting (each line keeps its newline).
std::size_t line_sum(std::string_view text, const Tokenizer& tok) {
  std::size_t total = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) {
      total += tok.count(text.substr(start));
      break;
    }
    total += tok.count(text.substr(start, end - start + 1));
    start = end + 1;
  }
  return total;
}

std::string drop_header(int dropped) {
  return "# dropped_turns: " + std::to_string(dropped) + "\n";
}

}  // namespace

ContextWindow truncate_context(const std::vector<std::string>& turn_blocks,
                               const std::string& instructions,
                               const Tokenizer& tok, std::size_t budget,
                               std::optional<int> max_history_turns) {
  const std::size_t inst_cost = line_sum(instructions, tok);
  if (inst_cost > budget)
    throw InstructionsTooLarge("instruction block (" + std::to_string(inst_cost) +
                               " tokens) exceeds the context budget of " +
                               std::to_string(budget));

  std::vector<std::size_t> costs;
  costs.reserve(turn_blocks.size());
  for (const auto& b : turn_blocks) costs.push_back(line_sum(b, tok));

  std::size_t start = 0;
  auto fits = [&] {
    if (max_history_turns &&
        turn_blocks.size() - start > static_cast<std::size_t>(std::max(0, *max_history_turns)))
      return false;
    std::size_t total = inst_cost;
    if (start > 0) total += line_sum(drop_header(static_cast<int>(start)), tok);
    for (std::size_t i = start; i < costs.size(); ++i) total += costs[i];
    return total <= budget;
  };
  while (start < turn_blocks.size() && !fits()) ++start;

  ContextWindow w;
  w.dropped = static_cast<int>(start);
  w.text = instructions;
  w.tokens = inst_cost;
  if (start > 0) {
    std::string h = drop_header(w.dropped);
    w.tokens += line_sum(h, tok);
    w.text += h;
  }
  for (std::size_t i = start; i < turn_blocks.size(); ++i) {
    w.text += turn_blocks[i];
    w.tokens += costs[i];
  }
  return w;
}

// --- session runtime ------------------------------------------------------------

namespace {

struct TurnData {
  std::string user;
  std::string domains_text;
  std::vector<std::string> domain_schema_lines;
  std::string intents_text;
  std::vector<std::string> intent_schema_lines;
  std::string gen_state_text;
  BeliefState gen_state;
  std::vector<std::string> active_domains;
  std::string acts_text;
  std::string delex_text;
  std::string response_text;
  std::string db_line;  // live line, "" when no groups
};

}  // namespace

struct SessionRunner::Impl {
  const ingest::CorpusBundle& bundle;
  backend::Backend& backend;
  RunConfig config;
  std::string label;
  const DialogueSession* gold;

  std::string instructions;        // "" when disabled
  std::vector<std::string> blocks;  // completed turn context blocks
  corpus::SchemaRegistry domain_registry;
  corpus::SchemaRegistry intent_registry;
  int done = 0;

  Impl(const ingest::CorpusBundle& b, backend::Backend& be, RunConfig cfg,
       std::string lbl, const DialogueSession* g)
      : bundle(b), backend(be), config(std::move(cfg)), label(std::move(lbl)), gold(g) {
    domain_registry.window = config.schema_window;
    intent_registry.window = config.schema_window;
    if (config.include_instructions) {
      std::vector<std::string> domain_list;
      for (auto& [name, schema] : bundle.schemas) domain_list.push_back(name);
      instructions =
          corpus::render_instructions(bundle.flow, domain_list, bundle.flow.dst_format)
              .render();
    }
  }

  void note(const std::string& msg) {
    if (config.log)
      config.log(msg);
    else
      std::cerr << "todforge: " << msg << "\n";
  }

  const Turn* gold_turn(int turn_no) const {
    if (!gold || turn_no < 1 ||
        static_cast<std::size_t>(turn_no) > gold->turns.size())
      return nullptr;
    return &gold->turns[static_cast<std::size_t>(turn_no - 1)];
  }

  const BeliefState& gold_state(int turn_no) const {
    const Turn* t = gold_turn(turn_no);
    if (!t || !t->state) throw MissingAnnotation("STATE", turn_no);
    return *t->state;
  }

  // Query one domain, dropping constraints the table cannot compare.
  DbResultGroup query_group(const std::string& domain, const SlotMap& constraints,
                            const std::string& intent, bool quiet) {
    db::DbTable table{domain, bundle.databases.at(domain)};
    std::vector<std::string> dropped;
    auto rows = db::query_lenient(table, constraints, &dropped);
    if (!quiet)
      for (const std::string& slot : dropped)
        note("dropped non-comparable constraint " + domain + "." + slot);
    DbResultGroup g{domain, intent, static_cast<long>(rows.size()), {}};
    const int limit = std::max(0, config.entry_limit);
    for (std::size_t i = 0; i < rows.size() && i < static_cast<std::size_t>(limit); ++i)
      g.entries.push_back(rows[i]);
    return g;
  }

  // State-constrained lookup over the active domains (belief-anchored flows).
  DbResult db_from_state(const BeliefState& state,
                         const std::vector<std::string>& active, bool quiet) {
    DbResult r;
    std::set<std::string> seen;
    for (const std::string& d : active) {
      if (!bundle.databases.count(d) || !seen.insert(d).second) continue;
      SlotMap cons;
      if (auto it = state.find(d); it != state.end()) cons = it->second;
      r.groups.push_back(query_group(d, cons, "", quiet));
    }
    return r;
  }

  // Unconstrained intent-scoped lookup (flows without state tracking).
  DbResult db_from_intents(const IntentMap& intents) {
    DbResult r;
    for (const auto& [domain, names] : intents) {
      if (!bundle.databases.count(domain)) continue;
      for (const std::string& intent : names)
        r.groups.push_back(query_group(domain, {}, intent, false));
    }
    return r;
  }

  // One backend call for the line tagged `tag`; returns the deduped text and
  // fills a trace record (parsed_ok is patched by the caller).
  std::string generate(Task task, Tag tag, const std::vector<std::string>& partial_lines,
                       std::size_t partial_cost, int turn_no, TraceRecord& rec) {
    const Tokenizer& tok = config.tokenizer;
    const std::string prefix = std::string(tag_name(tag)) + ": ";
    const std::size_t prefix_cost = tok.count(prefix);
    const int mt = backend::task_max_tokens(task);

    std::size_t budget =
        static_cast<std::size_t>(std::floor(static_cast<double>(config.max_len) *
                                            config.history_ratio));
    const std::size_t reserved = partial_cost + prefix_cost + static_cast<std::size_t>(mt);
    const std::size_t room = config.max_len > reserved ? config.max_len - reserved : 0;
    budget = std::min(budget, room);
    const std::size_t inst_cost = line_sum(instructions, tok);
    budget = std::max(budget, inst_cost);  // instructions are never dropped

    ContextWindow w =
        truncate_context(blocks, instructions, tok, budget, config.max_history_turns);
    std::string prompt = std::move(w.text);
    for (const auto& line : partial_lines) prompt += line;
    prompt += prefix;
    const std::size_t prompt_tokens = w.tokens + partial_cost + prefix_cost;

    int eff_mt = mt;
    if (prompt_tokens + static_cast<std::size_t>(eff_mt) > config.max_len) {
      const std::size_t left =
          config.max_len > prompt_tokens ? config.max_len - prompt_tokens : 0;
      eff_mt = static_cast<int>(std::max<std::size_t>(1, left));
    }

    backend::CompletionRequest req{prompt, {"\n"}, eff_mt, 0.0};
    if (config.observe_request) config.observe_request(req);
    std::string raw = backend.complete(req);
    std::string text = dedup(raw);

    rec.session = label;
    rec.turn = turn_no;
    rec.tag = tag_name(tag);
    rec.prompt_tokens = prompt_tokens;
    rec.prompt = std::move(prompt);
    rec.raw = std::move(raw);
    rec.text = text;
    rec.parsed_ok = true;
    return text;
  }

  void emit_trace(TraceRecord& rec, bool ok) {
    rec.parsed_ok = ok;
    if (config.trace) config.trace(rec);
  }

  // Rebuild the finished turn as it will appear in later prompts, honoring
  // the context-side oracle switches.
  std::string context_block(const TurnData& td, int turn_no) {
    const TaskFlowSpec& flow = bundle.flow;
    const OracleMode& o = config.oracle;
    std::string block = render_line(Tag::User, td.user);
    for (Task task : flow.tasks) {
      switch (task) {
        case Task::DI:
          block += render_line(Tag::Domains, td.domains_text);
          for (const auto& line : td.domain_schema_lines) block += line;
          break;
        case Task::ID:
          block += render_line(Tag::Intents, td.intents_text);
          for (const auto& line : td.intent_schema_lines) block += line;
          if (!flow.has(Task::DST) && !td.db_line.empty()) block += td.db_line;
          break;
        case Task::DST: {
          std::string state_text;
          BeliefState state;
          if (o.context_belief == Source::Gold) {
            state = gold_state(turn_no);
            state_text = serialize_state(state, flow.dst_format);
          } else {
            state = td.gen_state;
            state_text = td.gen_state_text;
          }
          block += render_line(Tag::State, state_text);
          DbResult dbr = db_from_state(state, td.active_domains, /*quiet=*/true);
          if (!dbr.groups.empty())
            block += render_line(Tag::Db, db::render_db_line(dbr));
          break;
        }
        case Task::SAD: {
          std::string text = td.acts_text;
          if (o.context_responses == Source::Gold) {
            const Turn* t = gold_turn(turn_no);
            if (!t || !t->acts) throw MissingAnnotation("ACTS", turn_no);
            text = serialize_acts(*t->acts);
          }
          block += render_line(Tag::Acts, text);
          break;
        }
        case Task::DelexRG: {
          std::string text = td.delex_text;
          if (o.context_responses == Source::Gold) {
            const Turn* t = gold_turn(turn_no);
            if (!t || !t->delex) throw MissingAnnotation("DELEX", turn_no);
            text = *t->delex;
          }
          block += render_line(Tag::Delex, text);
          break;
        }
        case Task::ConcRG: {
          std::string text = td.response_text;
          if (o.context_responses == Source::Gold) {
            const Turn* t = gold_turn(turn_no);
            if (!t || !t->response) throw MissingAnnotation("RESPONSE", turn_no);
            text = *t->response;
          }
          block += render_line(Tag::Response, text);
          break;
        }
      }
    }
    return block;
  }

  TurnOutputs run_turn(const std::string& user) {
    const TaskFlowSpec& flow = bundle.flow;
    const Tokenizer& tok = config.tokenizer;
    const int turn_no = done + 1;

    TurnOutputs out;
    out.user = user;
    TurnData td;
    td.user = user;

    std::vector<std::string> partial;
    std::size_t partial_cost = 0;
    auto push_line = [&](Tag tag, const std::string& text) {
      std::string line = render_line(tag, text);
      partial_cost += tok.count(line);
      partial.push_back(std::move(line));
    };
    auto push_rendered = [&](const std::string& line) {
      partial_cost += line_sum(line, tok);
      partial.push_back(line);
    };
    push_line(Tag::User, user);

    for (Task task : flow.tasks) {
      const Tag tag = tag_for_task(task);
      TraceRecord rec;
      std::string text = generate(task, tag, partial, partial_cost, turn_no, rec);

      switch (task) {
        case Task::DI: {
          out.domains = parse_domains(text, &out.domains_ok);
          emit_trace(rec, out.domains_ok);
          td.domains_text = text;
          push_line(tag, text);
          if (config.include_schemas) {
            for (const std::string& label : domain_registry.process_turn(out.domains)) {
              auto it = bundle.schemas.find(label);
              if (it == bundle.schemas.end()) continue;
              std::string line = render_line(Tag::DomainSchema,
                                             serialize_domain_schema(it->second));
              td.domain_schema_lines.push_back(line);
              push_rendered(line);
            }
          }
          break;
        }
        case Task::ID: {
          out.intents = parse_intents(text, &out.intents_ok);
          emit_trace(rec, out.intents_ok);
          td.intents_text = text;
          push_line(tag, text);
          if (config.include_schemas) {
            std::vector<std::string> labels;
            for (const auto& [domain, names] : out.intents)
              for (const std::string& n : names) labels.push_back(n);
            for (const std::string& label : intent_registry.process_turn(labels)) {
              auto it = bundle.intent_schemas.find(label);
              if (it == bundle.intent_schemas.end()) continue;
              std::string line = render_line(Tag::IntentSchema,
                                             serialize_intent_schema(it->second));
              td.intent_schema_lines.push_back(line);
              push_rendered(line);
            }
          }
          if (!flow.has(Task::DST)) {
            out.db = db_from_intents(out.intents);
            if (!out.db.groups.empty()) {
              td.db_line = render_line(Tag::Db, db::render_db_line(out.db));
              push_rendered(td.db_line);
            }
          }
          break;
        }
        case Task::DST: {
          td.gen_state = parse_state(text, flow.dst_format, &out.state_ok);
          emit_trace(rec, out.state_ok);
          td.gen_state_text = text;
          if (config.oracle.current_belief == Source::Gold) {
            out.state = gold_state(turn_no);
            push_line(tag, serialize_state(out.state, flow.dst_format));
          } else {
            out.state = td.gen_state;
            push_line(tag, text);
          }
          td.active_domains =
              flow.has(Task::DI) ? out.domains : std::vector<std::string>{};
          if (!flow.has(Task::DI))
            for (const auto& [domain, slots] : out.state)
              td.active_domains.push_back(domain);
          out.db = db_from_state(out.state, td.active_domains, /*quiet=*/false);
          if (!out.db.groups.empty()) {
            td.db_line = render_line(Tag::Db, db::render_db_line(out.db));
            push_rendered(td.db_line);
          }
          break;
        }
        case Task::SAD: {
          out.acts = parse_acts(text, &out.acts_ok);
          emit_trace(rec, out.acts_ok);
          td.acts_text = text;
          push_line(tag, text);
          break;
        }
        case Task::DelexRG: {
          out.delex = text;
          emit_trace(rec, true);
          td.delex_text = text;
          push_line(tag, text);
          break;
        }
        case Task::ConcRG: {
          out.response = text;
          emit_trace(rec, true);
          td.response_text = text;
          push_line(tag, text);
          break;
        }
      }
    }

    blocks.push_back(context_block(td, turn_no));
    ++done;
    return out;
  }
};

SessionRunner::SessionRunner(const ingest::CorpusBundle& bundle,
                             backend::Backend& backend, RunConfig config,
                             std::string session_label, const DialogueSession* gold)
    : impl_(std::make_unique<Impl>(bundle, backend, std::move(config),
                                   std::move(session_label), gold)) {}

SessionRunner::~SessionRunner() = default;

TurnOutputs SessionRunner::run_turn(const std::string& user_utterance) {
  return impl_->run_turn(user_utterance);
}

int SessionRunner::turns_done() const { return impl_->done; }

SessionResult run_session(const DialogueSession& session,
                          const ingest::CorpusBundle& bundle,
                          backend::Backend& backend, const RunConfig& config) {
  SessionRunner runner(bundle, backend, config, session.id, &session);
  SessionResult result;
  for (const Turn& turn : session.turns) {
    try {
      result.turns.push_back(runner.run_turn(turn.user));
    } catch (const BackendUnavailable& e) {
      result.aborted = true;
      result.error = e.what();
      break;
    }
  }
  return result;
}

}  // namespace todforge::orchestrator
