// todforge command line: fixture generation, corpus building, session
// running against a completion backend, evaluation and an interactive REPL.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 backend error.

#include <atomic>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "todforge/backend.hpp"
#include "todforge/corpus.hpp"
#include "todforge/dbengine.hpp"
#include "todforge/errors.hpp"
#include "todforge/evaluator.hpp"
#include "todforge/grammar.hpp"
#include "todforge/ingest.hpp"
#include "todforge/orchestrator.hpp"

namespace {

using nlohmann::json;
using namespace todforge;

// --- config file support (TOML by default, JSON when it starts with '{') ----

std::vector<CLI::ConfigItem> json_config_items(const json& j,
                                               std::vector<std::string> parents) {
  std::vector<CLI::ConfigItem> out;
  for (const auto& [key, value] : j.items()) {
    if (value.is_object()) {
      auto nested = parents;
      nested.push_back(key);
      auto sub = json_config_items(value, nested);
      out.insert(out.end(), sub.begin(), sub.end());
      continue;
    }
    CLI::ConfigItem item;
    item.parents = parents;
    item.name = key;
    if (value.is_array()) {
      for (const auto& el : value)
        item.inputs.push_back(el.is_string() ? el.get<std::string>() : el.dump());
    } else if (value.is_string()) {
      item.inputs.push_back(value.get<std::string>());
    } else {
      item.inputs.push_back(value.dump());
    }
    out.push_back(std::move(item));
  }
  return out;
}

class AutoConfig : public CLI::ConfigTOML {
 public:
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    std::string text((std::istreambuf_iterator<char>(input)),
                     std::istreambuf_iterator<char>());
    std::size_t i = 0;
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i < text.size() && text[i] == '{') {
      json j = json::parse(text, nullptr, false);
      if (j.is_discarded() || !j.is_object())
        throw CLI::FileError("config file is not a JSON object");
      return json_config_items(j, {});
    }
    std::istringstream rest(text);
    return CLI::ConfigTOML::from_config(rest);
  }
};

// --- shared option plumbing ---------------------------------------------------

Tokenizer tokenizer_from_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingFile(path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw FormatError("token table must be a JSON object of word -> count");
  auto table = std::make_shared<std::map<std::string, std::size_t>>();
  for (const auto& [word, count] : j.items()) {
    if (!count.is_number_unsigned() && !count.is_number_integer())
      throw FormatError("token table count for '" + word + "' is not a number");
    (*table)[word] = count.get<std::size_t>();
  }
  return Tokenizer{[table](std::string_view text) {
    std::size_t total = 0;
    std::size_t start = 0;
    while (start < text.size()) {
      while (start < text.size() &&
             std::isspace(static_cast<unsigned char>(text[start])))
        ++start;
      std::size_t end = start;
      while (end < text.size() &&
             !std::isspace(static_cast<unsigned char>(text[end])))
        ++end;
      if (end > start) {
        auto it = table->find(std::string(text.substr(start, end - start)));
        total += it != table->end() ? it->second
                                    : default_token_count(text.substr(start, end - start));
      }
      start = end;
    }
    return total;
  }};
}

struct BackendOpts {
  std::string kind = "gold";
  std::string endpoint;
  std::string model = "todforge";
  std::string api_key;
  int timeout_ms = 30000;
  int retries = 3;
  int backoff_ms = 500;
  int max_in_flight = 8;
  std::string script_file;
  bool script_loop = false;
};

void add_backend_options(CLI::App* cmd, BackendOpts& o, bool allow_gold) {
  std::vector<std::string> kinds = {"http", "scripted"};
  if (allow_gold) kinds.push_back("gold");
  cmd->add_option("--backend", o.kind, "completion backend")
      ->check(CLI::IsMember(kinds))
      ->capture_default_str();
  cmd->add_option("--endpoint", o.endpoint, "HTTP base URL (scheme://host[:port])")
      ->envname("TODFORGE_ENDPOINT");
  cmd->add_option("--model", o.model, "model name sent to the HTTP backend")
      ->capture_default_str();
  cmd->add_option("--api-key", o.api_key, "bearer token for the HTTP backend")
      ->envname("TODFORGE_API_KEY");
  cmd->add_option("--timeout-ms", o.timeout_ms, "HTTP timeout")->capture_default_str();
  cmd->add_option("--retries", o.retries, "HTTP attempts on transport failure")
      ->capture_default_str();
  cmd->add_option("--backoff-ms", o.backoff_ms, "base retry backoff")
      ->capture_default_str();
  cmd->add_option("--max-in-flight", o.max_in_flight, "HTTP request concurrency cap")
      ->capture_default_str();
  cmd->add_option("--script", o.script_file,
                  "scripted replies: JSON array or one JSON string per line");
  cmd->add_flag("--script-loop", o.script_loop, "cycle the script when exhausted");
}

std::vector<std::string> read_script(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingFile(path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  std::size_t i = 0;
  while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
  std::vector<std::string> out;
  if (i < text.size() && text[i] == '[') {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_array())
      throw FormatError("script file is not a JSON array");
    for (const auto& el : j) {
      if (!el.is_string()) throw FormatError("script entries must be strings");
      out.push_back(el.get<std::string>());
    }
    return out;
  }
  std::istringstream lines(text);
  std::string line;
  long line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_string())
      throw FormatError("script line is not a JSON string", line_no);
    out.push_back(j.get<std::string>());
  }
  return out;
}

std::unique_ptr<backend::Backend> make_shared_backend(const BackendOpts& o) {
  if (o.kind == "http") {
    if (o.endpoint.empty())
      throw FormatError("--endpoint (or TODFORGE_ENDPOINT) is required for --backend http");
    backend::HttpConfig cfg;
    cfg.endpoint = o.endpoint;
    cfg.model = o.model;
    cfg.api_key = o.api_key;
    cfg.timeout_ms = o.timeout_ms;
    cfg.retries = o.retries;
    cfg.backoff_base_ms = o.backoff_ms;
    cfg.max_in_flight = o.max_in_flight;
    return std::make_unique<backend::HttpBackend>(cfg);
  }
  if (o.kind == "scripted")
    return std::make_unique<backend::ScriptedBackend>(read_script(o.script_file),
                                                      o.script_loop);
  return nullptr;  // gold: one echo backend per session
}

struct RunOpts {
  std::string bundle_dir;
  BackendOpts backend;
  std::string ctx_belief = "gen";
  std::string cur_belief = "gen";
  std::string ctx_resp = "gen";
  std::size_t max_len = 4096;
  double history_ratio = 0.75;
  std::optional<int> max_history_turns;
  int schema_window = 15;
  bool no_schema = false;
  bool no_instructions = false;
  int entry_limit = 1;
  std::string trace_path;
  int parallel = 1;
  int runs = 1;
  std::string token_table;
};

orchestrator::RunConfig base_run_config(const RunOpts& o) {
  orchestrator::RunConfig cfg;
  cfg.max_len = o.max_len;
  cfg.history_ratio = o.history_ratio;
  cfg.max_history_turns = o.max_history_turns;
  cfg.schema_window = o.schema_window < 0 ? std::nullopt
                                          : std::optional<int>(o.schema_window);
  cfg.include_schemas = !o.no_schema;
  cfg.include_instructions = !o.no_instructions;
  cfg.entry_limit = o.entry_limit;
  cfg.oracle.context_belief = *orchestrator::source_from_name(o.ctx_belief);
  cfg.oracle.current_belief = *orchestrator::source_from_name(o.cur_belief);
  cfg.oracle.context_responses = *orchestrator::source_from_name(o.ctx_resp);
  if (!o.token_table.empty()) cfg.tokenizer = tokenizer_from_table(o.token_table);
  return cfg;
}

std::string indexed_trace_path(const std::string& base, int run, int runs) {
  if (runs <= 1) return base;
  auto dot = base.rfind('.');
  auto slash = base.find_last_of("/\\");
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
    return base + ".run" + std::to_string(run);
  return base.substr(0, dot) + ".run" + std::to_string(run) + base.substr(dot);
}

// --- subcommand bodies ----------------------------------------------------------

int cmd_fixtures(int n, std::uint64_t seed, const std::string& out) {
  ingest::CorpusBundle bundle = ingest::synth_fixtures(n, seed);
  ingest::write_bundle(bundle, out);
  std::cout << "wrote " << bundle.sessions.size() << " sessions ("
            << bundle.schemas.size() << " domains) to " << out << "\n";
  return 0;
}

int cmd_adapt(const std::string& dialogues, const std::string& schema,
              const std::string& out) {
  ingest::CorpusBundle bundle = ingest::adapt_schema_guided(dialogues, schema);
  ingest::write_bundle(bundle, out);
  std::cout << "adapted " << bundle.sessions.size() << " sessions to " << out << "\n";
  return 0;
}

void print_corpus_stats(const corpus::CorpusStats& s, bool as_json) {
  if (as_json) {
    nlohmann::ordered_json j{{"num_samples", s.num_samples},
                             {"avg_turns_per_sample", s.avg_turns_per_sample},
                             {"avg_tokens_per_turn", s.avg_tokens_per_turn},
                             {"total_tokens", s.total_tokens}};
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::cout << "num_samples            " << s.num_samples << "\n"
            << "avg_turns_per_sample   " << s.avg_turns_per_sample << "\n"
            << "avg_tokens_per_turn    " << s.avg_tokens_per_turn << "\n"
            << "total_tokens           " << s.total_tokens << "\n";
}

int cmd_build_corpus(const std::string& bundle_dir, const std::string& out,
                     corpus::SerializeOptions opts, bool as_json) {
  ingest::CorpusBundle bundle = ingest::read_bundle(bundle_dir);
  std::vector<corpus::TrainingSample> samples;
  for (const DialogueSession& s : bundle.sessions) {
    auto chunk = corpus::serialize_session(s, bundle.flow, bundle.schemas,
                                           bundle.intent_schemas, opts);
    samples.insert(samples.end(), chunk.begin(), chunk.end());
  }
  corpus::write_corpus(samples, out);
  print_corpus_stats(corpus::corpus_stats(samples, opts.tokenizer), as_json);
  return 0;
}

int cmd_stats(const std::string& corpus_file, bool as_json, const Tokenizer& tok) {
  auto samples = corpus::read_corpus(corpus_file);
  print_corpus_stats(corpus::corpus_stats(samples, tok), as_json);
  return 0;
}

int cmd_run(const RunOpts& o) {
  ingest::CorpusBundle bundle = ingest::read_bundle(o.bundle_dir);
  const std::size_t n = bundle.sessions.size();

  int parallel = std::max(1, o.parallel);
  if (o.backend.kind == "scripted" && parallel != 1) {
    std::cerr << "note: scripted backend replies are ordered; forcing --parallel 1\n";
    parallel = 1;
  }

  std::unique_ptr<backend::Backend> shared = make_shared_backend(o.backend);
  for (int run = 1; run <= std::max(1, o.runs); ++run) {
    std::vector<std::vector<orchestrator::TraceRecord>> per_session(n);
    std::vector<orchestrator::SessionResult> results(n);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::mutex err_mu;
    std::string backend_error;
    std::string data_error;

    auto worker = [&] {
      while (!stop.load()) {
        std::size_t i = next.fetch_add(1);
        if (i >= n) break;
        orchestrator::RunConfig cfg = base_run_config(o);
        cfg.trace = [&per_session, i](const orchestrator::TraceRecord& rec) {
          per_session[i].push_back(rec);
        };
        try {
          if (o.backend.kind == "gold") {
            backend::GoldEchoBackend echo(bundle.sessions[i], bundle.flow);
            results[i] = orchestrator::run_session(bundle.sessions[i], bundle, echo, cfg);
          } else {
            results[i] =
                orchestrator::run_session(bundle.sessions[i], bundle, *shared, cfg);
          }
          if (results[i].aborted) {
            std::lock_guard<std::mutex> lock(err_mu);
            if (backend_error.empty()) backend_error = results[i].error;
            stop = true;
          }
        } catch (const BackendError& e) {
          std::lock_guard<std::mutex> lock(err_mu);
          if (backend_error.empty()) backend_error = e.what();
          stop = true;
        } catch (const DataError& e) {
          std::lock_guard<std::mutex> lock(err_mu);
          if (data_error.empty()) data_error = e.what();
          stop = true;
        }
      }
    };
    std::vector<std::thread> pool;
    for (int k = 0; k < parallel; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    std::size_t turns = 0, requests = 0;
    for (std::size_t i = 0; i < n; ++i) {
      turns += results[i].turns.size();
      requests += per_session[i].size();
    }

    if (!o.trace_path.empty()) {
      std::string path = indexed_trace_path(o.trace_path, run, o.runs);
      std::ofstream out(path, std::ios::binary);
      if (!out) throw IoError("cannot write " + path);
      for (std::size_t i = 0; i < n; ++i)
        for (const auto& rec : per_session[i])
          out << orchestrator::trace_record_json(rec) << "\n";
      std::cout << "run " << run << ": " << n << " sessions, " << turns
                << " turns, " << requests << " requests -> " << path << "\n";
    } else {
      std::cout << "run " << run << ": " << n << " sessions, " << turns
                << " turns, " << requests << " requests\n";
    }

    if (!data_error.empty()) throw DataError(data_error);
    if (!backend_error.empty()) throw BackendUnavailable(backend_error);
  }
  return 0;
}

int cmd_eval(const std::string& bundle_dir, const std::vector<std::string>& traces,
             bool as_json, bool cur_belief_gold, bool sentence) {
  ingest::CorpusBundle bundle = ingest::read_bundle(bundle_dir);
  std::vector<eval::EvalReport> reports;
  double sentence_sum = 0.0;
  std::size_t sentence_n = 0;
  for (const std::string& path : traces) {
    auto preds = eval::predictions_from_trace(path, bundle, cur_belief_gold);
    reports.push_back(eval::evaluate(preds, bundle));
    if (sentence) {
      const bool conc = bundle.flow.has(Task::ConcRG);
      for (const auto& pred : preds) {
        const DialogueSession* gold = nullptr;
        for (const auto& s : bundle.sessions)
          if (s.id == pred.session_id) gold = &s;
        if (!gold) continue;
        for (std::size_t i = 0; i < pred.turns.size() && i < gold->turns.size(); ++i) {
          const auto& gt = gold->turns[i];
          const std::string& cand =
              conc ? pred.turns[i].response : pred.turns[i].delex;
          const std::string ref =
              conc ? gt.response.value_or("") : gt.delex.value_or("");
          sentence_sum += eval::sentence_bleu_smoothed(cand, ref);
          ++sentence_n;
        }
      }
    }
  }
  eval::EvalReport report = eval::average_reports(reports);
  if (as_json)
    std::cout << report.json_text() << "\n";
  else
    std::cout << report.text_table();
  if (sentence && sentence_n > 0) {
    double avg = eval::round2(sentence_sum / static_cast<double>(sentence_n));
    std::ostream& os = as_json ? std::cerr : std::cout;
    os << "sentence_bleu " << avg << " (add-one smoothing, debug aid)\n";
  }
  return 0;
}

int cmd_chat(const RunOpts& o) {
  if (o.backend.kind == "gold")
    throw FormatError("chat has no gold session; use --backend http or scripted");
  if (o.ctx_belief == "gold" || o.cur_belief == "gold" || o.ctx_resp == "gold")
    throw FormatError("chat has no gold annotations; oracle switches must stay 'gen'");
  ingest::CorpusBundle bundle = ingest::read_bundle(o.bundle_dir);
  std::unique_ptr<backend::Backend> be = make_shared_backend(o.backend);

  std::vector<orchestrator::TraceRecord> turn_trace;
  orchestrator::RunConfig cfg = base_run_config(o);
  cfg.trace = [&turn_trace](const orchestrator::TraceRecord& rec) {
    turn_trace.push_back(rec);
  };
  orchestrator::SessionRunner runner(bundle, *be, cfg, "chat");

  const Task anchor = bundle.flow.has(Task::DST) ? Task::DST : Task::ID;
  std::string line;
  std::cout << "todforge chat; /quit to exit\n> " << std::flush;
  while (std::getline(std::cin, line)) {
    if (line == "/quit" || line == "/exit") break;
    if (!line.empty()) {
      turn_trace.clear();
      orchestrator::TurnOutputs out = runner.run_turn(line);
      for (Task task : bundle.flow.tasks) {
        const char* tag = tag_name(tag_for_task(task));
        for (const auto& rec : turn_trace)
          if (rec.tag == tag) std::cout << rec.tag << ": " << rec.text << "\n";
        if (task == anchor && !out.db.groups.empty())
          std::cout << tag_name(Tag::Db) << ": " << db::render_db_line(out.db)
                    << "\n";
      }
    }
    std::cout << "> " << std::flush;
  }
  std::cout << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"task-oriented dialogue corpora, session runtime and metrics"};
  app.require_subcommand(1);
  app.config_formatter(std::make_shared<AutoConfig>());
  app.set_config("--config", "", "config file (JSON or TOML)");

  // fixtures
  auto* fixtures = app.add_subcommand("fixtures", "write a synthetic bundle");
  int fx_n = 25;
  std::uint64_t fx_seed = 1;
  std::string fx_out;
  fixtures->add_option("--n", fx_n, "number of sessions")->capture_default_str();
  fixtures->add_option("--seed", fx_seed, "generator seed")->capture_default_str();
  fixtures->add_option("--out", fx_out, "output bundle directory")->required();

  // adapt
  auto* adapt = app.add_subcommand("adapt", "convert a schema-guided raw export");
  std::string ad_dialogues, ad_schema, ad_out;
  adapt->add_option("--dialogues", ad_dialogues, "dialogues JSON file")->required();
  adapt->add_option("--schema", ad_schema, "schema JSON file")->required();
  adapt->add_option("--out", ad_out, "output bundle directory")->required();

  // build-corpus
  auto* build = app.add_subcommand("build-corpus", "serialize a bundle for training");
  std::string bc_bundle, bc_out, bc_token_table;
  std::size_t bc_max_len = 4096;
  int bc_window = 15;
  bool bc_no_schema = false, bc_no_instructions = false, bc_json = false;
  double bc_ratio = 0.6;
  build->add_option("bundle", bc_bundle, "bundle directory")->required();
  build->add_option("--out", bc_out, "output corpus JSONL")->required();
  build->add_option("--max-len", bc_max_len, "sample token budget")
      ->capture_default_str();
  build->add_option("--schema-window", bc_window,
                    "re-emit schemas older than this many turns; 0 = every turn, "
                    "-1 = emit once only")
      ->capture_default_str();
  build->add_flag("--no-schema", bc_no_schema, "omit schema lines");
  build->add_flag("--no-instructions", bc_no_instructions, "omit the instruction block");
  build->add_option("--history-ratio", bc_ratio,
                    "cap on loss-masked history inside a sample")
      ->capture_default_str();
  build->add_option("--token-table", bc_token_table, "word -> count JSON table");
  build->add_flag("--json", bc_json, "print stats as JSON");

  // stats
  auto* stats = app.add_subcommand("stats", "corpus statistics");
  std::string st_corpus, st_token_table;
  bool st_json = false;
  stats->add_option("corpus", st_corpus, "corpus JSONL")->required();
  stats->add_flag("--json", st_json, "print stats as JSON");
  stats->add_option("--token-table", st_token_table, "word -> count JSON table");

  // run
  auto* run = app.add_subcommand("run", "drive sessions through a backend");
  RunOpts ro;
  run->add_option("bundle", ro.bundle_dir, "bundle directory")->required();
  add_backend_options(run, ro.backend, /*allow_gold=*/true);
  const std::vector<std::string> kSources{"gold", "gen", "generated"};
  run->add_option("--context-belief", ro.ctx_belief,
                  "state lines shown for earlier turns")
      ->check(CLI::IsMember(kSources))
      ->capture_default_str();
  run->add_option("--current-belief", ro.cur_belief,
                  "state consumed by the current turn")
      ->check(CLI::IsMember(kSources))
      ->capture_default_str();
  run->add_option("--context-responses", ro.ctx_resp,
                  "act/response lines shown for earlier turns")
      ->check(CLI::IsMember(kSources))
      ->capture_default_str();
  run->add_option("--max-len", ro.max_len, "prompt+generation token budget")
      ->capture_default_str();
  run->add_option("--history-ratio", ro.history_ratio,
                  "prompt share reserved for instructions+history")
      ->capture_default_str();
  run->add_option("--max-history-turns", ro.max_history_turns,
                  "hard cap on prior turns in context");
  run->add_option("--schema-window", ro.schema_window,
                  "schema re-emission window; 0 = every turn, -1 = once only")
      ->capture_default_str();
  run->add_flag("--no-schema", ro.no_schema, "omit schema lines");
  run->add_flag("--no-instructions", ro.no_instructions, "omit the instruction block");
  run->add_option("--entry-limit", ro.entry_limit, "DB records shown per domain")
      ->capture_default_str();
  run->add_option("--trace", ro.trace_path, "write per-request JSONL records here");
  run->add_option("--parallel", ro.parallel, "sessions run concurrently")
      ->capture_default_str();
  run->add_option("--runs", ro.runs, "repeat the whole run (indexed trace files)")
      ->capture_default_str();
  run->add_option("--token-table", ro.token_table, "word -> count JSON table");

  // eval
  auto* ev = app.add_subcommand("eval", "score trace files against a bundle");
  std::string ev_bundle, ev_cur_belief = "gen";
  std::vector<std::string> ev_traces;
  bool ev_json = false, ev_sentence = false;
  ev->add_option("bundle", ev_bundle, "bundle directory")->required();
  ev->add_option("--trace", ev_traces, "trace JSONL (repeat to average runs)")
      ->required();
  ev->add_flag("--json", ev_json, "print the report as JSON");
  ev->add_option("--current-belief", ev_cur_belief,
                 "match the run's --current-belief setting")
      ->check(CLI::IsMember(kSources))
      ->capture_default_str();
  ev->add_flag("--sentence-bleu", ev_sentence,
               "also print smoothed per-sentence BLEU (debug)");

  // chat
  auto* chat = app.add_subcommand("chat", "interactive session REPL");
  RunOpts co;
  co.backend.kind = "http";
  chat->add_option("bundle", co.bundle_dir, "bundle directory")->required();
  add_backend_options(chat, co.backend, /*allow_gold=*/false);
  chat->add_option("--max-len", co.max_len, "prompt+generation token budget")
      ->capture_default_str();
  chat->add_option("--history-ratio", co.history_ratio,
                   "prompt share reserved for instructions+history")
      ->capture_default_str();
  chat->add_option("--max-history-turns", co.max_history_turns,
                   "hard cap on prior turns in context");
  chat->add_option("--schema-window", co.schema_window,
                   "schema re-emission window; 0 = every turn, -1 = once only")
      ->capture_default_str();
  chat->add_option("--entry-limit", co.entry_limit, "DB records shown per domain")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (fixtures->parsed()) return cmd_fixtures(fx_n, fx_seed, fx_out);
    if (adapt->parsed()) return cmd_adapt(ad_dialogues, ad_schema, ad_out);
    if (build->parsed()) {
      corpus::SerializeOptions opts;
      opts.max_len = bc_max_len;
      opts.schema_window =
          bc_window < 0 ? std::nullopt : std::optional<int>(bc_window);
      opts.include_schemas = !bc_no_schema;
      opts.include_instructions = !bc_no_instructions;
      opts.history_ratio = bc_ratio;
      if (!bc_token_table.empty()) opts.tokenizer = tokenizer_from_table(bc_token_table);
      return cmd_build_corpus(bc_bundle, bc_out, opts, bc_json);
    }
    if (stats->parsed()) {
      Tokenizer tok = st_token_table.empty() ? Tokenizer::byte_len()
                                             : tokenizer_from_table(st_token_table);
      return cmd_stats(st_corpus, st_json, tok);
    }
    if (run->parsed()) return cmd_run(ro);
    if (ev->parsed())
      return cmd_eval(ev_bundle, ev_traces, ev_json, ev_cur_belief == "gold",
                      ev_sentence);
    if (chat->parsed()) return cmd_chat(co);
  } catch (const BackendError& e) {
    std::cerr << "backend error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
