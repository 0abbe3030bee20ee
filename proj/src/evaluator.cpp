#include "todforge/evaluator.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "todforge/dbengine.hpp"
#include "todforge/errors.hpp"
#include "todforge/grammar.hpp"

namespace todforge::eval {

using nlohmann::json;

double round2(double x) { return std::round(x * 100.0) / 100.0; }

namespace {

// Re-normalize every key and value; empty results drop out.
BeliefState normalize_state(const BeliefState& state) {
  BeliefState out;
  for (const auto& [domain, slots] : state) {
    std::string nd = normalize_value(domain);
    if (nd.empty()) continue;
    SlotMap m;
    for (const auto& [slot, value] : slots) {
      std::string ns = normalize_value(slot);
      if (ns.empty()) continue;
      std::vector<std::string> vals;
      for (const std::string& v : value.values) {
        std::string nv = normalize_value(v);
        if (!nv.empty()) vals.push_back(std::move(nv));
      }
      if (vals.empty()) continue;
      m[ns] = ValueExpr::make(value.relation, std::move(vals));
    }
    if (!m.empty()) out[nd] = std::move(m);
  }
  return out;
}

std::set<std::string> placeholders(const std::string& text) {
  std::set<std::string> out;
  constexpr std::string_view kOpen = "[value_";
  std::size_t pos = 0;
  while ((pos = text.find(kOpen, pos)) != std::string::npos) {
    auto close = text.find(']', pos + kOpen.size());
    if (close == std::string::npos) break;
    out.insert(text.substr(pos + kOpen.size(), close - pos - kOpen.size()));
    pos = close + 1;
  }
  return out;
}

const DialogueSession& session_by_id(const ingest::CorpusBundle& bundle,
                                     const std::string& id) {
  for (const DialogueSession& s : bundle.sessions)
    if (s.id == id) return s;
  throw SchemaViolation(id, "predictions reference a session not in the bundle");
}

bool record_meets_goal(const Record& r, const std::map<std::string, std::string>& cons) {
  for (const auto& [slot, value] : cons) {
    if (!r.count(slot)) continue;
    if (!db::matches(r, slot, ValueExpr::plain(value))) return false;
  }
  return true;
}

std::set<std::string> emitted_placeholders(const SessionPrediction& pred) {
  std::set<std::string> out;
  for (const auto& turn : pred.turns) {
    auto s = placeholders(turn.delex);
    out.insert(s.begin(), s.end());
  }
  return out;
}

std::set<std::string> goal_requestables(const Goal& goal) {
  std::set<std::string> out;
  for (const auto& [domain, dg] : goal)
    out.insert(dg.requestables.begin(), dg.requestables.end());
  return out;
}

}  // namespace

double jga(const std::vector<BeliefState>& pred, const std::vector<BeliefState>& gold) {
  if (pred.size() != gold.size())
    throw LengthMismatch("joint goal accuracy: " + std::to_string(pred.size()) +
                         " predicted vs " + std::to_string(gold.size()) +
                         " gold states");
  if (pred.empty()) return 100.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (normalize_state(pred[i]) == normalize_state(gold[i])) ++hit;
  return 100.0 * static_cast<double>(hit) / static_cast<double>(pred.size());
}

// --- BLEU -------------------------------------------------------------------

std::vector<std::string> bleu_tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  };
  for (char c : text) {
    unsigned char u = static_cast<unsigned char>(c);
    if (std::isspace(u)) {
      flush();
    } else if (u < 128 && std::ispunct(u)) {
      flush();
      out.emplace_back(1, c);
    } else {
      cur.push_back(static_cast<char>(std::tolower(u)));
    }
  }
  flush();
  return out;
}

namespace {

// n-gram multiset keyed by joined tokens (tokens never contain '\x1f').
std::map<std::string, long> ngram_counts(const std::vector<std::string>& toks,
                                         std::size_t n) {
  std::map<std::string, long> out;
  if (toks.size() < n) return out;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) {
    std::string key;
    for (std::size_t k = 0; k < n; ++k) {
      if (k) key += '\x1f';
      key += toks[i + k];
    }
    ++out[key];
  }
  return out;
}

struct BleuTallies {
  long match[4] = {0, 0, 0, 0};
  long total[4] = {0, 0, 0, 0};
  std::size_t cand_len = 0;
  std::size_t ref_len = 0;

  void add(const std::vector<std::string>& cand, const std::vector<std::string>& ref) {
    cand_len += cand.size();
    ref_len += ref.size();
    for (std::size_t n = 1; n <= 4; ++n) {
      auto cc = ngram_counts(cand, n);
      auto rc = ngram_counts(ref, n);
      for (const auto& [gram, cnt] : cc) {
        auto it = rc.find(gram);
        if (it != rc.end()) match[n - 1] += std::min(cnt, it->second);
      }
      if (cand.size() >= n) total[n - 1] += static_cast<long>(cand.size() - n + 1);
    }
  }
};

double bp(std::size_t c, std::size_t r) {
  if (c > r) return 1.0;
  return std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));
}

}  // namespace

double corpus_bleu(const std::vector<std::string>& candidates,
                   const std::vector<std::string>& references) {
  if (candidates.size() != references.size())
    throw LengthMismatch("BLEU: " + std::to_string(candidates.size()) +
                         " candidates vs " + std::to_string(references.size()) +
                         " references");
  BleuTallies t;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    t.add(bleu_tokenize(candidates[i]), bleu_tokenize(references[i]));

  if (t.cand_len == 0) return t.ref_len == 0 ? 100.0 : 0.0;

  double log_sum = 0.0;
  for (int n = 0; n < 4; ++n) {
    double p;
    if (t.total[n] == 0)
      p = 1.0;  // no candidate n-grams of this order anywhere: vacuous
    else if (t.match[n] == 0)
      return 0.0;
    else
      p = static_cast<double>(t.match[n]) / static_cast<double>(t.total[n]);
    log_sum += 0.25 * std::log(p);
  }
  return 100.0 * bp(t.cand_len, t.ref_len) * std::exp(log_sum);
}

double sentence_bleu_smoothed(const std::string& candidate,
                              const std::string& reference) {
  BleuTallies t;
  t.add(bleu_tokenize(candidate), bleu_tokenize(reference));
  if (t.cand_len == 0) return t.ref_len == 0 ? 100.0 : 0.0;

  double log_sum = 0.0;
  for (int n = 0; n < 4; ++n) {
    double p;
    if (n == 0) {
      if (t.match[0] == 0) return 0.0;
      p = static_cast<double>(t.match[0]) / static_cast<double>(t.total[0]);
    } else {
      p = static_cast<double>(t.match[n] + 1) / static_cast<double>(t.total[n] + 1);
    }
    log_sum += 0.25 * std::log(p);
  }
  return 100.0 * bp(t.cand_len, t.ref_len) * std::exp(log_sum);
}

double combined(double bleu, double inform, double success) {
  return round2(bleu + 0.5 * (inform + success));
}

// --- goal-based metrics -------------------------------------------------------

InformSuccess inform_success(const std::vector<SessionPrediction>& preds,
                             const ingest::CorpusBundle& bundle) {
  std::size_t informed_n = 0, success_n = 0;
  for (const SessionPrediction& pred : preds) {
    const DialogueSession& gold = session_by_id(bundle, pred.session_id);
    if (!gold.goal)
      throw MissingGoal("session " + pred.session_id + " carries no goal");

    bool informed = true;
    for (const auto& [domain, dg] : *gold.goal) {
      if (!dg.requires_venue) continue;
      // the last turn that offers a venue while this domain is active
      int offer = -1;
      for (std::size_t i = 0; i < pred.turns.size(); ++i) {
        const auto& t = pred.turns[i];
        bool active = t.state.count(domain) ||
                      std::find(t.domains.begin(), t.domains.end(), domain) !=
                          t.domains.end();
        if (active && t.delex.find("[value_name]") != std::string::npos)
          offer = static_cast<int>(i);
      }
      auto dbit = bundle.databases.find(domain);
      if (offer < 0 || dbit == bundle.databases.end()) {
        informed = false;
        continue;
      }
      db::DbTable table{domain, dbit->second};
      SlotMap cons;
      const BeliefState& st = pred.turns[static_cast<std::size_t>(offer)].state;
      if (auto sit = st.find(domain); sit != st.end()) cons = sit->second;
      std::vector<Record> offered = db::query_lenient(table, cons);
      bool hit = std::any_of(offered.begin(), offered.end(), [&](const Record& r) {
        return record_meets_goal(r, dg.constraints);
      });
      if (!hit) informed = false;
    }
    if (!informed) continue;
    ++informed_n;
    std::set<std::string> emitted = emitted_placeholders(pred);
    std::set<std::string> needed = goal_requestables(*gold.goal);
    if (std::includes(emitted.begin(), emitted.end(), needed.begin(), needed.end()))
      ++success_n;
  }
  if (preds.empty()) return {100.0, 100.0};
  double n = static_cast<double>(preds.size());
  return {100.0 * static_cast<double>(informed_n) / n,
          100.0 * static_cast<double>(success_n) / n};
}

MatchSuccF1 match_succf1(const std::vector<SessionPrediction>& preds,
                         const ingest::CorpusBundle& bundle) {
  std::size_t match_n = 0;
  long tp = 0, pred_total = 0, gold_total = 0;
  for (const SessionPrediction& pred : preds) {
    const DialogueSession& gold = session_by_id(bundle, pred.session_id);
    if (!gold.goal)
      throw MissingGoal("session " + pred.session_id + " carries no goal");

    const BeliefState final_state =
        pred.turns.empty() ? BeliefState{} : pred.turns.back().state;
    bool matched = true;
    for (const auto& [domain, dg] : *gold.goal) {
      auto dbit = bundle.databases.find(domain);
      if (dg.constraints.empty() || dbit == bundle.databases.end()) continue;
      db::DbTable table{domain, dbit->second};
      SlotMap cons;
      if (auto sit = final_state.find(domain); sit != final_state.end())
        cons = sit->second;
      std::vector<Record> rows = db::query_lenient(table, cons);
      bool hit = std::any_of(rows.begin(), rows.end(), [&](const Record& r) {
        return record_meets_goal(r, dg.constraints);
      });
      if (!hit) matched = false;
    }
    if (matched) ++match_n;

    std::set<std::string> emitted = emitted_placeholders(pred);
    std::set<std::string> needed = goal_requestables(*gold.goal);
    std::vector<std::string> inter;
    std::set_intersection(emitted.begin(), emitted.end(), needed.begin(),
                          needed.end(), std::back_inserter(inter));
    tp += static_cast<long>(inter.size());
    pred_total += static_cast<long>(emitted.size());
    gold_total += static_cast<long>(needed.size());
  }

  MatchSuccF1 out;
  out.match = preds.empty()
                  ? 100.0
                  : 100.0 * static_cast<double>(match_n) /
                        static_cast<double>(preds.size());
  if (tp == 0) {
    out.succ_f1 = (pred_total == 0 && gold_total == 0) ? 100.0 : 0.0;
  } else {
    double p = static_cast<double>(tp) / static_cast<double>(pred_total);
    double r = static_cast<double>(tp) / static_cast<double>(gold_total);
    out.succ_f1 = 100.0 * 2.0 * p * r / (p + r);
  }
  return out;
}

// --- single-turn understanding -------------------------------------------------

SluMetrics slu_metrics(const std::vector<SessionPrediction>& preds,
                       const ingest::CorpusBundle& bundle) {
  std::size_t intent_hits = 0, overall_hits = 0;
  long tp = 0, pred_total = 0, gold_total = 0;
  for (const SessionPrediction& pred : preds) {
    const DialogueSession& gold = session_by_id(bundle, pred.session_id);
    if (pred.turns.size() != 1 || gold.turns.size() != 1)
      throw LengthMismatch("understanding metrics expect single-turn sessions (" +
                           pred.session_id + ")");

    auto intent_set = [](const IntentMap& m) {
      std::set<std::pair<std::string, std::string>> s;
      for (const auto& [domain, names] : m)
        for (const std::string& n : names) s.emplace(domain, n);
      return s;
    };
    IntentMap gold_intents =
        gold.turns[0].intents ? *gold.turns[0].intents : IntentMap{};
    bool intents_eq = intent_set(pred.turns[0].intents) == intent_set(gold_intents);
    if (intents_eq) ++intent_hits;

    auto triples = [](const BeliefState& state) {
      std::set<std::tuple<std::string, std::string, std::string>> s;
      for (const auto& [domain, slots] : normalize_state(state))
        for (const auto& [slot, value] : slots)
          s.emplace(domain, slot, serialize_value_expr(value));
      return s;
    };
    auto ps = triples(pred.turns[0].state);
    auto gs = triples(gold.turns[0].state ? *gold.turns[0].state : BeliefState{});
    std::vector<std::tuple<std::string, std::string, std::string>> inter;
    std::set_intersection(ps.begin(), ps.end(), gs.begin(), gs.end(),
                          std::back_inserter(inter));
    tp += static_cast<long>(inter.size());
    pred_total += static_cast<long>(ps.size());
    gold_total += static_cast<long>(gs.size());
    if (intents_eq && ps == gs) ++overall_hits;
  }

  SluMetrics out;
  if (preds.empty()) return {100.0, 100.0, 100.0};
  double n = static_cast<double>(preds.size());
  out.intent_acc = 100.0 * static_cast<double>(intent_hits) / n;
  if (tp == 0) {
    out.slot_f1 = (pred_total == 0 && gold_total == 0) ? 100.0 : 0.0;
  } else {
    double p = static_cast<double>(tp) / static_cast<double>(pred_total);
    double r = static_cast<double>(tp) / static_cast<double>(gold_total);
    out.slot_f1 = 100.0 * 2.0 * p * r / (p + r);
  }
  out.overall_acc = 100.0 * static_cast<double>(overall_hits) / n;
  return out;
}

// --- report assembly ------------------------------------------------------------

EvalReport evaluate(const std::vector<SessionPrediction>& preds,
                    const ingest::CorpusBundle& bundle) {
  const TaskFlowSpec& flow = bundle.flow;
  std::vector<BeliefState> ps, gs;
  std::vector<std::string> cands, refs;
  bool all_goals = !preds.empty();
  bool all_single = !preds.empty();

  for (const SessionPrediction& pred : preds) {
    const DialogueSession& gold = session_by_id(bundle, pred.session_id);
    if (pred.turns.size() != gold.turns.size())
      throw LengthMismatch("session " + pred.session_id + ": " +
                           std::to_string(pred.turns.size()) + " predicted vs " +
                           std::to_string(gold.turns.size()) + " gold turns");
    if (!gold.goal) all_goals = false;
    if (gold.turns.size() != 1) all_single = false;
    for (std::size_t i = 0; i < gold.turns.size(); ++i) {
      const Turn& gt = gold.turns[i];
      if (flow.has(Task::DST)) {
        if (!gt.state) throw MissingAnnotation("STATE", i + 1);
        ps.push_back(pred.turns[i].state);
        gs.push_back(*gt.state);
      }
      if (flow.has(Task::ConcRG)) {
        if (!gt.response) throw MissingAnnotation("RESPONSE", i + 1);
        cands.push_back(pred.turns[i].response);
        refs.push_back(*gt.response);
      } else if (flow.has(Task::DelexRG)) {
        if (!gt.delex) throw MissingAnnotation("DELEX", i + 1);
        cands.push_back(pred.turns[i].delex);
        refs.push_back(*gt.delex);
      }
    }
  }

  EvalReport report;
  if (flow.has(Task::DST)) report.jga = round2(jga(ps, gs));
  if (flow.has(Task::ConcRG) || flow.has(Task::DelexRG))
    report.bleu = round2(corpus_bleu(cands, refs));
  if (flow.has(Task::DelexRG) && all_goals) {
    InformSuccess is = inform_success(preds, bundle);
    report.inform = round2(is.inform);
    report.success = round2(is.success);
    MatchSuccF1 ms = match_succf1(preds, bundle);
    report.match = round2(ms.match);
    report.succ_f1 = round2(ms.succ_f1);
    if (report.bleu)
      report.combined = combined(*report.bleu, *report.inform, *report.success);
  }
  if (flow.has(Task::ID) && all_single) {
    SluMetrics slu = slu_metrics(preds, bundle);
    report.intent_acc = round2(slu.intent_acc);
    if (flow.has(Task::DST)) {
      report.slot_f1 = round2(slu.slot_f1);
      report.overall_acc = round2(slu.overall_acc);
    }
  }
  return report;
}

namespace {

using Field = std::pair<const char*, std::optional<double> EvalReport::*>;

constexpr Field kFields[] = {
    {"jga", &EvalReport::jga},
    {"bleu", &EvalReport::bleu},
    {"inform", &EvalReport::inform},
    {"success", &EvalReport::success},
    {"combined", &EvalReport::combined},
    {"match", &EvalReport::match},
    {"succ_f1", &EvalReport::succ_f1},
    {"intent_acc", &EvalReport::intent_acc},
    {"slot_f1", &EvalReport::slot_f1},
    {"overall_acc", &EvalReport::overall_acc},
};

std::string format2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

std::string EvalReport::text_table() const {
  std::string out;
  for (const auto& [name, member] : kFields) {
    const auto& v = this->*member;
    if (!v) continue;
    std::string line = name;
    line.append(line.size() < 12 ? 12 - line.size() : 1, ' ');
    line += format2(*v);
    out += line;
    out += '\n';
  }
  return out;
}

std::string EvalReport::json_text() const {
  nlohmann::ordered_json j;
  for (const auto& [name, member] : kFields) {
    const auto& v = this->*member;
    if (v)
      j[name] = round2(*v);
    else
      j[name] = nullptr;
  }
  return j.dump(2);
}

EvalReport average_reports(const std::vector<EvalReport>& reports) {
  if (reports.empty()) return {};
  EvalReport out;
  for (const auto& [name, member] : kFields) {
    std::size_t present = 0;
    double sum = 0.0;
    for (const EvalReport& r : reports) {
      if (r.*member) {
        ++present;
        sum += *(r.*member);
      }
    }
    if (present == 0) continue;
    if (present != reports.size())
      throw LengthMismatch(std::string("metric ") + name +
                           " is missing from some reports");
    out.*member = round2(sum / static_cast<double>(present));
  }
  return out;
}

// --- trace reconstruction --------------------------------------------------------

std::vector<SessionPrediction> predictions_from_trace(
    const std::filesystem::path& file, const ingest::CorpusBundle& bundle,
    bool current_belief_gold) {
  std::ifstream in(file);
  if (!in) throw MissingFile(file.string());

  // session -> turn -> tag -> text, sessions in first-seen order
  std::map<std::string, std::map<int, std::map<std::string, std::string>>> by_session;
  std::vector<std::string> order;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto rec = orchestrator::trace_record_from_json(line);
    if (!rec) throw FormatError("bad trace record", line_no);
    if (!by_session.count(rec->session)) order.push_back(rec->session);
    by_session[rec->session][rec->turn][rec->tag] = rec->text;
  }

  const TaskFlowSpec& flow = bundle.flow;
  std::vector<SessionPrediction> preds;
  for (const std::string& id : order) {
    const DialogueSession& gold = session_by_id(bundle, id);
    const auto& turns = by_session[id];
    SessionPrediction pred{id, {}};
    int expected = turns.empty() ? 0 : turns.rbegin()->first;
    for (int t = 1; t <= expected; ++t) {
      auto tit = turns.find(t);
      if (tit == turns.end())
        throw LengthMismatch("trace for session " + id + " skips turn " +
                             std::to_string(t));
      const auto& tags = tit->second;
      orchestrator::TurnOutputs out;
      if (static_cast<std::size_t>(t) <= gold.turns.size())
        out.user = gold.turns[static_cast<std::size_t>(t - 1)].user;
      auto text_for = [&](Tag tag) -> const std::string& {
        auto it = tags.find(tag_name(tag));
        if (it == tags.end())
          throw LengthMismatch("trace for session " + id + " turn " +
                               std::to_string(t) + " lacks a " +
                               std::string(tag_name(tag)) + " record");
        return it->second;
      };
      for (Task task : flow.tasks) {
        switch (task) {
          case Task::DI:
            out.domains = parse_domains(text_for(Tag::Domains), &out.domains_ok);
            break;
          case Task::ID:
            out.intents = parse_intents(text_for(Tag::Intents), &out.intents_ok);
            break;
          case Task::DST:
            out.state =
                parse_state(text_for(Tag::State), flow.dst_format, &out.state_ok);
            break;
          case Task::SAD:
            out.acts = parse_acts(text_for(Tag::Acts), &out.acts_ok);
            break;
          case Task::DelexRG:
            out.delex = text_for(Tag::Delex);
            break;
          case Task::ConcRG:
            out.response = text_for(Tag::Response);
            break;
        }
      }
      if (current_belief_gold && flow.has(Task::DST)) {
        if (static_cast<std::size_t>(t) > gold.turns.size() ||
            !gold.turns[static_cast<std::size_t>(t - 1)].state)
          throw MissingAnnotation("STATE", static_cast<std::size_t>(t));
        out.state = *gold.turns[static_cast<std::size_t>(t - 1)].state;
      }
      pred.turns.push_back(std::move(out));
    }
    preds.push_back(std::move(pred));
  }
  return preds;
}

}  // namespace todforge::eval
