#include "todforge/corpus.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "todforge/dbengine.hpp"
#include "todforge/errors.hpp"

namespace todforge::corpus {

using nlohmann::json;

namespace {

constexpr const char* kSystemText =
    "Please act as an AI assistant to interact with the user in a task-oriented "
    "dialogue scenario to meet his/her needs.\n"
    "For each message from the user, follow the instructions below to generate "
    "intermediate results until the assistant replies:";

constexpr const char* kPlainDstFormat =
    R"fmt({"format": {"{slot_name}": "{slot_value}"}, "examples": {"slot1": "val1", "slot2": "val2"}})fmt";

constexpr const char* kRelationalDstFormat =
    R"fmt({"relations": ["equal_to", "at_least", "not", "one_of"], "examples": {"slot1": "one_of(val1, val2)", "slot2": "equal_to(val3)"}})fmt";

std::string domain_list_text(const std::vector<std::string>& domains) {
  std::string out = "[";
  for (std::size_t i = 0; i < domains.size(); ++i) {
    if (i) out += ", ";
    out += json(domains[i]).dump();
  }
  out += "]";
  return out;
}

double round2(double x) { return std::round(x * 100.0) / 100.0; }

}  // namespace

std::string InstructionBlock::render() const {
  std::string out = system_text;
  out += '\n';
  for (std::size_t i = 0; i < task_lines.size(); ++i) {
    out += std::to_string(i + 1);
    out += ". ";
    out += task_lines[i].second;
    out += '\n';
  }
  return out;
}

InstructionBlock render_instructions(const TaskFlowSpec& flow,
                                     const std::vector<std::string>& domain_list,
                                     DstFormat fmt) {
  InstructionBlock block;
  block.system_text = kSystemText;
  for (Task t : flow.tasks) {
    std::string line;
    switch (t) {
      case Task::DI:
        line = "Please identify the domains involved in the user message from: " +
               domain_list_text(domain_list) + ".";
        break;
      case Task::ID:
        line =
            "Select the correct intent(s) expressed in the user text among the "
            "provided intents.";
        break;
      case Task::DST:
        line =
            "Please maintain the user's needs from the beginning of the dialogue "
            "to the present in the following format of slot-value pairs: " +
            std::string(fmt == DstFormat::Plain ? kPlainDstFormat
                                                : kRelationalDstFormat) +
            ".";
        break;
      case Task::SAD:
        line =
            "Before generating the assistant's reply, summarize the system "
            "action decisions.";
        break;
      case Task::DelexRG:
        line = "Generate delexicalized assistant reply.";
        break;
      case Task::ConcRG:
        line = "Generate concrete assistant reply.";
        break;
    }
    block.task_lines.emplace_back(t, std::move(line));
  }
  return block;
}

std::vector<std::string> SchemaRegistry::process_turn(
    const std::vector<std::string>& labels) {
  std::vector<std::string> emitted;
  for (const std::string& label : labels) {
    auto it = ages.find(label);
    bool emit = it == ages.end() || (window && it->second > *window);
    if (emit) {
      emitted.push_back(label);
      ages[label] = 0;
    }
  }
  for (auto& [label, age] : ages) ++age;
  return emitted;
}

std::string render_segment(const Segment& seg) {
  if (seg.tag == Tag::Instructions) return seg.text + "\n";
  return render_line(seg.tag, seg.text);
}

std::string render_sample_text(const TrainingSample& sample) {
  std::string out;
  for (const Segment& seg : sample.segments) out += render_segment(seg);
  return out;
}

std::size_t sample_token_count(const TrainingSample& sample, const Tokenizer& tok) {
  std::size_t total = 0;
  for (const Segment& seg : sample.segments) total += tok.count(render_segment(seg));
  return total;
}

// ---------------------------------------------------------------------------
// Session serialization

namespace {

struct TurnBlock {
  std::vector<Segment> segments;  // supervised flags set for a target turn
  std::size_t cost = 0;
};

std::vector<Segment> masked(const std::vector<Segment>& segments) {
  std::vector<Segment> out = segments;
  for (Segment& s : out) s.supervised = false;
  return out;
}

}  // namespace

std::vector<TrainingSample> serialize_session(
    const DialogueSession& session, const TaskFlowSpec& flow,
    const std::map<std::string, DomainSchema>& schemas,
    const std::map<std::string, IntentSchema>& intent_schemas,
    const SerializeOptions& opts) {
  // DB context attaches after DST when the flow tracks state, else after ID.
  Task db_anchor = flow.has(Task::DST)   ? Task::DST
                   : flow.has(Task::ID)  ? Task::ID
                                         : Task::ConcRG;
  bool db_anchored = flow.has(Task::DST) || flow.has(Task::ID);

  SchemaRegistry domain_reg{opts.schema_window, {}};
  SchemaRegistry intent_reg{opts.schema_window, {}};

  std::vector<TurnBlock> blocks;
  for (std::size_t t = 0; t < session.turns.size(); ++t) {
    const Turn& turn = session.turns[t];
    TurnBlock block;
    auto add = [&](Tag tag, std::string text, bool supervised) {
      block.segments.push_back(Segment{tag, std::move(text), supervised});
    };
    add(Tag::User, turn.user, false);
    for (Task task : flow.tasks) {
      switch (task) {
        case Task::DI: {
          if (!turn.domains) throw MissingAnnotation("DI", t + 1);
          add(Tag::Domains, serialize_domains(*turn.domains), true);
          if (opts.include_schemas)
            for (const std::string& label : domain_reg.process_turn(*turn.domains)) {
              auto it = schemas.find(label);
              if (it != schemas.end())
                add(Tag::DomainSchema, serialize_domain_schema(it->second), false);
            }
          break;
        }
        case Task::ID: {
          if (!turn.intents) throw MissingAnnotation("ID", t + 1);
          add(Tag::Intents, serialize_intents(*turn.intents), true);
          if (opts.include_schemas) {
            std::vector<std::string> labels;
            for (auto& [domain, names] : *turn.intents)
              for (auto& n : names) labels.push_back(n);
            for (const std::string& label : intent_reg.process_turn(labels)) {
              auto it = intent_schemas.find(label);
              if (it != intent_schemas.end())
                add(Tag::IntentSchema, serialize_intent_schema(it->second), false);
            }
          }
          break;
        }
        case Task::DST:
          if (!turn.state) throw MissingAnnotation("DST", t + 1);
          add(Tag::State, serialize_state(*turn.state, flow.dst_format), true);
          break;
        case Task::SAD:
          if (!turn.acts) throw MissingAnnotation("SAD", t + 1);
          add(Tag::Acts, serialize_acts(*turn.acts), true);
          break;
        case Task::DelexRG:
          if (!turn.delex) throw MissingAnnotation("DelexRG", t + 1);
          add(Tag::Delex, *turn.delex, true);
          break;
        case Task::ConcRG:
          if (!turn.response) throw MissingAnnotation("ConcRG", t + 1);
          add(Tag::Response, *turn.response, true);
          break;
      }
      if (db_anchored && task == db_anchor && turn.db)
        add(Tag::Db, db::render_db_line(*turn.db), false);
    }
    for (const Segment& seg : block.segments)
      block.cost += opts.tokenizer.count(render_segment(seg));
    blocks.push_back(std::move(block));
  }

  Segment inst_seg;
  std::size_t inst_cost = 0;
  if (opts.include_instructions) {
    std::vector<std::string> domains;
    for (auto& [name, schema] : schemas) domains.push_back(name);
    InstructionBlock block = render_instructions(flow, domains, flow.dst_format);
    std::string text = block.render();
    text.pop_back();  // render_segment re-appends the terminating newline
    inst_seg = Segment{Tag::Instructions, std::move(text), false};
    inst_cost = opts.tokenizer.count(render_segment(inst_seg));
  }
  if (inst_cost > opts.max_len)
    throw InstructionsTooLarge("instruction block alone exceeds max_len");

  std::size_t history_budget =
      static_cast<std::size_t>(opts.history_ratio * static_cast<double>(opts.max_len));

  std::vector<TrainingSample> samples;
  TrainingSample current;
  std::size_t current_cost = 0;
  auto open_sample = [&]() {
    current = TrainingSample{};
    current_cost = 0;
    if (opts.include_instructions) {
      current.segments.push_back(inst_seg);
      current_cost = inst_cost;
    }
  };
  auto close_sample = [&]() { samples.push_back(std::move(current)); };

  open_sample();
  for (std::size_t t = 0; t < blocks.size(); ++t) {
    if (inst_cost + blocks[t].cost > opts.max_len) throw TurnTooLarge(t + 1);
    if (current_cost + blocks[t].cost > opts.max_len) {
      close_sample();
      open_sample();
      // Re-seed with the most recent whole turns under the history cap while
      // leaving room for the upcoming supervised turn.
      std::size_t seed_cost = 0;
      std::size_t first = t;
      while (first > 0) {
        std::size_t c = blocks[first - 1].cost;
        if (seed_cost + c > history_budget) break;
        if (current_cost + seed_cost + c + blocks[t].cost > opts.max_len) break;
        seed_cost += c;
        --first;
      }
      for (std::size_t j = first; j < t; ++j) {
        auto seg = masked(blocks[j].segments);
        current.segments.insert(current.segments.end(), seg.begin(), seg.end());
      }
      current_cost += seed_cost;
    }
    current.segments.insert(current.segments.end(), blocks[t].segments.begin(),
                            blocks[t].segments.end());
    current_cost += blocks[t].cost;
  }
  close_sample();

  if (samples.size() == 1) {
    samples[0].id = session.id;
  } else {
    for (std::size_t i = 0; i < samples.size(); ++i)
      samples[i].id = session.id + "#" + std::to_string(i + 1);
  }
  return samples;
}

CorpusStats corpus_stats(const std::vector<TrainingSample>& samples,
                         const Tokenizer& tok) {
  CorpusStats stats;
  stats.num_samples = samples.size();
  std::size_t turns = 0;
  for (const TrainingSample& s : samples) {
    stats.total_tokens += sample_token_count(s, tok);
    for (const Segment& seg : s.segments)
      if (seg.tag == Tag::User) ++turns;
  }
  if (stats.num_samples)
    stats.avg_turns_per_sample =
        round2(static_cast<double>(turns) / static_cast<double>(stats.num_samples));
  if (turns)
    stats.avg_tokens_per_turn = round2(static_cast<double>(stats.total_tokens) /
                                       static_cast<double>(turns));
  return stats;
}

void write_corpus(const std::vector<TrainingSample>& samples,
                  const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + file.string() + " for writing");
  for (const TrainingSample& s : samples) {
    if (s.segments.empty())
      throw FormatError("sample '" + s.id + "' has no segments");
    json segs = json::array();
    for (const Segment& seg : s.segments)
      segs.push_back({{"supervised", seg.supervised},
                      {"tag", tag_name(seg.tag)},
                      {"text", seg.text}});
    json j = {{"id", s.id}, {"segments", std::move(segs)}};
    out << j.dump() << '\n';
  }
  out.flush();
  if (!out) throw IoError("write failed for " + file.string());
}

std::vector<TrainingSample> read_corpus(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw MissingFile(file.string());
  std::vector<TrainingSample> samples;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("id") ||
        !j.contains("segments") || !j["segments"].is_array())
      throw FormatError("corpus line is not a sample object", line_no);
    TrainingSample s;
    s.id = j["id"].get<std::string>();
    for (auto& seg : j["segments"]) {
      if (!seg.is_object() || !seg.contains("tag") || !seg.contains("text"))
        throw FormatError("segment missing tag/text", line_no);
      auto tag = tag_from_name(seg["tag"].get<std::string>());
      if (!tag)
        throw FormatError("unknown segment tag '" +
                              seg["tag"].get<std::string>() + "'",
                          line_no);
      Segment out{*tag, seg["text"].get<std::string>(),
                  seg.value("supervised", false)};
      if (out.supervised && !tag_supervisable(out.tag))
        throw FormatError("tag " + std::string(tag_name(out.tag)) +
                              " cannot be supervised",
                          line_no);
      s.segments.push_back(std::move(out));
    }
    if (s.segments.empty()) throw FormatError("sample has no segments", line_no);
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace todforge::corpus
