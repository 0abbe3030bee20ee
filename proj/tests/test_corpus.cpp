#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "todforge/corpus.hpp"
#include "todforge/errors.hpp"
#include "todforge/ingest.hpp"

using namespace todforge;
using namespace todforge::corpus;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("todforge_corpus_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

DialogueSession tiny_session() {
  Turn t;
  t.user = "hi";
  t.domains = std::vector<std::string>{"hotel"};
  t.state = BeliefState{{"hotel", {{"area", ValueExpr::plain("north")}}}};
  t.response = "hello .";
  return DialogueSession{"s1", "tiny", {t}, std::nullopt};
}

// split a sample into per-turn groups (each starting at a USER segment)
std::vector<std::vector<Segment>> turn_groups(const TrainingSample& s) {
  std::vector<std::vector<Segment>> groups;
  for (const Segment& seg : s.segments) {
    if (seg.tag == Tag::Instructions) continue;
    if (seg.tag == Tag::User) groups.emplace_back();
    REQUIRE(!groups.empty());
    groups.back().push_back(seg);
  }
  return groups;
}

}  // namespace

TEST_CASE("instruction block text for the full flow") {
  TaskFlowSpec flow{{Task::DI, Task::ID, Task::DST, Task::SAD, Task::DelexRG,
                     Task::ConcRG},
                    DstFormat::Plain};
  InstructionBlock block = render_instructions(flow, {"hotel", "train"}, flow.dst_format);
  CHECK(block.render() ==
        "Please act as an AI assistant to interact with the user in a "
        "task-oriented dialogue scenario to meet his/her needs.\n"
        "For each message from the user, follow the instructions below to "
        "generate intermediate results until the assistant replies:\n"
        "1. Please identify the domains involved in the user message from: "
        "[\"hotel\", \"train\"].\n"
        "2. Select the correct intent(s) expressed in the user text among the "
        "provided intents.\n"
        "3. Please maintain the user's needs from the beginning of the dialogue "
        "to the present in the following format of slot-value pairs: "
        "{\"format\": {\"{slot_name}\": \"{slot_value}\"}, \"examples\": "
        "{\"slot1\": \"val1\", \"slot2\": \"val2\"}}.\n"
        "4. Before generating the assistant's reply, summarize the system "
        "action decisions.\n"
        "5. Generate delexicalized assistant reply.\n"
        "6. Generate concrete assistant reply.\n");
  REQUIRE(block.task_lines.size() == 6);
  CHECK(block.task_lines[0].first == Task::DI);
  CHECK(block.task_lines[5].first == Task::ConcRG);
}

TEST_CASE("instruction block variants") {
  TaskFlowSpec single{{Task::ConcRG}, DstFormat::Plain};
  InstructionBlock block = render_instructions(single, {}, DstFormat::Plain);
  std::string text = block.render();
  CHECK(text.find("1. Generate concrete assistant reply.\n") != std::string::npos);
  CHECK(text.find("2. ") == std::string::npos);

  TaskFlowSpec di{{Task::DI}, DstFormat::Plain};
  text = render_instructions(di, {}, DstFormat::Plain).render();
  CHECK(text.find("from: [].") != std::string::npos);

  TaskFlowSpec rel{{Task::DST}, DstFormat::Relational};
  text = render_instructions(rel, {}, DstFormat::Relational).render();
  CHECK(text.find(R"("relations": ["equal_to", "at_least", "not", "one_of"])") !=
        std::string::npos);
  CHECK(text.find(R"(one_of(val1, val2))") != std::string::npos);
}

TEST_CASE("schema registry window traces") {
  // window 0: re-emit on every appearance
  SchemaRegistry every{0, {}};
  CHECK(every.process_turn({"a"}) == std::vector<std::string>{"a"});
  CHECK(every.process_turn({"a"}) == std::vector<std::string>{"a"});
  CHECK(every.process_turn({"a", "b"}) == std::vector<std::string>{"a", "b"});

  // no window: emit each label once, ever
  SchemaRegistry once{std::nullopt, {}};
  CHECK(once.process_turn({"a"}) == std::vector<std::string>{"a"});
  CHECK(once.process_turn({"a", "b"}) == std::vector<std::string>{"b"});
  CHECK(once.process_turn({"a", "b"}).empty());

  // window 1: re-emit when more than one turn has passed since the last one
  SchemaRegistry w1{1, {}};
  CHECK(w1.process_turn({"a"}) == std::vector<std::string>{"a"});  // age 1 after
  CHECK(w1.process_turn({"a"}).empty());                           // age 1, not > 1
  CHECK(w1.process_turn({"a"}) == std::vector<std::string>{"a"});  // age 2 > 1

  // absence still ages the label
  SchemaRegistry w2{1, {}};
  CHECK(w2.process_turn({"a"}) == std::vector<std::string>{"a"});
  CHECK(w2.process_turn({}).empty());
  CHECK(w2.process_turn({"a"}) == std::vector<std::string>{"a"});

  // input order preserved, duplicates within a turn emitted once
  SchemaRegistry ord{15, {}};
  CHECK(ord.process_turn({"b", "a", "b"}) == std::vector<std::string>{"b", "a"});
}

TEST_CASE("single-turn serialization layout") {
  TaskFlowSpec flow{{Task::DI, Task::DST, Task::ConcRG}, DstFormat::Plain};
  std::map<std::string, DomainSchema> schemas;  // none: schema lines skipped
  SerializeOptions opts;
  opts.include_instructions = false;
  opts.include_schemas = false;

  auto samples = serialize_session(tiny_session(), flow, schemas, {}, opts);
  REQUIRE(samples.size() == 1);
  CHECK(samples[0].id == "s1");
  CHECK(render_sample_text(samples[0]) ==
        "USER: hi\n"
        "DOMAINS: [\"hotel\"]\n"
        "STATE: {\"hotel\":{\"area\":\"north\"}}\n"
        "RESPONSE: hello .\n");
  REQUIRE(samples[0].segments.size() == 4);
  CHECK_FALSE(samples[0].segments[0].supervised);
  CHECK(samples[0].segments[1].supervised);
  CHECK(samples[0].segments[2].supervised);
  CHECK(samples[0].segments[3].supervised);
}

TEST_CASE("db context line attaches after the state line") {
  TaskFlowSpec flow{{Task::DST, Task::ConcRG}, DstFormat::Plain};
  DialogueSession s = tiny_session();
  s.turns[0].db = DbResult{{DbResultGroup{"hotel", "", 2, {Record{{"name", "alpha"}}}}}};
  SerializeOptions opts;
  opts.include_instructions = false;

  auto samples = serialize_session(s, flow, {}, {}, opts);
  REQUIRE(samples.size() == 1);
  CHECK(render_sample_text(samples[0]) ==
        "USER: hi\n"
        "STATE: {\"hotel\":{\"area\":\"north\"}}\n"
        "DB: hotel: 2 [{\"name\":\"alpha\"}]\n"
        "RESPONSE: hello .\n");
  // the DB line is context, not a target
  CHECK_FALSE(samples[0].segments[2].supervised);
}

TEST_CASE("instructions segment leads every sample") {
  TaskFlowSpec flow{{Task::ConcRG}, DstFormat::Plain};
  DialogueSession s{"s2", "tiny", {}, std::nullopt};
  for (int i = 0; i < 12; ++i) {
    Turn t;
    t.user = "user message number " + std::to_string(i) + std::string(40, 'u');
    t.response = "reply number " + std::to_string(i) + std::string(40, 'r');
    s.turns.push_back(t);
  }
  SerializeOptions opts;
  opts.max_len = 120;
  opts.history_ratio = 0.5;

  auto samples = serialize_session(s, flow, {}, {}, opts);
  REQUIRE(samples.size() > 1);
  for (const TrainingSample& sample : samples) {
    REQUIRE(!sample.segments.empty());
    CHECK(sample.segments[0].tag == Tag::Instructions);
    CHECK(sample_token_count(sample, opts.tokenizer) <= opts.max_len);
  }
  CHECK(samples[0].id == "s2#1");
  CHECK(samples[1].id == "s2#2");
}

TEST_CASE("every turn is supervised exactly once across samples") {
  ingest::CorpusBundle b = ingest::synth_fixtures(30, 3);
  SerializeOptions opts;
  opts.max_len = 512;

  for (const DialogueSession& s : b.sessions) {
    auto samples =
        serialize_session(s, b.flow, b.schemas, b.intent_schemas, opts);
    std::size_t supervised = 0;
    for (const TrainingSample& sample : samples) {
      CHECK(sample_token_count(sample, opts.tokenizer) <= opts.max_len);
      for (const Segment& seg : sample.segments)
        if (seg.supervised) {
          CHECK(tag_supervisable(seg.tag));
          ++supervised;
        }
    }
    // 6 tasks -> 6 supervised lines per turn, each exactly once
    CHECK(supervised == 6 * s.turns.size());
  }
}

TEST_CASE("re-seeded history is masked and capped") {
  ingest::CorpusBundle b = ingest::synth_fixtures(30, 11);
  SerializeOptions opts;
  opts.max_len = 640;
  opts.history_ratio = 0.6;
  const std::size_t history_budget = static_cast<std::size_t>(0.6 * 640);  // 384

  bool saw_seeded = false;
  for (const DialogueSession& s : b.sessions) {
    auto samples =
        serialize_session(s, b.flow, b.schemas, b.intent_schemas, opts);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      auto groups = turn_groups(samples[i]);
      // seeded turn groups (fully masked) form a prefix
      std::size_t seed_cost = 0;
      bool in_seed = true;
      for (const auto& group : groups) {
        bool any_supervised = false;
        for (const Segment& seg : group) any_supervised |= seg.supervised;
        if (any_supervised) {
          in_seed = false;
        } else {
          CHECK(in_seed);  // masked groups never follow supervised ones
          for (const Segment& seg : group)
            seed_cost += opts.tokenizer.count(render_segment(seg));
          saw_seeded = true;
        }
      }
      if (i == 0) CHECK(seed_cost == 0);  // first window starts fresh
      CHECK(seed_cost <= history_budget);
    }
  }
  CHECK(saw_seeded);  // the corpus is large enough to exercise re-seeding
}

TEST_CASE("schema window controls repeated schema emission") {
  DomainSchema ds;
  ds.domain = "hotel";
  ds.slots["area"] = SlotSpec{"area", {"north"}, true, false};
  std::map<std::string, DomainSchema> schemas{{"hotel", ds}};
  TaskFlowSpec flow{{Task::DI, Task::ConcRG}, DstFormat::Plain};
  DialogueSession s{"s3", "tiny", {}, std::nullopt};
  for (int i = 0; i < 4; ++i) {
    Turn t;
    t.user = "message " + std::to_string(i);
    t.domains = std::vector<std::string>{"hotel"};
    t.response = "ok";
    s.turns.push_back(t);
  }

  auto count_schema_segments = [&](std::optional<int> window) {
    SerializeOptions opts;
    opts.include_instructions = false;
    opts.schema_window = window;
    auto samples = serialize_session(s, flow, schemas, {}, opts);
    std::size_t n = 0;
    for (const TrainingSample& sample : samples)
      for (const Segment& seg : sample.segments)
        if (seg.tag == Tag::DomainSchema) ++n;
    return n;
  };

  CHECK(count_schema_segments(0) == 4);             // every turn
  CHECK(count_schema_segments(15) == 1);            // stays fresh within 4 turns
  CHECK(count_schema_segments(std::nullopt) == 1);  // once ever
  auto no_schemas = [&]() {
    SerializeOptions opts;
    opts.include_instructions = false;
    opts.include_schemas = false;
    opts.schema_window = 0;
    auto samples = serialize_session(s, flow, schemas, {}, opts);
    for (const TrainingSample& sample : samples)
      for (const Segment& seg : sample.segments)
        if (seg.tag == Tag::DomainSchema) return false;
    return true;
  };
  CHECK(no_schemas());
}

TEST_CASE("serialization failures carry the turn number") {
  TaskFlowSpec flow{{Task::DST, Task::ConcRG}, DstFormat::Plain};
  DialogueSession s = tiny_session();
  Turn second;
  second.user = "and a train";
  second.response = "sure";  // no state annotation
  s.turns.push_back(second);

  SerializeOptions opts;
  opts.include_instructions = false;
  try {
    serialize_session(s, flow, {}, {}, opts);
    FAIL("expected MissingAnnotation");
  } catch (const MissingAnnotation& e) {
    CHECK(e.task == "DST");
    CHECK(e.turn == 2);
  }
}

TEST_CASE("oversized inputs are rejected") {
  TaskFlowSpec flow{{Task::ConcRG}, DstFormat::Plain};
  DialogueSession s{"s4", "tiny", {}, std::nullopt};
  Turn t;
  t.user = std::string(600, 'u');
  t.response = "ok";
  s.turns.push_back(t);

  SerializeOptions opts;
  opts.max_len = 64;
  opts.include_instructions = false;
  CHECK_THROWS_AS(serialize_session(s, flow, {}, {}, opts), TurnTooLarge);

  SerializeOptions tiny;
  tiny.max_len = 10;  // smaller than the instruction block itself
  CHECK_THROWS_AS(serialize_session(tiny_session(),
                                    TaskFlowSpec{{Task::ConcRG}, DstFormat::Plain},
                                    {}, {}, tiny),
                  InstructionsTooLarge);
}

TEST_CASE("corpus stats over a pinned sample") {
  TrainingSample s;
  s.id = "pinned";
  for (int i = 0; i < 4; ++i)
    s.segments.push_back(Segment{Tag::User, std::string(93, 'x'), false});
  // each rendered line is exactly 100 bytes -> 25 tokens

  CorpusStats stats = corpus_stats({s});
  CHECK(stats.num_samples == 1);
  CHECK(stats.avg_turns_per_sample == doctest::Approx(4.0));
  CHECK(stats.avg_tokens_per_turn == doctest::Approx(25.0));
  CHECK(stats.total_tokens == 100);

  CorpusStats empty = corpus_stats({});
  CHECK(empty.num_samples == 0);
  CHECK(empty.total_tokens == 0);
  CHECK(empty.avg_turns_per_sample == doctest::Approx(0.0));
}

TEST_CASE("corpus jsonl round-trip") {
  ingest::CorpusBundle b = ingest::synth_fixtures(5, 21);
  std::vector<TrainingSample> all;
  SerializeOptions opts;
  for (const DialogueSession& s : b.sessions) {
    auto samples = serialize_session(s, b.flow, b.schemas, b.intent_schemas, opts);
    all.insert(all.end(), samples.begin(), samples.end());
  }
  fs::path dir = fresh_dir("rt");
  write_corpus(all, dir / "corpus.jsonl");
  CHECK(read_corpus(dir / "corpus.jsonl") == all);
  fs::remove_all(dir);
}

TEST_CASE("corpus reader rejects malformed samples") {
  fs::path dir = fresh_dir("bad");
  auto check_rejected = [&](const std::string& content) {
    std::ofstream(dir / "c.jsonl", std::ios::trunc) << content;
    CHECK_THROWS_AS(read_corpus(dir / "c.jsonl"), FormatError);
  };
  check_rejected("not json\n");
  check_rejected(R"({"id":"x","segments":[]})" "\n");
  check_rejected(R"({"id":"x","segments":[{"tag":"BLAH","text":"y"}]})" "\n");
  check_rejected(
      R"({"id":"x","segments":[{"tag":"USER","text":"y","supervised":true}]})" "\n");
  CHECK_THROWS_AS(read_corpus(dir / "absent.jsonl"), MissingFile);

  std::ofstream(dir / "c.jsonl", std::ios::trunc)
      << R"({"id":"x","segments":[{"tag":"USER","text":"y"}]})" << "\n";
  auto back = read_corpus(dir / "c.jsonl");
  REQUIRE(back.size() == 1);
  CHECK(back[0].segments[0].tag == Tag::User);
  CHECK_FALSE(back[0].segments[0].supervised);
  fs::remove_all(dir);
}
