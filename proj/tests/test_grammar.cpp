#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "todforge/grammar.hpp"

using namespace todforge;

TEST_CASE("tag names round-trip and render_line shape") {
  for (Tag t : {Tag::Instructions, Tag::User, Tag::Domains, Tag::DomainSchema,
                Tag::Intents, Tag::IntentSchema, Tag::State, Tag::Db, Tag::Acts,
                Tag::Delex, Tag::Response}) {
    auto back = tag_from_name(tag_name(t));
    REQUIRE(back.has_value());
    CHECK(*back == t);
  }
  CHECK(tag_from_name("DOMAIN_SCHEMA") == Tag::DomainSchema);
  CHECK_FALSE(tag_from_name("user").has_value());
  CHECK(render_line(Tag::User, "i need a cheap hotel") ==
        "USER: i need a cheap hotel\n");
  CHECK(render_line(Tag::State, "{}") == "STATE: {}\n");
}

TEST_CASE("only recognition and generation targets are supervisable") {
  CHECK(tag_supervisable(Tag::Domains));
  CHECK(tag_supervisable(Tag::Intents));
  CHECK(tag_supervisable(Tag::State));
  CHECK(tag_supervisable(Tag::Acts));
  CHECK(tag_supervisable(Tag::Delex));
  CHECK(tag_supervisable(Tag::Response));
  CHECK_FALSE(tag_supervisable(Tag::Instructions));
  CHECK_FALSE(tag_supervisable(Tag::User));
  CHECK_FALSE(tag_supervisable(Tag::DomainSchema));
  CHECK_FALSE(tag_supervisable(Tag::IntentSchema));
  CHECK_FALSE(tag_supervisable(Tag::Db));
}

TEST_CASE("task to output tag mapping") {
  CHECK(tag_for_task(Task::DI) == Tag::Domains);
  CHECK(tag_for_task(Task::ID) == Tag::Intents);
  CHECK(tag_for_task(Task::DST) == Tag::State);
  CHECK(tag_for_task(Task::SAD) == Tag::Acts);
  CHECK(tag_for_task(Task::DelexRG) == Tag::Delex);
  CHECK(tag_for_task(Task::ConcRG) == Tag::Response);
}

TEST_CASE("domain list serialization is compact") {
  CHECK(serialize_domains({}) == "[]");
  CHECK(serialize_domains({"hotel"}) == R"(["hotel"])");
  CHECK(serialize_domains({"hotel", "train"}) == R"(["hotel","train"])");
}

TEST_CASE("domain list parse with ok flag") {
  bool ok = false;
  auto d = parse_domains(R"(["hotel","train"])", &ok);
  CHECK(ok);
  CHECK(d == std::vector<std::string>{"hotel", "train"});

  d = parse_domains("[]", &ok);
  CHECK(ok);
  CHECK(d.empty());

  d = parse_domains("not json", &ok);
  CHECK_FALSE(ok);
  CHECK(d.empty());

  d = parse_domains(R"(["a", 3])", &ok);
  CHECK_FALSE(ok);
  CHECK(d.empty());

  d = parse_domains(R"({"a": 1})", &ok);
  CHECK_FALSE(ok);
  CHECK(d.empty());

  // no flag requested: still total
  CHECK(parse_domains("garbage").empty());
}

TEST_CASE("intent map round-trip") {
  IntentMap m{{"hotel", {"find_hotel", "book_hotel"}}, {"train", {"find_train"}}};
  std::string s = serialize_intents(m);
  CHECK(s == R"({"hotel":["find_hotel","book_hotel"],"train":["find_train"]})");
  bool ok = false;
  CHECK(parse_intents(s, &ok) == m);
  CHECK(ok);

  CHECK(parse_intents("{}", &ok).empty());
  CHECK(ok);
  CHECK(parse_intents("[]", &ok).empty());
  CHECK_FALSE(ok);
  CHECK(parse_intents(R"({"hotel": "find_hotel"})", &ok).empty());
  CHECK_FALSE(ok);
  CHECK(parse_intents(R"({"hotel": [1]})", &ok).empty());
  CHECK_FALSE(ok);
}

TEST_CASE("value expr serialization") {
  CHECK(serialize_value_expr(ValueExpr::plain("cheap")) == "cheap");
  CHECK(serialize_value_expr(ValueExpr::make(Relation::OneOf, {"a", "b"})) ==
        "one_of(a, b)");
  CHECK(serialize_value_expr(ValueExpr::make(Relation::AtLeast, {"5"})) ==
        "at_least(5)");
  CHECK(serialize_value_expr(ValueExpr::make(Relation::Not, {"north"})) ==
        "not(north)");
  CHECK(serialize_value_expr(ValueExpr::make(Relation::EqualTo, {"3"})) ==
        "equal_to(3)");
}

TEST_CASE("value expr parsing") {
  auto v = parse_value_expr("one_of(a, b)");
  CHECK(v == ValueExpr::make(Relation::OneOf, {"a", "b"}));
  v = parse_value_expr("at_least(17:00)");
  CHECK(v == ValueExpr::make(Relation::AtLeast, {"17:00"}));
  v = parse_value_expr("not(centre)");
  CHECK(v == ValueExpr::make(Relation::Not, {"centre"}));
  // bare text with parentheses but no known relation stays plain
  v = parse_value_expr("foo(bar)");
  CHECK(v == ValueExpr::plain("foo(bar)"));
  v = parse_value_expr("cheap");
  CHECK(v == ValueExpr::plain("cheap"));
  // "plain(...)" never spells a relation; treated as literal text
  v = parse_value_expr("plain(x)");
  CHECK(v == ValueExpr::plain("plain(x)"));
}

TEST_CASE("state serialization plain vs relational") {
  BeliefState st{{"hotel",
                  {{"area", ValueExpr::plain("north")},
                   {"stars", ValueExpr::make(Relation::AtLeast, {"3"})}}}};
  CHECK(serialize_state(st, DstFormat::Plain) ==
        R"x({"hotel":{"area":"north","stars":"at_least(3)"}})x");
  CHECK(serialize_state(st, DstFormat::Relational) ==
        R"x({"hotel":{"area":"north","stars":"at_least(3)"}})x");
  CHECK(serialize_state({}, DstFormat::Plain) == "{}");
}

TEST_CASE("state parsing normalizes and drops empty values") {
  bool ok = false;
  auto st = parse_state(R"({"hotel":{"area":"  North ","price":"none"}})",
                        DstFormat::Plain, &ok);
  CHECK(ok);
  REQUIRE(st.count("hotel"));
  REQUIRE(st["hotel"].count("area"));
  CHECK(st["hotel"]["area"] == ValueExpr::plain("north"));
  CHECK_FALSE(st["hotel"].count("price"));  // "none" value dropped

  // domain whose every slot normalizes away disappears entirely
  st = parse_state(R"({"hotel":{"price":"not mentioned"}})", DstFormat::Plain, &ok);
  CHECK(ok);
  CHECK(st.empty());
}

TEST_CASE("state parsing structural violations yield empty state") {
  bool ok = true;
  CHECK(parse_state("[1,2]", DstFormat::Plain, &ok).empty());
  CHECK_FALSE(ok);
  CHECK(parse_state(R"({"hotel":{}})", DstFormat::Plain, &ok).empty());
  CHECK_FALSE(ok);
  CHECK(parse_state(R"({"hotel":{"area":5}})", DstFormat::Plain, &ok).empty());
  CHECK_FALSE(ok);
  CHECK(parse_state(R"({"hotel":"north"})", DstFormat::Plain, &ok).empty());
  CHECK_FALSE(ok);
  CHECK(parse_state("{broken", DstFormat::Plain, &ok).empty());
  CHECK_FALSE(ok);
  CHECK(parse_state("{}", DstFormat::Plain, &ok).empty());
  CHECK(ok);  // empty object is a valid empty state
}

TEST_CASE("relational values only decode under the relational format") {
  bool ok = false;
  auto rel = parse_state(R"x({"hotel":{"stars":"at_least(3)"}})x",
                         DstFormat::Relational, &ok);
  CHECK(ok);
  CHECK(rel["hotel"]["stars"] == ValueExpr::make(Relation::AtLeast, {"3"}));

  auto plain = parse_state(R"x({"hotel":{"stars":"at_least(3)"}})x",
                           DstFormat::Plain, &ok);
  CHECK(ok);
  CHECK(plain["hotel"]["stars"] == ValueExpr::plain("at_least(3)"));
}

TEST_CASE("acts bracket grammar round-trip") {
  ActSet acts{{"hotel", "inform", {"price", "area"}},
              {"hotel", "request", {"stars"}},
              {"train", "offer", {}}};
  std::string s = serialize_acts(acts);
  CHECK(s == "[hotel] [inform] price area [request] stars | [train] [offer]");
  bool ok = false;
  CHECK(parse_acts(s, &ok) == acts);
  CHECK(ok);
}

TEST_CASE("acts parsing edge cases") {
  bool ok = false;
  CHECK(parse_acts("", &ok).empty());
  CHECK(ok);  // empty act decision is well-formed
  CHECK(parse_acts("   ", &ok).empty());
  CHECK(ok);

  auto a = parse_acts("[hotel] [inform] price", &ok);
  CHECK(ok);
  REQUIRE(a.size() == 1);
  CHECK(a[0] == ActTriple{"hotel", "inform", {"price"}});

  // missing act after domain
  CHECK(parse_acts("[hotel] price", &ok).empty());
  CHECK_FALSE(ok);
  // group not starting with a bracket token
  CHECK(parse_acts("hotel [inform]", &ok).empty());
  CHECK_FALSE(ok);
  // domain with no act before the separator
  CHECK(parse_acts("[hotel] | [train] [offer]", &ok).empty());
  CHECK_FALSE(ok);
  // free text
  CHECK(parse_acts("sure, the phone number is 12345", &ok).empty());
  CHECK_FALSE(ok);
}

TEST_CASE("schema serializers are stable compact JSON") {
  DomainSchema ds;
  ds.domain = "hotel";
  ds.intents = {"find_hotel"};
  ds.slots["area"] = SlotSpec{"area", {"north", "south"}, true, false};
  ds.slots["phone"] = SlotSpec{"phone", {}, false, true};
  CHECK(serialize_domain_schema(ds) ==
        R"({"domain":"hotel","intents":["find_hotel"],"slots":{)"
        R"("area":{"informable":true,"requestable":false,"values":["north","south"]},)"
        R"("phone":{"informable":false,"requestable":true,"values":[]}}})");

  IntentSchema is;
  is.intent = "find_hotel";
  is.domain = "hotel";
  is.required_slots = {"area"};
  is.optional_slots = {"stars"};
  is.result_slots = {"name", "phone"};
  CHECK(serialize_intent_schema(is) ==
        R"({"domain":"hotel","intent":"find_hotel","optional_slots":["stars"],)"
        R"("required_slots":["area"],"result_slots":["name","phone"]})");
}

TEST_CASE("serialize then parse round-trips for random-ish states") {
  BeliefState st{
      {"hotel", {{"area", ValueExpr::plain("north")}}},
      {"train",
       {{"day", ValueExpr::plain("monday")},
        {"leave", ValueExpr::make(Relation::AtLeast, {"09:00"})},
        {"dest", ValueExpr::make(Relation::OneOf, {"ely", "cambridge"})}}}};
  bool ok = false;
  auto back = parse_state(serialize_state(st, DstFormat::Relational),
                          DstFormat::Relational, &ok);
  CHECK(ok);
  CHECK(back == st);
}
