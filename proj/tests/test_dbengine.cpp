#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "todforge/dbengine.hpp"
#include "todforge/errors.hpp"

using namespace todforge;
using namespace todforge::db;

namespace {

Record rec(std::string name, std::string area, std::string price, std::string stars) {
  return Record{{"name", std::move(name)},
                {"area", std::move(area)},
                {"price", std::move(price)},
                {"stars", std::move(stars)}};
}

DbTable hotel_table() {
  DbTable t;
  t.domain = "hotel";
  t.records = {rec("alpha", "north", "cheap", "3"),
               rec("bravo", "south", "cheap", "4"),
               rec("coral", "north", "expensive", "5"),
               rec("delta", "centre", "moderate", "2")};
  return t;
}

}  // namespace

TEST_CASE("matches handles every relation") {
  Record r = rec("alpha", "north", "cheap", "3");

  CHECK(matches(r, "area", ValueExpr::plain("north")));
  CHECK(matches(r, "area", ValueExpr::plain("North")));  // normalized
  CHECK_FALSE(matches(r, "area", ValueExpr::plain("south")));

  CHECK(matches(r, "price", ValueExpr::make(Relation::EqualTo, {"cheap"})));
  CHECK_FALSE(matches(r, "price", ValueExpr::make(Relation::EqualTo, {"moderate"})));

  CHECK(matches(r, "stars", ValueExpr::make(Relation::AtLeast, {"3"})));
  CHECK(matches(r, "stars", ValueExpr::make(Relation::AtLeast, {"2"})));
  CHECK_FALSE(matches(r, "stars", ValueExpr::make(Relation::AtLeast, {"4"})));

  CHECK(matches(r, "area", ValueExpr::make(Relation::Not, {"south"})));
  CHECK_FALSE(matches(r, "area", ValueExpr::make(Relation::Not, {"north"})));

  CHECK(matches(r, "area", ValueExpr::make(Relation::OneOf, {"south", "north"})));
  CHECK_FALSE(matches(r, "area", ValueExpr::make(Relation::OneOf, {"south", "east"})));
  CHECK_FALSE(matches(r, "area", ValueExpr::make(Relation::OneOf, {})));
}

TEST_CASE("dontcare matches everything") {
  Record r = rec("alpha", "north", "cheap", "3");
  CHECK(matches(r, "area", ValueExpr::plain("dontcare")));
  CHECK(matches(r, "stars", ValueExpr::plain("dontcare")));  // even numeric-ish slots
  CHECK(matches(r, "area", ValueExpr::make(Relation::EqualTo, {"dontcare"})));
}

TEST_CASE("at_least on non-numeric data raises TypeMismatch") {
  Record r = rec("alpha", "north", "cheap", "3");
  CHECK_THROWS_AS(matches(r, "price", ValueExpr::make(Relation::AtLeast, {"2"})),
                  TypeMismatch);
  CHECK_THROWS_AS(matches(r, "stars", ValueExpr::make(Relation::AtLeast, {"many"})),
                  TypeMismatch);
  // leading integer with trailing text still counts as numeric
  Record t{{"leave", "17:00 sharp"}};
  CHECK(matches(t, "leave", ValueExpr::make(Relation::AtLeast, {"16"})));
  CHECK_FALSE(matches(t, "leave", ValueExpr::make(Relation::AtLeast, {"18"})));
}

TEST_CASE("query preserves record order and skips absent slots") {
  DbTable t = hotel_table();
  auto out = query(t, SlotMap{{"price", ValueExpr::plain("cheap")}});
  REQUIRE(out.size() == 2);
  CHECK(out[0].at("name") == "alpha");
  CHECK(out[1].at("name") == "bravo");

  // constraint on a slot the table does not carry is ignored
  out = query(t, SlotMap{{"parking", ValueExpr::plain("yes")},
                         {"area", ValueExpr::plain("north")}});
  REQUIRE(out.size() == 2);
  CHECK(out[0].at("name") == "alpha");
  CHECK(out[1].at("name") == "coral");

  CHECK(query(t, {}).size() == 4);
  CHECK(query(t, SlotMap{{"area", ValueExpr::plain("east")}}).empty());
}

TEST_CASE("query agrees with a brute-force predicate oracle") {
  std::mt19937_64 rng(20240817);
  const std::vector<std::string> areas{"north", "south", "centre", "east"};
  const std::vector<std::string> prices{"cheap", "moderate", "expensive"};

  for (int trial = 0; trial < 200; ++trial) {
    DbTable t;
    t.domain = "d";
    int n = 1 + static_cast<int>(rng() % 12);
    for (int i = 0; i < n; ++i) {
      t.records.push_back(rec("r" + std::to_string(i), areas[rng() % areas.size()],
                              prices[rng() % prices.size()],
                              std::to_string(rng() % 6)));
    }
    SlotMap cons;
    if (rng() % 2) cons["area"] = ValueExpr::plain(areas[rng() % areas.size()]);
    if (rng() % 2)
      cons["price"] =
          ValueExpr::make(Relation::Not, {prices[rng() % prices.size()]});
    if (rng() % 2)
      cons["stars"] =
          ValueExpr::make(Relation::AtLeast, {std::to_string(rng() % 6)});
    if (rng() % 4 == 0)
      cons["area"] = ValueExpr::make(
          Relation::OneOf, {areas[rng() % areas.size()], areas[rng() % areas.size()]});

    // independent oracle: per-record conjunction of the same predicate
    std::vector<Record> expected;
    for (const Record& r : t.records) {
      bool keep = true;
      for (const auto& [slot, v] : cons)
        if (r.count(slot) && !matches(r, slot, v)) keep = false;
      if (keep) expected.push_back(r);
    }
    CHECK(query(t, cons) == expected);
  }
}

TEST_CASE("query_lenient drops mismatched constraints instead of throwing") {
  DbTable t = hotel_table();
  SlotMap cons{{"price", ValueExpr::make(Relation::AtLeast, {"2"})},  // non-numeric
               {"area", ValueExpr::plain("north")}};
  std::vector<std::string> dropped;
  auto out = query_lenient(t, cons, &dropped);
  REQUIRE(out.size() == 2);
  CHECK(out[0].at("name") == "alpha");
  CHECK(out[1].at("name") == "coral");
  CHECK(dropped == std::vector<std::string>{"price"});

  dropped.clear();
  out = query_lenient(t, SlotMap{{"area", ValueExpr::plain("south")}}, &dropped);
  CHECK(out.size() == 1);
  CHECK(dropped.empty());
}

TEST_CASE("db line over raw result map") {
  std::map<std::string, std::vector<Record>> results;
  results["train"] = {Record{{"id", "tr1"}}, Record{{"id", "tr2"}},
                      Record{{"id", "tr3"}}};
  results["hotel"] = {Record{{"name", "alpha"}}};

  CHECK(render_db_line(results, 0) == "hotel: 1; train: 3");
  CHECK(render_db_line(results, 1) ==
        R"(hotel: 1 [{"name":"alpha"}]; train: 3 [{"id":"tr1"}])");
  CHECK(render_db_line(results, 2) ==
        R"(hotel: 1 [{"name":"alpha"}]; train: 3 [{"id":"tr1"},{"id":"tr2"}])");
  CHECK(render_db_line({}, 1).empty());

  std::map<std::string, std::vector<Record>> none{{"hotel", {}}};
  CHECK(render_db_line(none, 3) == "hotel: 0");
}

TEST_CASE("db line over bounded groups carries intent labels") {
  DbResult res;
  res.groups.push_back(DbResultGroup{"train", "find_train", 3,
                                     {Record{{"id", "tr1"}}}});
  res.groups.push_back(DbResultGroup{"hotel", "", 2, {Record{{"name", "alpha"}}}});
  CHECK(render_db_line(res) ==
        R"(hotel: 2 [{"name":"alpha"}]; train/find_train: 3 [{"id":"tr1"}])");

  DbResult empty;
  CHECK(render_db_line(empty).empty());

  DbResult zero;
  zero.groups.push_back(DbResultGroup{"train", "find_train", 0, {}});
  CHECK(render_db_line(zero) == "train/find_train: 0");
}
