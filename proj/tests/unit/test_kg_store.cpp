#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "egcr/error.hpp"
#include "egcr/kg_store.hpp"
#include "oracles.hpp"

using namespace egcr;
using egcr::testing::random_graph;
using egcr::testing::toy_movie_graph;

namespace {

KnowledgeGraph from_text(const std::string& triples, const std::string& entities) {
  std::istringstream t(triples), e(entities);
  return load_graph(t, e);
}

const std::string kTwoEntities =
    R"({"id": 0, "name": "No Time to Die", "kind": "item", "aliases": []})"
    "\n"
    R"({"id": 1, "name": "Action", "kind": "attribute", "aliases": ["action movie"]})"
    "\n";

}  // namespace

TEST_CASE("load_graph: empty sources give an empty graph") {
  auto g = from_text("", "");
  CHECK(g.num_entities() == 0);
  CHECK(g.num_relations() == 0);
  CHECK(g.triples().empty());
}

TEST_CASE("load_graph: movie linked to its genre") {
  auto g = from_text("0\thas_genre\t1\n", kTwoEntities);
  CHECK(g.num_entities() == 2);
  CHECK(g.triples().size() == 1);
  const auto genre = g.find_relation("has_genre");
  REQUIRE(genre.has_value());
  CHECK(g.neighbors(0, *genre) == std::vector<EntityId>{1});
  CHECK(g.entity(1).kind == EntityKind::attribute);
  CHECK(g.items() == std::vector<EntityId>{0});
}

TEST_CASE("load_graph: duplicate triples are kept once, comments and blank lines skipped") {
  auto g = from_text("# header\n0\thas_genre\t1\n\n0\thas_genre\t1\r\n", kTwoEntities);
  CHECK(g.triples().size() == 1);
}

TEST_CASE("load_graph: malformed lines report their line number") {
  SUBCASE("triples with two fields") {
    try {
      from_text("0\thas_genre\t1\n0\thas_genre\n", kTwoEntities);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
  }
  SUBCASE("non-numeric id") {
    CHECK_THROWS_AS(from_text("zero\thas_genre\t1\n", kTwoEntities), ParseError);
  }
  SUBCASE("bad entity JSON") {
    try {
      from_text("", kTwoEntities + "{not json}\n");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
    }
  }
  SUBCASE("unknown kind") {
    CHECK_THROWS_AS(from_text("", R"({"id": 4, "name": "x", "kind": "person"})"), ParseError);
  }
}

TEST_CASE("load_graph: dangling references name the offending id") {
  try {
    from_text("0\thas_genre\t7\n", kTwoEntities);
    FAIL("expected IntegrityError");
  } catch (const IntegrityError& e) {
    CHECK(std::string(e.what()).find('7') != std::string::npos);
  }
}

TEST_CASE("build: registry invariants") {
  CHECK_THROWS_AS(KnowledgeGraph::build({{1, "a", EntityKind::item, {}}, {1, "b", EntityKind::item, {}}}, {}, {}),
                  IntegrityError);
  CHECK_THROWS_AS(KnowledgeGraph::build({{1, "Dune", EntityKind::item, {}}, {2, "dune", EntityKind::item, {}}}, {}, {}),
                  IntegrityError);
  // Same name under different kinds is allowed.
  CHECK_NOTHROW(KnowledgeGraph::build({{1, "Dune", EntityKind::item, {}}, {2, "Dune", EntityKind::concept_, {}}}, {}, {}));
  CHECK_THROWS_AS(KnowledgeGraph::build({{1, "x", EntityKind::item, {}}}, {"aligned_to"}, {{1, 0, 1}}), IntegrityError);
  CHECK_THROWS_AS(KnowledgeGraph::build({{1, "x", EntityKind::item, {}}}, {"r"}, {{1, 3, 1}}), IntegrityError);
}

TEST_CASE("neighbors: per relation and union") {
  auto g = KnowledgeGraph::build(
      {{0, "a", EntityKind::item, {}}, {1, "b", EntityKind::item, {}}, {2, "c", EntityKind::item, {}},
       {3, "lonely", EntityKind::item, {}}},
      {"r0", "r1"}, {{0, 0, 1}, {0, 0, 2}, {0, 1, 1}});
  CHECK(g.neighbors(3).empty());
  CHECK(g.neighbors(0, 0) == std::vector<EntityId>{1, 2});
  CHECK(g.neighbors(0) == std::vector<EntityId>{1, 2});
  CHECK(g.neighbors(0, 1) == std::vector<EntityId>{1});
  CHECK_THROWS_AS(g.neighbors(9), LookupError);
}

TEST_CASE("neighbors agree with the triple set on random graphs") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    auto g = random_graph(rng, {});
    for (const auto& e : g.entities()) {
      for (const auto& r : g.relations()) {
        std::vector<EntityId> expected;
        for (const auto& t : g.triples()) {
          if (t.head == e.id && t.relation == r.id) expected.push_back(t.tail);
        }
        std::sort(expected.begin(), expected.end());
        expected.erase(std::unique(expected.begin(), expected.end()), expected.end());
        CHECK(g.neighbors(e.id, r.id) == expected);
      }
    }
  }
}

TEST_CASE("serialization round trip reproduces ids and triples") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    auto g = random_graph(rng, {});
    std::ostringstream t, e;
    write_triples(g, t);
    write_entities(g, e);
    auto reloaded = from_text(t.str(), e.str());
    // Relations never used by a triple are not part of the triple file.
    std::set<RelationId> used;
    for (const auto& tr : g.triples()) used.insert(tr.relation);
    if (used.size() == g.num_relations() &&
        std::all_of(used.begin(), used.end(), [&](RelationId r) { return r < static_cast<RelationId>(used.size()); })) {
      CHECK(reloaded == g);
    }
    std::ostringstream t2, e2;
    write_triples(reloaded, t2);
    write_entities(reloaded, e2);
    CHECK(t2.str() == t.str());
    CHECK(e2.str() == e.str());
  }
}

TEST_CASE("link_mentions: placeholders") {
  auto g = toy_movie_graph();
  auto r = link_mentions("I loved @1 a lot", g);
  REQUIRE(r.mentions.size() == 1);
  CHECK(r.mentions[0].entity == 1);
  CHECK(r.mentions[0].surface == "@1");
  CHECK(r.mentions[0].start == 8);
  CHECK(r.mentions[0].end == 10);

  auto unknown = link_mentions("what about @999 or @10?", g);
  CHECK(unknown.mentions.empty());  // 999 unregistered, 10 is not an item
  CHECK(unknown.unlinked == std::vector<std::string>{"@999", "@10"});

  CHECK(link_mentions("mail me@1 or @1x", g).mentions.empty());
}

TEST_CASE("link_mentions: attribute names, case-insensitive and word-bounded") {
  auto g = toy_movie_graph();
  auto r = link_mentions("something action packed", g);
  REQUIRE(r.mentions.size() == 1);
  CHECK(r.mentions[0].surface == "action");
  CHECK(r.mentions[0].entity == 10);

  CHECK(link_mentions("transaction", g).mentions.empty());
  // Longest match wins: the alias "action movie" over "action".
  auto longest = link_mentions("An ACTION MOVIE with Daniel Craig!", g);
  REQUIRE(longest.mentions.size() == 2);
  CHECK(longest.mentions[0].surface == "ACTION MOVIE");
  CHECK(longest.mentions[0].entity == 10);
  CHECK(longest.mentions[1].entity == 11);
  // Non-ASCII alias.
  auto accented = link_mentions("anything with Timothée Chalamet", g);
  REQUIRE(accented.mentions.size() == 1);
  CHECK(accented.mentions[0].entity == 12);
  // Item names are only linked through placeholders.
  CHECK(link_mentions("Skyfall", g).mentions.empty());
}

TEST_CASE("link_mentions: empty registry links nothing") {
  KnowledgeGraph g;
  CHECK(link_mentions("no entities here", g).mentions.empty());
}

TEST_CASE("link_mentions: spans increase, do not overlap and match the text") {
  auto g = toy_movie_graph();
  const std::string text = "action action movie @3 daniel craig, @2,Action!@1";
  auto r = link_mentions(text, g);
  std::size_t last_end = 0;
  for (const auto& m : r.mentions) {
    CHECK(m.start >= last_end);
    CHECK(m.end > m.start);
    CHECK(m.surface == text.substr(m.start, m.end - m.start));
    last_end = m.end;
  }
  CHECK(r.mentions.size() == 7);
}

TEST_CASE("resolve_placeholders replaces registered ids only") {
  auto g = toy_movie_graph();
  CHECK(resolve_placeholders("watch @3 or @77", g) == "watch Skyfall or @77");
}

TEST_CASE("merge_graphs") {
  auto single = [](EntityId id, const std::string& name, EntityKind kind) {
    return KnowledgeGraph::build({{id, name, kind, {}}}, {}, {});
  };
  SUBCASE("two singletons and one pair") {
    auto fused = merge_graphs(single(0, "Dune", EntityKind::item), single(0, "desert", EntityKind::concept_), {{{0, 0}}});
    CHECK(fused.graph.num_entities() == 2);
    CHECK(fused.graph.relation(fused.aligned_to).label == "aligned_to");
    CHECK(fused.graph.triples().size() == 2);
    CHECK(fused.graph.neighbors(0, fused.aligned_to) == std::vector<EntityId>{fused.concept_base});
    CHECK(fused.graph.neighbors(fused.concept_base, fused.aligned_to) == std::vector<EntityId>{0});
  }
  SUBCASE("empty alignment") {
    auto fused = merge_graphs(toy_movie_graph(), single(0, "desert", EntityKind::concept_), {});
    CHECK(fused.graph.num_entities() == 7);
    CHECK(fused.graph.triples().size() == toy_movie_graph().triples().size());
  }
  SUBCASE("counts add up") {
    auto item = KnowledgeGraph::build({{0, "a", EntityKind::item, {}}, {1, "b", EntityKind::attribute, {}}}, {"r"},
                                      {{0, 0, 1}});
    auto concept_graph = KnowledgeGraph::build(
        {{0, "x", EntityKind::concept_, {}}, {1, "y", EntityKind::concept_, {}}, {2, "z", EntityKind::concept_, {}}},
        {"r", "isa"}, {{0, 0, 1}, {1, 1, 2}});
    auto fused = merge_graphs(item, concept_graph, {{{0, 2}}});
    CHECK(fused.graph.num_entities() == 5);
    CHECK(fused.graph.triples().size() == 5);
    CHECK(fused.graph.num_relations() == 3);  // r shared by label, isa, aligned_to
    CHECK(fused.concept_base == 2);
  }
  SUBCASE("dangling alignment") {
    CHECK_THROWS_AS(merge_graphs(single(0, "a", EntityKind::item), single(0, "b", EntityKind::concept_), {{{0, 5}}}),
                    IntegrityError);
  }
}

TEST_CASE("merge_graphs triple count on random graphs") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto a = random_graph(rng, {});
    auto raw = random_graph(rng, {});
    // Distinct names so the union does not collide.
    std::vector<Entity> renamed(raw.entities().begin(), raw.entities().end());
    for (auto& e : renamed) e.name = "c" + e.name;
    std::vector<std::string> labels;
    for (const auto& r : raw.relations()) labels.push_back(r.label);
    auto b = KnowledgeGraph::build(renamed, labels, {raw.triples().begin(), raw.triples().end()});
    std::vector<AlignmentPair> pairs;
    for (int k = 0; k < 3; ++k) {
      pairs.push_back({a.entities()[rng() % a.num_entities()].id, b.entities()[rng() % b.num_entities()].id});
    }
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    auto fused = merge_graphs(a, b, pairs);
    // Shifted concept ids never coincide with item-graph ids.
    CHECK(fused.graph.triples().size() == a.triples().size() + b.triples().size() + 2 * pairs.size());
  }
}

TEST_CASE("load_alignment") {
  std::istringstream in("# item\tconcept\n1\t2\n3\t4\n");
  CHECK(load_alignment(in) == std::vector<AlignmentPair>{{1, 2}, {3, 4}});
  std::istringstream bad("1\t2\t3\n");
  CHECK_THROWS_AS(load_alignment(bad), ParseError);
}
