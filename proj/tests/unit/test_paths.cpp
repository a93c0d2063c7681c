#include <doctest.h>

#include <algorithm>
#include <random>

#include "egcr/recommender.hpp"
#include "oracles.hpp"

using namespace egcr;
using egcr::testing::bfs_distance;
using egcr::testing::preferred_path;
using egcr::testing::preferred_step;
using egcr::testing::random_graph;
using egcr::testing::toy_movie_graph;

namespace {

bool has_edge(const KnowledgeGraph& g, EntityId a, RelationId r, EntityId b) {
  for (const auto& t : g.triples()) {
    if (t.head == a && t.relation == r && t.tail == b) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("path: direct link is one hop") {
  auto g = toy_movie_graph();
  std::vector<EntityId> mentions{11};  // Daniel Craig
  auto p = extract_reasoning_path(g, mentions, 3);
  CHECK(p.entities == std::vector<EntityId>{11, 3});
  REQUIRE(p.steps.size() == 1);
  CHECK(p.steps[0] == PathStep{1, false});
  CHECK(render_path(p, g) == "Daniel Craig —starring⁻¹→ Skyfall");
}

TEST_CASE("path: shared genre gives two hops through the attribute") {
  auto g = toy_movie_graph();
  std::vector<EntityId> mentions{2};  // Dune
  auto p = extract_reasoning_path(g, mentions, 1);
  CHECK(p.entities == std::vector<EntityId>{2, 10, 1});
  CHECK(render_path_hops(p, g) ==
        std::vector<std::string>{"Dune —has_genre→ Action", "Action —has_genre⁻¹→ No Time to Die"});
}

TEST_CASE("path: ties prefer the smallest entity sequence") {
  // No Time to Die and Skyfall share both Action and Daniel Craig.
  auto g = toy_movie_graph();
  std::vector<EntityId> mentions{1};
  CHECK(extract_reasoning_path(g, mentions, 3).entities == std::vector<EntityId>{1, 10, 3});
}

TEST_CASE("path: attribute intermediates beat item intermediates") {
  auto g = KnowledgeGraph::build(
      {{1, "m", EntityKind::item, {}}, {2, "bridge item", EntityKind::item, {}},
       {5, "bridge attr", EntityKind::attribute, {}}, {9, "rec", EntityKind::item, {}}},
      {"similar_to", "has_attribute"}, {{1, 0, 2}, {2, 0, 9}, {1, 1, 5}, {9, 1, 5}});
  std::vector<EntityId> mentions{1};
  CHECK(extract_reasoning_path(g, mentions, 9).entities == std::vector<EntityId>{1, 5, 9});
}

TEST_CASE("path: degenerate cases") {
  auto g = KnowledgeGraph::build(
      {{1, "a", EntityKind::item, {}}, {2, "b", EntityKind::item, {}}, {3, "c", EntityKind::item, {}},
       {4, "island", EntityKind::item, {}}},
      {"r"}, {{1, 0, 2}, {2, 0, 3}});
  std::vector<EntityId> one{1};
  CHECK(extract_reasoning_path(g, one, 4).empty());
  CHECK(extract_reasoning_path(g, {}, 3).empty());
  CHECK(extract_reasoning_path(g, one, 3, 1).empty());  // two hops away, L = 1
  CHECK(extract_reasoning_path(g, one, 3).length() == 2);
  std::vector<EntityId> unknown{77};
  CHECK(extract_reasoning_path(g, unknown, 3).empty());

  auto self = extract_reasoning_path(g, one, 1);
  CHECK(self.entities == std::vector<EntityId>{1});
  CHECK(self.length() == 0);
  CHECK(render_path(self, g) == "none");
  CHECK(render_path(ReasoningPath{}, g) == "none");
}

TEST_CASE("path: the lowest relation id is used, stored direction first") {
  auto g = KnowledgeGraph::build({{1, "a", EntityKind::item, {}}, {2, "b", EntityKind::item, {}}},
                                 {"r0", "r1"}, {{2, 0, 1}, {1, 0, 2}, {1, 1, 2}});
  std::vector<EntityId> m{1};
  auto p = extract_reasoning_path(g, m, 2);
  REQUIRE(p.steps.size() == 1);
  CHECK(p.steps[0] == PathStep{0, true});
}

TEST_CASE("path: matches the exhaustive enumerator on random graphs") {
  std::mt19937_64 rng(99);
  int non_empty = 0;
  for (int trial = 0; trial < 150; ++trial) {
    auto g = random_graph(rng, {30, 3, 45});
    const auto& es = g.entities();
    const EntityId rec = es[rng() % es.size()].id;
    std::vector<EntityId> mentions;
    const int n_mentions = static_cast<int>(rng() % 4);
    for (int k = 0; k < n_mentions; ++k) mentions.push_back(es[rng() % es.size()].id);
    const int L = 1 + static_cast<int>(rng() % 3);

    auto p = extract_reasoning_path(g, mentions, rec, L);
    auto expected = preferred_path(g, mentions, rec, L);
    CHECK(p.entities == expected);
    if (p.empty()) {
      CHECK(bfs_distance(g, mentions, rec, L) == -1);
      continue;
    }
    ++non_empty;
    CHECK(static_cast<int>(p.length()) == bfs_distance(g, mentions, rec, L));
    CHECK(std::find(mentions.begin(), mentions.end(), p.entities.front()) != mentions.end());
    CHECK(p.entities.back() == rec);
    REQUIRE(p.steps.size() + 1 == p.entities.size());
    for (std::size_t k = 0; k < p.steps.size(); ++k) {
      const auto a = p.entities[k], b = p.entities[k + 1];
      CHECK(p.steps[k] == preferred_step(g, a, b));
      const auto& s = p.steps[k];
      CHECK((s.forward ? has_edge(g, a, s.relation, b) : has_edge(g, b, s.relation, a)));
    }
  }
  CHECK(non_empty > 30);
}
