#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "egcr/error.hpp"
#include "egcr/graph_encoder.hpp"
#include "oracles.hpp"

using namespace egcr;
using egcr::testing::brute_force_rgcn;
using egcr::testing::random_graph;
using egcr::testing::random_matrix;
using egcr::testing::random_weights;

namespace {

EntityTable table_for(const KnowledgeGraph& g, const Eigen::MatrixXd& values) {
  std::vector<EntityId> ids;
  for (const auto& e : g.entities()) ids.push_back(e.id);
  return EntityTable(ids, values);
}

EncoderConfig config(int dim, Activation act, bool self_loop = true, int layers = 1) {
  EncoderConfig cfg;
  cfg.dim = dim;
  cfg.activation = act;
  cfg.self_loop = self_loop;
  cfg.layers = layers;
  return cfg;
}

// Undirected hop distance from `from`, -1 when unreachable.
std::unordered_map<EntityId, int> hop_distance(const KnowledgeGraph& g, EntityId from) {
  std::unordered_map<EntityId, int> dist{{from, 0}};
  std::vector<EntityId> frontier{from};
  while (!frontier.empty()) {
    std::vector<EntityId> next;
    for (EntityId e : frontier) {
      for (const auto& t : g.triples()) {
        EntityId other = 0;
        if (t.head == e) other = t.tail;
        else if (t.tail == e) other = t.head;
        else continue;
        if (!dist.contains(other)) {
          dist[other] = dist[e] + 1;
          next.push_back(other);
        }
      }
    }
    frontier = std::move(next);
  }
  return dist;
}

}  // namespace

TEST_CASE("rgcn_layer: isolated node with identity self weight is the identity") {
  auto g = KnowledgeGraph::build({{4, "solo", EntityKind::item, {}}}, {"r"}, {});
  Eigen::MatrixXd h(1, 3);
  h << 0.25, -1.5, 2.0;
  LayerWeights w{Eigen::MatrixXd::Identity(3, 3), {Eigen::MatrixXd::Constant(3, 3, 9.0)}};
  auto out = rgcn_layer(table_for(g, h), g, w, config(3, Activation::identity));
  CHECK(out.values() == h);
}

TEST_CASE("rgcn_layer: zero weights with relu give zeros") {
  std::mt19937_64 rng(1);
  auto g = random_graph(rng, {});
  const int d = 4;
  LayerWeights w{Eigen::MatrixXd::Zero(d, d), std::vector<Eigen::MatrixXd>(g.num_relations(), Eigen::MatrixXd::Zero(d, d))};
  auto out = rgcn_layer(table_for(g, random_matrix(rng, g.num_entities(), d)), g, w, config(d, Activation::relu));
  CHECK(out.values().isZero(0.0));
}

TEST_CASE("rgcn_layer: three nodes, two relations against the per-edge oracle") {
  auto g = KnowledgeGraph::build(
      {{1, "a", EntityKind::item, {}}, {2, "b", EntityKind::attribute, {}}, {3, "c", EntityKind::item, {}}},
      {"r0", "r1"}, {{1, 0, 2}, {3, 0, 2}, {2, 1, 1}, {1, 1, 3}, {3, 1, 3}});
  std::mt19937_64 rng(42);
  const int d = 5;
  auto h = random_matrix(rng, 3, d);
  auto w = random_weights(rng, d, 2);
  for (auto act : {Activation::identity, Activation::relu}) {
    for (bool self : {true, false}) {
      auto out = rgcn_layer(table_for(g, h), g, w, config(d, act, self));
      auto expected = brute_force_rgcn(g, h, w, self, act);
      CHECK((out.values() - expected).cwiseAbs().maxCoeff() <= 1e-6);
    }
  }
}

TEST_CASE("rgcn_layer: agrees with the oracle on random graphs") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    auto g = random_graph(rng, {});
    const int d = std::uniform_int_distribution<int>(1, 8)(rng);
    auto h = random_matrix(rng, g.num_entities(), d);
    auto w = random_weights(rng, d, g.num_relations());
    const bool self = trial % 2 == 0;
    const auto act = trial % 3 == 0 ? Activation::identity : Activation::relu;
    auto out = rgcn_layer(table_for(g, h), g, w, config(d, act, self));
    REQUIRE(out.rows() == h.rows());
    CHECK((out.values() - brute_force_rgcn(g, h, w, self, act)).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(out.all_finite());
  }
}

TEST_CASE("rgcn_layer: shape and coverage errors") {
  auto g = egcr::testing::toy_movie_graph();
  auto h = table_for(g, Eigen::MatrixXd::Zero(6, 2));
  LayerWeights w{Eigen::MatrixXd::Zero(2, 2), {Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 2)}};
  CHECK_NOTHROW(rgcn_layer(h, g, w, config(2, Activation::relu)));

  LayerWeights missing{Eigen::MatrixXd::Zero(2, 2), {Eigen::MatrixXd::Zero(2, 2)}};
  CHECK_THROWS_AS(rgcn_layer(h, g, missing, config(2, Activation::relu)), ConfigError);

  LayerWeights wide{Eigen::MatrixXd::Zero(3, 3), {Eigen::MatrixXd::Zero(3, 3), Eigen::MatrixXd::Zero(3, 3)}};
  CHECK_THROWS_AS(rgcn_layer(h, g, wide, config(3, Activation::relu)), DimensionError);

  auto short_table = EntityTable({1, 2}, Eigen::MatrixXd::Zero(2, 2));
  CHECK_THROWS_AS(rgcn_layer(short_table, g, w, config(2, Activation::relu)), DimensionError);
}

TEST_CASE("rgcn_layer: relabeling the registry permutes the rows") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 25; ++trial) {
    auto g = random_graph(rng, {});
    std::vector<Entity> shuffled(g.entities().begin(), g.entities().end());
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    std::vector<std::string> labels;
    for (const auto& r : g.relations()) labels.push_back(r.label);
    auto permuted = KnowledgeGraph::build(shuffled, labels, {g.triples().begin(), g.triples().end()});

    const int d = 4;
    auto h = random_matrix(rng, g.num_entities(), d);
    Eigen::MatrixXd hp(h.rows(), d);
    for (const auto& e : g.entities()) {
      hp.row(static_cast<Eigen::Index>(permuted.index_of(e.id))) = h.row(static_cast<Eigen::Index>(g.index_of(e.id)));
    }
    auto w = random_weights(rng, d, g.num_relations());
    auto out = rgcn_layer(table_for(g, h), g, w, config(d, Activation::relu));
    auto out_p = rgcn_layer(table_for(permuted, hp), permuted, w, config(d, Activation::relu));
    for (const auto& e : g.entities()) {
      CHECK((out.row(e.id) - out_p.row(e.id)).cwiseAbs().maxCoeff() <= 1e-9);
    }
  }
}

TEST_CASE("encode_entities: zero input without self loops stays at act(0)") {
  std::mt19937_64 rng(8);
  auto g = random_graph(rng, {});
  for (auto act : {Activation::relu, Activation::identity}) {
    auto cfg = config(3, act, false, 3);
    auto out = encode_entities(g, cfg, EntityTable::zeros(g, 3));
    CHECK(out.values().isZero(0.0));
  }
}

TEST_CASE("encode_entities: rows farther than `layers` hops are ignored") {
  std::mt19937_64 rng(31);
  int checked = 0;
  for (int trial = 0; trial < 40; ++trial) {
    auto g = random_graph(rng, {});
    const int layers = 1 + trial % 3;
    auto cfg = config(3, Activation::relu, true, layers);
    cfg.seed = static_cast<std::uint64_t>(trial);
    auto weights = init_weights(g, cfg);
    auto h = table_for(g, random_matrix(rng, g.num_entities(), 3));
    auto base = encode_entities(g, cfg, weights, h);

    const EntityId target = g.entities()[0].id;
    auto dist = hop_distance(g, target);
    for (const auto& e : g.entities()) {
      auto it = dist.find(e.id);
      if (it != dist.end() && it->second <= layers) continue;
      auto changed = h;
      changed.row(e.id) = Eigen::RowVectorXd::Constant(3, 50.0);
      auto out = encode_entities(g, cfg, weights, changed);
      CHECK(out.row(target) == base.row(target));
      ++checked;
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("encode_entities: single layer, determinism, empty graph") {
  std::mt19937_64 rng(3);
  auto g = random_graph(rng, {});
  auto cfg = config(4, Activation::relu, true, 1);
  cfg.seed = 19;
  auto weights = init_weights(g, cfg);
  auto h = init_embeddings(g, cfg);
  // The only layer is the final one, which is linear.
  auto last = cfg;
  last.activation = Activation::identity;
  CHECK(encode_entities(g, cfg, weights, h).values() == rgcn_layer(h, g, weights[0], last).values());
  cfg.layers = 2;
  CHECK(encode_entities(g, cfg).values() == encode_entities(g, cfg).values());
  CHECK(encode_entities(KnowledgeGraph{}, cfg).rows() == 0);
}

TEST_CASE("init_weights: bound, shape and seeding") {
  auto g = KnowledgeGraph::build({{1, "a", EntityKind::item, {}}}, {"r0", "r1", "r2"}, {});
  for (int dim : {1, 2, 7, 16}) {
    auto cfg = config(dim, Activation::relu, true, 2);
    cfg.seed = 5;
    auto w = init_weights(g, cfg);
    REQUIRE(w.size() == 2);
    const double bound = std::sqrt(6.0 / (2.0 * dim));
    if (dim == 1) CHECK(bound == doctest::Approx(1.7320508).epsilon(1e-6));
    for (const auto& layer : w) {
      CHECK(layer.relation.size() == 3);
      CHECK(layer.self.rows() == dim);
      CHECK(layer.self.cwiseAbs().maxCoeff() <= bound);
      for (const auto& m : layer.relation) CHECK(m.cwiseAbs().maxCoeff() <= bound);
    }
    CHECK(init_weights(g, cfg) == w);
    cfg.seed = 6;
    CHECK_FALSE(init_weights(g, cfg) == w);
  }
}

TEST_CASE("EncoderConfig::validate") {
  CHECK_THROWS_AS(config(0, Activation::relu).validate(), ConfigError);
  CHECK_THROWS_AS(config(2, Activation::relu, true, 0).validate(), ConfigError);
  CHECK_NOTHROW(config(1, Activation::relu).validate());
}

TEST_CASE("checkpoint round trip is bit-exact") {
  auto g = egcr::testing::toy_movie_graph();
  auto cfg = config(6, Activation::relu, false, 3);
  cfg.seed = 1234567;
  EncoderCheckpoint ckpt{cfg, g.num_relations(), init_weights(g, cfg)};
  ckpt.weights[0].self(0, 0) = -0.0;
  ckpt.weights[1].relation[1](2, 3) = 1e-310;  // subnormal

  std::stringstream buf;
  write_checkpoint(ckpt, buf);
  auto back = read_checkpoint(buf);
  CHECK(back.config.dim == 6);
  CHECK(back.config.layers == 3);
  CHECK(back.config.seed == cfg.seed);
  CHECK(back.config.self_loop == false);
  CHECK(back.num_relations == g.num_relations());
  REQUIRE(back.weights.size() == ckpt.weights.size());
  for (std::size_t l = 0; l < back.weights.size(); ++l) {
    CHECK(back.weights[l] == ckpt.weights[l]);
  }
  CHECK(std::signbit(back.weights[0].self(0, 0)));

  std::stringstream again;
  write_checkpoint(back, again);
  std::stringstream original;
  write_checkpoint(ckpt, original);
  CHECK(again.str() == original.str());

  std::stringstream truncated(original.str().substr(0, original.str().size() / 2));
  CHECK_THROWS_AS(read_checkpoint(truncated), Error);
  std::stringstream garbage("not a checkpoint");
  CHECK_THROWS_AS(read_checkpoint(garbage), Error);
}
