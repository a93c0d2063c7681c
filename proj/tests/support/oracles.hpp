#pragma once

// Independent reference implementations and fixtures shared by the unit and
// acceptance tests. Oracles use plain loops over triples and never call the
// code they check.

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "egcr/graph_encoder.hpp"
#include "egcr/kg_store.hpp"
#include "egcr/recommender.hpp"
#include "egcr/synthetic.hpp"

namespace egcr::testing {

/// Per-edge accumulation: for every triple add W_r h_head into the tail's
/// slot, divide per (node, relation) in-degree, add the self term, activate.
Eigen::MatrixXd brute_force_rgcn(const KnowledgeGraph& g, const Eigen::MatrixXd& h, const LayerWeights& w,
                                 bool self_loop, Activation act);

struct RandomGraphLimits {
  int max_nodes = 20;
  int max_relations = 3;
  int max_triples = 40;
};

/// Random graph with mixed entity kinds and non-contiguous ids.
KnowledgeGraph random_graph(std::mt19937_64& rng, const RandomGraphLimits& limits);

LayerWeights random_weights(std::mt19937_64& rng, int dim, std::size_t relations);
Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols);

/// Every simple undirected path from `from` to `to` with at most `max_len`
/// hops, as entity sequences.
std::vector<std::vector<EntityId>> enumerate_paths(const KnowledgeGraph& g, EntityId from, EntityId to,
                                                   int max_len);

/// Length of the shortest undirected path from any mention to `rec`, or -1.
int bfs_distance(const KnowledgeGraph& g, const std::vector<EntityId>& mentions, EntityId rec, int max_len);

/// Preferred path by exhaustive enumeration: shortest, then fewest
/// non-attribute intermediates, then smallest entity sequence. Empty when
/// none within `max_len`.
std::vector<EntityId> preferred_path(const KnowledgeGraph& g, const std::vector<EntityId>& mentions, EntityId rec,
                                     int max_len);

/// The edge used between two adjacent entities: lowest relation id, stored
/// direction first.
PathStep preferred_step(const KnowledgeGraph& g, EntityId from, EntityId to);

/// The running example: No Time to Die (1), Dune (2), Skyfall (3) with
/// Action (10), Daniel Craig (11) and Timothee Chalamet (12).
KnowledgeGraph toy_movie_graph();

/// Five items with hand-picked embeddings for fit checks.
struct ToyFitInstance {
  KnowledgeGraph graph;
  EntityTable table;
  std::vector<TrainingExample> examples;
  ScorerParams params;
};
ToyFitInstance toy_fit_instance();

/// Corpus BLEU-4 by direct n-gram counting with std::map; an order with no
/// candidate n-grams counts as precision 1.
double naive_bleu(const std::vector<std::vector<std::string>>& candidates,
                  const std::vector<std::vector<std::string>>& references);

/// Distinct over total n-grams, pooled.
double naive_distinct(const std::vector<std::vector<std::string>>& utterances, std::size_t n);

/// Fresh empty directory removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& tag = "egcr");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

/// Writes a planted corpus under `dir`/corpus, ingests it into `dir`/model
/// and fits the scorer on the training split. Returns the model directory.
std::filesystem::path build_planted_model(const std::filesystem::path& dir, const PlantedSpec& spec = {});

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace egcr::testing
