#include "egcr/graph_encoder.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>

#include "egcr/error.hpp"

namespace egcr {

void EncoderConfig::validate() const {
  if (dim < 1) throw ConfigError("encoder dim must be >= 1");
  if (layers < 1) throw ConfigError("encoder layers must be >= 1");
}

bool operator==(const LayerWeights& a, const LayerWeights& b) {
  if (a.self.rows() != b.self.rows() || a.self.cols() != b.self.cols() || a.self != b.self) return false;
  if (a.relation.size() != b.relation.size()) return false;
  for (std::size_t r = 0; r < a.relation.size(); ++r) {
    const auto& x = a.relation[r];
    const auto& y = b.relation[r];
    if (x.rows() != y.rows() || x.cols() != y.cols() || x != y) return false;
  }
  return true;
}

EntityTable::EntityTable(std::vector<EntityId> ids, Eigen::MatrixXd values)
    : ids_(std::move(ids)), values_(std::move(values)) {
  if (static_cast<Eigen::Index>(ids_.size()) != values_.rows()) {
    throw DimensionError("entity table has " + std::to_string(values_.rows()) + " rows for " +
                         std::to_string(ids_.size()) + " ids");
  }
  rows_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!rows_.emplace(ids_[i], static_cast<Eigen::Index>(i)).second) {
      throw IntegrityError("duplicate entity id " + std::to_string(ids_[i]) + " in table");
    }
  }
}

EntityTable EntityTable::zeros(const KnowledgeGraph& g, int dim) {
  std::vector<EntityId> ids;
  ids.reserve(g.num_entities());
  for (const Entity& e : g.entities()) ids.push_back(e.id);
  return {std::move(ids), Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(g.num_entities()), dim)};
}

Eigen::Index EntityTable::row_of(EntityId id) const {
  auto it = rows_.find(id);
  if (it == rows_.end()) throw LookupError("entity " + std::to_string(id) + " not in table");
  return it->second;
}

namespace {

void check_registry(const EntityTable& h, const KnowledgeGraph& g) {
  if (static_cast<std::size_t>(h.rows()) != g.num_entities()) {
    throw DimensionError("table has " + std::to_string(h.rows()) + " rows, graph has " +
                         std::to_string(g.num_entities()) + " entities");
  }
  auto entities = g.entities();
  for (std::size_t i = 0; i < entities.size(); ++i) {
    if (h.ids()[i] != entities[i].id) {
      throw DimensionError("table row " + std::to_string(i) + " is not aligned with the graph registry");
    }
  }
}

void check_square(const Eigen::MatrixXd& m, Eigen::Index dim, const char* what) {
  if (m.rows() != dim || m.cols() != dim) {
    throw DimensionError(std::string(what) + " is " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()) + ", expected " + std::to_string(dim) + "x" +
                         std::to_string(dim));
  }
}

Eigen::MatrixXd uniform_matrix(std::mt19937_64& rng, int rows, int cols, double bound) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = dist(rng);
  }
  return m;
}

double glorot_bound(int dim) { return std::sqrt(6.0 / (2.0 * dim)); }

}  // namespace

EntityTable rgcn_layer(const EntityTable& h, const KnowledgeGraph& g, const LayerWeights& w,
                       const EncoderConfig& cfg) {
  check_registry(h, g);
  const Eigen::Index dim = h.dim();
  if (dim != cfg.dim) throw DimensionError("table width " + std::to_string(dim) + " != dim " + std::to_string(cfg.dim));
  if (w.relation.size() != g.num_relations()) {
    throw ConfigError("layer has weights for " + std::to_string(w.relation.size()) + " relations, graph has " +
                      std::to_string(g.num_relations()));
  }
  if (cfg.self_loop) check_square(w.self, dim, "W_0");
  for (const auto& m : w.relation) check_square(m, dim, "W_r");

  const Eigen::MatrixXd& in = h.values();
  Eigen::MatrixXd out = cfg.self_loop ? Eigen::MatrixXd(in * w.self.transpose())
                                      : Eigen::MatrixXd::Zero(in.rows(), dim);

  auto entities = g.entities();
  Eigen::RowVectorXd acc(dim);
  for (std::size_t i = 0; i < entities.size(); ++i) {
    auto edges = g.in_edges(entities[i].id);
    // in_edges is sorted by relation: one mean per relation group.
    std::size_t b = 0;
    while (b < edges.size()) {
      const RelationId r = edges[b].relation;
      std::size_t e = b;
      acc.setZero();
      for (; e < edges.size() && edges[e].relation == r; ++e) {
        acc += in.row(static_cast<Eigen::Index>(g.index_of(edges[e].other)));
      }
      acc /= static_cast<double>(e - b);
      out.row(static_cast<Eigen::Index>(i)).noalias() += acc * w.relation[static_cast<std::size_t>(r)].transpose();
      b = e;
    }
  }
  if (cfg.activation == Activation::relu) out = out.cwiseMax(0.0);
  if (!out.allFinite()) throw DimensionError("relational layer produced non-finite values");
  return {h.ids(), std::move(out)};
}

std::vector<LayerWeights> init_weights(const KnowledgeGraph& g, const EncoderConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  const double bound = glorot_bound(cfg.dim);
  std::vector<LayerWeights> layers(static_cast<std::size_t>(cfg.layers));
  for (auto& layer : layers) {
    layer.self = uniform_matrix(rng, cfg.dim, cfg.dim, bound);
    layer.relation.reserve(g.num_relations());
    for (std::size_t r = 0; r < g.num_relations(); ++r) {
      layer.relation.push_back(uniform_matrix(rng, cfg.dim, cfg.dim, bound));
    }
  }
  return layers;
}

EntityTable init_embeddings(const KnowledgeGraph& g, const EncoderConfig& cfg) {
  cfg.validate();
  // Separate stream from the weights so that changing |R| leaves embeddings alone.
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  auto table = EntityTable::zeros(g, cfg.dim);
  table.values() = uniform_matrix(rng, static_cast<int>(g.num_entities()), cfg.dim, 1.0);
  return table;
}

EntityTable encode_entities(const KnowledgeGraph& g, const EncoderConfig& cfg,
                            const std::vector<LayerWeights>& weights,
                            const std::optional<EntityTable>& init) {
  cfg.validate();
  if (weights.size() != static_cast<std::size_t>(cfg.layers)) {
    throw ConfigError("expected " + std::to_string(cfg.layers) + " layers of weights, got " +
                      std::to_string(weights.size()));
  }
  EntityTable h = init ? *init : init_embeddings(g, cfg);
  EncoderConfig layer_cfg = cfg;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    layer_cfg.activation = (l + 1 == weights.size()) ? Activation::identity : cfg.activation;
    h = rgcn_layer(h, g, weights[l], layer_cfg);
  }
  return h;
}

EntityTable encode_entities(const KnowledgeGraph& g, const EncoderConfig& cfg,
                            const std::optional<EntityTable>& init) {
  return encode_entities(g, cfg, init_weights(g, cfg), init);
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr std::array<char, 8> kMagic = {'E', 'G', 'C', 'R', 'W', 'T', 'S', '1'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) throw IoError("truncated encoder checkpoint");
  return value;
}

void put_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) put<double>(out, m(r, c));
  }
}

Eigen::MatrixXd get_matrix(std::istream& in, int dim) {
  Eigen::MatrixXd m(dim, dim);
  for (int r = 0; r < dim; ++r) {
    for (int c = 0; c < dim; ++c) m(r, c) = get<double>(in);
  }
  return m;
}

}  // namespace

void write_checkpoint(const EncoderCheckpoint& ckpt, std::ostream& out) {
  const auto& cfg = ckpt.config;
  out.write(kMagic.data(), kMagic.size());
  put<std::int32_t>(out, cfg.dim);
  put<std::int32_t>(out, cfg.layers);
  put<std::uint64_t>(out, ckpt.num_relations);
  put<std::uint64_t>(out, cfg.seed);
  put<std::uint8_t>(out, cfg.activation == Activation::relu ? 0 : 1);
  put<std::uint8_t>(out, cfg.self_loop ? 1 : 0);
  if (ckpt.weights.size() != static_cast<std::size_t>(cfg.layers)) {
    throw ConfigError("checkpoint has " + std::to_string(ckpt.weights.size()) + " layers, header says " +
                      std::to_string(cfg.layers));
  }
  for (const auto& layer : ckpt.weights) {
    check_square(layer.self, cfg.dim, "W_0");
    put_matrix(out, layer.self);
    if (layer.relation.size() != ckpt.num_relations) throw ConfigError("checkpoint relation count mismatch");
    for (const auto& m : layer.relation) {
      check_square(m, cfg.dim, "W_r");
      put_matrix(out, m);
    }
  }
  if (!out) throw IoError("failed writing encoder checkpoint");
}

EncoderCheckpoint read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw IoError("not an encoder checkpoint");
  EncoderCheckpoint ckpt;
  auto& cfg = ckpt.config;
  cfg.dim = get<std::int32_t>(in);
  cfg.layers = get<std::int32_t>(in);
  ckpt.num_relations = get<std::uint64_t>(in);
  cfg.seed = get<std::uint64_t>(in);
  cfg.activation = get<std::uint8_t>(in) == 0 ? Activation::relu : Activation::identity;
  cfg.self_loop = get<std::uint8_t>(in) != 0;
  cfg.validate();
  ckpt.weights.resize(static_cast<std::size_t>(cfg.layers));
  for (auto& layer : ckpt.weights) {
    layer.self = get_matrix(in, cfg.dim);
    for (std::size_t r = 0; r < ckpt.num_relations; ++r) layer.relation.push_back(get_matrix(in, cfg.dim));
  }
  return ckpt;
}

void save_checkpoint(const EncoderCheckpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_checkpoint(ckpt, out);
}

EncoderCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace egcr
