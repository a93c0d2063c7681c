#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "egcr/kg_store.hpp"

namespace egcr {

enum class Activation { relu, identity };

struct EncoderConfig {
  int dim = 32;
  int layers = 2;
  /// Activation of hidden layers; the final layer is always identity.
  Activation activation = Activation::relu;
  bool self_loop = true;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Parameters of one relational convolution layer.
struct LayerWeights {
  Eigen::MatrixXd self;                   // W_0, dim x dim
  std::vector<Eigen::MatrixXd> relation;  // W_r, indexed by relation id

  friend bool operator==(const LayerWeights& a, const LayerWeights& b);
};

/// Per-entity embeddings; row i belongs to the entity at registry position i.
class EntityTable {
public:
  EntityTable() = default;
  EntityTable(std::vector<EntityId> ids, Eigen::MatrixXd values);

  /// Zero table over the graph's registry.
  static EntityTable zeros(const KnowledgeGraph& g, int dim);

  Eigen::Index rows() const noexcept { return values_.rows(); }
  Eigen::Index dim() const noexcept { return values_.cols(); }
  bool contains(EntityId id) const noexcept { return rows_.contains(id); }
  Eigen::Index row_of(EntityId id) const;
  const std::vector<EntityId>& ids() const noexcept { return ids_; }

  auto row(EntityId id) const { return values_.row(row_of(id)); }
  auto row(EntityId id) { return values_.row(row_of(id)); }

  const Eigen::MatrixXd& values() const noexcept { return values_; }
  Eigen::MatrixXd& values() noexcept { return values_; }

  bool all_finite() const { return values_.allFinite(); }

private:
  std::vector<EntityId> ids_;
  std::unordered_map<EntityId, Eigen::Index> rows_;
  Eigen::MatrixXd values_;
};

/// One relational convolution pass with mean normalisation per relation:
///
///   h'_i = act( W_0 h_i + sum_r sum_{j in N_r(i)} W_r h_j / |N_r(i)| )
///
/// where N_r(i) are heads j of stored triples (j, r, i). The self term is
/// dropped when `cfg.self_loop` is false. Uses `cfg.activation`.
EntityTable rgcn_layer(const EntityTable& h, const KnowledgeGraph& g, const LayerWeights& w,
                       const EncoderConfig& cfg);

/// Seeded uniform weights on [-s, s], s = sqrt(6 / (2 dim)).
std::vector<LayerWeights> init_weights(const KnowledgeGraph& g, const EncoderConfig& cfg);

/// Seeded initial embeddings used when no explicit table is supplied.
EntityTable init_embeddings(const KnowledgeGraph& g, const EncoderConfig& cfg);

/// Stacks `cfg.layers` passes; hidden layers use `cfg.activation`, the last
/// one is linear.
EntityTable encode_entities(const KnowledgeGraph& g, const EncoderConfig& cfg,
                            const std::vector<LayerWeights>& weights,
                            const std::optional<EntityTable>& init = std::nullopt);

/// Convenience overload drawing weights from `init_weights`.
EntityTable encode_entities(const KnowledgeGraph& g, const EncoderConfig& cfg,
                            const std::optional<EntityTable>& init = std::nullopt);

// ---------------------------------------------------------------------------
// Checkpoints

struct EncoderCheckpoint {
  EncoderConfig config;
  std::size_t num_relations = 0;
  std::vector<LayerWeights> weights;
};

/// Binary little-endian container: magic, header (dim, layers, |R|, seed,
/// activation, self_loop), then per layer W_0 followed by W_r in relation id
/// order, each a row-major block of doubles.
void write_checkpoint(const EncoderCheckpoint& ckpt, std::ostream& out);
EncoderCheckpoint read_checkpoint(std::istream& in);
void save_checkpoint(const EncoderCheckpoint& ckpt, const std::filesystem::path& path);
EncoderCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace egcr
