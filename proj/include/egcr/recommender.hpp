#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "egcr/conversation_encoder.hpp"
#include "egcr/dialog.hpp"
#include "egcr/graph_encoder.hpp"
#include "egcr/kg_store.hpp"

namespace egcr {

struct ScoredItem {
  EntityId entity = 0;
  double score = 0.0;

  friend bool operator==(const ScoredItem&, const ScoredItem&) = default;
};

struct Recommendation {
  std::vector<ScoredItem> ranked;  // score desc, id asc
  int query_turn = 0;

  bool empty() const noexcept { return ranked.empty(); }
  EntityId top() const { return ranked.front().entity; }
};

/// Trainable scoring parameters. `bias[k]` belongs to `items[k]`.
struct ScorerParams {
  std::vector<EntityId> items;
  Eigen::VectorXd bias;
  double beta = 1.0;
  bool mask_mentioned = true;

  /// Zero bias over the graph's items.
  static ScorerParams initial(const KnowledgeGraph& g, double beta = 1.0, bool mask_mentioned = true);
  void validate() const;
};

struct ItemScores {
  std::vector<EntityId> items;
  Eigen::VectorXd scores;  // -inf for masked items
};

/// score(i) = <state, T_i> + beta * max_{m in mentions} <T_m, T_i> + bias_i.
/// The mention term is 0 with no mentions; mentions absent from the table are
/// ignored. With `mask_mentioned`, mentioned items score -inf.
ItemScores score_entities(const Eigen::VectorXd& state, std::span<const EntityId> mentions,
                          const EntityTable& table, const ScorerParams& params);

/// The k best finite scores ordered by (score desc, entity id asc).
Recommendation recommend_top_k(const ItemScores& scores, std::size_t k, int query_turn = 0);

// ---------------------------------------------------------------------------
// Reasoning paths

struct PathStep {
  RelationId relation = 0;
  /// true when the triple is stored as (previous, relation, next).
  bool forward = true;

  friend bool operator==(const PathStep&, const PathStep&) = default;
};

/// entities[0] is a mentioned entity, entities.back() the recommended item,
/// steps[k] connects entities[k] and entities[k + 1].
struct ReasoningPath {
  std::vector<EntityId> entities;
  std::vector<PathStep> steps;

  bool empty() const noexcept { return entities.empty(); }
  std::size_t length() const noexcept { return steps.size(); }

  friend bool operator==(const ReasoningPath&, const ReasoningPath&) = default;
};

inline constexpr int kDefaultPathLength = 2;

/// Shortest undirected path of at most `max_length` hops from a mentioned
/// entity to `rec`. Among shortest paths the one with the fewest non-attribute
/// intermediates wins, then the lexicographically smallest entity sequence.
/// Between two entities the edge with the lowest relation id is used, stored
/// direction first.
ReasoningPath extract_reasoning_path(const KnowledgeGraph& g, std::span<const EntityId> mentions, EntityId rec,
                                     int max_length = kDefaultPathLength);

/// `name —relation→ name` per hop; reversed hops carry a `⁻¹` suffix.
std::vector<std::string> render_path_hops(const ReasoningPath& path, const KnowledgeGraph& g);
/// The whole chain on one line, or "none" for an empty path.
std::string render_path(const ReasoningPath& path, const KnowledgeGraph& g);

// ---------------------------------------------------------------------------
// Fitting

struct TrainingExample {
  Eigen::VectorXd state;
  std::vector<EntityId> mentions;
  EntityId gold = 0;
};

/// One example per gold label with at least one seeker utterance before it.
std::vector<TrainingExample> build_examples(const std::vector<Dialog>& dialogs, const ConversationEncoder& encoder);

struct FitConfig {
  int epochs = 100;
  /// First trial step of the backtracking line search; later searches start
  /// from twice the last accepted step.
  double lr = 1.0;
  std::uint64_t seed = 0;
  bool train_beta = true;
  /// Also train the final encoder layer.
  bool joint_encoder = false;
};

/// The last encoder layer with its frozen input, plus the affine review
/// enrichment applied afterwards: T = diag(row_scale) * layer(input) + offset.
struct TableModel {
  KnowledgeGraph const* graph = nullptr;
  EncoderConfig config;
  EntityTable input;
  LayerWeights last;
  Eigen::VectorXd row_scale;
  Eigen::MatrixXd offset;

  EntityTable table() const;
};

struct Gradient {
  Eigen::VectorXd bias;
  double beta = 0.0;
  std::optional<LayerWeights> last;
};

/// Mean softmax cross-entropy of the gold items. Examples whose gold item is
/// masked or absent are skipped.
double fit_loss(std::span<const TrainingExample> examples, const EntityTable& table, const ScorerParams& params);

/// Analytic gradient of `fit_loss`. With `model`, also the gradient with
/// respect to the last encoder layer (the table must equal model->table()).
Gradient fit_gradient(std::span<const TrainingExample> examples, const EntityTable& table,
                      const ScorerParams& params, const TableModel* model = nullptr);

struct FitResult {
  ScorerParams params;
  std::optional<LayerWeights> last_layer;  // set when joint_encoder
  /// Loss before training followed by the loss after each epoch.
  std::vector<double> loss_history;
  std::size_t used_examples = 0;
};

/// Full-batch gradient descent with a backtracking line search. Returns the
/// lowest-loss parameters seen, so the final loss never exceeds the initial.
FitResult fit(std::span<const TrainingExample> examples, const EntityTable& table, ScorerParams initial,
              const FitConfig& cfg, const TableModel* model = nullptr);

nlohmann::json to_json(const ScorerParams& params);
ScorerParams scorer_params_from_json(const nlohmann::json& j);
nlohmann::json to_json(const FitConfig& cfg);
FitConfig fit_config_from_json(const nlohmann::json& j);

}  // namespace egcr
