#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "egcr/conversation_encoder.hpp"
#include "egcr/explainer.hpp"
#include "egcr/graph_encoder.hpp"
#include "egcr/kg_store.hpp"
#include "egcr/recommender.hpp"
#include "egcr/review_enricher.hpp"

namespace egcr {

/// Everything needed to rebuild the pipeline deterministically.
struct ModelConfig {
  EncoderConfig encoder;
  TextEncoderSpec text_encoder;
  std::uint64_t conversation_seed = 0;
  double review_alpha = 0.5;
  std::size_t reviews_per_item = kDefaultReviewsPerItem;
  std::size_t top_k = 3;
  int path_length = kDefaultPathLength;
  PromptOptions prompt;
  std::string template_name = "default";
};

nlohmann::json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Files of a model directory.
struct ModelPaths {
  std::filesystem::path dir;

  std::filesystem::path config() const { return dir / "model.json"; }
  std::filesystem::path entities() const { return dir / "entities.jsonl"; }
  std::filesystem::path triples() const { return dir / "triples.tsv"; }
  std::filesystem::path reviews() const { return dir / "reviews.jsonl"; }
  std::filesystem::path checkpoint() const { return dir / "encoder.ckpt"; }
  std::filesystem::path scorer() const { return dir / "scorer.json"; }
  std::filesystem::path templates() const { return dir / "templates"; }
};

/// The agent's explained action for one turn.
struct AgentAction {
  Recommendation recommendation;
  ReasoningPath path;
  std::string prompt;
  Explanation explanation;
  /// The agent utterance with `@<id>` item placeholders, as stored in history.
  std::string utterance;
  /// `utterance` with placeholders replaced by item names.
  std::string response_text;
};

/// Loaded pipeline: graph, enriched entity table, conversation encoder,
/// scorer and explainer. Immutable and safe to share between threads.
class Engine {
public:
  Engine(KnowledgeGraph graph, ModelConfig config, std::vector<LayerWeights> weights, ScorerParams params,
         ReviewIndex reviews, std::shared_ptr<const CompletionClient> client = nullptr,
         std::optional<PromptTemplate> tpl = std::nullopt);

  /// Loads a model directory written by `ingest` (and optionally `fit_model`).
  /// Without scorer.json the scorer starts from zero bias and beta = 1.
  static Engine load(const std::filesystem::path& dir, std::shared_ptr<const CompletionClient> client = nullptr);

  const KnowledgeGraph& graph() const noexcept { return graph_; }
  const ModelConfig& config() const noexcept { return config_; }
  const EntityTable& table() const noexcept { return table_; }
  const ConversationEncoder& conversation() const noexcept { return conversation_; }
  const ScorerParams& params() const noexcept { return params_; }
  const std::vector<LayerWeights>& weights() const noexcept { return weights_; }
  const PromptTemplate& prompt_template() const noexcept { return template_; }
  const CompletionClient& client() const noexcept { return *client_; }
  const ReviewSet& reviews_for(EntityId item) const;

  /// The last encoder layer and review fusion as a trainable model.
  TableModel table_model() const;

  Recommendation recommend(const DialogHistory& history, std::size_t k) const;
  /// Recommend, extract the top-1 path, prompt and explain.
  AgentAction act(const DialogHistory& history, std::optional<std::size_t> k = std::nullopt) const;

private:
  KnowledgeGraph graph_;
  ModelConfig config_;
  std::vector<LayerWeights> weights_;
  ScorerParams params_;
  ReviewIndex reviews_;
  std::shared_ptr<const CompletionClient> client_;
  PromptTemplate template_;
  ConversationEncoder conversation_;
  EntityTable hidden_;  // input of the last encoder layer
  EntityTable table_;
};

/// "You should watch @<id>." for the top item, or a clarifying question
/// when nothing can be recommended.
std::string compose_response(const Recommendation& rec);

// ---------------------------------------------------------------------------

struct IngestOptions {
  std::filesystem::path triples;
  std::filesystem::path entities;
  /// Second graph fused through `alignment`.
  std::optional<std::filesystem::path> concept_triples;
  std::optional<std::filesystem::path> concept_entities;
  std::optional<std::filesystem::path> alignment;
  std::optional<std::filesystem::path> reviews;
  std::filesystem::path out;
  ModelConfig config;
  /// Add `<label>_inv` triples for every relation so that messages also
  /// reach heads (the encoder only passes messages head to tail).
  bool add_inverse = true;
};

struct IngestSummary {
  std::size_t entities = 0;
  std::size_t relations = 0;
  std::size_t triples = 0;
  std::size_t items = 0;
  std::size_t reviewed_items = 0;
  EntityId concept_base = 0;
};

inline constexpr std::string_view kInverseSuffix = "_inv";

/// `g` plus one `<label>_inv` relation per relation and the reversed copy of
/// each triple. Symmetric `aligned_to` and relations whose inverse label
/// already exists are left alone.
KnowledgeGraph with_inverse_relations(const KnowledgeGraph& g);

/// Loads (and fuses) the graphs, selects reviews and writes a model
/// directory with freshly initialised encoder weights.
IngestSummary ingest(const IngestOptions& options);

struct FitSummary {
  FitResult result;
  std::size_t dialogs = 0;
  std::size_t skipped_lines = 0;
};

/// Fits the scorer of the model in `model_dir` on a dialog file, starting
/// from zero bias and beta = 1, and writes scorer.json (and encoder.ckpt when
/// training jointly) to `out_dir`. Other model files are copied over first.
FitSummary fit_model(const std::filesystem::path& model_dir, const std::filesystem::path& dialogs,
                     const std::filesystem::path& out_dir, const FitConfig& cfg);

}  // namespace egcr
