#include "egcr/engine.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "egcr/error.hpp"
#include "egcr/redial.hpp"

namespace egcr {

using nlohmann::json;
namespace fs = std::filesystem;

json to_json(const ModelConfig& cfg) {
  return {
      {"encoder",
       {{"dim", cfg.encoder.dim},
        {"layers", cfg.encoder.layers},
        {"activation", cfg.encoder.activation == Activation::relu ? "relu" : "identity"},
        {"self_loop", cfg.encoder.self_loop},
        {"seed", cfg.encoder.seed}}},
      {"text_encoder",
       {{"name", cfg.text_encoder.name}, {"width", cfg.text_encoder.width}, {"seed", cfg.text_encoder.seed}}},
      {"conversation_seed", cfg.conversation_seed},
      {"review_alpha", cfg.review_alpha},
      {"reviews_per_item", cfg.reviews_per_item},
      {"top_k", cfg.top_k},
      {"path_length", cfg.path_length},
      {"prompt",
       {{"history_turns", cfg.prompt.history_turns},
        {"review_snippets", cfg.prompt.review_snippets},
        {"snippet_tokens", cfg.prompt.snippet_tokens},
        {"template", cfg.template_name}}},
  };
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig cfg;
  try {
    if (j.contains("encoder")) {
      const auto& e = j.at("encoder");
      cfg.encoder.dim = e.value("dim", cfg.encoder.dim);
      cfg.encoder.layers = e.value("layers", cfg.encoder.layers);
      cfg.encoder.activation = e.value("activation", std::string("relu")) == "identity" ? Activation::identity
                                                                                        : Activation::relu;
      cfg.encoder.self_loop = e.value("self_loop", cfg.encoder.self_loop);
      cfg.encoder.seed = e.value("seed", cfg.encoder.seed);
    }
    if (j.contains("text_encoder")) {
      const auto& t = j.at("text_encoder");
      cfg.text_encoder.name = t.value("name", cfg.text_encoder.name);
      cfg.text_encoder.width = t.value("width", cfg.text_encoder.width);
      cfg.text_encoder.seed = t.value("seed", cfg.text_encoder.seed);
    }
    cfg.conversation_seed = j.value("conversation_seed", cfg.conversation_seed);
    cfg.review_alpha = j.value("review_alpha", cfg.review_alpha);
    cfg.reviews_per_item = j.value("reviews_per_item", cfg.reviews_per_item);
    cfg.top_k = j.value("top_k", cfg.top_k);
    cfg.path_length = j.value("path_length", cfg.path_length);
    if (j.contains("prompt")) {
      const auto& p = j.at("prompt");
      cfg.prompt.history_turns = p.value("history_turns", cfg.prompt.history_turns);
      cfg.prompt.review_snippets = p.value("review_snippets", cfg.prompt.review_snippets);
      cfg.prompt.snippet_tokens = p.value("snippet_tokens", cfg.prompt.snippet_tokens);
      cfg.template_name = p.value("template", cfg.template_name);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid model config: ") + e.what());
  }
  cfg.encoder.validate();
  if (cfg.top_k == 0) throw ConfigError("top_k must be >= 1");
  return cfg;
}

namespace {

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace

// ---------------------------------------------------------------------------

Engine::Engine(KnowledgeGraph graph, ModelConfig config, std::vector<LayerWeights> weights, ScorerParams params,
               ReviewIndex reviews, std::shared_ptr<const CompletionClient> client,
               std::optional<PromptTemplate> tpl)
    : graph_(std::move(graph)),
      config_(std::move(config)),
      weights_(std::move(weights)),
      params_(std::move(params)),
      reviews_(std::move(reviews)),
      client_(client ? std::move(client) : std::make_shared<FallbackOnlyClient>()),
      template_(tpl ? std::move(*tpl) : default_template()),
      conversation_(ConversationEncoder::seeded(config_.text_encoder, config_.encoder.dim, config_.conversation_seed)) {
  config_.encoder.validate();
  template_.validate();
  params_.validate();
  if (weights_.size() != static_cast<std::size_t>(config_.encoder.layers)) {
    throw ConfigError("encoder weights have " + std::to_string(weights_.size()) + " layers, config says " +
                      std::to_string(config_.encoder.layers));
  }
  std::vector<LayerWeights> hidden_layers(weights_.begin(), weights_.end() - 1);
  EncoderConfig hidden_cfg = config_.encoder;
  hidden_ = init_embeddings(graph_, config_.encoder);
  for (const auto& w : hidden_layers) hidden_ = rgcn_layer(hidden_, graph_, w, hidden_cfg);
  table_ = table_model().table();
}

TableModel Engine::table_model() const {
  TableModel model;
  model.graph = &graph_;
  model.config = config_.encoder;
  model.input = hidden_;
  model.last = weights_.back();
  const auto rows = static_cast<Eigen::Index>(graph_.num_entities());
  model.row_scale = Eigen::VectorXd::Ones(rows);
  model.offset = Eigen::MatrixXd::Zero(rows, config_.encoder.dim);
  for (const auto& [item, rs] : reviews_) {
    if (!graph_.has_entity(item) || graph_.entity(item).kind != EntityKind::item) continue;
    auto pooled = embed_reviews(rs, *conversation_.text);
    if (pooled.empty) continue;
    const auto row = static_cast<Eigen::Index>(graph_.index_of(item));
    model.row_scale[row] = config_.review_alpha;
    model.offset.row(row) = (1.0 - config_.review_alpha) * conversation_.projection(pooled.vector).transpose();
  }
  return model;
}

const ReviewSet& Engine::reviews_for(EntityId item) const {
  static const ReviewSet empty;
  auto it = reviews_.find(item);
  return it == reviews_.end() ? empty : it->second;
}

Recommendation Engine::recommend(const DialogHistory& history, std::size_t k) const {
  const auto state = conversation_.encode(history);
  const auto mentions = history.mentioned_entities();
  const int turn = history.turns.empty() ? 0 : history.turns.back().turn_index;
  return recommend_top_k(score_entities(state.vector, mentions, table_, params_), k, turn);
}

std::string compose_response(const Recommendation& rec) {
  if (rec.empty()) return "Could you tell me a bit more about what you like?";
  return "You should watch @" + std::to_string(rec.top()) + ".";
}

AgentAction Engine::act(const DialogHistory& history, std::optional<std::size_t> k) const {
  AgentAction action;
  action.recommendation = recommend(history, k.value_or(config_.top_k));
  action.utterance = compose_response(action.recommendation);
  action.response_text = resolve_placeholders(action.utterance, graph_);
  if (action.recommendation.empty()) {
    action.explanation = explain_question(history, std::nullopt, {}, {}, template_, *client_, graph_, config_.prompt);
    return action;
  }
  const EntityId top = action.recommendation.top();
  const auto mentions = history.mentioned_entities();
  action.path = extract_reasoning_path(graph_, mentions, top, config_.path_length);
  action.prompt = build_prompt(history, action.recommendation, action.path, reviews_for(top), template_, graph_,
                               config_.prompt);
  action.explanation = generate_explanation(action.prompt, *client_, action.recommendation, action.path, graph_);
  return action;
}

Engine Engine::load(const fs::path& dir, std::shared_ptr<const CompletionClient> client) {
  const ModelPaths paths{dir};
  auto config = model_config_from_json(read_json(paths.config()));
  auto graph = load_graph(paths.triples(), paths.entities());

  std::vector<LayerWeights> weights;
  if (fs::exists(paths.checkpoint())) {
    auto ckpt = load_checkpoint(paths.checkpoint());
    if (ckpt.num_relations != graph.num_relations()) {
      throw ConfigError("checkpoint has " + std::to_string(ckpt.num_relations) + " relations, graph has " +
                        std::to_string(graph.num_relations()));
    }
    config.encoder = ckpt.config;
    weights = std::move(ckpt.weights);
  } else {
    weights = init_weights(graph, config.encoder);
  }

  ScorerParams params = ScorerParams::initial(graph);
  if (fs::exists(paths.scorer())) params = scorer_params_from_json(read_json(paths.scorer()).at("params"));

  ReviewIndex reviews;
  if (fs::exists(paths.reviews())) reviews = index_reviews(load_reviews(paths.reviews()), config.reviews_per_item);

  std::optional<PromptTemplate> tpl;
  if (fs::exists(paths.templates() / (config.template_name + ".txt"))) {
    tpl = load_template(paths.templates(), config.template_name);
  } else if (config.template_name != "default") {
    throw ConfigError("template '" + config.template_name + "' not found in " + paths.templates().string());
  }
  return Engine(std::move(graph), std::move(config), std::move(weights), std::move(params), std::move(reviews),
                std::move(client), std::move(tpl));
}

// ---------------------------------------------------------------------------

KnowledgeGraph with_inverse_relations(const KnowledgeGraph& g) {
  std::vector<Entity> entities(g.entities().begin(), g.entities().end());
  std::vector<std::string> labels;
  for (const auto& r : g.relations()) labels.push_back(r.label);
  std::vector<Triple> triples(g.triples().begin(), g.triples().end());
  std::vector<std::optional<RelationId>> inverse(g.num_relations());
  for (const auto& r : g.relations()) {
    const auto label = r.label + std::string(kInverseSuffix);
    if (r.label == kAlignedTo || g.find_relation(label)) continue;
    if (r.label.ends_with(kInverseSuffix) && g.find_relation(r.label.substr(0, r.label.size() - kInverseSuffix.size()))) {
      continue;
    }
    inverse[static_cast<std::size_t>(r.id)] = static_cast<RelationId>(labels.size());
    labels.push_back(label);
  }
  for (const auto& t : g.triples()) {
    if (auto inv = inverse[static_cast<std::size_t>(t.relation)]) triples.push_back({t.tail, *inv, t.head});
  }
  return KnowledgeGraph::build(std::move(entities), std::move(labels), std::move(triples));
}

IngestSummary ingest(const IngestOptions& options) {
  auto item_graph = load_graph(options.triples, options.entities);
  FusedGraph fused{item_graph, 0, 0};
  const bool has_concepts = options.concept_triples.has_value() || options.concept_entities.has_value();
  if (has_concepts) {
    if (!options.concept_triples || !options.concept_entities) {
      throw ConfigError("a concept graph needs both a triples and an entities file");
    }
    auto concept_graph = load_graph(*options.concept_triples, *options.concept_entities);
    std::vector<AlignmentPair> alignment;
    if (options.alignment) alignment = load_alignment(*options.alignment);
    fused = merge_graphs(item_graph, concept_graph, alignment);
  } else if (options.alignment) {
    // Single graph: alignment pairs refer to entities of the same graph.
    auto alignment = load_alignment(*options.alignment);
    std::vector<Entity> entities(item_graph.entities().begin(), item_graph.entities().end());
    std::vector<std::string> labels;
    for (const auto& r : item_graph.relations()) labels.push_back(r.label);
    auto aligned = item_graph.find_relation(kAlignedTo);
    if (!aligned) {
      aligned = static_cast<RelationId>(labels.size());
      labels.emplace_back(kAlignedTo);
    }
    std::vector<Triple> triples(item_graph.triples().begin(), item_graph.triples().end());
    for (const auto& [a, b] : alignment) {
      if (!item_graph.has_entity(a) || !item_graph.has_entity(b)) {
        throw IntegrityError("alignment references unknown entity " +
                             std::to_string(item_graph.has_entity(a) ? b : a));
      }
      triples.push_back({a, *aligned, b});
      triples.push_back({b, *aligned, a});
    }
    fused.graph = KnowledgeGraph::build(std::move(entities), std::move(labels), std::move(triples));
    fused.aligned_to = *aligned;
  }
  if (options.add_inverse) fused.graph = with_inverse_relations(fused.graph);
  const KnowledgeGraph& g = fused.graph;

  fs::create_directories(options.out);
  const ModelPaths paths{options.out};
  save_graph(g, paths.triples(), paths.entities());
  write_json(to_json(options.config), paths.config());

  IngestSummary summary;
  summary.entities = g.num_entities();
  summary.relations = g.num_relations();
  summary.triples = g.triples().size();
  summary.items = g.items().size();
  summary.concept_base = fused.concept_base;

  std::vector<Review> kept;
  if (options.reviews) {
    auto index = index_reviews(load_reviews(*options.reviews), options.config.reviews_per_item);
    for (auto& [item, rs] : index) {
      if (!g.has_entity(item) || g.entity(item).kind != EntityKind::item) continue;
      ++summary.reviewed_items;
      kept.insert(kept.end(), rs.reviews.begin(), rs.reviews.end());
    }
  }
  {
    std::ofstream out(paths.reviews());
    if (!out) throw IoError("cannot write " + paths.reviews().string());
    write_reviews(kept, out);
  }

  EncoderCheckpoint ckpt{options.config.encoder, g.num_relations(), init_weights(g, options.config.encoder)};
  save_checkpoint(ckpt, paths.checkpoint());
  if (fs::exists(paths.scorer())) fs::remove(paths.scorer());
  return summary;
}

FitSummary fit_model(const fs::path& model_dir, const fs::path& dialogs, const fs::path& out_dir,
                     const FitConfig& cfg) {
  if (!fs::exists(ModelPaths{model_dir}.config())) {
    throw ConfigError("no model in " + model_dir.string() + " (run ingest first)");
  }
  if (fs::weakly_canonical(model_dir) != fs::weakly_canonical(out_dir)) {
    fs::create_directories(out_dir);
    for (const auto& entry : fs::directory_iterator(model_dir)) {
      if (entry.is_regular_file()) {
        fs::copy_file(entry.path(), out_dir / entry.path().filename(), fs::copy_options::overwrite_existing);
      }
    }
  }
  const Engine engine = Engine::load(out_dir);
  auto load = load_redial(dialogs, &engine.graph());
  const auto examples = build_examples(load.dialogs, engine.conversation());
  if (examples.empty()) throw ContractViolation("no labeled recommender turns in " + dialogs.string());

  const auto model = engine.table_model();
  FitSummary summary;
  summary.dialogs = load.dialogs.size();
  summary.skipped_lines = load.skipped;
  // Always from zero bias, so refitting a directory is idempotent.
  summary.result = fit(examples, engine.table(), ScorerParams::initial(engine.graph()), cfg,
                       cfg.joint_encoder ? &model : nullptr);

  const ModelPaths paths{out_dir};
  json losses = summary.result.loss_history;
  write_json({{"fit_config", to_json(cfg)}, {"params", to_json(summary.result.params)}, {"loss_history", losses}},
             paths.scorer());
  if (summary.result.last_layer) {
    auto weights = engine.weights();
    weights.back() = *summary.result.last_layer;
    save_checkpoint({engine.config().encoder, engine.graph().num_relations(), std::move(weights)},
                    paths.checkpoint());
  }
  return summary;
}

}  // namespace egcr
