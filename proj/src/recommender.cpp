#include "egcr/recommender.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "egcr/error.hpp"

namespace egcr {

using nlohmann::json;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<EntityId> unique_sorted(std::span<const EntityId> ids) {
  std::vector<EntityId> out(ids.begin(), ids.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// Mention-affinity term for every candidate: max_m <T_m, T_i> and the
// maximising mention row (or -1 without mentions).
struct Affinity {
  Eigen::VectorXd value;
  std::vector<Eigen::Index> argmax;
};

Affinity mention_affinity(const std::vector<Eigen::Index>& item_rows, std::span<const EntityId> mentions,
                          const EntityTable& table) {
  const auto n = static_cast<Eigen::Index>(item_rows.size());
  Affinity a{Eigen::VectorXd::Zero(n), std::vector<Eigen::Index>(item_rows.size(), -1)};
  std::vector<Eigen::Index> mention_rows;
  for (EntityId m : unique_sorted(mentions)) {
    if (table.contains(m)) mention_rows.push_back(table.row_of(m));
  }
  if (mention_rows.empty()) return a;
  const auto& v = table.values();
  for (Eigen::Index k = 0; k < n; ++k) {
    double best = kNegInf;
    Eigen::Index best_row = -1;
    for (Eigen::Index m : mention_rows) {
      const double dot = v.row(m).dot(v.row(item_rows[static_cast<std::size_t>(k)]));
      if (dot > best) {
        best = dot;
        best_row = m;
      }
    }
    a.value[k] = best;
    a.argmax[static_cast<std::size_t>(k)] = best_row;
  }
  return a;
}

std::vector<Eigen::Index> rows_for(const ScorerParams& params, const EntityTable& table) {
  std::vector<Eigen::Index> rows;
  rows.reserve(params.items.size());
  for (EntityId id : params.items) {
    if (!table.contains(id)) throw DimensionError("entity table does not cover item " + std::to_string(id));
    rows.push_back(table.row_of(id));
  }
  return rows;
}

}  // namespace

ScorerParams ScorerParams::initial(const KnowledgeGraph& g, double beta, bool mask_mentioned) {
  ScorerParams p;
  p.items = g.items();
  p.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.items.size()));
  p.beta = beta;
  p.mask_mentioned = mask_mentioned;
  return p;
}

void ScorerParams::validate() const {
  if (static_cast<std::size_t>(bias.size()) != items.size()) {
    throw DimensionError("bias has " + std::to_string(bias.size()) + " entries for " +
                         std::to_string(items.size()) + " items");
  }
  if (!bias.allFinite() || !std::isfinite(beta)) throw ConfigError("scorer parameters must be finite");
  if (beta < 0.0) throw ConfigError("beta must be non-negative");
}

ItemScores score_entities(const Eigen::VectorXd& state, std::span<const EntityId> mentions,
                          const EntityTable& table, const ScorerParams& params) {
  params.validate();
  if (state.size() != table.dim()) {
    throw DimensionError("state width " + std::to_string(state.size()) + " != table width " +
                         std::to_string(table.dim()));
  }
  const auto rows = rows_for(params, table);
  const auto aff = mention_affinity(rows, mentions, table);
  ItemScores out{params.items, Eigen::VectorXd(static_cast<Eigen::Index>(rows.size()))};
  const auto& v = table.values();
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    out.scores[i] = v.row(rows[k]).dot(state) + params.beta * aff.value[i] + params.bias[i];
  }
  if (params.mask_mentioned) {
    std::unordered_set<EntityId> mentioned(mentions.begin(), mentions.end());
    for (std::size_t k = 0; k < params.items.size(); ++k) {
      if (mentioned.contains(params.items[k])) out.scores[static_cast<Eigen::Index>(k)] = kNegInf;
    }
  }
  return out;
}

Recommendation recommend_top_k(const ItemScores& scores, std::size_t k, int query_turn) {
  if (k == 0) throw ContractViolation("k must be >= 1");
  std::vector<ScoredItem> candidates;
  for (std::size_t i = 0; i < scores.items.size(); ++i) {
    const double s = scores.scores[static_cast<Eigen::Index>(i)];
    if (std::isfinite(s)) candidates.push_back({scores.items[i], s});
  }
  auto order = [](const ScoredItem& a, const ScoredItem& b) {
    return a.score != b.score ? a.score > b.score : a.entity < b.entity;
  };
  const auto keep = std::min(k, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(),
                    order);
  candidates.resize(keep);
  return {std::move(candidates), query_turn};
}

// ---------------------------------------------------------------------------
// Reasoning paths

namespace {

struct Neighbor {
  EntityId other;
  PathStep step;
};

// Undirected neighbours of `e`; for each neighbour only the preferred edge.
std::vector<Neighbor> undirected_neighbors(const KnowledgeGraph& g, EntityId e) {
  std::unordered_map<EntityId, PathStep> best;
  auto offer = [&](EntityId other, PathStep step) {
    auto [it, inserted] = best.emplace(other, step);
    if (!inserted) {
      const auto& cur = it->second;
      if (step.relation < cur.relation || (step.relation == cur.relation && step.forward && !cur.forward)) {
        it->second = step;
      }
    }
  };
  for (const Edge& edge : g.out_edges(e)) offer(edge.other, {edge.relation, true});
  for (const Edge& edge : g.in_edges(e)) offer(edge.other, {edge.relation, false});
  std::vector<Neighbor> out;
  out.reserve(best.size());
  for (const auto& [other, step] : best) out.push_back({other, step});
  std::sort(out.begin(), out.end(), [](const Neighbor& a, const Neighbor& b) { return a.other < b.other; });
  return out;
}

}  // namespace

ReasoningPath extract_reasoning_path(const KnowledgeGraph& g, std::span<const EntityId> mentions, EntityId rec,
                                     int max_length) {
  g.index_of(rec);
  std::vector<EntityId> sources;
  for (EntityId m : unique_sorted(mentions)) {
    if (g.has_entity(m)) sources.push_back(m);
  }
  if (sources.empty() || max_length < 0) return {};

  // Breadth-first layers around rec, undirected, up to max_length.
  std::unordered_map<EntityId, int> dist{{rec, 0}};
  std::vector<std::vector<EntityId>> layers{{rec}};
  for (int depth = 1; depth <= max_length; ++depth) {
    std::vector<EntityId> next;
    for (EntityId v : layers.back()) {
      for (const auto& nb : undirected_neighbors(g, v)) {
        if (dist.emplace(nb.other, depth).second) next.push_back(nb.other);
      }
    }
    if (next.empty()) break;
    layers.push_back(std::move(next));
  }

  int d = -1;
  for (EntityId s : sources) {
    auto it = dist.find(s);
    if (it != dist.end() && (d < 0 || it->second < d)) d = it->second;
  }
  if (d < 0) return {};

  auto non_attribute = [&](EntityId v) { return g.entity(v).kind == EntityKind::attribute ? 0 : 1; };
  // cost[v]: fewest non-attribute intermediates on a shortest path v -> rec,
  // counting neither v nor rec.
  std::unordered_map<EntityId, int> cost{{rec, 0}};
  auto via = [&](EntityId u) { return u == rec ? 0 : non_attribute(u) + cost.at(u); };
  for (int depth = 1; depth <= d; ++depth) {
    for (EntityId v : layers[static_cast<std::size_t>(depth)]) {
      int best = std::numeric_limits<int>::max();
      for (const auto& nb : undirected_neighbors(g, v)) {
        auto it = dist.find(nb.other);
        if (it != dist.end() && it->second == depth - 1) best = std::min(best, via(nb.other));
      }
      cost[v] = best;
    }
  }

  EntityId start = -1;
  for (EntityId s : sources) {  // ascending ids
    auto it = dist.find(s);
    if (it == dist.end() || it->second != d) continue;
    if (start < 0 || cost.at(s) < cost.at(start)) start = s;
  }

  ReasoningPath path;
  path.entities.push_back(start);
  EntityId cur = start;
  while (cur != rec) {
    const int depth = dist.at(cur);
    const int target = cost.at(cur);
    for (const auto& nb : undirected_neighbors(g, cur)) {  // ascending ids
      auto it = dist.find(nb.other);
      if (it == dist.end() || it->second != depth - 1 || via(nb.other) != target) continue;
      path.steps.push_back(nb.step);
      path.entities.push_back(nb.other);
      cur = nb.other;
      break;
    }
  }
  return path;
}

std::vector<std::string> render_path_hops(const ReasoningPath& path, const KnowledgeGraph& g) {
  std::vector<std::string> hops;
  for (std::size_t k = 0; k < path.steps.size(); ++k) {
    const auto& step = path.steps[k];
    std::string label = g.relation(step.relation).label;
    if (!step.forward) label += "⁻¹";
    hops.push_back(g.entity(path.entities[k]).name + " —" + label + "→ " +
                   g.entity(path.entities[k + 1]).name);
  }
  return hops;
}

std::string render_path(const ReasoningPath& path, const KnowledgeGraph& g) {
  if (path.steps.empty()) return "none";
  std::string out = g.entity(path.entities.front()).name;
  for (std::size_t k = 0; k < path.steps.size(); ++k) {
    const auto& step = path.steps[k];
    std::string label = g.relation(step.relation).label;
    if (!step.forward) label += "⁻¹";
    out += " —" + label + "→ " + g.entity(path.entities[k + 1]).name;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fitting

std::vector<TrainingExample> build_examples(const std::vector<Dialog>& dialogs, const ConversationEncoder& encoder) {
  std::vector<TrainingExample> out;
  for (const auto& dialog : dialogs) {
    for (const auto& label : dialog.gold) {
      auto history = dialog.history_before(label.turn);
      if (turn_positions(history).empty()) continue;
      out.push_back({encoder.encode(history).vector, history.mentioned_entities(), label.item});
    }
  }
  return out;
}

EntityTable TableModel::table() const {
  EncoderConfig cfg = config;
  cfg.activation = Activation::identity;
  EntityTable out = rgcn_layer(input, *graph, last, cfg);
  out.values() = row_scale.asDiagonal() * out.values();
  out.values() += offset;
  return out;
}

namespace {

struct ExampleTerms {
  bool usable = false;
  Eigen::VectorXd scores;  // over params.items, -inf where masked
  Eigen::VectorXd affinity;
  std::vector<Eigen::Index> argmax;
  Eigen::Index gold = -1;
};

ExampleTerms example_terms(const TrainingExample& ex, const EntityTable& table, const ScorerParams& params,
                           const std::vector<Eigen::Index>& rows,
                           const std::unordered_map<EntityId, Eigen::Index>& item_pos) {
  ExampleTerms t;
  auto gold = item_pos.find(ex.gold);
  if (gold == item_pos.end()) return t;
  t.gold = gold->second;
  auto aff = mention_affinity(rows, ex.mentions, table);
  t.affinity = std::move(aff.value);
  t.argmax = std::move(aff.argmax);
  const auto& v = table.values();
  t.scores.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    t.scores[i] = v.row(rows[k]).dot(ex.state) + params.beta * t.affinity[i] + params.bias[i];
  }
  if (params.mask_mentioned) {
    for (EntityId m : ex.mentions) {
      if (auto it = item_pos.find(m); it != item_pos.end()) t.scores[it->second] = kNegInf;
    }
  }
  t.usable = std::isfinite(t.scores[t.gold]);
  return t;
}

// log-sum-exp over finite entries and the softmax probabilities.
double log_softmax(const Eigen::VectorXd& scores, Eigen::VectorXd* probs) {
  double max = kNegInf;
  for (Eigen::Index i = 0; i < scores.size(); ++i) max = std::max(max, scores[i]);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    if (std::isfinite(scores[i])) sum += std::exp(scores[i] - max);
  }
  const double lse = max + std::log(sum);
  if (probs) {
    probs->resize(scores.size());
    for (Eigen::Index i = 0; i < scores.size(); ++i) {
      (*probs)[i] = std::isfinite(scores[i]) ? std::exp(scores[i] - lse) : 0.0;
    }
  }
  return lse;
}

std::unordered_map<EntityId, Eigen::Index> item_positions(const ScorerParams& params) {
  std::unordered_map<EntityId, Eigen::Index> pos;
  for (std::size_t k = 0; k < params.items.size(); ++k) pos.emplace(params.items[k], static_cast<Eigen::Index>(k));
  return pos;
}

}  // namespace

double fit_loss(std::span<const TrainingExample> examples, const EntityTable& table, const ScorerParams& params) {
  params.validate();
  const auto rows = rows_for(params, table);
  const auto pos = item_positions(params);
  double total = 0.0;
  std::size_t used = 0;
  for (const auto& ex : examples) {
    auto t = example_terms(ex, table, params, rows, pos);
    if (!t.usable) continue;
    total += log_softmax(t.scores, nullptr) - t.scores[t.gold];
    ++used;
  }
  return used == 0 ? 0.0 : total / static_cast<double>(used);
}

Gradient fit_gradient(std::span<const TrainingExample> examples, const EntityTable& table,
                      const ScorerParams& params, const TableModel* model) {
  params.validate();
  const auto rows = rows_for(params, table);
  const auto pos = item_positions(params);
  Gradient grad;
  grad.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(params.items.size()));
  Eigen::MatrixXd d_table;
  if (model) d_table = Eigen::MatrixXd::Zero(table.rows(), table.dim());
  const auto& v = table.values();

  std::size_t used = 0;
  Eigen::VectorXd probs;
  for (const auto& ex : examples) {
    auto t = example_terms(ex, table, params, rows, pos);
    if (!t.usable) continue;
    ++used;
    log_softmax(t.scores, &probs);
    Eigen::VectorXd ds = probs;
    ds[t.gold] -= 1.0;
    grad.bias += ds;
    grad.beta += ds.dot(t.affinity);
    if (!model) continue;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const double w = ds[static_cast<Eigen::Index>(k)];
      if (w == 0.0) continue;
      d_table.row(rows[k]) += w * ex.state.transpose();
      if (const auto m = t.argmax[k]; m >= 0) {
        d_table.row(rows[k]) += w * params.beta * v.row(m);
        d_table.row(m) += w * params.beta * v.row(rows[k]);
      }
    }
  }
  if (used > 0) {
    grad.bias /= static_cast<double>(used);
    grad.beta /= static_cast<double>(used);
  }
  if (model) {
    if (used > 0) d_table /= static_cast<double>(used);
    const KnowledgeGraph& g = *model->graph;
    const Eigen::MatrixXd d_out = model->row_scale.asDiagonal() * d_table;
    const Eigen::MatrixXd& h = model->input.values();
    LayerWeights d;
    const Eigen::Index dim = h.cols();
    d.self = model->config.self_loop ? Eigen::MatrixXd(d_out.transpose() * h) : Eigen::MatrixXd::Zero(dim, dim);
    d.relation.assign(g.num_relations(), Eigen::MatrixXd::Zero(dim, dim));
    auto entities = g.entities();
    Eigen::RowVectorXd acc(dim);
    for (std::size_t i = 0; i < entities.size(); ++i) {
      auto edges = g.in_edges(entities[i].id);
      std::size_t b = 0;
      while (b < edges.size()) {
        const RelationId r = edges[b].relation;
        std::size_t e = b;
        acc.setZero();
        for (; e < edges.size() && edges[e].relation == r; ++e) {
          acc += h.row(static_cast<Eigen::Index>(g.index_of(edges[e].other)));
        }
        acc /= static_cast<double>(e - b);
        d.relation[static_cast<std::size_t>(r)] += d_out.row(static_cast<Eigen::Index>(i)).transpose() * acc;
        b = e;
      }
    }
    grad.last = std::move(d);
  }
  return grad;
}

namespace {

double squared_norm(const LayerWeights& w) {
  double s = w.self.squaredNorm();
  for (const auto& m : w.relation) s += m.squaredNorm();
  return s;
}

LayerWeights axpy(const LayerWeights& w, double step, const LayerWeights& d) {
  LayerWeights out = w;
  out.self -= step * d.self;
  for (std::size_t r = 0; r < out.relation.size(); ++r) out.relation[r] -= step * d.relation[r];
  return out;
}

}  // namespace

FitResult fit(std::span<const TrainingExample> examples, const EntityTable& table, ScorerParams initial,
              const FitConfig& cfg, const TableModel* model) {
  initial.validate();
  if (cfg.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(cfg.lr > 0.0)) throw ConfigError("lr must be positive");
  if (cfg.joint_encoder && !model) throw ConfigError("joint encoder training needs the encoder's last layer");
  if (examples.empty()) throw ContractViolation("fit needs at least one labeled turn");

  const bool joint = cfg.joint_encoder;
  TableModel current_model;
  if (joint) current_model = *model;
  EntityTable current_table = joint ? current_model.table() : table;

  FitResult result;
  result.params = initial;
  {
    const auto rows = rows_for(initial, current_table);
    const auto pos = item_positions(initial);
    for (const auto& ex : examples) {
      if (example_terms(ex, current_table, initial, rows, pos).usable) ++result.used_examples;
    }
  }
  if (result.used_examples == 0) throw ContractViolation("no labeled turn has a scorable gold item");

  ScorerParams params = initial;
  double loss = fit_loss(examples, current_table, params);
  result.loss_history.push_back(loss);
  double best = loss;
  if (joint) result.last_layer = current_model.last;

  double next_step = cfg.lr;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto grad = fit_gradient(examples, current_table, params, joint ? &current_model : nullptr);
    double slope = grad.bias.squaredNorm();
    if (cfg.train_beta) slope += grad.beta * grad.beta;
    if (joint) slope += squared_norm(*grad.last);
    if (slope < 1e-18) {
      result.loss_history.push_back(loss);
      continue;
    }

    bool accepted = false;
    double step = next_step;
    for (int attempt = 0; attempt < 60 && !accepted; ++attempt, step *= 0.5) {
      ScorerParams trial = params;
      trial.bias -= step * grad.bias;
      if (cfg.train_beta) trial.beta = std::max(0.0, params.beta - step * grad.beta);
      TableModel trial_model;
      EntityTable trial_table;
      if (joint) {
        trial_model = current_model;
        trial_model.last = axpy(current_model.last, step, *grad.last);
        trial_table = trial_model.table();
      }
      const double trial_loss = fit_loss(examples, joint ? trial_table : current_table, trial);
      // Armijo sufficient decrease along the (projected) step.
      double moved = (trial.bias - params.bias).dot(grad.bias) + (trial.beta - params.beta) * grad.beta;
      if (joint) moved += step * squared_norm(*grad.last);
      if (std::isfinite(trial_loss) && trial_loss <= loss - 1e-4 * moved) {
        params = std::move(trial);
        loss = trial_loss;
        if (joint) {
          current_model = std::move(trial_model);
          current_table = std::move(trial_table);
        }
        accepted = true;
        next_step = 2.0 * step;
      }
    }
    result.loss_history.push_back(loss);
    if (loss < best) {
      best = loss;
      result.params = params;
      if (joint) result.last_layer = current_model.last;
    }
  }
  return result;
}

json to_json(const ScorerParams& params) {
  json bias = json::array();
  for (Eigen::Index i = 0; i < params.bias.size(); ++i) bias.push_back(params.bias[i]);
  return {{"items", params.items}, {"bias", bias}, {"beta", params.beta}, {"mask_mentioned", params.mask_mentioned}};
}

ScorerParams scorer_params_from_json(const json& j) {
  ScorerParams p;
  try {
    p.items = j.at("items").get<std::vector<EntityId>>();
    auto bias = j.at("bias").get<std::vector<double>>();
    p.bias = Eigen::Map<Eigen::VectorXd>(bias.data(), static_cast<Eigen::Index>(bias.size()));
    p.beta = j.at("beta").get<double>();
    p.mask_mentioned = j.at("mask_mentioned").get<bool>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid scorer parameters: ") + e.what());
  }
  p.validate();
  return p;
}

json to_json(const FitConfig& cfg) {
  return {{"epochs", cfg.epochs},
          {"lr", cfg.lr},
          {"seed", cfg.seed},
          {"train_beta", cfg.train_beta},
          {"joint_encoder", cfg.joint_encoder}};
}

FitConfig fit_config_from_json(const json& j) {
  FitConfig cfg;
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.lr = j.value("lr", cfg.lr);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.train_beta = j.value("train_beta", cfg.train_beta);
  cfg.joint_encoder = j.value("joint_encoder", cfg.joint_encoder);
  return cfg;
}

}  // namespace egcr
