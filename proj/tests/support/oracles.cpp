#include "oracles.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "egcr/engine.hpp"

namespace egcr::testing {

Eigen::MatrixXd brute_force_rgcn(const KnowledgeGraph& g, const Eigen::MatrixXd& h, const LayerWeights& w,
                                 bool self_loop, Activation act) {
  const auto n = static_cast<Eigen::Index>(g.num_entities());
  const auto d = h.cols();
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(n, d);
  std::map<std::pair<Eigen::Index, RelationId>, Eigen::VectorXd> acc;
  std::map<std::pair<Eigen::Index, RelationId>, int> degree;

  for (const Triple& t : g.triples()) {
    const auto head = static_cast<Eigen::Index>(g.index_of(t.head));
    const auto tail = static_cast<Eigen::Index>(g.index_of(t.tail));
    const auto& W = w.relation[static_cast<std::size_t>(t.relation)];
    Eigen::VectorXd msg = Eigen::VectorXd::Zero(d);
    for (Eigen::Index a = 0; a < d; ++a) {
      for (Eigen::Index b = 0; b < d; ++b) msg[a] += W(a, b) * h(head, b);
    }
    auto key = std::make_pair(tail, t.relation);
    auto [it, fresh] = acc.emplace(key, Eigen::VectorXd::Zero(d));
    it->second += msg;
    ++degree[key];
  }
  for (const auto& [key, total] : acc) {
    for (Eigen::Index a = 0; a < d; ++a) sum(key.first, a) += total[a] / degree[key];
  }
  if (self_loop) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index a = 0; a < d; ++a) {
        for (Eigen::Index b = 0; b < d; ++b) sum(i, a) += w.self(a, b) * h(i, b);
      }
    }
  }
  if (act == Activation::relu) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index a = 0; a < d; ++a) sum(i, a) = std::max(0.0, sum(i, a));
    }
  }
  return sum;
}

Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = u(rng);
  }
  return m;
}

LayerWeights random_weights(std::mt19937_64& rng, int dim, std::size_t relations) {
  LayerWeights w;
  w.self = random_matrix(rng, dim, dim);
  for (std::size_t r = 0; r < relations; ++r) w.relation.push_back(random_matrix(rng, dim, dim));
  return w;
}

KnowledgeGraph random_graph(std::mt19937_64& rng, const RandomGraphLimits& limits) {
  auto pick = [&rng](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  const int n = pick(1, limits.max_nodes);
  const int r = pick(1, limits.max_relations);
  const int t = pick(0, limits.max_triples);

  std::set<EntityId> ids;
  while (static_cast<int>(ids.size()) < n) ids.insert(pick(1, 500));
  std::vector<EntityId> id_list(ids.begin(), ids.end());
  std::shuffle(id_list.begin(), id_list.end(), rng);  // registry order != id order

  std::vector<Entity> entities;
  for (EntityId id : id_list) {
    const auto kind = static_cast<EntityKind>(pick(0, 2));
    entities.push_back({id, "e" + std::to_string(id), kind, {}});
  }
  std::vector<std::string> labels;
  for (int k = 0; k < r; ++k) labels.push_back("rel" + std::to_string(k));
  std::vector<Triple> triples;
  for (int k = 0; k < t; ++k) {
    triples.push_back({id_list[static_cast<std::size_t>(pick(0, n - 1))], static_cast<RelationId>(pick(0, r - 1)),
                       id_list[static_cast<std::size_t>(pick(0, n - 1))]});
  }
  return KnowledgeGraph::build(std::move(entities), std::move(labels), std::move(triples));
}

namespace {

std::set<EntityId> undirected_adjacent(const KnowledgeGraph& g, EntityId e) {
  std::set<EntityId> out;
  for (const Triple& t : g.triples()) {
    if (t.head == e) out.insert(t.tail);
    if (t.tail == e) out.insert(t.head);
  }
  out.erase(e);
  return out;
}

void extend(const KnowledgeGraph& g, std::vector<EntityId>& path, EntityId to, int max_len,
            std::vector<std::vector<EntityId>>& out) {
  if (path.back() == to) {
    out.push_back(path);
    return;
  }
  if (static_cast<int>(path.size()) - 1 >= max_len) return;
  for (EntityId next : undirected_adjacent(g, path.back())) {
    if (std::find(path.begin(), path.end(), next) != path.end()) continue;
    path.push_back(next);
    extend(g, path, to, max_len, out);
    path.pop_back();
  }
}

}  // namespace

std::vector<std::vector<EntityId>> enumerate_paths(const KnowledgeGraph& g, EntityId from, EntityId to,
                                                   int max_len) {
  std::vector<std::vector<EntityId>> out;
  std::vector<EntityId> path{from};
  extend(g, path, to, max_len, out);
  return out;
}

int bfs_distance(const KnowledgeGraph& g, const std::vector<EntityId>& mentions, EntityId rec, int max_len) {
  int best = -1;
  for (EntityId m : mentions) {
    if (!g.has_entity(m)) continue;
    for (const auto& p : enumerate_paths(g, m, rec, max_len)) {
      const int len = static_cast<int>(p.size()) - 1;
      if (best < 0 || len < best) best = len;
    }
  }
  return best;
}

std::vector<EntityId> preferred_path(const KnowledgeGraph& g, const std::vector<EntityId>& mentions, EntityId rec,
                                     int max_len) {
  using Key = std::tuple<std::size_t, int, std::vector<EntityId>>;
  std::optional<Key> best;
  for (EntityId m : mentions) {
    if (!g.has_entity(m)) continue;
    for (auto& p : enumerate_paths(g, m, rec, max_len)) {
      int non_attribute = 0;
      for (std::size_t k = 1; k + 1 < p.size(); ++k) {
        if (g.entity(p[k]).kind != EntityKind::attribute) ++non_attribute;
      }
      Key key{p.size(), non_attribute, p};
      if (!best || key < *best) best = std::move(key);
    }
  }
  return best ? std::get<2>(*best) : std::vector<EntityId>{};
}

PathStep preferred_step(const KnowledgeGraph& g, EntityId from, EntityId to) {
  std::optional<PathStep> best;
  for (const Triple& t : g.triples()) {
    std::optional<PathStep> s;
    if (t.head == from && t.tail == to) s = PathStep{t.relation, true};
    else if (t.head == to && t.tail == from) s = PathStep{t.relation, false};
    if (!s) continue;
    if (!best || s->relation < best->relation || (s->relation == best->relation && s->forward && !best->forward)) {
      best = s;
    }
  }
  return best.value();
}

KnowledgeGraph toy_movie_graph() {
  std::vector<Entity> entities{
      {1, "No Time to Die", EntityKind::item, {}},
      {2, "Dune", EntityKind::item, {}},
      {3, "Skyfall", EntityKind::item, {}},
      {10, "Action", EntityKind::attribute, {"action movie"}},
      {11, "Daniel Craig", EntityKind::attribute, {}},
      {12, "Timothee Chalamet", EntityKind::attribute, {"Timothée Chalamet"}},
  };
  std::vector<Triple> triples{
      {1, 0, 10}, {2, 0, 10}, {3, 0, 10},  // has_genre
      {1, 1, 11}, {3, 1, 11}, {2, 1, 12},  // starring
  };
  return KnowledgeGraph::build(std::move(entities), {"has_genre", "starring"}, std::move(triples));
}

ToyFitInstance toy_fit_instance() {
  ToyFitInstance t;
  std::vector<Entity> entities;
  for (EntityId i = 1; i <= 5; ++i) entities.push_back({i, "item " + std::to_string(i), EntityKind::item, {}});
  t.graph = KnowledgeGraph::build(std::move(entities), {"related"}, {{1, 0, 2}, {3, 0, 4}});
  Eigen::MatrixXd values(5, 3);
  values << 1.0, 0.2, -0.1,
            0.8, 0.1, 0.3,
           -0.4, 1.0, 0.0,
           -0.2, 0.9, 0.4,
            0.1, -0.3, 1.0;
  t.table = EntityTable({1, 2, 3, 4, 5}, values);
  auto state = [](double a, double b, double c) {
    Eigen::VectorXd v(3);
    v << a, b, c;
    return v;
  };
  t.examples = {
      {state(0.5, -0.2, 0.1), {1}, 2},
      {state(-0.3, 0.4, 0.2), {3}, 4},
      {state(0.1, 0.1, 0.9), {}, 5},
      {state(0.2, 0.3, -0.5), {2, 5}, 1},
      {state(-0.6, 0.2, 0.3), {4}, 3},
  };
  t.params = ScorerParams::initial(t.graph, 0.7);
  t.params.bias << 0.3, -0.2, 0.1, 0.05, -0.4;
  return t;
}

namespace {

using Gram = std::vector<std::string>;

std::map<Gram, int> grams(const std::vector<std::string>& tokens, std::size_t n) {
  std::map<Gram, int> out;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) ++out[Gram(tokens.begin() + static_cast<long>(i), tokens.begin() + static_cast<long>(i + n))];
  return out;
}

}  // namespace

double naive_bleu(const std::vector<std::vector<std::string>>& candidates,
                  const std::vector<std::vector<std::string>>& references) {
  double c = 0, r = 0, log_sum = 0;
  for (std::size_t n = 1; n <= 4; ++n) {
    double matched = 0, total = 0;
    for (std::size_t s = 0; s < candidates.size(); ++s) {
      auto cand = grams(candidates[s], n);
      auto ref = grams(references[s], n);
      for (const auto& [g, count] : cand) {
        total += count;
        auto it = ref.find(g);
        if (it != ref.end()) matched += std::min(count, it->second);
      }
    }
    if (total == 0) continue;  // precision 1
    if (matched == 0) return 0.0;
    log_sum += 0.25 * std::log(matched / total);
  }
  for (std::size_t s = 0; s < candidates.size(); ++s) {
    c += static_cast<double>(candidates[s].size());
    r += static_cast<double>(references[s].size());
  }
  if (c == 0) return 0.0;
  const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
  return bp * std::exp(log_sum);
}

double naive_distinct(const std::vector<std::vector<std::string>>& utterances, std::size_t n) {
  std::set<Gram> distinct;
  double total = 0;
  for (const auto& u : utterances) {
    for (const auto& [g, count] : grams(u, n)) {
      distinct.insert(g);
      total += count;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(distinct.size()) / total;
}

std::filesystem::path build_planted_model(const std::filesystem::path& dir, const PlantedSpec& spec) {
  const auto corpus_dir = dir / "corpus";
  const auto model_dir = dir / "model";
  write_planted_corpus(make_planted_corpus(spec), corpus_dir);
  IngestOptions opt;
  opt.triples = corpus_dir / "triples.tsv";
  opt.entities = corpus_dir / "entities.jsonl";
  opt.reviews = corpus_dir / "reviews.jsonl";
  opt.out = model_dir;
  ingest(opt);
  fit_model(model_dir, corpus_dir / "train.jsonl", model_dir, FitConfig{});
  return model_dir;
}

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  std::random_device rd;
  path_ = std::filesystem::temp_directory_path() /
          (tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

}  // namespace egcr::testing
