#include "egcr/synthetic.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <random>

#include "egcr/error.hpp"
#include "egcr/redial.hpp"

namespace egcr {

namespace fs = std::filesystem;

void PlantedSpec::validate() const {
  if (attributes == 0) throw ConfigError("planted corpus needs at least one attribute");
  if (items < 2 * attributes) throw ConfigError("planted corpus needs at least 2 items per attribute");
  if (dialogs == 0) throw ConfigError("planted corpus needs at least one dialog");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must be in (0, 1)");
}

namespace {

constexpr std::array kOpeners = {
    "I really enjoyed @{}. What else would I like?",
    "My favourite movie is @{}, any suggestions?",
    "Last week I watched @{} and loved it.",
    "Can you recommend something similar to @{}?",
};
constexpr std::array kGreetings = {
    "Hi! What kind of movies do you like?",
    "Hello, what have you watched recently?",
};
constexpr std::array kAnswers = {
    "You should watch @{}.",
    "Then you might like @{}!",
    "Have you seen @{}? It is a great pick.",
};
constexpr std::array kReviewLines = {
    "Solid {} story with a memorable cast.",
    "The {} scenes carry the whole film.",
    "If you like {} movies this one is a must.",
};

std::string fill(std::string_view pattern, const std::string& value) {
  std::string out(pattern);
  auto pos = out.find("{}");
  if (pos != std::string::npos) out.replace(pos, 2, value);
  return out;
}

std::string two_digits(std::size_t n) {
  auto s = std::to_string(n);
  return s.size() < 2 ? "0" + s : s;
}

template <typename Array>
std::string_view pick(const Array& options, std::mt19937_64& rng) {
  return options[std::uniform_int_distribution<std::size_t>(0, options.size() - 1)(rng)];
}

}  // namespace

PlantedCorpus make_planted_corpus(const PlantedSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const auto n_items = static_cast<EntityId>(spec.items);
  const auto n_attrs = static_cast<EntityId>(spec.attributes);
  const auto n_paired = 2 * n_attrs;

  // Shuffle which item ids are paired so pairs are not simply adjacent ids.
  std::vector<EntityId> order(spec.items);
  for (EntityId i = 0; i < n_items; ++i) order[static_cast<std::size_t>(i)] = i + 1;
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<Entity> entities;
  for (EntityId i = 1; i <= n_items; ++i) {
    entities.push_back({i, "Movie " + two_digits(static_cast<std::size_t>(i)), EntityKind::item, {}});
  }
  std::vector<std::string> attr_names;
  for (EntityId a = 0; a < n_attrs; ++a) {
    attr_names.push_back("theme " + two_digits(static_cast<std::size_t>(a + 1)));
    entities.push_back({n_items + 1 + a, attr_names.back(), EntityKind::attribute, {}});
  }

  constexpr RelationId kHasAttribute = 0;
  constexpr RelationId kSimilarTo = 1;
  std::vector<Triple> triples;
  PlantedCorpus corpus;
  corpus.partner.assign(spec.items + 1, 0);
  std::vector<std::string> item_theme(spec.items + 1);
  for (EntityId a = 0; a < n_attrs; ++a) {
    const EntityId x = order[static_cast<std::size_t>(2 * a)];
    const EntityId y = order[static_cast<std::size_t>(2 * a + 1)];
    triples.push_back({x, kHasAttribute, n_items + 1 + a});
    triples.push_back({y, kHasAttribute, n_items + 1 + a});
    corpus.partner[static_cast<std::size_t>(x)] = y;
    corpus.partner[static_cast<std::size_t>(y)] = x;
    item_theme[static_cast<std::size_t>(x)] = item_theme[static_cast<std::size_t>(y)] =
        attr_names[static_cast<std::size_t>(a)];
  }
  // Distractors: each links to two other distractors.
  const std::vector<EntityId> distractors(order.begin() + n_paired, order.end());
  if (distractors.size() > 1) {
    std::uniform_int_distribution<std::size_t> any(0, distractors.size() - 1);
    for (EntityId d : distractors) {
      for (int e = 0; e < 2; ++e) {
        EntityId other = distractors[any(rng)];
        if (other != d) triples.push_back({d, kSimilarTo, other});
      }
    }
  }
  corpus.graph = KnowledgeGraph::build(std::move(entities), {"has_attribute", "similar_to"}, std::move(triples));

  for (EntityId i = 1; i <= n_items; ++i) {
    const auto& theme = item_theme[static_cast<std::size_t>(i)];
    for (std::size_t r = 0; r < spec.reviews_per_item; ++r) {
      Review review;
      review.item = i;
      review.review_id = "r" + two_digits(static_cast<std::size_t>(i)) + "-" + std::to_string(r);
      review.text = theme.empty() ? "An ordinary film, nothing special." : fill(pick(kReviewLines, rng), theme);
      review.helpful = std::uniform_int_distribution<int>(0, 20)(rng);
      corpus.reviews.push_back(std::move(review));
    }
  }

  std::vector<Dialog> dialogs;
  std::uniform_int_distribution<std::size_t> paired(0, static_cast<std::size_t>(n_paired) - 1);
  for (std::size_t k = 0; k < spec.dialogs; ++k) {
    const EntityId mentioned = order[paired(rng)];
    const EntityId gold = corpus.partner[static_cast<std::size_t>(mentioned)];
    Dialog d;
    d.conversation_id = "planted-" + std::to_string(k);
    auto add = [&d](Speaker s, std::string text) {
      DialogTurn t;
      t.speaker = s;
      t.mentions = link_placeholders(text);
      t.text = std::move(text);
      t.turn_index = static_cast<int>(d.turns.size()) + 1;
      d.turns.push_back(std::move(t));
    };
    if (std::bernoulli_distribution(0.5)(rng)) add(Speaker::recommender, std::string(pick(kGreetings, rng)));
    add(Speaker::seeker, fill(pick(kOpeners, rng), std::to_string(mentioned)));
    add(Speaker::recommender, fill(pick(kAnswers, rng), std::to_string(gold)));
    d.gold.push_back({d.turns.back().turn_index, gold});
    dialogs.push_back(std::move(d));
  }
  const auto n_train = std::clamp<std::size_t>(
      static_cast<std::size_t>(spec.train_fraction * static_cast<double>(spec.dialogs)), 1, spec.dialogs);
  corpus.train.assign(dialogs.begin(), dialogs.begin() + static_cast<std::ptrdiff_t>(n_train));
  corpus.test.assign(dialogs.begin() + static_cast<std::ptrdiff_t>(n_train), dialogs.end());
  return corpus;
}

void write_planted_corpus(const PlantedCorpus& corpus, const fs::path& dir) {
  fs::create_directories(dir);
  save_graph(corpus.graph, dir / "triples.tsv", dir / "entities.jsonl");
  {
    std::ofstream out(dir / "reviews.jsonl");
    if (!out) throw IoError("cannot write " + (dir / "reviews.jsonl").string());
    write_reviews(corpus.reviews, out);
  }
  save_redial(corpus.train, dir / "train.jsonl");
  save_redial(corpus.test, dir / "test.jsonl");
}

}  // namespace egcr
