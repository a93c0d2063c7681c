#include "egcr/conversation_encoder.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <random>

#include "egcr/detail/text.hpp"
#include "egcr/error.hpp"

namespace egcr {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Eigen::MatrixXd uniform(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double bound) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
  }
  return m;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

// ---------------------------------------------------------------------------

HashingEncoder::HashingEncoder(std::uint64_t seed, int width) : seed_(seed), width_(width) {
  if (width < 1) throw ConfigError("hashing encoder width must be >= 1");
}

std::size_t HashingEncoder::bucket(std::string_view token) const {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ splitmix64(seed_);
  for (char c : token) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return static_cast<std::size_t>(h % static_cast<std::uint64_t>(width_));
}

Eigen::VectorXd HashingEncoder::encode(std::string_view text) const {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(width_);
  for (const auto& token : detail::split_whitespace(detail::fold_case(text))) {
    v[static_cast<Eigen::Index>(bucket(token))] += 1.0;
  }
  const double norm = v.norm();
  if (norm > 0.0) v /= norm;
  return v;
}

std::shared_ptr<const TextEncoder> stub_encoder(std::uint64_t seed, int width) {
  return std::make_shared<HashingEncoder>(seed, width);
}

namespace {

struct Registry {
  std::mutex mutex;
  std::map<std::string, TextEncoderFactory> factories;

  Registry() {
    factories["hashing"] = [](const TextEncoderSpec& spec) { return stub_encoder(spec.seed, spec.width); };
  }
};

Registry& registry() {
  static Registry instance;
  return instance;
}

}  // namespace

void register_text_encoder(const std::string& name, TextEncoderFactory factory) {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  r.factories[name] = std::move(factory);
}

std::shared_ptr<const TextEncoder> make_text_encoder(const TextEncoderSpec& spec) {
  auto& r = registry();
  TextEncoderFactory factory;
  {
    std::lock_guard lock(r.mutex);
    auto it = r.factories.find(spec.name);
    if (it == r.factories.end()) throw ConfigError("unknown text_encoder '" + spec.name + "'");
    factory = it->second;
  }
  return factory(spec);
}

// ---------------------------------------------------------------------------

Projection Projection::identity(int width) { return {Eigen::MatrixXd::Identity(width, width)}; }

Projection Projection::random(int in, int out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return {uniform(rng, out, in, std::sqrt(6.0 / (in + out)))};
}

Eigen::VectorXd Projection::operator()(const Eigen::VectorXd& x) const {
  if (x.size() != weight.cols()) {
    throw DimensionError("projection expects width " + std::to_string(weight.cols()) + ", got " +
                         std::to_string(x.size()));
  }
  return weight * x;
}

// ---------------------------------------------------------------------------

RecurrentAggregator::RecurrentAggregator(Eigen::MatrixXd input, Eigen::MatrixXd recurrent, Eigen::VectorXd bias,
                                         bool pinned_gates, bool linear)
    : hidden_(static_cast<int>(recurrent.cols())),
      input_(std::move(input)),
      recurrent_(std::move(recurrent)),
      bias_(std::move(bias)),
      pinned_gates_(pinned_gates),
      linear_(linear) {
  const Eigen::Index gates = 4 * static_cast<Eigen::Index>(hidden_);
  if (input_.rows() != gates || recurrent_.rows() != gates || bias_.size() != gates) {
    throw DimensionError("recurrent aggregator blocks must have 4*hidden rows");
  }
}

RecurrentAggregator RecurrentAggregator::lstm(int in, int hidden, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  Eigen::MatrixXd w = uniform(rng, 4 * hidden, in, bound);
  Eigen::MatrixXd u = uniform(rng, 4 * hidden, hidden, bound);
  Eigen::VectorXd b = uniform(rng, 4 * hidden, 1, bound);
  return {std::move(w), std::move(u), std::move(b)};
}

RecurrentAggregator RecurrentAggregator::identity_accumulator(int width) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(4 * width, width);
  w.block(2 * width, 0, width, width).setIdentity();
  return {std::move(w), Eigen::MatrixXd::Zero(4 * width, width), Eigen::VectorXd::Zero(4 * width), true, true};
}

RecurrentAggregator RecurrentAggregator::zeros(int in, int hidden) {
  return {Eigen::MatrixXd::Zero(4 * hidden, in), Eigen::MatrixXd::Zero(4 * hidden, hidden),
          Eigen::VectorXd::Zero(4 * hidden)};
}

Eigen::VectorXd RecurrentAggregator::fold(const std::vector<Eigen::VectorXd>& steps) const {
  const Eigen::Index n = hidden_;
  Eigen::VectorXd h = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
  auto squash = [this](double x) { return linear_ ? x : std::tanh(x); };
  auto gate = [this](double x) { return pinned_gates_ ? 1.0 : sigmoid(x); };
  for (const auto& x : steps) {
    if (x.size() != input_.cols()) {
      throw DimensionError("aggregator expects step width " + std::to_string(input_.cols()) + ", got " +
                           std::to_string(x.size()));
    }
    Eigen::VectorXd z = input_ * x + recurrent_ * h + bias_;
    for (Eigen::Index k = 0; k < n; ++k) {
      const double i = gate(z[k]);
      const double f = gate(z[n + k]);
      const double g = squash(z[2 * n + k]);
      const double o = gate(z[3 * n + k]);
      c[k] = f * c[k] + i * g;
      h[k] = o * squash(c[k]);
    }
  }
  return h;
}

// ---------------------------------------------------------------------------

std::string_view to_string(Speaker s) { return s == Speaker::seeker ? "seeker" : "recommender"; }

void DialogHistory::append(Speaker speaker, std::string text, std::vector<Mention> mentions) {
  const int next = turns.empty() ? 1 : turns.back().turn_index + 1;
  turns.push_back({speaker, std::move(text), std::move(mentions), next});
}

void DialogHistory::validate() const {
  for (std::size_t i = 0; i < turns.size(); ++i) {
    if (turns[i].turn_index < 1) throw ContractViolation("turn indices start at 1");
    if (i > 0 && turns[i].turn_index <= turns[i - 1].turn_index) {
      throw ContractViolation("turn indices must be strictly increasing");
    }
  }
}

std::vector<EntityId> DialogHistory::mentioned_entities() const {
  std::vector<EntityId> out;
  for (const auto& turn : turns) {
    for (const auto& m : turn.mentions) out.push_back(m.entity);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Eigen::VectorXd encode_turn_pair(std::string_view y_prev, std::string_view x_t, const TextEncoder& enc,
                                 const Projection& proj) {
  if (x_t.empty()) throw ContractViolation("seeker utterance must be non-empty");
  std::string joined;
  if (y_prev.empty()) {
    joined = std::string(kTurnSeparator.substr(1));
  } else {
    joined = std::string(y_prev) + std::string(kTurnSeparator);
  }
  joined += x_t;
  return proj(enc.encode(joined));
}

std::vector<std::pair<std::string, std::string>> turn_positions(const DialogHistory& c) {
  std::vector<std::pair<std::string, std::string>> positions;
  std::string pending;
  for (const auto& turn : c.turns) {
    if (turn.speaker == Speaker::recommender) {
      if (!pending.empty() && !turn.text.empty()) pending += ' ';
      pending += turn.text;
    } else {
      positions.emplace_back(std::move(pending), turn.text);
      pending.clear();
    }
  }
  return positions;
}

ConversationState encode_history(const DialogHistory& c, const TextEncoder& enc, const Projection& proj,
                                 const RecurrentAggregator& rnn) {
  if (c.turns.empty()) throw ContractViolation("cannot encode an empty dialog history");
  c.validate();
  auto positions = turn_positions(c);
  if (positions.empty()) throw ContractViolation("dialog history has no seeker utterance");
  std::vector<Eigen::VectorXd> steps;
  steps.reserve(positions.size());
  for (const auto& [y, x] : positions) steps.push_back(encode_turn_pair(y, x, enc, proj));
  ConversationState state{rnn.fold(steps), static_cast<int>(positions.size())};
  if (!state.vector.allFinite()) throw DimensionError("conversation state is not finite");
  return state;
}

ConversationEncoder ConversationEncoder::seeded(const TextEncoderSpec& spec, int dim, std::uint64_t seed) {
  auto text = make_text_encoder(spec);
  return {text, Projection::random(text->width(), dim, splitmix64(seed)),
          RecurrentAggregator::lstm(dim, dim, splitmix64(seed + 1))};
}

}  // namespace egcr
