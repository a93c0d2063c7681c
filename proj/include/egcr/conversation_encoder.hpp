#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "egcr/kg_store.hpp"

namespace egcr {

/// Sentence encoder plug-in: fixed-width real vector per string.
class TextEncoder {
public:
  virtual ~TextEncoder() = default;

  virtual std::string name() const = 0;
  virtual int width() const = 0;
  virtual bool deterministic() const = 0;
  virtual Eigen::VectorXd encode(std::string_view text) const = 0;
};

/// Lowercases, splits on whitespace, hashes each token into `width` buckets
/// with a seeded FNV-1a hash and L2-normalises the counts.
class HashingEncoder final : public TextEncoder {
public:
  HashingEncoder(std::uint64_t seed, int width);

  std::string name() const override { return "hashing"; }
  int width() const override { return width_; }
  bool deterministic() const override { return true; }
  Eigen::VectorXd encode(std::string_view text) const override;

  std::size_t bucket(std::string_view token) const;

private:
  std::uint64_t seed_;
  int width_;
};

std::shared_ptr<const TextEncoder> stub_encoder(std::uint64_t seed, int width);

struct TextEncoderSpec {
  std::string name = "hashing";
  int width = 64;
  std::uint64_t seed = 0;
};

using TextEncoderFactory = std::function<std::shared_ptr<const TextEncoder>(const TextEncoderSpec&)>;

/// Registry behind the `text_encoder` configuration key. "hashing" is built in.
void register_text_encoder(const std::string& name, TextEncoderFactory factory);
std::shared_ptr<const TextEncoder> make_text_encoder(const TextEncoderSpec& spec);

/// Linear map from encoder width to the shared embedding width.
struct Projection {
  Eigen::MatrixXd weight;  // out x in

  static Projection identity(int width);
  /// Seeded uniform on [-s, s], s = sqrt(6 / (in + out)).
  static Projection random(int in, int out, std::uint64_t seed);

  int in() const { return static_cast<int>(weight.cols()); }
  int out() const { return static_cast<int>(weight.rows()); }
  Eigen::VectorXd operator()(const Eigen::VectorXd& x) const;
};

/// Gated recurrent aggregator (LSTM cell) over per-position vectors.
///
/// Gate blocks in `input`, `recurrent` and `bias` are stacked in the order
/// input, forget, cell, output. `pinned_gates` fixes all gates at 1 and
/// `linear` replaces both tanh nonlinearities by the identity; together
/// they turn the cell into plain accumulation.
class RecurrentAggregator {
public:
  RecurrentAggregator(Eigen::MatrixXd input, Eigen::MatrixXd recurrent, Eigen::VectorXd bias,
                      bool pinned_gates = false, bool linear = false);

  static RecurrentAggregator lstm(int in, int hidden, std::uint64_t seed);
  static RecurrentAggregator identity_accumulator(int width);
  static RecurrentAggregator zeros(int in, int hidden);

  int in() const { return static_cast<int>(input_.cols()); }
  int hidden() const { return hidden_; }

  Eigen::VectorXd fold(const std::vector<Eigen::VectorXd>& steps) const;

private:
  int hidden_;
  Eigen::MatrixXd input_;
  Eigen::MatrixXd recurrent_;
  Eigen::VectorXd bias_;
  bool pinned_gates_;
  bool linear_;
};

enum class Speaker { seeker, recommender };

std::string_view to_string(Speaker s);

struct DialogTurn {
  Speaker speaker = Speaker::seeker;
  std::string text;
  std::vector<Mention> mentions;
  int turn_index = 1;

  friend bool operator==(const DialogTurn&, const DialogTurn&) = default;
};

struct DialogHistory {
  std::vector<DialogTurn> turns;

  /// Appends with the next turn index.
  void append(Speaker speaker, std::string text, std::vector<Mention> mentions = {});
  /// Throws ContractViolation if turn indices are not strictly increasing.
  void validate() const;
  /// Union of mention entity ids over all turns, sorted.
  std::vector<EntityId> mentioned_entities() const;

  friend bool operator==(const DialogHistory&, const DialogHistory&) = default;
};

struct ConversationState {
  Eigen::VectorXd vector;
  int turn_count = 0;
};

inline constexpr std::string_view kTurnSeparator = " [SEP] ";

/// proj(enc(y_prev + " [SEP] " + x_t)); an empty y_prev contributes only
/// "[SEP] " + x_t.
Eigen::VectorXd encode_turn_pair(std::string_view y_prev, std::string_view x_t, const TextEncoder& enc,
                                 const Projection& proj);

/// Per-position (y_{i-1}, x_i) text pairs. Recommender turns since the last
/// seeker turn are joined by a space; a trailing recommender turn without a
/// following seeker turn forms no position.
std::vector<std::pair<std::string, std::string>> turn_positions(const DialogHistory& c);

ConversationState encode_history(const DialogHistory& c, const TextEncoder& enc, const Projection& proj,
                                 const RecurrentAggregator& rnn);

/// Bundles the three parts of the conversation encoder.
struct ConversationEncoder {
  std::shared_ptr<const TextEncoder> text;
  Projection projection;
  RecurrentAggregator aggregator;

  /// Seeded encoder with embedding width `dim`.
  static ConversationEncoder seeded(const TextEncoderSpec& spec, int dim, std::uint64_t seed);

  ConversationState encode(const DialogHistory& c) const {
    return encode_history(c, *text, projection, aggregator);
  }
};

}  // namespace egcr
