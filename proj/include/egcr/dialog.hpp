#pragma once

#include <string>
#include <vector>

#include "egcr/conversation_encoder.hpp"

namespace egcr {

/// Gold recommendation attached to a recommender turn.
struct GoldLabel {
  int turn = 0;  // turn_index of the recommender turn
  EntityId item = 0;

  friend bool operator==(const GoldLabel&, const GoldLabel&) = default;
};

struct Dialog {
  std::string conversation_id;
  std::vector<DialogTurn> turns;
  std::vector<GoldLabel> gold;

  /// Turns strictly before `turn_index`.
  DialogHistory history_before(int turn_index) const;
  const DialogTurn* find_turn(int turn_index) const;

  friend bool operator==(const Dialog&, const Dialog&) = default;
};

}  // namespace egcr
