#include "egcr/dialog.hpp"

namespace egcr {

DialogHistory Dialog::history_before(int turn_index) const {
  DialogHistory h;
  for (const auto& turn : turns) {
    if (turn.turn_index >= turn_index) break;
    h.turns.push_back(turn);
  }
  return h;
}

const DialogTurn* Dialog::find_turn(int turn_index) const {
  for (const auto& turn : turns) {
    if (turn.turn_index == turn_index) return &turn;
  }
  return nullptr;
}

}  // namespace egcr
