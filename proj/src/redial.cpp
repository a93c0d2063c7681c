#include "egcr/redial.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "egcr/detail/text.hpp"
#include "egcr/error.hpp"

namespace egcr {

using nlohmann::json;

namespace {

Dialog parse_dialog(const json& record, const KnowledgeGraph* g) {
  Dialog d;
  d.conversation_id = record.at("conversation_id").get<std::string>();
  if (d.conversation_id.empty()) throw ValidationError("empty conversation_id");
  const auto& messages = record.at("messages");
  if (!messages.is_array()) throw ValidationError("messages must be an array");
  int index = 0;
  for (const auto& m : messages) {
    DialogTurn turn;
    const auto role = m.at("role").get<std::string>();
    if (role == "seeker") {
      turn.speaker = Speaker::seeker;
    } else if (role == "recommender") {
      turn.speaker = Speaker::recommender;
    } else {
      throw ValidationError("unknown role '" + role + "'");
    }
    turn.text = m.at("text").get<std::string>();
    turn.turn_index = ++index;
    turn.mentions = g ? link_mentions(turn.text, *g).mentions : link_placeholders(turn.text);
    d.turns.push_back(std::move(turn));
  }
  if (record.contains("gold")) {
    for (const auto& label : record.at("gold")) {
      GoldLabel gold{label.at("turn").get<int>(), label.at("item_id").get<EntityId>()};
      const DialogTurn* turn = d.find_turn(gold.turn);
      if (turn == nullptr) throw ValidationError("gold turn " + std::to_string(gold.turn) + " does not exist");
      if (turn->speaker != Speaker::recommender) {
        throw ValidationError("gold turn " + std::to_string(gold.turn) + " is not a recommender turn");
      }
      d.gold.push_back(gold);
    }
  }
  return d;
}

}  // namespace

RedialLoad load_redial(std::istream& in, const KnowledgeGraph* g, std::string_view name) {
  RedialLoad out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    ++out.lines;
    try {
      out.dialogs.push_back(parse_dialog(json::parse(line), g));
    } catch (const std::exception& e) {
      ++out.skipped;
      out.warnings.push_back(std::string(name) + ":" + std::to_string(line_no) + ": skipped: " + e.what());
    }
  }
  if (out.lines > 0 &&
      static_cast<double>(out.skipped) > kMaxMalformedFraction * static_cast<double>(out.lines)) {
    throw DataError(std::string(name) + ": " + std::to_string(out.skipped) + " of " + std::to_string(out.lines) +
                    " dialog lines are malformed (limit 10%); first: " + out.warnings.front());
  }
  return out;
}

RedialLoad load_redial(const std::filesystem::path& path, const KnowledgeGraph* g) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return load_redial(in, g, path.string());
}

void write_redial(const std::vector<Dialog>& dialogs, std::ostream& out) {
  for (const auto& d : dialogs) {
    json messages = json::array();
    for (const auto& turn : d.turns) messages.push_back({{"role", to_string(turn.speaker)}, {"text", turn.text}});
    json gold = json::array();
    for (const auto& label : d.gold) gold.push_back({{"turn", label.turn}, {"item_id", label.item}});
    out << json{{"conversation_id", d.conversation_id}, {"messages", messages}, {"gold", gold}}.dump() << '\n';
  }
}

void save_redial(const std::vector<Dialog>& dialogs, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_redial(dialogs, out);
}

}  // namespace egcr
