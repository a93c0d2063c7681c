#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "egcr/dialog.hpp"
#include "egcr/kg_store.hpp"

namespace egcr {

struct RedialLoad {
  std::vector<Dialog> dialogs;
  std::size_t lines = 0;
  std::size_t skipped = 0;
  std::vector<std::string> warnings;
};

inline constexpr double kMaxMalformedFraction = 0.10;

/// Reads one JSON dialog per line:
///   {"conversation_id": str,
///    "messages": [{"role": "seeker"|"recommender", "text": str}],
///    "gold": [{"turn": int, "item_id": int}]}
/// `turn` is the 1-based message position of a recommender message. Mentions
/// are linked against `g` when given, otherwise only `@<id>` placeholders are
/// linked. Malformed lines are skipped with a warning; more than 10% of them
/// aborts with DataError.
RedialLoad load_redial(std::istream& in, const KnowledgeGraph* g, std::string_view name = "<dialogs>");
RedialLoad load_redial(const std::filesystem::path& path, const KnowledgeGraph* g);

void write_redial(const std::vector<Dialog>& dialogs, std::ostream& out);
void save_redial(const std::vector<Dialog>& dialogs, const std::filesystem::path& path);

}  // namespace egcr
