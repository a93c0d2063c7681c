#include "egcr/explainer.hpp"

#include <algorithm>
#include <array>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "egcr/detail/text.hpp"
#include "egcr/error.hpp"
#include "egcr_default_template.hpp"

namespace egcr {

namespace {

constexpr std::array<std::string_view, 5> kPlaceholders = {"history", "item", "path", "reviews", "instruction"};

bool is_ident_char(char c) { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_'; }

// Calls `on_text(segment)` for literal text and `on_slot(name)` for each
// `{identifier}` in `body`, in order.
template <typename OnText, typename OnSlot>
void scan_template(std::string_view body, OnText on_text, OnSlot on_slot) {
  std::size_t i = 0;
  std::size_t literal = 0;
  while (i < body.size()) {
    if (body[i] == '{') {
      std::size_t j = i + 1;
      while (j < body.size() && is_ident_char(body[j])) ++j;
      if (j > i + 1 && j < body.size() && body[j] == '}') {
        on_text(body.substr(literal, i - literal));
        on_slot(body.substr(i + 1, j - i - 1));
        i = j + 1;
        literal = i;
        continue;
      }
    }
    ++i;
  }
  on_text(body.substr(literal));
}

std::string entity_name(const KnowledgeGraph& g, EntityId id) { return g.entity(id).name; }

}  // namespace

void PromptTemplate::validate() const {
  bool history = false;
  bool item = false;
  scan_template(
      body, [](std::string_view) {},
      [&](std::string_view slot) {
        if (std::find(kPlaceholders.begin(), kPlaceholders.end(), slot) == kPlaceholders.end()) {
          throw TemplateError("template '" + name + "' has unresolved placeholder {" + std::string(slot) + "}");
        }
        history = history || slot == "history";
        item = item || slot == "item";
      });
  if (!history || !item) throw TemplateError("template '" + name + "' must contain {history} and {item}");
}

const PromptTemplate& default_template() {
  static const PromptTemplate tpl{"default", detail::kDefaultTemplateBody};
  return tpl;
}

PromptTemplate load_template(const std::filesystem::path& directory, const std::string& name) {
  auto path = directory / (name + ".txt");
  std::ifstream in(path);
  if (!in) throw IoError("cannot open template " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  PromptTemplate tpl{name, buffer.str()};
  tpl.validate();
  return tpl;
}

std::string render_history(const DialogHistory& c, const KnowledgeGraph& g, std::size_t last_turns) {
  const std::size_t n = c.turns.size();
  const std::size_t first = n > last_turns ? n - last_turns : 0;
  std::vector<std::string> lines;
  for (std::size_t i = first; i < n; ++i) {
    const auto& turn = c.turns[i];
    lines.push_back(std::string(turn.speaker == Speaker::seeker ? "SEEKER: " : "AGENT: ") +
                    resolve_placeholders(turn.text, g));
  }
  return lines.empty() ? "none" : detail::join(lines, "\n");
}

std::string render_reviews(const ReviewSet& reviews, const PromptOptions& options) {
  std::vector<std::string> lines;
  for (std::size_t i = 0; i < reviews.reviews.size() && i < options.review_snippets; ++i) {
    lines.push_back("- " + detail::truncate_tokens(reviews.reviews[i].text, options.snippet_tokens));
  }
  return lines.empty() ? "none" : detail::join(lines, "\n");
}

std::string build_focus_prompt(const DialogHistory& c, EntityId focus, const ReasoningPath& path,
                               const ReviewSet& reviews, const PromptTemplate& tpl, const KnowledgeGraph& g,
                               const PromptOptions& options) {
  tpl.validate();
  std::string out;
  scan_template(
      tpl.body, [&](std::string_view text) { out += text; },
      [&](std::string_view slot) {
        if (slot == "history") {
          out += render_history(c, g, options.history_turns);
        } else if (slot == "item") {
          out += entity_name(g, focus);
        } else if (slot == "path") {
          out += render_path(path, g);
        } else if (slot == "reviews") {
          out += render_reviews(reviews, options);
        } else if (slot == "instruction") {
          out += kExplainInstruction;
        } else {
          throw TemplateError("unresolved placeholder {" + std::string(slot) + "}");
        }
      });
  return out;
}

std::string build_prompt(const DialogHistory& c, const Recommendation& rec, const ReasoningPath& path,
                         const ReviewSet& reviews, const PromptTemplate& tpl, const KnowledgeGraph& g,
                         const PromptOptions& options) {
  if (rec.empty()) throw ContractViolation("cannot build a prompt for an empty recommendation");
  return build_focus_prompt(c, rec.top(), path, reviews, tpl, g, options);
}

// ---------------------------------------------------------------------------

std::string_view to_string(ExplanationSource s) { return s == ExplanationSource::llm ? "llm" : "fallback"; }

std::string FallbackOnlyClient::complete(const std::string&) const {
  throw CompletionError("no completion service configured");
}

std::shared_ptr<const CompletionClient> completion_client_from_env() {
  const char* endpoint = std::getenv(kEndpointEnv);
  const char* key = std::getenv(kApiKeyEnv);
  if (endpoint == nullptr || *endpoint == '\0') return std::make_shared<FallbackOnlyClient>();
  return std::make_shared<HttpCompletionClient>(endpoint, key == nullptr ? "" : key);
}

std::string render_fallback(const Recommendation& rec, const ReasoningPath& path, const KnowledgeGraph& g) {
  if (rec.empty()) throw ContractViolation("cannot explain an empty recommendation");
  const std::string item = entity_name(g, rec.top());
  if (path.length() >= 2) {
    const std::string origin = entity_name(g, path.entities.front());
    const std::string link = entity_name(g, path.entities[path.entities.size() - 2]);
    return "I recommend " + item + " because, like " + origin + ", it is linked to " + link + ".";
  }
  if (path.length() == 1) {
    return "I recommend " + item + " because it is directly related to " + entity_name(g, path.entities.front()) +
           ".";
  }
  return "I recommend " + item + " based on our conversation.";
}

namespace {

std::optional<std::string> try_complete(const std::string& prompt, const CompletionClient& client) {
  try {
    auto text = detail::trim(client.complete(prompt));
    if (text.empty() || text == detail::trim(prompt)) return std::nullopt;
    return text;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace

Explanation generate_explanation(const std::string& prompt, const CompletionClient& client,
                                 const Recommendation& rec, const ReasoningPath& path, const KnowledgeGraph& g) {
  if (prompt.empty()) throw ContractViolation("prompt must be non-empty");
  if (auto text = try_complete(prompt, client)) return {std::move(*text), ExplanationSource::llm, path};
  return {render_fallback(rec, path, g), ExplanationSource::fallback, path};
}

Explanation explain_question(const DialogHistory& c, std::optional<EntityId> focus, const ReasoningPath& path,
                             const ReviewSet& reviews, const PromptTemplate& tpl, const CompletionClient& client,
                             const KnowledgeGraph& g, const PromptOptions& options) {
  if (!focus) return {std::string(kQuestionFallback), ExplanationSource::fallback, path};
  const auto prompt = build_focus_prompt(c, *focus, path, reviews, tpl, g, options);
  if (auto text = try_complete(prompt, client)) return {std::move(*text), ExplanationSource::llm, path};
  const std::string name = entity_name(g, *focus);
  if (path.length() >= 1) {
    return {"I asked about " + name + " because it is related to " + entity_name(g, path.entities.front()) + ".",
            ExplanationSource::fallback, path};
  }
  return {"I asked about " + name + " to learn more about your preferences.", ExplanationSource::fallback, path};
}

}  // namespace egcr
