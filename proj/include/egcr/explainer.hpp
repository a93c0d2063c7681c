#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "egcr/conversation_encoder.hpp"
#include "egcr/kg_store.hpp"
#include "egcr/recommender.hpp"
#include "egcr/review_enricher.hpp"

namespace egcr {

/// Text with `{history}`, `{item}`, `{path}`, `{reviews}` and `{instruction}`
/// placeholders. `{history}` and `{item}` are required.
struct PromptTemplate {
  std::string name;
  std::string body;

  /// Throws TemplateError on a missing required or an unknown placeholder.
  void validate() const;
};

/// The template shipped as templates/default.txt, compiled in.
const PromptTemplate& default_template();
PromptTemplate load_template(const std::filesystem::path& directory, const std::string& name);

struct PromptOptions {
  std::size_t history_turns = 4;
  std::size_t review_snippets = 2;
  std::size_t snippet_tokens = 60;
};

inline constexpr std::string_view kExplainInstruction =
    "In one or two sentences, explain to the seeker why the agent recommends this item. "
    "Ground the explanation in the reasoning path and the conversation.";

std::string render_history(const DialogHistory& c, const KnowledgeGraph& g, std::size_t last_turns);
std::string render_reviews(const ReviewSet& reviews, const PromptOptions& options);

/// Renders `tpl` with the last turns of `c`, the top-1 item of `rec`, the
/// path and the leading review snippets.
std::string build_prompt(const DialogHistory& c, const Recommendation& rec, const ReasoningPath& path,
                         const ReviewSet& reviews, const PromptTemplate& tpl, const KnowledgeGraph& g,
                         const PromptOptions& options = {});

/// Same pipeline with `{item}` bound to an arbitrary focus entity (used for
/// non-recommendation actions).
std::string build_focus_prompt(const DialogHistory& c, EntityId focus, const ReasoningPath& path,
                               const ReviewSet& reviews, const PromptTemplate& tpl, const KnowledgeGraph& g,
                               const PromptOptions& options = {});

// ---------------------------------------------------------------------------

enum class ExplanationSource { llm, fallback };
std::string_view to_string(ExplanationSource s);

struct Explanation {
  std::string text;
  ExplanationSource source = ExplanationSource::fallback;
  ReasoningPath path_used;
};

/// Raised by completion clients; `timed_out()` distinguishes timeouts.
class CompletionError : public std::runtime_error {
public:
  explicit CompletionError(const std::string& what, bool timed_out = false)
      : std::runtime_error(what), timed_out_(timed_out) {}
  bool timed_out() const noexcept { return timed_out_; }

private:
  bool timed_out_;
};

/// External text-completion service. Implementations must be safe to call
/// concurrently and must signal failure by throwing, never by returning "".
class CompletionClient {
public:
  virtual ~CompletionClient() = default;
  virtual std::string name() const = 0;
  virtual std::chrono::milliseconds timeout() const = 0;
  virtual std::string complete(const std::string& prompt) const = 0;
};

/// Always fails; selects the deterministic fallback.
class FallbackOnlyClient final : public CompletionClient {
public:
  std::string name() const override { return "fallback-only"; }
  std::chrono::milliseconds timeout() const override { return std::chrono::milliseconds(0); }
  std::string complete(const std::string& prompt) const override;
};

/// POSTs {"prompt", "max_tokens", "temperature"} as JSON to an HTTP(S)
/// endpoint and reads `choices[0].text` (or `text`) from the reply.
class HttpCompletionClient final : public CompletionClient {
public:
  HttpCompletionClient(std::string endpoint, std::string api_key,
                       std::chrono::milliseconds timeout = std::chrono::seconds(20), int max_tokens = 96,
                       double temperature = 0.7);

  std::string name() const override { return "http:" + endpoint_; }
  std::chrono::milliseconds timeout() const override { return timeout_; }
  std::string complete(const std::string& prompt) const override;

private:
  std::string endpoint_;
  std::string api_key_;
  std::chrono::milliseconds timeout_;
  int max_tokens_;
  double temperature_;
};

inline constexpr const char* kEndpointEnv = "EGCR_LLM_ENDPOINT";
inline constexpr const char* kApiKeyEnv = "EGCR_LLM_API_KEY";

/// HttpCompletionClient when EGCR_LLM_ENDPOINT is set, otherwise the
/// fallback-only client.
std::shared_ptr<const CompletionClient> completion_client_from_env();

/// Deterministic explanation of the top-1 item:
///   2+ hops: "I recommend {item} because, like {m}, it is linked to {a}."
///   1 hop:   "I recommend {item} because it is directly related to {m}."
///   no path: "I recommend {item} based on our conversation."
std::string render_fallback(const Recommendation& rec, const ReasoningPath& path, const KnowledgeGraph& g);

inline constexpr std::string_view kQuestionFallback = "I asked to learn more about your preferences.";

/// Asks `client`; on any failure, a whitespace-only reply or an echo of the
/// prompt, uses `render_fallback`. Never throws for client failures.
Explanation generate_explanation(const std::string& prompt, const CompletionClient& client,
                                 const Recommendation& rec, const ReasoningPath& path, const KnowledgeGraph& g);

/// Explanation for a question-type action about `focus` (if any).
Explanation explain_question(const DialogHistory& c, std::optional<EntityId> focus, const ReasoningPath& path,
                             const ReviewSet& reviews, const PromptTemplate& tpl, const CompletionClient& client,
                             const KnowledgeGraph& g, const PromptOptions& options = {});

}  // namespace egcr
