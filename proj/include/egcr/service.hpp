#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "egcr/engine.hpp"
#include "egcr/error.hpp"

namespace egcr {

/// The service has no engine to answer with (HTTP 503).
class ModelNotLoadedError : public Error {
public:
  using Error::Error;
};

struct RecommendationView {
  EntityId entity_id = 0;
  std::string name;
  double score = 0.0;
  /// Rendered hops; only the top-1 item carries a path.
  std::vector<std::string> path;
};

struct TurnResult {
  std::string response_text;
  Explanation explanation;
  std::vector<RecommendationView> recommendations;
  /// 1-based exchange number within the session.
  int turn_index = 0;
};

nlohmann::json to_json(const TurnResult& result);

/// One seeker utterance and the agent's reply.
struct Exchange {
  DialogTurn seeker;
  DialogTurn agent;  // text in placeholder form
  TurnResult result;
};

struct Transcript {
  /// One line per turn; agent lines end with "(explanation)".
  std::string rendered;
  /// One object per turn: 2 per exchange.
  nlohmann::json turns() const;
  std::vector<Exchange> exchanges;
};

/// Append-only JSON-lines log per session under one directory.
class SessionStore {
public:
  explicit SessionStore(std::filesystem::path dir);

  const std::filesystem::path& dir() const noexcept { return dir_; }
  void create(const std::string& id, const std::string& created_at) const;
  /// Appends one record with a single write.
  void append(const std::string& id, const Exchange& exchange) const;

  struct Loaded {
    std::string id;
    std::string created_at;
    std::vector<Exchange> exchanges;
  };
  /// All sessions found in the directory. A torn final line (interrupted
  /// write) is ignored; any other malformed line throws DataError.
  std::vector<Loaded> load_all() const;

private:
  std::filesystem::path path_for(const std::string& id) const;
  std::filesystem::path dir_;
};

/// Sessions over one shared engine. Turns of one session run strictly one
/// at a time; different sessions run concurrently.
class ConversationService {
public:
  /// `engine` may be null: sessions work but posting a turn raises
  /// ModelNotLoadedError. With `store`, existing sessions are replayed.
  explicit ConversationService(std::shared_ptr<const Engine> engine,
                               std::optional<SessionStore> store = std::nullopt);

  std::string create_session();
  /// Throws NotFoundError, ValidationError (empty text; session unchanged)
  /// or ModelNotLoadedError.
  TurnResult post_turn(const std::string& session_id, const std::string& text);
  Transcript get_transcript(const std::string& session_id) const;

  bool model_loaded() const noexcept { return engine_ != nullptr; }
  std::size_t session_count() const;
  /// Entities mentioned so far in a session, sorted.
  std::vector<EntityId> mentions_so_far(const std::string& session_id) const;

private:
  struct Session {
    std::string id;
    std::string created_at;
    DialogHistory history;
    std::vector<Exchange> exchanges;
    mutable std::mutex mutex;
  };

  std::shared_ptr<Session> find(const std::string& id) const;

  std::shared_ptr<const Engine> engine_;
  std::optional<SessionStore> store_;
  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

/// 32 lowercase hex digits from the OS random source.
std::string random_session_id();

/// Renders the plain-text transcript.
std::string render_transcript(const std::vector<Exchange>& exchanges);

// ---------------------------------------------------------------------------

/// JSON-over-HTTP front end:
///   POST /sessions                  -> 201 {"session_id"}
///   POST /sessions/{id}/turns       -> 200 TurnResult
///   GET  /sessions/{id}/transcript  -> 200 {"turns", "rendered"}
/// Errors are {"error": message} with 404, 422 or 503.
class HttpServer {
public:
  explicit HttpServer(ConversationService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void serve();
  void stop();
  bool running() const;
  void wait_until_ready() const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace egcr
