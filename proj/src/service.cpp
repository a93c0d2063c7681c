#include "egcr/service.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "egcr/detail/text.hpp"

namespace egcr {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json mention_json(const Mention& m) {
  return {{"start", m.start}, {"end", m.end}, {"surface", m.surface}, {"entity", m.entity}};
}

json turn_json(const DialogTurn& t) {
  json mentions = json::array();
  for (const auto& m : t.mentions) mentions.push_back(mention_json(m));
  return {{"speaker", to_string(t.speaker)}, {"text", t.text}, {"turn_index", t.turn_index}, {"mentions", mentions}};
}

DialogTurn turn_from_json(const json& j) {
  DialogTurn t;
  const auto speaker = j.at("speaker").get<std::string>();
  if (speaker != "seeker" && speaker != "recommender") throw DataError("unknown speaker '" + speaker + "'");
  t.speaker = speaker == "seeker" ? Speaker::seeker : Speaker::recommender;
  t.text = j.at("text").get<std::string>();
  t.turn_index = j.at("turn_index").get<int>();
  for (const auto& m : j.at("mentions")) {
    t.mentions.push_back({m.at("start").get<std::size_t>(), m.at("end").get<std::size_t>(),
                          m.at("surface").get<std::string>(), m.at("entity").get<EntityId>()});
  }
  return t;
}

json path_json(const ReasoningPath& p) {
  json steps = json::array();
  for (const auto& s : p.steps) steps.push_back({{"relation", s.relation}, {"forward", s.forward}});
  return {{"entities", p.entities}, {"steps", steps}};
}

ReasoningPath path_from_json(const json& j) {
  ReasoningPath p;
  p.entities = j.at("entities").get<std::vector<EntityId>>();
  for (const auto& s : j.at("steps")) p.steps.push_back({s.at("relation").get<RelationId>(), s.at("forward").get<bool>()});
  return p;
}

TurnResult result_from_json(const json& j) {
  TurnResult r;
  r.response_text = j.at("response_text").get<std::string>();
  const auto& e = j.at("explanation");
  r.explanation.text = e.at("text").get<std::string>();
  const auto source = e.at("source").get<std::string>();
  r.explanation.source = source == "llm" ? ExplanationSource::llm : ExplanationSource::fallback;
  if (j.contains("path_used")) r.explanation.path_used = path_from_json(j.at("path_used"));
  for (const auto& v : j.at("recommendations")) {
    r.recommendations.push_back({v.at("entity_id").get<EntityId>(), v.at("name").get<std::string>(),
                                 v.at("score").get<double>(), v.at("path").get<std::vector<std::string>>()});
  }
  r.turn_index = j.at("turn_index").get<int>();
  return r;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

bool valid_session_id(const std::string& id) {
  return !id.empty() && id.size() <= 64 &&
         std::all_of(id.begin(), id.end(), [](char c) { return std::isxdigit(static_cast<unsigned char>(c)); });
}

}  // namespace

json to_json(const TurnResult& result) {
  json recs = json::array();
  for (const auto& r : result.recommendations) {
    recs.push_back({{"entity_id", r.entity_id}, {"name", r.name}, {"score", r.score}, {"path", r.path}});
  }
  return {{"response_text", result.response_text},
          {"explanation", {{"text", result.explanation.text}, {"source", to_string(result.explanation.source)}}},
          {"recommendations", recs},
          {"turn_index", result.turn_index}};
}

std::string render_transcript(const std::vector<Exchange>& exchanges) {
  std::string out;
  for (const auto& ex : exchanges) {
    out += "SEEKER: " + ex.seeker.text + '\n';
    out += "AGENT: " + ex.result.response_text + " (" + ex.result.explanation.text + ")\n";
  }
  return out;
}

json Transcript::turns() const {
  json out = json::array();
  for (const auto& ex : exchanges) {
    out.push_back({{"role", "seeker"}, {"text", ex.seeker.text}, {"turn_index", ex.result.turn_index}});
    out.push_back({{"role", "recommender"},
                   {"text", ex.result.response_text},
                   {"explanation",
                    {{"text", ex.result.explanation.text}, {"source", to_string(ex.result.explanation.source)}}},
                   {"turn_index", ex.result.turn_index}});
  }
  return out;
}

std::string random_session_id() {
  thread_local std::random_device device;
  std::string id;
  id.reserve(32);
  for (int i = 0; i < 4; ++i) {
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08x", static_cast<unsigned>(device()));
    id += buf;
  }
  return id;
}

// ---------------------------------------------------------------------------

SessionStore::SessionStore(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw IoError("cannot create session directory " + dir_.string() + ": " + ec.message());
}

fs::path SessionStore::path_for(const std::string& id) const { return dir_ / (id + ".jsonl"); }

namespace {

void append_line(const fs::path& path, const std::string& line) {
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw IoError("cannot append to " + path.string());
  out.write(line.data(), static_cast<std::streamsize>(line.size()));
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

void SessionStore::create(const std::string& id, const std::string& created_at) const {
  append_line(path_for(id), json{{"type", "session"}, {"session_id", id}, {"created_at", created_at}}.dump() + '\n');
}

void SessionStore::append(const std::string& id, const Exchange& exchange) const {
  json result = to_json(exchange.result);
  result["path_used"] = path_json(exchange.result.explanation.path_used);
  json record{{"type", "exchange"},
              {"seeker", turn_json(exchange.seeker)},
              {"agent", turn_json(exchange.agent)},
              {"result", result}};
  append_line(path_for(id), record.dump() + '\n');
}

std::vector<SessionStore::Loaded> SessionStore::load_all() const {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir_)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  std::vector<Loaded> out;
  for (const auto& path : files) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    const std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    Loaded session;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < content.size()) {
      const auto nl = content.find('\n', pos);
      ++line_no;
      if (nl == std::string::npos) break;  // torn final record
      const auto line = content.substr(pos, nl - pos);
      pos = nl + 1;
      if (detail::trim(line).empty()) continue;
      try {
        const auto j = json::parse(line);
        const auto type = j.at("type").get<std::string>();
        if (type == "session") {
          session.id = j.at("session_id").get<std::string>();
          session.created_at = j.at("created_at").get<std::string>();
        } else if (type == "exchange") {
          session.exchanges.push_back(
              {turn_from_json(j.at("seeker")), turn_from_json(j.at("agent")), result_from_json(j.at("result"))});
        } else {
          throw DataError("unknown record type '" + type + "'");
        }
      } catch (const std::exception& e) {
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
    if (session.id.empty()) throw DataError(path.string() + ": missing session header");
    out.push_back(std::move(session));
  }
  return out;
}

// ---------------------------------------------------------------------------

ConversationService::ConversationService(std::shared_ptr<const Engine> engine, std::optional<SessionStore> store)
    : engine_(std::move(engine)), store_(std::move(store)) {
  if (!store_) return;
  for (auto& loaded : store_->load_all()) {
    auto s = std::make_shared<Session>();
    s->id = loaded.id;
    s->created_at = loaded.created_at;
    for (auto& ex : loaded.exchanges) {
      s->history.turns.push_back(ex.seeker);
      s->history.turns.push_back(ex.agent);
      s->exchanges.push_back(std::move(ex));
    }
    s->history.validate();
    sessions_.emplace(s->id, std::move(s));
  }
}

std::string ConversationService::create_session() {
  auto s = std::make_shared<Session>();
  s->created_at = utc_now();
  std::unique_lock lock(sessions_mutex_);
  do {
    s->id = random_session_id();
  } while (sessions_.contains(s->id));
  if (store_) store_->create(s->id, s->created_at);
  const auto id = s->id;
  sessions_.emplace(id, std::move(s));
  return id;
}

std::shared_ptr<ConversationService::Session> ConversationService::find(const std::string& id) const {
  if (!valid_session_id(id)) throw NotFoundError("unknown session '" + id + "'");
  std::shared_lock lock(sessions_mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFoundError("unknown session '" + id + "'");
  return it->second;
}

TurnResult ConversationService::post_turn(const std::string& session_id, const std::string& text) {
  auto session = find(session_id);
  if (detail::trim(text).empty()) throw ValidationError("text must be non-empty");
  if (!engine_) throw ModelNotLoadedError("no model loaded");
  const Engine& engine = *engine_;

  std::lock_guard lock(session->mutex);
  DialogHistory history = session->history;
  history.append(Speaker::seeker, text, link_mentions(text, engine.graph()).mentions);
  const auto action = engine.act(history);
  history.append(Speaker::recommender, action.utterance, link_placeholders(action.utterance));

  Exchange ex;
  ex.seeker = history.turns[history.turns.size() - 2];
  ex.agent = history.turns.back();
  ex.result.response_text = action.response_text;
  ex.result.explanation = action.explanation;
  ex.result.turn_index = static_cast<int>(session->exchanges.size()) + 1;
  const auto hops = render_path_hops(action.path, engine.graph());
  for (std::size_t i = 0; i < action.recommendation.ranked.size(); ++i) {
    const auto& r = action.recommendation.ranked[i];
    ex.result.recommendations.push_back(
        {r.entity, engine.graph().entity(r.entity).name, r.score, i == 0 ? hops : std::vector<std::string>{}});
  }

  // Persist before publishing so a crash never exposes an unlogged turn.
  if (store_) store_->append(session->id, ex);
  session->history = std::move(history);
  session->exchanges.push_back(ex);
  return ex.result;
}

Transcript ConversationService::get_transcript(const std::string& session_id) const {
  auto session = find(session_id);
  std::lock_guard lock(session->mutex);
  Transcript t;
  t.exchanges = session->exchanges;
  t.rendered = render_transcript(t.exchanges);
  return t;
}

std::size_t ConversationService::session_count() const {
  std::shared_lock lock(sessions_mutex_);
  return sessions_.size();
}

std::vector<EntityId> ConversationService::mentions_so_far(const std::string& session_id) const {
  auto session = find(session_id);
  std::lock_guard lock(session->mutex);
  return session->history.mentioned_entities();
}

}  // namespace egcr
