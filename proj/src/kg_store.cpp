#include "egcr/kg_store.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "egcr/detail/text.hpp"
#include "egcr/error.hpp"

namespace egcr {

using nlohmann::json;

std::string_view to_string(EntityKind kind) {
  switch (kind) {
    case EntityKind::item: return "item";
    case EntityKind::attribute: return "attribute";
    case EntityKind::concept_: return "concept";
  }
  return "item";
}

EntityKind parse_entity_kind(std::string_view text) {
  if (text == "item") return EntityKind::item;
  if (text == "attribute") return EntityKind::attribute;
  if (text == "concept") return EntityKind::concept_;
  throw ConfigError("unknown entity kind '" + std::string(text) + "'");
}

namespace {

template <typename Int>
std::optional<Int> parse_int(std::string_view text) {
  Int value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || text.empty()) return std::nullopt;
  return value;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

bool skippable(std::string_view line) {
  return detail::trim(line).empty() || line.front() == '#';
}

}  // namespace

// ---------------------------------------------------------------------------

KnowledgeGraph KnowledgeGraph::build(std::vector<Entity> entities,
                                     std::vector<std::string> relation_labels,
                                     std::vector<Triple> triples) {
  KnowledgeGraph g;
  g.entities_ = std::move(entities);

  std::unordered_map<std::string, EntityId> names;  // folded name -> owner
  std::set<std::pair<EntityKind, std::string>> kind_names;
  for (std::size_t i = 0; i < g.entities_.size(); ++i) {
    const Entity& e = g.entities_[i];
    if (e.id < 0) throw IntegrityError("negative entity id " + std::to_string(e.id));
    if (e.name.empty()) throw IntegrityError("entity " + std::to_string(e.id) + " has an empty name");
    if (!g.index_.emplace(e.id, i).second) {
      throw IntegrityError("duplicate entity id " + std::to_string(e.id));
    }
    auto folded = detail::fold_case(e.name);
    if (!kind_names.emplace(e.kind, folded).second) {
      throw IntegrityError("duplicate " + std::string(to_string(e.kind)) + " name '" + e.name +
                           "' (entity " + std::to_string(e.id) + ")");
    }
    names.emplace(folded, e.id);
    if (e.kind == EntityKind::item) g.items_.push_back(e.id);
  }
  for (const Entity& e : g.entities_) {
    for (const auto& alias : e.aliases) {
      auto it = names.find(detail::fold_case(alias));
      if (it != names.end() && it->second != e.id) {
        throw IntegrityError("alias '" + alias + "' of entity " + std::to_string(e.id) +
                             " collides with the name of entity " + std::to_string(it->second));
      }
    }
  }

  for (auto& label : relation_labels) {
    if (label.empty()) throw IntegrityError("empty relation label");
    const auto id = static_cast<RelationId>(g.relations_.size());
    if (!g.relation_index_.emplace(label, id).second) {
      throw IntegrityError("duplicate relation label '" + label + "'");
    }
    g.relations_.push_back({id, std::move(label)});
  }
  const auto aligned = g.find_relation(kAlignedTo);

  for (const Triple& t : triples) {
    if (!g.has_entity(t.head)) {
      throw IntegrityError("triple references unknown head entity " + std::to_string(t.head));
    }
    if (!g.has_entity(t.tail)) {
      throw IntegrityError("triple references unknown tail entity " + std::to_string(t.tail));
    }
    if (!g.has_relation(t.relation)) {
      throw IntegrityError("triple references unknown relation " + std::to_string(t.relation));
    }
    if (aligned && t.relation == *aligned && t.head == t.tail) {
      throw IntegrityError("entity " + std::to_string(t.head) + " aligned to itself");
    }
  }
  std::sort(triples.begin(), triples.end());
  triples.erase(std::unique(triples.begin(), triples.end()), triples.end());
  g.triples_ = std::move(triples);

  g.out_.resize(g.entities_.size());
  g.in_.resize(g.entities_.size());
  for (const Triple& t : g.triples_) {
    g.out_[g.index_.at(t.head)].push_back({t.relation, t.tail, true});
    g.in_[g.index_.at(t.tail)].push_back({t.relation, t.head, false});
  }
  auto by_relation = [](const Edge& a, const Edge& b) {
    return std::tie(a.relation, a.other) < std::tie(b.relation, b.other);
  };
  for (auto& edges : g.out_) std::sort(edges.begin(), edges.end(), by_relation);
  for (auto& edges : g.in_) std::sort(edges.begin(), edges.end(), by_relation);

  std::set<std::size_t, std::greater<>> lengths;
  for (const Entity& e : g.entities_) {
    if (e.kind == EntityKind::item) continue;
    auto add = [&](const std::string& surface) {
      auto folded = detail::fold_case(surface);
      auto [it, inserted] = g.lexicon_.emplace(folded, e.id);
      if (!inserted) it->second = std::min(it->second, e.id);
      lengths.insert(folded.size());
    };
    add(e.name);
    for (const auto& alias : e.aliases) {
      if (!alias.empty()) add(alias);
    }
  }
  g.lexicon_lengths_.assign(lengths.begin(), lengths.end());
  return g;
}

std::size_t KnowledgeGraph::index_of(EntityId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw LookupError("unregistered entity " + std::to_string(id));
  return it->second;
}

const Entity& KnowledgeGraph::entity(EntityId id) const { return entities_[index_of(id)]; }

const RelationType& KnowledgeGraph::relation(RelationId id) const {
  if (!has_relation(id)) throw LookupError("unregistered relation " + std::to_string(id));
  return relations_[static_cast<std::size_t>(id)];
}

std::optional<RelationId> KnowledgeGraph::find_relation(std::string_view label) const {
  auto it = relation_index_.find(std::string(label));
  if (it == relation_index_.end()) return std::nullopt;
  return it->second;
}

std::vector<EntityId> KnowledgeGraph::neighbors(EntityId e, std::optional<RelationId> r) const {
  const auto& edges = out_[index_of(e)];
  std::vector<EntityId> out;
  if (r) {
    relation(*r);  // validates
    for (const Edge& edge : edges) {
      if (edge.relation == *r) out.push_back(edge.other);
    }
    return out;  // already sorted by tail within a relation
  }
  for (const Edge& edge : edges) out.push_back(edge.other);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::span<const Edge> KnowledgeGraph::in_edges(EntityId e) const { return in_[index_of(e)]; }
std::span<const Edge> KnowledgeGraph::out_edges(EntityId e) const { return out_[index_of(e)]; }

// ---------------------------------------------------------------------------
// Serialization

KnowledgeGraph load_graph(std::istream& triples_in, std::istream& entities_in,
                          std::string_view triples_name, std::string_view entities_name) {
  std::vector<Entity> entities;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(entities_in, line)) {
    ++line_no;
    std::string_view view = strip_cr(line);
    if (detail::trim(view).empty()) continue;
    json record;
    try {
      record = json::parse(view);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string(entities_name), line_no, std::string("invalid JSON: ") + e.what());
    }
    try {
      Entity entity;
      entity.id = record.at("id").get<EntityId>();
      entity.name = record.at("name").get<std::string>();
      entity.kind = parse_entity_kind(record.at("kind").get<std::string>());
      if (record.contains("aliases")) {
        entity.aliases = record.at("aliases").get<std::vector<std::string>>();
      }
      entities.push_back(std::move(entity));
    } catch (const json::exception& e) {
      throw ParseError(std::string(entities_name), line_no, e.what());
    } catch (const ConfigError& e) {
      throw ParseError(std::string(entities_name), line_no, e.what());
    }
  }

  std::vector<std::string> labels;
  std::unordered_map<std::string, RelationId> label_ids;
  std::vector<Triple> triples;
  line_no = 0;
  while (std::getline(triples_in, line)) {
    ++line_no;
    std::string_view view = strip_cr(line);
    if (skippable(view)) continue;
    auto fields = split_tabs(view);
    if (fields.size() != 3) {
      throw ParseError(std::string(triples_name), line_no,
                       "expected 3 tab-separated fields, got " + std::to_string(fields.size()));
    }
    auto head = parse_int<EntityId>(fields[0]);
    auto tail = parse_int<EntityId>(fields[2]);
    if (!head || !tail) throw ParseError(std::string(triples_name), line_no, "entity ids must be decimal integers");
    std::string label(fields[1]);
    if (label.empty()) throw ParseError(std::string(triples_name), line_no, "empty relation label");
    auto [it, inserted] = label_ids.emplace(label, static_cast<RelationId>(labels.size()));
    if (inserted) labels.push_back(label);
    triples.push_back({*head, it->second, *tail});
  }
  return KnowledgeGraph::build(std::move(entities), std::move(labels), std::move(triples));
}

KnowledgeGraph load_graph(const std::filesystem::path& triples_path,
                          const std::filesystem::path& entities_path) {
  std::ifstream triples(triples_path);
  if (!triples) throw IoError("cannot open " + triples_path.string());
  std::ifstream entities(entities_path);
  if (!entities) throw IoError("cannot open " + entities_path.string());
  return load_graph(triples, entities, triples_path.string(), entities_path.string());
}

void write_triples(const KnowledgeGraph& g, std::ostream& out) {
  std::vector<Triple> sorted(g.triples().begin(), g.triples().end());
  std::sort(sorted.begin(), sorted.end(), [](const Triple& a, const Triple& b) {
    return std::tie(a.relation, a.head, a.tail) < std::tie(b.relation, b.head, b.tail);
  });
  for (const Triple& t : sorted) {
    out << t.head << '\t' << g.relation(t.relation).label << '\t' << t.tail << '\n';
  }
}

void write_entities(const KnowledgeGraph& g, std::ostream& out) {
  for (const Entity& e : g.entities()) {
    json record = {{"id", e.id}, {"name", e.name}, {"kind", to_string(e.kind)}, {"aliases", e.aliases}};
    out << record.dump() << '\n';
  }
}

void save_graph(const KnowledgeGraph& g, const std::filesystem::path& triples_path,
                const std::filesystem::path& entities_path) {
  std::ofstream triples(triples_path);
  std::ofstream entities(entities_path);
  if (!triples || !entities) throw IoError("cannot write graph to " + triples_path.parent_path().string());
  write_triples(g, triples);
  write_entities(g, entities);
}

// ---------------------------------------------------------------------------
// Mention linking

namespace {

bool boundary_before(std::string_view text, std::size_t pos) {
  return pos == 0 || !detail::is_word_char(text[pos - 1]) || !detail::is_word_char(text[pos]);
}

bool boundary_after(std::string_view text, std::size_t end) {
  return end == text.size() || !detail::is_word_char(text[end]) || !detail::is_word_char(text[end - 1]);
}

// Length of an `@<digits>` token starting at `pos`, or 0.
std::size_t placeholder_length(std::string_view text, std::size_t pos) {
  if (text[pos] != '@' || (pos > 0 && detail::is_word_char(text[pos - 1]))) return 0;
  std::size_t end = pos + 1;
  while (end < text.size() && text[end] >= '0' && text[end] <= '9') ++end;
  if (end == pos + 1) return 0;
  if (end < text.size() && detail::is_word_char(text[end])) return 0;
  return end - pos;
}

}  // namespace

LinkResult link_mentions(std::string_view text, const KnowledgeGraph& g) {
  LinkResult result;
  const std::string folded = detail::fold_case(text);
  const std::string_view view = folded;
  std::size_t i = 0;
  while (i < text.size()) {
    if (auto len = placeholder_length(text, i); len > 0) {
      auto surface = text.substr(i, len);
      auto id = parse_int<EntityId>(surface.substr(1));
      if (id && g.has_entity(*id) && g.entity(*id).kind == EntityKind::item) {
        result.mentions.push_back({i, i + len, std::string(surface), *id});
      } else {
        result.unlinked.emplace_back(surface);
      }
      i += len;
      continue;
    }
    bool matched = false;
    if (boundary_before(text, i)) {
      for (std::size_t len : g.lexicon_lengths_) {
        if (i + len > text.size() || !boundary_after(text, i + len)) continue;
        auto it = g.lexicon_.find(std::string(view.substr(i, len)));
        if (it == g.lexicon_.end()) continue;
        result.mentions.push_back({i, i + len, std::string(text.substr(i, len)), it->second});
        i += len;
        matched = true;
        break;
      }
    }
    if (!matched) ++i;
  }
  return result;
}

std::vector<Mention> link_placeholders(std::string_view text) {
  std::vector<Mention> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (auto len = placeholder_length(text, i); len > 0) {
      auto surface = text.substr(i, len);
      if (auto id = parse_int<EntityId>(surface.substr(1))) {
        out.push_back({i, i + len, std::string(surface), *id});
      }
      i += len;
    } else {
      ++i;
    }
  }
  return out;
}

std::string resolve_placeholders(std::string_view text, const KnowledgeGraph& g) {
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (auto len = placeholder_length(text, i); len > 0) {
      auto id = parse_int<EntityId>(text.substr(i + 1, len - 1));
      if (id && g.has_entity(*id)) {
        out += g.entity(*id).name;
      } else {
        out += text.substr(i, len);
      }
      i += len;
    } else {
      out += text[i++];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fusion

FusedGraph merge_graphs(const KnowledgeGraph& item_graph, const KnowledgeGraph& concept_graph,
                        std::span<const AlignmentPair> alignment) {
  for (const auto& [item, concept_id] : alignment) {
    if (!item_graph.has_entity(item)) {
      throw IntegrityError("alignment references unknown item-graph entity " + std::to_string(item));
    }
    if (!concept_graph.has_entity(concept_id)) {
      throw IntegrityError("alignment references unknown concept-graph entity " + std::to_string(concept_id));
    }
  }

  EntityId base = 0;
  for (const Entity& e : item_graph.entities()) base = std::max(base, e.id + 1);

  std::vector<Entity> entities(item_graph.entities().begin(), item_graph.entities().end());
  for (Entity e : concept_graph.entities()) {
    e.id += base;
    entities.push_back(std::move(e));
  }

  std::vector<std::string> labels;
  for (const auto& r : item_graph.relations()) labels.push_back(r.label);
  std::vector<RelationId> concept_relation(concept_graph.num_relations());
  for (const auto& r : concept_graph.relations()) {
    auto it = std::find(labels.begin(), labels.end(), r.label);
    concept_relation[static_cast<std::size_t>(r.id)] = static_cast<RelationId>(it - labels.begin());
    if (it == labels.end()) labels.push_back(r.label);
  }
  auto aligned_it = std::find(labels.begin(), labels.end(), kAlignedTo);
  const auto aligned = static_cast<RelationId>(aligned_it - labels.begin());
  if (aligned_it == labels.end()) labels.emplace_back(kAlignedTo);

  std::vector<Triple> triples(item_graph.triples().begin(), item_graph.triples().end());
  for (const Triple& t : concept_graph.triples()) {
    triples.push_back({t.head + base, concept_relation[static_cast<std::size_t>(t.relation)], t.tail + base});
  }
  for (const auto& [item, concept_id] : alignment) {
    triples.push_back({item, aligned, concept_id + base});
    triples.push_back({concept_id + base, aligned, item});
  }
  return {KnowledgeGraph::build(std::move(entities), std::move(labels), std::move(triples)), base, aligned};
}

std::vector<AlignmentPair> load_alignment(std::istream& in, std::string_view name) {
  std::vector<AlignmentPair> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = strip_cr(line);
    if (skippable(view)) continue;
    auto fields = split_tabs(view);
    if (fields.size() != 2) throw ParseError(std::string(name), line_no, "expected 2 tab-separated fields");
    auto item = parse_int<EntityId>(fields[0]);
    auto concept_id = parse_int<EntityId>(fields[1]);
    if (!item || !concept_id) throw ParseError(std::string(name), line_no, "entity ids must be decimal integers");
    out.emplace_back(*item, *concept_id);
  }
  return out;
}

std::vector<AlignmentPair> load_alignment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return load_alignment(in, path.string());
}

}  // namespace egcr
