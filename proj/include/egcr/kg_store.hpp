#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace egcr {

using EntityId = std::int64_t;
using RelationId = std::int32_t;

enum class EntityKind { item, attribute, concept_ };  // `concept` is reserved

std::string_view to_string(EntityKind kind);
EntityKind parse_entity_kind(std::string_view text);

struct Entity {
  EntityId id = 0;
  std::string name;
  EntityKind kind = EntityKind::item;
  std::vector<std::string> aliases;

  friend bool operator==(const Entity&, const Entity&) = default;
};

struct RelationType {
  RelationId id = 0;
  std::string label;

  friend bool operator==(const RelationType&, const RelationType&) = default;
};

struct Triple {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  friend auto operator<=>(const Triple&, const Triple&) = default;
};

/// A linked span of source text. Offsets are byte offsets into the UTF-8 text.
struct Mention {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string surface;
  EntityId entity = 0;

  friend bool operator==(const Mention&, const Mention&) = default;
};

/// One incoming or outgoing edge as seen from a given entity.
struct Edge {
  RelationId relation = 0;
  EntityId other = 0;
  /// true when the stored triple is (self, relation, other).
  bool forward = true;
};

inline constexpr std::string_view kAlignedTo = "aligned_to";

struct LinkResult {
  std::vector<Mention> mentions;
  /// `@<id>` tokens whose id is not a registered item.
  std::vector<std::string> unlinked;
};

class KnowledgeGraph;
LinkResult link_mentions(std::string_view text, const KnowledgeGraph& g);

/// Immutable multi-relational knowledge graph.
///
/// Entities keep their registry order (the order they were registered in);
/// that order is the row order of every EntityTable built over the graph.
/// Relation ids are dense 0..|R|-1. Triples are deduplicated and kept sorted.
class KnowledgeGraph {
public:
  KnowledgeGraph() = default;

  /// Validates and indexes. Throws IntegrityError on duplicate ids, name
  /// collisions, dangling triple references or self-aligned triples.
  static KnowledgeGraph build(std::vector<Entity> entities,
                              std::vector<std::string> relation_labels,
                              std::vector<Triple> triples);

  std::span<const Entity> entities() const noexcept { return entities_; }
  std::span<const RelationType> relations() const noexcept { return relations_; }
  std::span<const Triple> triples() const noexcept { return triples_; }

  std::size_t num_entities() const noexcept { return entities_.size(); }
  std::size_t num_relations() const noexcept { return relations_.size(); }

  bool has_entity(EntityId id) const noexcept { return index_.contains(id); }
  bool has_relation(RelationId id) const noexcept {
    return id >= 0 && static_cast<std::size_t>(id) < relations_.size();
  }

  /// Registry position of `id`; throws LookupError when unregistered.
  std::size_t index_of(EntityId id) const;
  const Entity& entity(EntityId id) const;
  const RelationType& relation(RelationId id) const;
  std::optional<RelationId> find_relation(std::string_view label) const;

  /// Item ids in registry order; the recommender's candidate set.
  const std::vector<EntityId>& items() const noexcept { return items_; }

  /// Sorted, duplicate-free tails of triples (e, r, .), or of (e, *, .).
  std::vector<EntityId> neighbors(EntityId e, std::optional<RelationId> r = std::nullopt) const;

  /// Stored triples with tail `e`, as (relation, head) with forward = false.
  std::span<const Edge> in_edges(EntityId e) const;
  /// Stored triples with head `e`, sorted by (relation, tail).
  std::span<const Edge> out_edges(EntityId e) const;

  friend bool operator==(const KnowledgeGraph& a, const KnowledgeGraph& b) {
    return a.entities_ == b.entities_ && a.relations_ == b.relations_ && a.triples_ == b.triples_;
  }

private:
  std::vector<Entity> entities_;
  std::vector<RelationType> relations_;
  std::vector<Triple> triples_;
  std::vector<EntityId> items_;
  std::unordered_map<EntityId, std::size_t> index_;
  std::unordered_map<std::string, RelationId> relation_index_;
  // Per registry position.
  std::vector<std::vector<Edge>> out_;
  std::vector<std::vector<Edge>> in_;
  // Folded attribute/concept names and aliases -> lowest entity id.
  std::unordered_map<std::string, EntityId> lexicon_;
  std::vector<std::size_t> lexicon_lengths_;  // distinct, descending

  friend LinkResult link_mentions(std::string_view text, const KnowledgeGraph& g);
};

// ---------------------------------------------------------------------------
// Serialization

/// Entities: one JSON object per line. Triples: `head<TAB>label<TAB>tail`,
/// `#` comments. Relation ids are assigned in order of first appearance.
KnowledgeGraph load_graph(std::istream& triples, std::istream& entities,
                          std::string_view triples_name = "<triples>",
                          std::string_view entities_name = "<entities>");
KnowledgeGraph load_graph(const std::filesystem::path& triples_path,
                          const std::filesystem::path& entities_path);

/// Triples are written grouped by relation id so that reloading assigns the
/// same relation ids.
void write_triples(const KnowledgeGraph& g, std::ostream& out);
void write_entities(const KnowledgeGraph& g, std::ostream& out);
void save_graph(const KnowledgeGraph& g, const std::filesystem::path& triples_path,
                const std::filesystem::path& entities_path);

// ---------------------------------------------------------------------------
// Mention linking

/// Links `@<id>` item placeholders and longest-match, case-insensitive,
/// word-bounded attribute/concept names and aliases. Equal-length matches go
/// to the lowest entity id. Mentions are non-overlapping and ordered by start.
LinkResult link_mentions(std::string_view text, const KnowledgeGraph& g);

/// Placeholder-only linking used when no graph is available: every `@<id>`
/// becomes a mention of `id`.
std::vector<Mention> link_placeholders(std::string_view text);

/// Replaces registered `@<id>` placeholders by the entity name.
std::string resolve_placeholders(std::string_view text, const KnowledgeGraph& g);

// ---------------------------------------------------------------------------
// Fusion

struct FusedGraph {
  KnowledgeGraph graph;
  /// Concept-graph entity `c` has id `c + concept_base` in `graph`.
  EntityId concept_base = 0;
  RelationId aligned_to = 0;
};

using AlignmentPair = std::pair<EntityId, EntityId>;

/// Disjoint union of the two graphs, relations unioned by label, plus one
/// `aligned_to` triple per alignment pair in each direction.
FusedGraph merge_graphs(const KnowledgeGraph& item_graph, const KnowledgeGraph& concept_graph,
                        std::span<const AlignmentPair> alignment);

std::vector<AlignmentPair> load_alignment(std::istream& in, std::string_view name = "<alignment>");
std::vector<AlignmentPair> load_alignment(const std::filesystem::path& path);

}  // namespace egcr
