#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "egcr/dialog.hpp"
#include "egcr/kg_store.hpp"
#include "egcr/review_enricher.hpp"

namespace egcr {

/// Shape of a planted corpus. Items 1..items are movies; the first
/// 2 * attributes of them form pairs that share one attribute no other item
/// has. The remaining items are distractors wired to each other.
struct PlantedSpec {
  std::size_t items = 50;
  std::size_t attributes = 10;
  std::size_t dialogs = 200;
  /// Fraction of dialogs written to the training split.
  double train_fraction = 0.8;
  std::size_t reviews_per_item = 3;
  std::uint64_t seed = 7;

  void validate() const;
};

struct PlantedCorpus {
  KnowledgeGraph graph;
  std::vector<Review> reviews;
  std::vector<Dialog> train;
  std::vector<Dialog> test;
  /// partner[i] is the planted gold for a mention of i (0 for distractors).
  std::vector<EntityId> partner;
};

/// Deterministic in `spec.seed`. Every dialog mentions one paired item in a
/// seeker turn and labels its partner as the gold recommendation.
PlantedCorpus make_planted_corpus(const PlantedSpec& spec);

/// Writes triples.tsv, entities.jsonl, reviews.jsonl, train.jsonl and
/// test.jsonl into `dir`.
void write_planted_corpus(const PlantedCorpus& corpus, const std::filesystem::path& dir);

}  // namespace egcr
