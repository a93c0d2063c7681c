#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "egcr/recommender.hpp"

namespace egcr {

using Tokens = std::vector<std::string>;

/// Lowercase, split ASCII punctuation into separate tokens, split on whitespace.
Tokens tokenize(std::string_view text);

/// 1 iff `gold` is among the first min(k, |ranked|) entries.
int recall_at_k(const Recommendation& ranked, EntityId gold, std::size_t k);

/// Mean of per-turn hits; 0 for an empty list.
double corpus_recall(const std::vector<int>& hits);

/// Distinct n-grams over total n-grams, pooled over the corpus; 0 when the
/// corpus has no n-grams.
double distinct_n(const std::vector<Tokens>& utterances, std::size_t n);

/// Corpus BLEU-4: pooled clipped n-gram precisions, uniform weights, brevity
/// penalty exp(1 - r/c) when c < r; 0 when any pooled precision is 0. An
/// order for which the candidates contain no n-grams contributes precision 1.
double bleu(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references);

}  // namespace egcr
