#include "egcr/metrics.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "egcr/error.hpp"

namespace egcr {

Tokens tokenize(std::string_view text) {
  Tokens out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  };
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isspace(u)) {
      flush();
    } else if (u < 0x80 && std::ispunct(u)) {
      flush();
      out.emplace_back(1, c);
    } else {
      current += static_cast<char>(u < 0x80 ? std::tolower(u) : u);
    }
  }
  flush();
  return out;
}

int recall_at_k(const Recommendation& ranked, EntityId gold, std::size_t k) {
  if (k == 0) throw ContractViolation("k must be >= 1");
  const auto limit = std::min(k, ranked.ranked.size());
  for (std::size_t i = 0; i < limit; ++i) {
    if (ranked.ranked[i].entity == gold) return 1;
  }
  return 0;
}

double corpus_recall(const std::vector<int>& hits) {
  if (hits.empty()) return 0.0;
  long total = 0;
  for (int h : hits) total += h;
  return static_cast<double>(total) / static_cast<double>(hits.size());
}

namespace {

std::string ngram_key(const Tokens& tokens, std::size_t start, std::size_t n) {
  std::string key;
  for (std::size_t i = start; i < start + n; ++i) {
    if (i > start) key += '\x1f';
    key += tokens[i];
  }
  return key;
}

std::unordered_map<std::string, int> ngram_counts(const Tokens& tokens, std::size_t n) {
  std::unordered_map<std::string, int> counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) ++counts[ngram_key(tokens, i, n)];
  return counts;
}

}  // namespace

double distinct_n(const std::vector<Tokens>& utterances, std::size_t n) {
  if (n == 0) throw ContractViolation("n must be >= 1");
  std::unordered_set<std::string> distinct;
  std::size_t total = 0;
  for (const auto& tokens : utterances) {
    if (tokens.size() < n) continue;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
      distinct.insert(ngram_key(tokens, i, n));
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(distinct.size()) / static_cast<double>(total);
}

double bleu(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references) {
  if (candidates.size() != references.size() || candidates.empty()) {
    throw ContractViolation("bleu needs equally many candidates and references (at least one)");
  }
  constexpr std::size_t kOrder = 4;
  std::array<double, kOrder> matched{};
  std::array<double, kOrder> total{};
  double c = 0.0;
  double r = 0.0;
  for (std::size_t s = 0; s < candidates.size(); ++s) {
    const auto& cand = candidates[s];
    const auto& ref = references[s];
    c += static_cast<double>(cand.size());
    r += static_cast<double>(ref.size());
    for (std::size_t n = 1; n <= kOrder; ++n) {
      const auto ref_counts = ngram_counts(ref, n);
      for (const auto& [gram, count] : ngram_counts(cand, n)) {
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) matched[n - 1] += std::min(count, it->second);
        total[n - 1] += count;
      }
    }
  }
  if (c == 0.0) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 0; n < kOrder; ++n) {
    // An order with no candidate n-grams at all has precision 0/0, taken as 1.
    if (total[n] == 0.0) continue;
    if (matched[n] == 0.0) return 0.0;
    log_sum += 0.25 * std::log(matched[n] / total[n]);
  }
  const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
  return bp * std::exp(log_sum);
}

}  // namespace egcr
