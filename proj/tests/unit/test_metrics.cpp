#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "egcr/error.hpp"
#include "egcr/metrics.hpp"
#include "oracles.hpp"

using namespace egcr;
using egcr::testing::naive_bleu;
using egcr::testing::naive_distinct;

namespace {

Tokens words(const std::string& s) { return tokenize(s); }

Recommendation ranked(std::vector<EntityId> ids) {
  Recommendation r;
  double score = static_cast<double>(ids.size());
  for (auto id : ids) r.ranked.push_back({id, score--});
  return r;
}

std::vector<Tokens> random_corpus(std::mt19937_64& rng, std::size_t n, std::size_t vocab, std::size_t max_len) {
  std::vector<Tokens> out(n);
  for (auto& u : out) {
    const std::size_t len = rng() % (max_len + 1);
    for (std::size_t i = 0; i < len; ++i) u.push_back("w" + std::to_string(rng() % vocab));
  }
  return out;
}

}  // namespace

TEST_CASE("tokenize") {
  CHECK(tokenize("Hello, World!") == Tokens{"hello", ",", "world", "!"});
  CHECK(tokenize("  ") == Tokens{});
  CHECK(tokenize("I'd like @12.") == Tokens{"i", "'", "d", "like", "@", "12", "."});
}

TEST_CASE("recall_at_k") {
  CHECK(recall_at_k(ranked({4, 2, 9}), 4, 1) == 1);
  CHECK(recall_at_k(ranked({4, 2, 9}), 7, 50) == 0);
  CHECK(recall_at_k(ranked({4, 2, 9}), 9, 2) == 0);
  CHECK(recall_at_k(ranked({4, 2, 9}), 9, 10) == 1);
  CHECK(corpus_recall({recall_at_k(ranked({1}), 1, 10), recall_at_k(ranked({1}), 2, 10)}) == 0.5);
  CHECK(corpus_recall({}) == 0.0);
  CHECK_THROWS_AS(recall_at_k(ranked({1}), 1, 0), ContractViolation);
}

TEST_CASE("recall_at_k agrees with a membership scan and is monotone in k") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<EntityId> ids(1 + rng() % 30);
    std::iota(ids.begin(), ids.end(), 1);
    std::shuffle(ids.begin(), ids.end(), rng);
    auto r = ranked(ids);
    const EntityId gold = static_cast<EntityId>(rng() % 40);
    int previous = 0;
    for (std::size_t k = 1; k <= 60; ++k) {
      const auto end = ids.begin() + static_cast<long>(std::min(k, ids.size()));
      const int expected = std::find(ids.begin(), end, gold) != end ? 1 : 0;
      const int got = recall_at_k(r, gold, k);
      CHECK(got == expected);
      CHECK(got >= previous);
      previous = got;
    }
  }
}

TEST_CASE("distinct_n") {
  CHECK(distinct_n({words("a b a b")}, 2) == 2.0 / 3.0);
  CHECK(distinct_n({words("a b c"), words("d e f")}, 2) == 1.0);
  CHECK(distinct_n({words("a"), words("b")}, 2) == 0.0);
  CHECK(distinct_n({}, 3) == 0.0);
  CHECK_THROWS_AS(distinct_n({words("a")}, 0), ContractViolation);
}

TEST_CASE("distinct_n drops when a present utterance is repeated") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    auto corpus = random_corpus(rng, 1 + rng() % 6, 5, 6);
    for (std::size_t n : {1u, 2u, 3u}) {
      CHECK(distinct_n(corpus, n) == naive_distinct(corpus, n));
      const auto& pick = corpus[rng() % corpus.size()];
      if (pick.size() < n) continue;
      auto more = corpus;
      more.push_back(pick);
      CHECK(distinct_n(more, n) < distinct_n(corpus, n));
    }
  }
}

TEST_CASE("bleu examples") {
  CHECK(bleu({words("the cat sat on the mat")}, {words("the cat sat on the mat")}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(bleu({words("a b c d")}, {words("e f g h")}) == 0.0);
  CHECK(std::abs(bleu({words("the cat sat")}, {words("the cat sat down")}) - std::exp(-1.0 / 3.0)) <= 1e-6);
  CHECK(std::abs(std::exp(-1.0 / 3.0) - 0.7165) < 1e-4);
  // Clipping: "the the the the" against "the cat" matches one "the".
  CHECK(bleu({words("the the the the")}, {words("the cat")}) == 0.0);
  CHECK_THROWS_AS(bleu({words("a")}, {}), ContractViolation);
  CHECK_THROWS_AS(bleu({}, {}), ContractViolation);
}

TEST_CASE("bleu agrees with direct counting, is bounded and order-free") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 5;
    auto cand = random_corpus(rng, n, 4, 9);
    auto ref = random_corpus(rng, n, 4, 9);
    const double b = bleu(cand, ref);
    CHECK(std::abs(b - naive_bleu(cand, ref)) <= 1e-12);
    CHECK(b >= 0.0);
    CHECK(b <= 1.0);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Tokens> pc, pr;
    for (auto p : perm) {
      pc.push_back(cand[p]);
      pr.push_back(ref[p]);
    }
    CHECK(std::abs(bleu(pc, pr) - b) <= 1e-12);
    bool long_enough = std::all_of(cand.begin(), cand.end(), [](const Tokens& t) { return t.size() >= 4; });
    if (long_enough) CHECK(bleu(cand, cand) == doctest::Approx(1.0).epsilon(1e-12));
  }
}
