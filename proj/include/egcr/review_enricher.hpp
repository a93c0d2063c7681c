#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "egcr/conversation_encoder.hpp"
#include "egcr/graph_encoder.hpp"
#include "egcr/kg_store.hpp"

namespace egcr {

struct Review {
  EntityId item = 0;
  std::string review_id;
  std::string text;
  int helpful = 0;

  friend bool operator==(const Review&, const Review&) = default;
};

/// Reviews of one item ordered by (helpful desc, review_id asc).
struct ReviewSet {
  std::optional<EntityId> item;  // empty for an empty set
  std::vector<Review> reviews;

  bool empty() const noexcept { return reviews.empty(); }
};

inline constexpr std::size_t kDefaultReviewsPerItem = 30;
inline constexpr std::size_t kReviewTokenCap = 512;

ReviewSet select_reviews(std::vector<Review> raw, std::size_t k_max = kDefaultReviewsPerItem);

/// Mean review vector; `empty` marks a set with no reviews (vector is zero).
struct PooledReviews {
  Eigen::VectorXd vector;
  bool empty = true;
};

/// Mean of `enc` over the reviews, each truncated to its first 512
/// whitespace tokens. Encoder failures are rethrown naming the review.
PooledReviews embed_reviews(const ReviewSet& rs, const TextEncoder& enc);

/// alpha * entity + (1 - alpha) * review; identity on `entity` when the
/// review vector is empty.
Eigen::VectorXd enrich_entity(const Eigen::VectorXd& entity, const PooledReviews& review, double alpha = 0.5);

using ReviewIndex = std::map<EntityId, ReviewSet>;

/// Groups by item and keeps the top `k_max` of each.
ReviewIndex index_reviews(const std::vector<Review>& reviews, std::size_t k_max = kDefaultReviewsPerItem);

/// Fuses pooled, projected review vectors into the item rows of `table`.
EntityTable enrich_table(const EntityTable& table, const KnowledgeGraph& g, const ReviewIndex& reviews,
                         const TextEncoder& enc, const Projection& proj, double alpha = 0.5);

/// One JSON object per line: {"item_id", "review_id", "text", "helpful"}.
std::vector<Review> load_reviews(std::istream& in, std::string_view name = "<reviews>");
std::vector<Review> load_reviews(const std::filesystem::path& path);
void write_reviews(const std::vector<Review>& reviews, std::ostream& out);

}  // namespace egcr
