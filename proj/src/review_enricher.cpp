#include "egcr/review_enricher.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "egcr/detail/text.hpp"
#include "egcr/error.hpp"

namespace egcr {

using nlohmann::json;

ReviewSet select_reviews(std::vector<Review> raw, std::size_t k_max) {
  if (k_max == 0) throw ContractViolation("k_max must be positive");
  ReviewSet out;
  if (raw.empty()) return out;
  out.item = raw.front().item;
  for (const auto& r : raw) {
    if (r.item != *out.item) {
      throw IntegrityError("review " + r.review_id + " belongs to item " + std::to_string(r.item) +
                           ", expected " + std::to_string(*out.item));
    }
    if (r.helpful < 0) throw IntegrityError("review " + r.review_id + " has negative helpful score");
    if (r.text.empty()) throw IntegrityError("review " + r.review_id + " has empty text");
  }
  auto order = [](const Review& a, const Review& b) {
    if (a.helpful != b.helpful) return a.helpful > b.helpful;
    if (a.review_id != b.review_id) return a.review_id < b.review_id;
    return a.text < b.text;
  };
  const auto keep = std::min(k_max, raw.size());
  std::partial_sort(raw.begin(), raw.begin() + static_cast<std::ptrdiff_t>(keep), raw.end(), order);
  raw.resize(keep);
  out.reviews = std::move(raw);
  return out;
}

PooledReviews embed_reviews(const ReviewSet& rs, const TextEncoder& enc) {
  PooledReviews out{Eigen::VectorXd::Zero(enc.width()), rs.empty()};
  for (const auto& r : rs.reviews) {
    Eigen::VectorXd v;
    try {
      v = enc.encode(detail::truncate_tokens(r.text, kReviewTokenCap));
    } catch (const std::exception& e) {
      throw Error("encoding review " + r.review_id + " failed: " + e.what());
    }
    if (v.size() != enc.width()) throw DimensionError("encoder returned a vector of the wrong width for review " + r.review_id);
    out.vector += v;
  }
  if (!rs.empty()) out.vector /= static_cast<double>(rs.reviews.size());
  return out;
}

Eigen::VectorXd enrich_entity(const Eigen::VectorXd& entity, const PooledReviews& review, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  if (review.empty) return entity;
  if (entity.size() != review.vector.size()) {
    throw DimensionError("entity width " + std::to_string(entity.size()) + " != review width " +
                         std::to_string(review.vector.size()));
  }
  return alpha * entity + (1.0 - alpha) * review.vector;
}

ReviewIndex index_reviews(const std::vector<Review>& reviews, std::size_t k_max) {
  std::map<EntityId, std::vector<Review>> grouped;
  for (const auto& r : reviews) grouped[r.item].push_back(r);
  ReviewIndex out;
  for (auto& [item, list] : grouped) out.emplace(item, select_reviews(std::move(list), k_max));
  return out;
}

EntityTable enrich_table(const EntityTable& table, const KnowledgeGraph& g, const ReviewIndex& reviews,
                         const TextEncoder& enc, const Projection& proj, double alpha) {
  EntityTable out = table;
  for (const auto& [item, rs] : reviews) {
    if (!g.has_entity(item) || g.entity(item).kind != EntityKind::item || !out.contains(item)) continue;
    auto pooled = embed_reviews(rs, enc);
    if (!pooled.empty) pooled.vector = proj(pooled.vector);
    Eigen::VectorXd row = out.row(item).transpose();
    out.row(item) = enrich_entity(row, pooled, alpha).transpose();
  }
  return out;
}

std::vector<Review> load_reviews(std::istream& in, std::string_view name) {
  std::vector<Review> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    try {
      auto record = json::parse(line);
      Review r;
      r.item = record.at("item_id").get<EntityId>();
      r.review_id = record.at("review_id").get<std::string>();
      r.text = record.at("text").get<std::string>();
      r.helpful = record.at("helpful").get<int>();
      if (r.text.empty()) throw ParseError(std::string(name), line_no, "empty review text");
      if (r.helpful < 0) throw ParseError(std::string(name), line_no, "negative helpful score");
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw ParseError(std::string(name), line_no, e.what());
    }
  }
  return out;
}

std::vector<Review> load_reviews(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return load_reviews(in, path.string());
}

void write_reviews(const std::vector<Review>& reviews, std::ostream& out) {
  for (const auto& r : reviews) {
    out << json{{"item_id", r.item}, {"review_id", r.review_id}, {"text", r.text}, {"helpful", r.helpful}}.dump()
        << '\n';
  }
}

}  // namespace egcr
