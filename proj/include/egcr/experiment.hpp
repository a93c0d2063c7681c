#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "egcr/dialog.hpp"
#include "egcr/engine.hpp"

namespace egcr {

struct MetricsReport {
  std::vector<std::size_t> ks;
  std::vector<double> recall;  // recall[i] belongs to ks[i]
  double bleu = 0.0;
  double dist_2 = 0.0;
  double dist_3 = 0.0;
  std::size_t n_eval_turns = 0;

  /// recall at `k`; throws LookupError when `k` was not evaluated.
  double recall_at(std::size_t k) const;
  /// Bounds and recall monotonicity.
  void validate() const;
};

/// Keys recall_<k> (one per k), bleu, dist_2, dist_3, n_eval_turns.
nlohmann::json to_json(const MetricsReport& report);

/// A row of the published comparison table, in percent. NaN marks an empty cell.
struct ReferenceRow {
  std::string_view model;
  double r1, r10, r50, bleu, dist_2, dist_3;
};

/// Published ReDial results, for orientation only: they need full-scale
/// training and are not reproduced here.
const std::vector<ReferenceRow>& reference_results();

/// Fixed-width table (values x100) with the reference rows followed by
/// `label`. Recall columns other than 1/10/50 are appended.
std::string render_report_table(const MetricsReport& report, std::string_view label = "this run");

struct ExperimentConfig {
  std::filesystem::path dialogs;
  std::filesystem::path model_dir;
  std::vector<std::size_t> ks{1, 10, 50};
  /// JSON report path; the table goes next to it with a .txt extension.
  std::optional<std::filesystem::path> report;
  /// Explanations via this client; null means the deterministic fallback.
  std::shared_ptr<const CompletionClient> client;
};

/// Replays every dialog up to each gold turn, ranks, and scores the agent's
/// utterance (response text plus explanation) against the gold turn's text.
MetricsReport evaluate(const Engine& engine, const std::vector<Dialog>& dialogs, std::vector<std::size_t> ks);

/// Loads the model and dialogs, evaluates, writes the report files.
MetricsReport run_experiment(const ExperimentConfig& cfg);

/// Parses "1,10,50".
std::vector<std::size_t> parse_ks(std::string_view text);

}  // namespace egcr
