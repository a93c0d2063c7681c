#include "egcr/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "egcr/detail/text.hpp"
#include "egcr/error.hpp"
#include "egcr/metrics.hpp"
#include "egcr/redial.hpp"

namespace egcr {

using nlohmann::json;
namespace fs = std::filesystem;

double MetricsReport::recall_at(std::size_t k) const {
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] == k) return recall[i];
  }
  throw LookupError("recall@" + std::to_string(k) + " was not evaluated");
}

void MetricsReport::validate() const {
  if (ks.size() != recall.size()) throw ContractViolation("recall values do not match k list");
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (!in_unit(recall[i])) throw ContractViolation("recall out of [0, 1]");
    if (i > 0 && ks[i] > ks[i - 1] && recall[i] < recall[i - 1]) {
      throw ContractViolation("recall decreases with k");
    }
  }
  if (!in_unit(bleu) || !in_unit(dist_2) || !in_unit(dist_3)) throw ContractViolation("metric out of [0, 1]");
}

json to_json(const MetricsReport& report) {
  json j = json::object();
  for (std::size_t i = 0; i < report.ks.size(); ++i) j["recall_" + std::to_string(report.ks[i])] = report.recall[i];
  j["bleu"] = report.bleu;
  j["dist_2"] = report.dist_2;
  j["dist_3"] = report.dist_3;
  j["n_eval_turns"] = report.n_eval_turns;
  return j;
}

const std::vector<ReferenceRow>& reference_results() {
  constexpr double none = std::numeric_limits<double>::quiet_NaN();
  // Dist columns of the first rows repeat their recall values in the source.
  static const std::vector<ReferenceRow> rows{
      {"Redial", 2.4, 14.0, 32.0, 21.9, 14.0, 32.0},
      {"KBRD", 3.1, 15.0, 33.6, 22.8, 15.0, 33.6},
      {"KGSF", 3.9, 18.3, 37.8, 18.6, 18.3, 37.8},
      {"CRWalker", 4.0, 18.7, 37.6, 28.0, 19.2, 40.8},
      {"RevCore", 6.1, 23.6, 45.4, none, 42.4, 55.8},
      {"EGCR", 3.8, 17.8, 36.1, none, 19.1, 40.4},
  };
  return rows;
}

namespace {

std::string cell(double percent) {
  if (std::isnan(percent)) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", percent);
  return buf;
}

std::string row(std::string_view name, const std::vector<std::string>& cells) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%-12.*s", static_cast<int>(name.size()), name.data());
  std::string out = buf;
  for (const auto& c : cells) {
    std::snprintf(buf, sizeof buf, " %7s", c.c_str());
    out += buf;
  }
  return out + '\n';
}

double nan_unless(const MetricsReport& r, std::size_t k) {
  auto it = std::find(r.ks.begin(), r.ks.end(), k);
  return it == r.ks.end() ? std::numeric_limits<double>::quiet_NaN()
                          : 100.0 * r.recall[static_cast<std::size_t>(it - r.ks.begin())];
}

}  // namespace

std::string render_report_table(const MetricsReport& report, std::string_view label) {
  std::vector<std::size_t> extra;
  for (auto k : report.ks) {
    if (k != 1 && k != 10 && k != 50) extra.push_back(k);
  }
  std::vector<std::string> header{"R@1", "R@10", "R@50", "BLEU", "Dist2", "Dist3"};
  for (auto k : extra) header.push_back("R@" + std::to_string(k));

  std::string out = row("", header);
  out += std::string(out.size() - 1, '-') + '\n';
  for (const auto& ref : reference_results()) {
    std::vector<std::string> cells{cell(ref.r1), cell(ref.r10), cell(ref.r50),
                                   cell(ref.bleu), cell(ref.dist_2), cell(ref.dist_3)};
    cells.resize(header.size(), "");
    out += row(ref.model, cells);
  }
  out += std::string(out.find('\n'), '-') + '\n';
  std::vector<std::string> cells{cell(nan_unless(report, 1)), cell(nan_unless(report, 10)),
                                 cell(nan_unless(report, 50)), cell(100.0 * report.bleu),
                                 cell(100.0 * report.dist_2),  cell(100.0 * report.dist_3)};
  for (auto k : extra) cells.push_back(cell(nan_unless(report, k)));
  out += row(label, cells);
  out += "(values x100; reference rows are published full-scale results, n_eval_turns = " +
         std::to_string(report.n_eval_turns) + ")\n";
  return out;
}

std::vector<std::size_t> parse_ks(std::string_view text) {
  std::vector<std::size_t> ks;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto comma = text.find(',', start);
    if (comma == std::string_view::npos) comma = text.size();
    const auto piece = detail::trim(text.substr(start, comma - start));
    std::size_t k = 0;
    try {
      std::size_t used = 0;
      const auto value = std::stoll(std::string(piece), &used);
      if (used != piece.size() || value < 1) throw ConfigError("");
      k = static_cast<std::size_t>(value);
    } catch (const std::exception&) {
      throw ConfigError("invalid k '" + std::string(piece) + "' (expected positive integers like 1,10,50)");
    }
    ks.push_back(k);
    start = comma + 1;
  }
  return ks;
}

MetricsReport evaluate(const Engine& engine, const std::vector<Dialog>& dialogs, std::vector<std::size_t> ks) {
  if (ks.empty()) throw ConfigError("no k values");
  for (auto k : ks) {
    if (k == 0) throw ConfigError("k must be >= 1");
  }
  const auto k_max = *std::max_element(ks.begin(), ks.end());
  const auto& g = engine.graph();

  std::vector<std::vector<int>> hits(ks.size());
  std::vector<Tokens> candidates;
  std::vector<Tokens> references;
  for (const auto& d : dialogs) {
    for (const auto& gold : d.gold) {
      const auto history = d.history_before(gold.turn);
      const bool has_seeker = std::any_of(history.turns.begin(), history.turns.end(),
                                          [](const DialogTurn& t) { return t.speaker == Speaker::seeker; });
      if (!has_seeker) continue;
      const auto action = engine.act(history, k_max);
      for (std::size_t i = 0; i < ks.size(); ++i) hits[i].push_back(recall_at_k(action.recommendation, gold.item, ks[i]));
      candidates.push_back(tokenize(action.response_text + " " + action.explanation.text));
      references.push_back(tokenize(resolve_placeholders(d.find_turn(gold.turn)->text, g)));
    }
  }

  MetricsReport report;
  report.ks = std::move(ks);
  for (const auto& h : hits) report.recall.push_back(corpus_recall(h));
  report.n_eval_turns = candidates.size();
  if (!candidates.empty()) report.bleu = bleu(candidates, references);
  report.dist_2 = distinct_n(candidates, 2);
  report.dist_3 = distinct_n(candidates, 3);
  return report;
}

MetricsReport run_experiment(const ExperimentConfig& cfg) {
  if (!fs::exists(cfg.dialogs)) throw ConfigError("dialog file not found: " + cfg.dialogs.string());
  if (!fs::exists(ModelPaths{cfg.model_dir}.config())) {
    throw ConfigError("no model in " + cfg.model_dir.string());
  }
  const Engine engine = Engine::load(cfg.model_dir, cfg.client);
  const auto load = load_redial(cfg.dialogs, &engine.graph());
  auto report = evaluate(engine, load.dialogs, cfg.ks);

  if (cfg.report) {
    if (cfg.report->has_parent_path()) fs::create_directories(cfg.report->parent_path());
    {
      std::ofstream out(*cfg.report);
      if (!out) throw IoError("cannot write " + cfg.report->string());
      out << to_json(report).dump(2) << '\n';
    }
    auto table_path = *cfg.report;
    table_path.replace_extension(".txt");
    std::ofstream out(table_path);
    if (!out) throw IoError("cannot write " + table_path.string());
    out << render_report_table(report);
  }
  return report;
}

}  // namespace egcr
