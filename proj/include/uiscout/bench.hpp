#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "uiscout/dataset.hpp"
#include "uiscout/explorer.hpp"
#include "uiscout/sim_env.hpp"

namespace uiscout {

struct Metrics {
  std::int64_t unique_actions = 0;
  std::int64_t unique_states = 0;
  double element_coverage = 0.0;
  double state_coverage = 0.0;
  std::int64_t error_states_found = 0;
  std::int64_t steps_used = 0;

  friend bool operator==(const Metrics&, const Metrics&) = default;
};
void to_json(json& j, const Metrics& m);

// Throws std::invalid_argument when run and oracle come from different envs.
Metrics compute_metrics(const ExplorationRun& run, const OracleSummary& oracle);

// ---------------------------------------------------------------- grounding

struct Accuracy {
  std::int64_t correct = 0;
  std::int64_t total = 0;
  double value() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
};

struct GroundingEvalResult {
  std::map<std::string, Accuracy> per_type;
  std::map<std::string, Accuracy> per_kind;
  Accuracy overall;
};
void to_json(json& j, const GroundingEvalResult& r);

struct Prediction {
  std::string sample_id;
  std::string query_id;
  BBox bbox;
};

class PredictionParseError : public std::runtime_error {
 public:
  PredictionParseError(std::size_t line, const std::string& what)
      : std::runtime_error("predictions line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

std::vector<Prediction> parse_predictions(const std::string& jsonl);

// Queries without a prediction count as incorrect. Predictions for unknown
// queries, or two predictions for one query, are errors.
GroundingEvalResult evaluate_grounding(const std::vector<Prediction>& predictions,
                                       const std::vector<InstructionSample>& truth);
GroundingEvalResult evaluate_grounding(const std::filesystem::path& predictions_file,
                                       const std::filesystem::path& instructions_file);

// ---------------------------------------------------------------- matrix

// Spearman rank correlation with average ranks for ties; nullopt when either
// side has no variance or fewer than two points.
std::optional<double> spearman(const std::vector<double>& a, const std::vector<double>& b);

struct BenchCell {
  std::string env_id;
  std::string strategy;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  Metrics metrics;
};

struct StrategyAggregate {
  std::string strategy;
  std::int64_t cells = 0;  // successful cells
  double mean_unique_actions = 0;
  double mean_unique_states = 0;
  double mean_element_coverage = 0;
  double mean_state_coverage = 0;
  double mean_error_states = 0;
};

struct BenchReport {
  std::int64_t budget = 0;
  std::vector<std::string> envs;
  std::vector<std::string> strategies;
  std::vector<std::uint64_t> seeds;
  std::vector<BenchCell> cells;  // env-major, then strategy, then seed
  std::vector<StrategyAggregate> aggregates;
  // "<a>/<b>" -> mean unique_actions(a) / mean unique_actions(b)
  std::map<std::string, double> unique_action_ratios;
  std::optional<double> spearman_unique_vs_coverage;

  std::int64_t failed_cells() const;
  const StrategyAggregate* aggregate(const std::string& strategy) const;
};
void to_json(json& j, const BenchReport& r);
std::string render_report_table(const BenchReport& r);

// Fills aggregates, ratios and the correlation from the cells.
void aggregate_report(BenchReport& r);

struct BenchConfig {
  std::vector<std::filesystem::path> envs;
  std::vector<StrategyId> strategies{std::begin(kAllStrategies), std::end(kAllStrategies)};
  std::vector<std::uint64_t> seeds{0};
  std::int64_t budget = 500;
  int jobs = 1;
  ExplorerConfig base;  // strategy, seed and budget are overridden per cell
  const ElementSelector* remote = nullptr;
  // When set, each cell's run log is written to <dir>/<env>__<strategy>__<seed>.jsonl.
  std::optional<std::filesystem::path> run_log_dir;
};

BenchReport compare_strategies(const BenchConfig& config);

}  // namespace uiscout
