#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "uiscout/core.hpp"
#include "uiscout/llm_selector.hpp"
#include "uiscout/parser.hpp"
#include "uiscout/sim_env.hpp"
#include "uiscout/util.hpp"

namespace uiscout {

enum class StrategyId { random_walk_ocr, random_walk_parser, frontier_auto, llm_selector };
std::string to_string(StrategyId s);
StrategyId strategy_from_string(const std::string& s);
inline constexpr StrategyId kAllStrategies[] = {StrategyId::random_walk_ocr, StrategyId::random_walk_parser,
                                                StrategyId::frontier_auto, StrategyId::llm_selector};

// name: an element name is explored once per action kind, globally.
// state_name: once per (discovering state, name, kind).
enum class DedupMode { name, state_name };
std::string to_string(DedupMode m);
DedupMode dedup_mode_from_string(const std::string& s);

// ---------------------------------------------------------------- diff & critic

struct ElementDiff {
  std::set<std::string> added;
  std::set<std::string> removed;
};

// Name-set difference between two parses.
ElementDiff diff_elements(const ScreenParse& pre, const ScreenParse& post);

struct CriticConfig {
  std::vector<std::string> error_lexicon{"error", "warning"};
};

struct StepFlags {
  bool target_missing = false;
  bool noop = false;
  bool env_is_error = false;
};

enum class VerdictKind { proceed, no_new_elements, no_change, error_state };
std::string to_string(VerdictKind v);

struct Verdict {
  VerdictKind kind = VerdictKind::proceed;
  std::string reason;
  bool terminates() const { return kind != VerdictKind::proceed; }
};

// Precedence: error state, then no change, then no new elements.
Verdict critic_evaluate(const ScreenParse& pre, const ScreenParse& post, const ElementDiff& diff,
                        const StepFlags& flags, const CriticConfig& config = {});

// ---------------------------------------------------------------- frontier

struct FrontierEntry {
  std::string element_name;
  StateFingerprint discovered_in;
  std::vector<Action> prefix;
  ActionKind action_kind = ActionKind::click;
};

class Frontier {
 public:
  explicit Frontier(DedupMode mode = DedupMode::name) : mode_(mode) {}

  std::string key(const std::string& name, const StateFingerprint& state, ActionKind kind) const;

  // Adds an entry unless its key was offered before. Returns true if added.
  bool offer(FrontierEntry entry);

  // Uniformly pops one entry whose key is not in `actuated`; entries that
  // became ineligible are dropped. nullopt when nothing is left.
  std::optional<FrontierEntry> pop(Rng& rng, const std::set<std::string>& actuated);

  std::size_t size() const { return entries_.size(); }
  DedupMode mode() const { return mode_; }

 private:
  DedupMode mode_;
  std::vector<FrontierEntry> entries_;
  std::set<std::string> offered_;
};

// ---------------------------------------------------------------- perception

// Icon detections by screenshot content hash; shareable across runs that
// use the same templates and parser config.
class IconCache {
 public:
  std::optional<std::vector<UIElement>> find(const std::string& content_hash) const;
  void store(const std::string& content_hash, std::vector<UIElement> icons);

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::vector<UIElement>> icons_;
};

struct PerceptionConfig {
  ParserConfig parser;
  // Text omission rate for the OCR-only perception of random_walk_ocr.
  double ocr_dropout = 0.5;
  // Text omission rate when the full GUI parser is used.
  double text_dropout = 0.0;
};

// Observation -> ScreenParse for one strategy. The OCR-only view skips
// templates; every other strategy uses templates plus the text adapter.
class Perception {
 public:
  Perception(const EnvDefinition& env, StrategyId strategy, const PerceptionConfig& config, std::uint64_t seed,
             std::shared_ptr<IconCache> cache = nullptr);
  ScreenParse perceive(const Observation& obs);

 private:
  const EnvDefinition& env_;
  bool use_templates_;
  double dropout_;
  std::uint64_t seed_;
  ParserConfig parser_;
  std::shared_ptr<IconCache> cache_;
};

// ---------------------------------------------------------------- recording

class RecorderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RunRecorder {
 public:
  virtual ~RunRecorder() = default;
  virtual void record(const ScreenParse& parse, const RgbImage& screenshot) = 0;
};

// ---------------------------------------------------------------- run

struct ExplorerConfig {
  StrategyId strategy = StrategyId::frontier_auto;
  std::int64_t budget = 500;
  std::uint64_t seed = 0;
  DedupMode dedup = DedupMode::name;
  CriticConfig critic;
  PerceptionConfig perception;
  std::vector<ActionKind> action_kinds{ActionKind::click};
  int drag_dx = 8;
  int drag_dy = 0;
  int scroll_ticks = 1;
};

// One line of the run log. `verdict` is the critic verdict, or "replay" for
// prefix-replay steps (not judged).
struct StepRecord {
  std::size_t trajectory_idx = 0;
  std::size_t step_idx = 0;
  TrajectoryStep step;
  std::string verdict;
};

struct DiscardRecord {
  std::string element_name;
  std::string reason;
};

struct FallbackRecord {
  std::int64_t step = 0;
  std::string status;
  std::string detail;
};

struct ExplorationRun {
  std::string env_id;
  std::string strategy_id;
  std::uint64_t seed = 0;
  std::int64_t budget = 0;
  std::string rng_algorithm{Rng::kAlgorithm};
  std::string dedup_mode;
  std::vector<StepRecord> log;
  std::vector<Trajectory> trajectories;
  std::map<std::string, std::int64_t> actuated_names;  // multiset as counts
  std::set<StateFingerprint> visited;
  StateFingerprint initial_fingerprint;
  std::set<std::string> visited_state_ids;  // from oracle truth
  std::set<std::string> observed_names;
  std::vector<ErrorRecord> error_records;
  std::vector<DiscardRecord> discards;
  std::vector<FallbackRecord> fallbacks;
  std::int64_t steps_used = 0;
  bool completed = false;  // exploration_complete reached before the budget
  bool aborted = false;
  std::string abort_reason;
};

struct SelectionHistory {
  const std::set<std::string>* actuated_keys = nullptr;
  const std::set<std::string>* trajectory_new = nullptr;  // cumulative added names
  bool in_trajectory = false;
  std::vector<std::string> explored_names;  // for the remote selector
};

struct Selection {
  enum class Kind { act, start_entry, end_trajectory, exploration_complete } kind = Kind::act;
  Action action;
  std::optional<FrontierEntry> entry;
  std::optional<FallbackRecord> fallback;
};

Selection select_next(StrategyId strategy, const ScreenParse& current, Frontier* frontier,
                      const SelectionHistory& history, Rng& rng, const ExplorerConfig& config,
                      const ElementSelector* remote = nullptr, const std::string& category_hint = {});

struct ReplayResult {
  Observation observation;
  ScreenParse parse;
  bool stale = false;
  std::string stale_reason;
  std::vector<std::pair<Observation, ScreenParse>> steps;
};

// Steps the prefix on a freshly reset env. Stale when a step turns out to
// be a no-op or the target element is absent at the end.
ReplayResult replay_prefix(Environment& env, Perception& perception, const std::vector<Action>& prefix,
                           const std::string& expect_element = {});

struct RunServices {
  RunRecorder* recorder = nullptr;
  const ElementSelector* remote = nullptr;
  std::shared_ptr<IconCache> icons;
};

ExplorationRun run_exploration(Environment& env, const ExplorerConfig& config, const RunServices& services = {});

// JSON-lines log: one object per step, then {"summary": {...}}.
std::string run_log_jsonl(const ExplorationRun& run);
ExplorationRun parse_run_log(const std::string& jsonl);

Action make_action(ActionKind kind, const std::string& name, const ExplorerConfig& config);

}  // namespace uiscout
