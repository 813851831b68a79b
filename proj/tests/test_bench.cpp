#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <random>

#include "support.hpp"
#include "uiscout/bench.hpp"

using namespace uiscout;

namespace {

namespace fs = std::filesystem;

InstructionSample query(const std::string& id, const std::string& sample, BBox gt,
                        QueryType type = QueryType::name, ElementKind kind = ElementKind::icon) {
  InstructionSample s;
  s.query_id = id;
  s.sample_id = sample;
  s.query_type = type;
  s.query = "Find \"" + id + "\"";
  s.gt_bbox = gt;
  s.element_name = id;
  s.element_kind = kind;
  return s;
}

// Pearson correlation of the ranks, with ranks assigned by counting.
double rank_oracle(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<double> r;
    for (double x : v) {
      double less = 0, equal = 0;
      for (double y : v) {
        less += y < x;
        equal += y == x;
      }
      r.push_back(less + (equal + 1) / 2.0);
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  double sa = 0, sb = 0, sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sa += ra[i];
    sb += rb[i];
    sab += ra[i] * rb[i];
    saa += ra[i] * ra[i];
    sbb += rb[i] * rb[i];
  }
  return (n * sab - sa * sb) / std::sqrt((n * saa - sa * sa) * (n * sbb - sb * sb));
}

}  // namespace

TEST_CASE("metrics from a hand-built run") {
  OracleSummary o;
  o.env_id = "toy";
  o.reachable_states = {"a", "b", "c", "err"};
  o.error_states = {"err"};
  o.element_names = {"A", "B", "C", "D", "E"};
  ExplorationRun run;
  run.env_id = "toy";
  run.actuated_names = {{"A", 3}, {"B", 1}};
  run.visited = {{"f1"}, {"f2"}, {"f3"}};
  run.visited_state_ids = {"a", "err", "offscript"};
  run.observed_names = {"A", "B", "C", "Z"};
  run.steps_used = 4;
  const Metrics m = compute_metrics(run, o);
  CHECK(m.unique_actions == 2);
  CHECK(m.unique_states == 3);
  CHECK(m.element_coverage == doctest::Approx(0.6));
  CHECK(m.state_coverage == doctest::Approx(0.5));
  CHECK(m.error_states_found == 1);
  CHECK(m.steps_used == 4);
  run.env_id = "other";
  CHECK_THROWS_AS(compute_metrics(run, o), std::invalid_argument);
}

TEST_CASE("spearman against a counting oracle") {
  CHECK(*spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
  CHECK(*spearman({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1.0));
  // Ranks (1, 2.5, 2.5, 4) vs (1, 3, 2, 4): 4.5 / sqrt(4.5 * 5).
  CHECK(*spearman({1, 2, 2, 3}, {1, 3, 2, 4}) == doctest::Approx(4.5 / std::sqrt(22.5)));
  CHECK_FALSE(spearman({1, 1, 1}, {1, 2, 3}).has_value());
  CHECK_FALSE(spearman({1}, {2}).has_value());
  CHECK_THROWS_AS(spearman({1, 2}, {1}), std::invalid_argument);

  std::mt19937_64 g(12);
  for (int round = 0; round < 200; ++round) {
    const std::size_t n = 2 + g() % 12;
    std::vector<double> a, b;
    for (std::size_t i = 0; i < n; ++i) {
      a.push_back(static_cast<double>(g() % 6));  // small range forces ties
      b.push_back(static_cast<double>(g() % 6));
    }
    const auto s = spearman(a, b);
    if (!s) continue;
    CHECK(*s == doctest::Approx(rank_oracle(a, b)).epsilon(1e-9));
    CHECK(*s >= -1.0 - 1e-12);
    CHECK(*s <= 1.0 + 1e-12);
    // Monotone transforms leave it unchanged.
    std::vector<double> a3;
    for (double x : a) a3.push_back(x * x * x + 7);
    CHECK(*spearman(a3, b) == doctest::Approx(*s));
  }
}

TEST_CASE("grounding evaluation") {
  const std::vector<InstructionSample> truth{
      query("q1", "s0", {0, 0, 100, 100}), query("q2", "s0", {0, 0, 100, 100}, QueryType::shape),
      query("q3", "s1", {0, 0, 100, 100}, QueryType::name, ElementKind::text), query("q4", "s1", {5, 5, 10, 10})};
  std::vector<Prediction> preds{{"s0", "q1", {0, 0, 100, 31}},    // iou 0.31
                                {"s0", "q2", {0, 0, 100, 30}},    // iou 0.30, not enough
                                {"s1", "q3", {0, 0, 100, 100}}};  // q4 missing
  const auto r = evaluate_grounding(preds, truth);
  CHECK(r.overall.correct == 2);
  CHECK(r.overall.total == 4);
  CHECK(r.per_type.at("name").correct == 2);
  CHECK(r.per_type.at("name").total == 3);
  CHECK(r.per_type.at("shape").correct == 0);
  CHECK(r.per_kind.at("text").correct == 1);

  std::mt19937_64 g(2);
  for (int i = 0; i < 10; ++i) {
    std::shuffle(preds.begin(), preds.end(), g);
    const auto again = evaluate_grounding(preds, truth);
    CHECK(again.overall.correct == r.overall.correct);
    CHECK(json(again) == json(r));
  }

  auto dup = preds;
  dup.push_back(dup.front());
  CHECK_THROWS_AS(evaluate_grounding(dup, truth), std::invalid_argument);
  CHECK_THROWS_AS(evaluate_grounding({{"s0", "nope", {0, 0, 1, 1}}}, truth), std::invalid_argument);
  CHECK_THROWS_AS(evaluate_grounding({{"s1", "q1", {0, 0, 1, 1}}}, truth), std::invalid_argument);
}

TEST_CASE("prediction parse errors carry the line number") {
  const std::string text =
      "{\"sample_id\":\"s0\",\"query_id\":\"q1\",\"bbox\":{\"x\":0,\"y\":0,\"w\":5,\"h\":5}}\n"
      "\n"
      "{\"sample_id\":\"s0\",\"query_id\":\"q2\"}\n";
  try {
    parse_predictions(text);
    FAIL("expected a parse error");
  } catch (const PredictionParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK(parse_predictions(text.substr(0, text.find('\n') + 1)).size() == 1);
}

TEST_CASE("one-cell report and recomputation from the run log") {
  testing::TempDir dir("bench");
  BenchConfig cfg;
  cfg.envs = {testing::env_file("office_mini")};
  cfg.strategies = {StrategyId::frontier_auto};
  cfg.seeds = {7};
  cfg.budget = 50;
  cfg.run_log_dir = dir.path();
  const BenchReport r = compare_strategies(cfg);
  REQUIRE(r.cells.size() == 1);
  CHECK(r.cells[0].ok);
  CHECK(r.failed_cells() == 0);
  CHECK(r.aggregate("frontier_auto")->cells == 1);
  CHECK_FALSE(r.spearman_unique_vs_coverage.has_value());
  CHECK(render_report_table(r).find("frontier_auto") != std::string::npos);

  const fs::path log = dir.path() / "office_mini__frontier_auto__7.jsonl";
  const std::string text = read_text_file(log);
  const auto run = parse_run_log(text);
  const auto oracle = oracle_enumerate(load_env(testing::env_file("office_mini")));
  CHECK(json(compute_metrics(run, oracle)).dump() == json(r.cells[0].metrics).dump());
  CHECK(run_log_jsonl(run) == text);
}

TEST_CASE("matrix is independent of job count and isolates failures") {
  BenchConfig cfg;
  cfg.envs = {testing::env_file("office_mini"), testing::fixtures() / "missing" / "missing.json"};
  cfg.strategies = {StrategyId::random_walk_parser, StrategyId::frontier_auto};
  cfg.seeds = {0, 1};
  cfg.budget = 40;
  const BenchReport serial = compare_strategies(cfg);
  cfg.jobs = 3;
  const BenchReport parallel = compare_strategies(cfg);
  CHECK(json(serial).dump() == json(parallel).dump());
  CHECK(serial.failed_cells() == 4);
  CHECK(serial.aggregate("frontier_auto")->cells == 2);
  CHECK(serial.unique_action_ratios.count("frontier_auto/random_walk_parser") == 1);
  cfg.seeds.clear();
  CHECK_THROWS_AS(compare_strategies(cfg), std::invalid_argument);
}
