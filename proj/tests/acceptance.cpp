// End-to-end acceptance checks. One PASS/FAIL line per criterion; exit
// status is nonzero if any criterion fails.
#include <chrono>
#include <cstdio>
#include <functional>
#include <limits>
#include <regex>
#include <sstream>
#include <thread>

#include "support.hpp"
#include "uiscout/bench.hpp"
#include "uiscout/cli.hpp"

using namespace uiscout;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Criterion {
  std::string name;
  std::function<bool(std::ostringstream&)> check;
};

int cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  return run_cli(args, out, err);
}

// ---------------------------------------------------------------- parser

bool parser_round_trip(std::ostringstream& note) {
  const auto t0 = Clock::now();
  std::size_t states = 0, truth_total = 0, recovered = 0, false_detections = 0;
  for (const auto& file : testing::suite_files()) {
    const EnvDefinition def = load_env(file);
    for (const auto& [id, st] : def.states) {
      ++states;
      const auto truth = state_truth(st, def);
      const OracleTextRecognizer text(truth, 0.0, 0);
      const ScreenParse p = parse_screen(render(st, def), def.templates, text, ParserConfig{});
      std::vector<bool> used(p.elements.size(), false);
      for (const auto& t : truth) {
        ++truth_total;
        for (std::size_t i = 0; i < p.elements.size(); ++i) {
          const auto& d = p.elements[i];
          if (!used[i] && d.name == t.name && d.kind == t.kind && iou(d.bbox, t.bbox) >= 0.9) {
            used[i] = true;
            ++recovered;
            break;
          }
        }
      }
      false_detections += static_cast<std::size_t>(std::count(used.begin(), used.end(), false));
    }
  }
  const double secs = seconds_since(t0);
  note << states << " states, " << recovered << "/" << truth_total << " recovered, " << false_detections
       << " false detections, " << secs << " s";
  return recovered == truth_total && false_detections == 0 && secs < 30.0;
}

// ---------------------------------------------------------------- BFS

bool bfs_equivalence(std::ostringstream& note) {
  const json counts = testing::oracle_counts();
  bool ok = true;
  int envs = 0;
  for (const auto& [rel, c] : counts.items()) {
    if (!c.at("globally_unique_names").get<bool>()) continue;
    ++envs;
    const auto t0 = Clock::now();
    auto def = testing::load(testing::fixtures() / rel);
    const OracleSummary oracle = oracle_enumerate(*def);
    Environment env(def);
    ExplorerConfig cfg;
    cfg.budget = std::numeric_limits<std::int64_t>::max();
    const ExplorationRun run = run_exploration(env, cfg);
    std::set<std::string> feasible_names, actuated;
    for (const auto& f : oracle.feasible) feasible_names.insert(f.element_name);
    for (const auto& [n, count] : run.actuated_names) actuated.insert(n);
    const double secs = seconds_since(t0);
    const bool env_ok =
        run.completed && run.visited_state_ids == oracle.reachable_states && actuated == feasible_names && secs < 60.0;
    note << def->env_id << ": states " << run.visited_state_ids.size() << "/" << oracle.reachable_states.size()
         << ", names " << actuated.size() << "/" << feasible_names.size() << ", " << secs << " s; ";
    ok = ok && env_ok;
  }
  return ok && envs >= 3;
}

// ---------------------------------------------------------------- bench

BenchReport suite_report;
double suite_seconds = 0;

bool dominance(std::ostringstream& note) {
  BenchConfig cfg;
  cfg.envs = testing::suite_files();
  cfg.seeds.clear();
  for (std::uint64_t s = 0; s < 10; ++s) cfg.seeds.push_back(s);
  cfg.budget = 500;
  cfg.jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  cfg.base.perception.ocr_dropout = 0.5;
  MockSelectorServer mock;
  SelectorConfig sc;
  sc.endpoint_url = mock.url();
  const LlmSelectorClient client(sc);
  cfg.remote = &client;
  const auto t0 = Clock::now();
  suite_report = compare_strategies(cfg);
  suite_seconds = seconds_since(t0);

  const auto* fa = suite_report.aggregate("frontier_auto");
  const auto* rwp = suite_report.aggregate("random_walk_parser");
  const auto* rwo = suite_report.aggregate("random_walk_ocr");
  if (!fa || !rwp || !rwo || suite_report.failed_cells() > 0) {
    note << "missing aggregates or failed cells";
    return false;
  }
  const double ratio = fa->mean_unique_actions / rwp->mean_unique_actions;
  note << "coverage " << fa->mean_element_coverage << " >= " << rwp->mean_element_coverage << " >= "
       << rwo->mean_element_coverage << "; unique actions " << fa->mean_unique_actions << " vs "
       << rwp->mean_unique_actions << " (x" << ratio << "); " << suite_seconds << " s";
  return fa->mean_element_coverage >= rwp->mean_element_coverage &&
         rwp->mean_element_coverage >= rwo->mean_element_coverage && ratio >= 1.3 && suite_seconds < 300.0;
}

bool correlation(std::ostringstream& note) {
  if (suite_report.aggregates.size() != 4) {
    note << "expected four strategies";
    return false;
  }
  const auto rho = suite_report.spearman_unique_vs_coverage;
  note << "spearman = " << (rho ? std::to_string(*rho) : std::string("n/a"));
  return rho && *rho > 0;
}

// ---------------------------------------------------------------- grounding

bool grounding(std::ostringstream& note) {
  testing::TempDir dir("acc_grounding");
  struct Case {
    BBox gt, pred;
    bool expect;
  };
  std::vector<Case> cases;
  for (int k = 0; k < 3; ++k) {
    const int o = 10 * k;
    const BBox gt{o, o, 100, 100};
    cases.push_back({gt, {o + 300, o + 300, 20, 20}, false});  // 0.0
    cases.push_back({gt, {o, o, 100, 30}, false});             // 0.30
    cases.push_back({gt, {o, o, 100, 31}, true});              // 0.31
    cases.push_back({gt, gt, true});                           // 1.0
  }
  std::vector<InstructionSample> truth;
  std::string preds;
  std::int64_t expected_correct = 0;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    InstructionSample s;
    s.query_id = "q" + std::to_string(i);
    s.sample_id = "s" + std::to_string(i % 2);
    s.query_type = kAllQueryTypes[i % 4];
    s.query = "Find \"x\"";
    s.gt_bbox = cases[i].gt;
    s.element_name = "x";
    truth.push_back(s);
    preds += json{{"sample_id", s.sample_id}, {"query_id", s.query_id}, {"bbox", cases[i].pred}}.dump() + "\n";
    expected_correct += cases[i].expect;
  }
  write_instructions(dir.path() / "instructions.jsonl", truth);
  write_text_file(dir.path() / "preds.jsonl", preds);
  const auto r = evaluate_grounding(dir.path() / "preds.jsonl", dir.path() / "instructions.jsonl");
  // With types cycling every four cases, each type sees one IoU level.
  const bool per_type_ok = r.per_type.at("name").correct == 0 && r.per_type.at("shape").correct == 0 &&
                           r.per_type.at("function").correct == 3 && r.per_type.at("refexpr").correct == 3;
  note << r.overall.correct << "/" << r.overall.total << " correct (expected " << expected_correct << "/12)";
  return r.overall.total == 12 && r.overall.correct == expected_correct && expected_correct == 6 && per_type_ok &&
         r.overall.value() == 0.5;
}

// ---------------------------------------------------------------- critic

bool critic(std::ostringstream& note) {
  bool ok = true;
  for (bool lexicon : {true, false}) {
    Environment env(testing::load(testing::env_file("critic_micro")));
    ExplorerConfig cfg;
    cfg.budget = 1000;
    if (!lexicon) cfg.critic.error_lexicon.clear();  // rely on the env flag alone
    const ExplorationRun run = run_exploration(env, cfg);
    std::size_t error_trajectories = 0;
    bool records_complete = true;
    for (const auto& t : run.trajectories) {
      if (t.termination != Termination::error_state) continue;
      ++error_trajectories;
      records_complete = records_complete && t.error_record && !t.steps.empty() && t.error_record->steps == t.steps &&
                         t.consistent();
    }
    bool refresh_no_change = false;
    for (const auto& r : run.log) {
      refresh_no_change = refresh_no_change || (r.step.action.target_name == "Refresh" && r.verdict == "no_change" &&
                                                r.step.pre == r.step.post);
    }
    const bool delete_first = !run.error_records.empty() &&
                              run.error_records.front().steps.back().action.target_name == "Delete all";
    note << (lexicon ? "lexicon" : "env flag") << ": " << error_trajectories << " error trajectories, refresh "
         << (refresh_no_change ? "no_change" : "?") << ", " << (run.completed ? "complete" : "incomplete") << "; ";
    ok = ok && error_trajectories >= 1 && error_trajectories == run.error_records.size() && records_complete &&
         refresh_no_change && run.completed && delete_first && run.steps_used < cfg.budget;
  }
  return ok;
}

// ---------------------------------------------------------------- determinism

std::map<std::string, std::string> tree_bytes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = read_text_file(e.path());
  }
  return out;
}

testing::TempDir det_dir("acc_det");

bool determinism(std::ostringstream& note) {
  bool ok = true;
  for (const std::string strategy : {"frontier_auto", "random_walk_parser"}) {
    std::vector<std::map<std::string, std::string>> trees;
    for (const char* tag : {"a", "b"}) {
      const fs::path out = det_dir.path() / (strategy + "_" + tag);
      const int code = cli({"explore", "--env", testing::suite_file("ribbon_writer").string(), "--strategy", strategy,
                            "--budget", "500", "--seed", "11", "--out", out.string()});
      if (code != 0) {
        note << strategy << " exited " << code;
        return false;
      }
      trees.push_back(tree_bytes(out));
    }
    std::size_t pngs = 0;
    for (const auto& [k, v] : trees[0]) pngs += k.ends_with(".png");
    const bool same = trees[0] == trees[1] && trees[0].count("run_log.jsonl") && trees[0].count("manifest.json");
    note << strategy << ": " << trees[0].size() << " files (" << pngs << " screenshots) "
         << (same ? "identical" : "DIFFER") << "; ";
    ok = ok && same && pngs > 1;
  }
  return ok;
}

// ---------------------------------------------------------------- instructions

bool instructions(std::ostringstream& note) {
  const fs::path ds = det_dir.path() / "frontier_auto_a";
  if (cli({"gen-instructions", "--dataset", ds.string()}) != 0) {
    note << "gen-instructions failed";
    return false;
  }
  std::map<std::string, const UIElement*> by_key;
  std::map<std::string, const DatasetSample*> by_sample;
  const auto samples = load_samples(ds);
  for (const auto& s : samples) {
    by_sample[s.sample_id] = &s;
    for (const auto& e : s.elements) by_key[s.sample_id + ":" + e.id] = &e;
  }
  const std::regex spatial(
      R"re(^(?:To the right of “(.+?)” and to the left of “(.+?)”|To the right of “(.+?)”|To the left of “(.+?)”)$)re");
  std::map<std::string, std::int64_t> per_type;
  std::size_t bad = 0;
  const auto all = read_instructions(ds / "instructions.jsonl");
  for (const auto& q : all) {
    const std::string type = to_string(q.query_type);
    ++per_type[type];
    const std::string key = q.query_id.substr(0, q.query_id.rfind(':'));
    const auto it = by_key.find(key);
    if (it == by_key.end()) {
      ++bad;
      continue;
    }
    const UIElement& e = *it->second;
    bool text_ok = false;
    if (type == "name") {
      text_ok = q.query == "Find “" + e.name + "”";
    } else if (type == "shape") {
      text_ok = e.meta.shape_desc && q.query == "Find the element which has the following description: " + *e.meta.shape_desc;
    } else if (type == "function") {
      text_ok = e.meta.function_desc &&
                q.query == "Find the element which has the following function: " + *e.meta.function_desc;
    } else {
      const std::string prefix = "Find " + e.name + ". The surrounding information is: ";
      if (q.query.rfind(prefix, 0) == 0) {
        const std::string rest = q.query.substr(prefix.size());
        std::smatch m;
        if (e.meta.neighbors_desc && rest == *e.meta.neighbors_desc) {
          text_ok = true;
        } else if (std::regex_match(rest, m, spatial)) {
          // Quoted neighbours must exist in the same screen on the stated side.
          text_ok = true;
          const auto side_ok = [&](const std::string& name, bool left_of_e) {
            for (const auto& o : by_sample.at(q.sample_id)->elements) {
              if (o.name != name) continue;
              const double dx = o.bbox.center_x() - e.bbox.center_x();
              if (left_of_e ? dx < 0 : dx > 0) return true;
            }
            return false;
          };
          if (m[1].matched) text_ok = side_ok(m[1], true) && side_ok(m[2], false);
          if (m[3].matched) text_ok = side_ok(m[3], true);
          if (m[4].matched) text_ok = side_ok(m[4], false);
        }
      }
    }
    const bool ok = text_ok && q.gt_bbox == e.bbox && q.element_name == e.name && q.element_kind == e.kind;
    bad += !ok;
  }
  note << all.size() << " instructions over " << samples.size() << " samples (";
  for (const auto& [t, n] : per_type) note << t << "=" << n << " ";
  note << "), " << bad << " mismatches";
  return bad == 0 && per_type.size() == 4 && per_type["name"] > 0 && per_type["shape"] > 0 &&
         per_type["function"] > 0 && per_type["refexpr"] > 0;
}

// ---------------------------------------------------------------- llm selector

bool llm_selector(std::ostringstream& note) {
  MockSelectorServer mock;
  SelectorConfig sc;
  sc.endpoint_url = mock.url();
  const LlmSelectorClient client(sc);
  BenchConfig cfg;
  cfg.envs = {testing::suite_file("ribbon_writer")};
  cfg.strategies = {StrategyId::llm_selector};
  cfg.seeds = {3};
  cfg.budget = 500;
  cfg.remote = &client;
  const BenchReport a = compare_strategies(cfg);
  const BenchReport b = compare_strategies(cfg);
  const bool reproducible = json(a).dump() == json(b).dump() && a.failed_cells() == 0 && a.cells.size() == 1 &&
                            a.cells[0].metrics.steps_used == 500;

  // No fallbacks against the healthy mock.
  auto def = testing::load(testing::suite_file("ribbon_writer"));
  ExplorerConfig ec;
  ec.strategy = StrategyId::llm_selector;
  ec.budget = 120;
  RunServices services;
  services.remote = &client;
  Environment healthy_env(def);
  const bool healthy = run_exploration(healthy_env, ec, services).fallbacks.empty();
  note << "cell " << (reproducible ? "reproducible" : "NOT reproducible") << ", healthy fallbacks "
       << (healthy ? "none" : "present") << "; ";

  int dead_port = 0;
  {
    MockSelectorServer gone;
    dead_port = gone.port();
  }
  struct Failure {
    std::string label;
    MockSelectorServer::Responder responder;
    std::string status;
  };
  const std::vector<Failure> failures{
      {"http500", [](const std::string&) { return std::optional<std::string>(); }, "selector_unavailable"},
      {"garbage", [](const std::string&) { return std::optional<std::string>("no idea"); }, "unparseable"},
      {"out_of_range", [](const std::string&) { return std::optional<std::string>("9999"); }, "out_of_range"},
      {"unreachable", nullptr, "selector_unavailable"}};
  bool fallbacks_ok = true;
  for (const auto& f : failures) {
    std::unique_ptr<MockSelectorServer> server;
    SelectorConfig fc;
    fc.max_retries = 1;
    fc.timeout_s = 2;
    if (f.responder) {
      server = std::make_unique<MockSelectorServer>(f.responder);
      fc.endpoint_url = server->url();
    } else {
      fc.endpoint_url = "http://127.0.0.1:" + std::to_string(dead_port) + "/v1/select";
    }
    const LlmSelectorClient failing(fc);
    RunServices fs_services;
    fs_services.remote = &failing;
    Environment env(def);
    const ExplorationRun run = run_exploration(env, ec, fs_services);
    bool statuses = !run.fallbacks.empty();
    for (const auto& fb : run.fallbacks) statuses = statuses && fb.status == f.status;
    const bool ok = !run.aborted && run.steps_used == ec.budget && statuses;
    note << f.label << " " << (ok ? "fell back" : "FAILED") << " (" << run.fallbacks.size() << "); ";
    fallbacks_ok = fallbacks_ok && ok;
  }
  return reproducible && healthy && fallbacks_ok;
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"parser round-trip", parser_round_trip},   {"bfs equivalence", bfs_equivalence},
      {"dominance ordering", dominance},          {"correlation", correlation},
      {"grounding evaluator", grounding},         {"critic behavior", critic},
      {"determinism", determinism},               {"instruction generation", instructions},
      {"llm selector with mock endpoint", llm_selector},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    std::ostringstream note;
    bool ok = false;
    try {
      ok = c.check(note);
    } catch (const std::exception& ex) {
      note << "exception: " << ex.what();
    }
    failed += !ok;
    std::printf("%s  %-32s %s\n", ok ? "PASS" : "FAIL", c.name.c_str(), note.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
