#include "uiscout/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <thread>

namespace uiscout {

void to_json(json& j, const Metrics& m) {
  j = json{{"unique_actions", m.unique_actions},     {"unique_states", m.unique_states},
           {"element_coverage", m.element_coverage}, {"state_coverage", m.state_coverage},
           {"error_states_found", m.error_states_found}, {"steps_used", m.steps_used}};
}

Metrics compute_metrics(const ExplorationRun& run, const OracleSummary& oracle) {
  if (run.env_id != oracle.env_id) {
    throw std::invalid_argument("run is from env '" + run.env_id + "' but oracle is from '" + oracle.env_id + "'");
  }
  Metrics m;
  m.unique_actions = static_cast<std::int64_t>(run.actuated_names.size());
  m.unique_states = static_cast<std::int64_t>(run.visited.size());
  m.steps_used = run.steps_used;
  std::int64_t seen = 0;
  for (const auto& n : oracle.element_names) seen += run.observed_names.count(n);
  if (!oracle.element_names.empty()) {
    m.element_coverage = static_cast<double>(seen) / static_cast<double>(oracle.element_names.size());
  }
  std::int64_t states = 0;
  for (const auto& s : oracle.reachable_states) {
    if (run.visited_state_ids.count(s)) {
      ++states;
      m.error_states_found += oracle.error_states.count(s);
    }
  }
  if (!oracle.reachable_states.empty()) {
    m.state_coverage = static_cast<double>(states) / static_cast<double>(oracle.reachable_states.size());
  }
  return m;
}

// ---------------------------------------------------------------- grounding

namespace {

json accuracy_json(const Accuracy& a) {
  return json{{"correct", a.correct}, {"total", a.total}, {"accuracy", a.value()}};
}

}  // namespace

void to_json(json& j, const GroundingEvalResult& r) {
  json types = json::object();
  for (const auto& [k, a] : r.per_type) types[k] = accuracy_json(a);
  json kinds = json::object();
  for (const auto& [k, a] : r.per_kind) kinds[k] = accuracy_json(a);
  j = json{{"per_type", types}, {"per_kind", kinds}, {"overall", accuracy_json(r.overall)}};
}

std::vector<Prediction> parse_predictions(const std::string& jsonl) {
  std::vector<Prediction> out;
  std::istringstream in(jsonl);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      Prediction p;
      p.sample_id = j.at("sample_id").get<std::string>();
      p.query_id = j.at("query_id").get<std::string>();
      p.bbox = j.at("bbox").get<BBox>();
      out.push_back(std::move(p));
    } catch (const std::exception& ex) {
      throw PredictionParseError(line_no, ex.what());
    }
  }
  return out;
}

GroundingEvalResult evaluate_grounding(const std::vector<Prediction>& predictions,
                                       const std::vector<InstructionSample>& truth) {
  std::map<std::string, const InstructionSample*> by_query;
  for (const auto& t : truth) {
    if (!by_query.emplace(t.query_id, &t).second) {
      throw std::invalid_argument("duplicate query id '" + t.query_id + "' in instructions");
    }
  }
  std::map<std::string, BBox> predicted;
  for (const auto& p : predictions) {
    auto it = by_query.find(p.query_id);
    if (it == by_query.end()) throw std::invalid_argument("prediction for unknown query '" + p.query_id + "'");
    if (it->second->sample_id != p.sample_id) {
      throw std::invalid_argument("prediction for query '" + p.query_id + "' names sample '" + p.sample_id +
                                  "' but the query belongs to '" + it->second->sample_id + "'");
    }
    if (!predicted.emplace(p.query_id, p.bbox).second) {
      throw std::invalid_argument("two predictions for query '" + p.query_id + "'");
    }
  }
  GroundingEvalResult r;
  for (const auto& t : truth) {
    auto it = predicted.find(t.query_id);
    const bool ok = it != predicted.end() && it->second.valid() && grounding_correct(it->second, t.gt_bbox);
    for (Accuracy* a : {&r.per_type[to_string(t.query_type)], &r.per_kind[to_string(t.element_kind)], &r.overall}) {
      ++a->total;
      a->correct += ok;
    }
  }
  return r;
}

GroundingEvalResult evaluate_grounding(const std::filesystem::path& predictions_file,
                                       const std::filesystem::path& instructions_file) {
  return evaluate_grounding(parse_predictions(read_text_file(predictions_file)), read_instructions(instructions_file));
}

// ---------------------------------------------------------------- matrix

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

std::optional<double> spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("spearman: size mismatch");
  if (a.size() < 2) return std::nullopt;
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double cov = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (va == 0 || vb == 0) return std::nullopt;
  return cov / std::sqrt(va * vb);
}

std::int64_t BenchReport::failed_cells() const {
  return std::count_if(cells.begin(), cells.end(), [](const BenchCell& c) { return !c.ok; });
}

const StrategyAggregate* BenchReport::aggregate(const std::string& strategy) const {
  for (const auto& a : aggregates) {
    if (a.strategy == strategy) return &a;
  }
  return nullptr;
}

void aggregate_report(BenchReport& r) {
  r.aggregates.clear();
  r.unique_action_ratios.clear();
  for (const auto& s : r.strategies) {
    StrategyAggregate a;
    a.strategy = s;
    for (const auto& c : r.cells) {
      if (!c.ok || c.strategy != s) continue;
      ++a.cells;
      a.mean_unique_actions += static_cast<double>(c.metrics.unique_actions);
      a.mean_unique_states += static_cast<double>(c.metrics.unique_states);
      a.mean_element_coverage += c.metrics.element_coverage;
      a.mean_state_coverage += c.metrics.state_coverage;
      a.mean_error_states += static_cast<double>(c.metrics.error_states_found);
    }
    if (a.cells > 0) {
      const double n = static_cast<double>(a.cells);
      a.mean_unique_actions /= n;
      a.mean_unique_states /= n;
      a.mean_element_coverage /= n;
      a.mean_state_coverage /= n;
      a.mean_error_states /= n;
    }
    r.aggregates.push_back(a);
  }
  std::vector<double> ua;
  std::vector<double> cov;
  for (const auto& a : r.aggregates) {
    if (a.cells == 0) continue;
    ua.push_back(a.mean_unique_actions);
    cov.push_back(a.mean_element_coverage);
    for (const auto& b : r.aggregates) {
      if (&a == &b || b.cells == 0 || b.mean_unique_actions == 0) continue;
      r.unique_action_ratios[a.strategy + "/" + b.strategy] = a.mean_unique_actions / b.mean_unique_actions;
    }
  }
  r.spearman_unique_vs_coverage = spearman(ua, cov);
}

void to_json(json& j, const BenchReport& r) {
  json cells = json::array();
  for (const auto& c : r.cells) {
    json cj{{"env_id", c.env_id}, {"strategy", c.strategy}, {"seed", c.seed}, {"ok", c.ok}};
    if (c.ok) {
      cj["metrics"] = c.metrics;
    } else {
      cj["error"] = c.error;
    }
    cells.push_back(std::move(cj));
  }
  json aggregates = json::array();
  for (const auto& a : r.aggregates) {
    aggregates.push_back({{"strategy", a.strategy},
                          {"cells", a.cells},
                          {"mean_unique_actions", a.mean_unique_actions},
                          {"mean_unique_states", a.mean_unique_states},
                          {"mean_element_coverage", a.mean_element_coverage},
                          {"mean_state_coverage", a.mean_state_coverage},
                          {"mean_error_states", a.mean_error_states}});
  }
  j = json{{"budget", r.budget},
           {"envs", r.envs},
           {"strategies", r.strategies},
           {"seeds", r.seeds},
           {"cells", cells},
           {"failed_cells", r.failed_cells()},
           {"aggregates", aggregates},
           {"unique_action_ratios", r.unique_action_ratios},
           {"spearman_unique_vs_coverage",
            r.spearman_unique_vs_coverage ? json(*r.spearman_unique_vs_coverage) : json(nullptr)}};
}

std::string render_report_table(const BenchReport& r) {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-20s %6s %10s %10s %9s %9s %8s\n", "strategy", "cells", "uniq_act", "uniq_st",
                "elem_cov", "state_cov", "errors");
  out << buf;
  for (const auto& a : r.aggregates) {
    std::snprintf(buf, sizeof buf, "%-20s %6lld %10.2f %10.2f %9.4f %9.4f %8.2f\n", a.strategy.c_str(),
                  static_cast<long long>(a.cells), a.mean_unique_actions, a.mean_unique_states,
                  a.mean_element_coverage, a.mean_state_coverage, a.mean_error_states);
    out << buf;
  }
  out << "envs: " << r.envs.size() << "  seeds: " << r.seeds.size() << "  budget: " << r.budget
      << "  failed cells: " << r.failed_cells() << '\n';
  if (r.spearman_unique_vs_coverage) {
    std::snprintf(buf, sizeof buf, "spearman(unique_actions, element_coverage) = %.4f\n",
                  *r.spearman_unique_vs_coverage);
    out << buf;
  } else {
    out << "spearman(unique_actions, element_coverage) = n/a\n";
  }
  for (const auto& [k, v] : r.unique_action_ratios) {
    std::snprintf(buf, sizeof buf, "unique_actions %s = %.3f\n", k.c_str(), v);
    out << buf;
  }
  return out.str();
}

namespace {

struct LoadedEnv {
  std::shared_ptr<const EnvDefinition> def;
  std::shared_ptr<RenderCache> renders;
  std::shared_ptr<IconCache> icons;
  OracleSummary oracle;
  std::string error;
};

}  // namespace

BenchReport compare_strategies(const BenchConfig& config) {
  if (config.budget < 0) throw std::invalid_argument("budget must be >= 0");
  if (config.envs.empty() || config.strategies.empty() || config.seeds.empty()) {
    throw std::invalid_argument("bench needs at least one env, strategy and seed");
  }
  BenchReport report;
  report.budget = config.budget;
  report.seeds = config.seeds;
  for (StrategyId s : config.strategies) report.strategies.push_back(to_string(s));

  std::vector<LoadedEnv> envs(config.envs.size());
  for (std::size_t i = 0; i < config.envs.size(); ++i) {
    try {
      envs[i].def = std::make_shared<const EnvDefinition>(load_env(config.envs[i]));
      envs[i].renders = std::make_shared<RenderCache>();
      envs[i].icons = std::make_shared<IconCache>();
      envs[i].oracle = oracle_enumerate(*envs[i].def);
      report.envs.push_back(envs[i].def->env_id);
    } catch (const std::exception& ex) {
      envs[i].error = ex.what();
      report.envs.push_back(config.envs[i].stem().string());
    }
  }

  struct Job {
    std::size_t env;
    StrategyId strategy;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t e = 0; e < envs.size(); ++e) {
    for (StrategyId s : config.strategies) {
      for (std::uint64_t seed : config.seeds) jobs.push_back({e, s, seed});
    }
  }
  report.cells.resize(jobs.size());

  auto run_cell = [&](std::size_t i) {
    const Job& job = jobs[i];
    BenchCell& cell = report.cells[i];
    const LoadedEnv& env = envs[job.env];
    cell.env_id = report.envs[job.env];
    cell.strategy = to_string(job.strategy);
    cell.seed = job.seed;
    if (!env.def) {
      cell.error = "env failed to load: " + env.error;
      return;
    }
    try {
      ExplorerConfig cfg = config.base;
      cfg.strategy = job.strategy;
      cfg.seed = job.seed;
      cfg.budget = config.budget;
      Environment instance(env.def, true, env.renders);
      RunServices services;
      services.remote = config.remote;
      services.icons = env.icons;
      const ExplorationRun run = run_exploration(instance, cfg, services);
      if (run.aborted) throw std::runtime_error("run aborted: " + run.abort_reason);
      if (config.run_log_dir) {
        write_text_file(*config.run_log_dir /
                            (cell.env_id + "__" + cell.strategy + "__" + std::to_string(cell.seed) + ".jsonl"),
                        run_log_jsonl(run));
      }
      cell.metrics = compute_metrics(run, env.oracle);
      cell.ok = true;
    } catch (const std::exception& ex) {
      cell.ok = false;
      cell.error = ex.what();
    }
  };

  const std::size_t workers =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::max(config.jobs, 1)), 1, std::max<std::size_t>(jobs.size(), 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i) run_cell(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) run_cell(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  aggregate_report(report);
  return report;
}

}  // namespace uiscout
