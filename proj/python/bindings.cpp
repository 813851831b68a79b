// Python module. Structured results cross the boundary as JSON text and are
// decoded on the Python side.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>
#include <memory>

#include "uiscout/bench.hpp"
#include "uiscout/dataset.hpp"
#include "uiscout/explorer.hpp"
#include "uiscout/llm_selector.hpp"
#include "uiscout/parser.hpp"
#include "uiscout/sim_env.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace uiscout;

namespace {

using Box = std::tuple<int, int, int, int>;

BBox to_bbox(const Box& b) { return {std::get<0>(b), std::get<1>(b), std::get<2>(b), std::get<3>(b)}; }

std::vector<UIElement> elements_from_json(const std::string& text) {
  return json::parse(text).get<std::vector<UIElement>>();
}

std::string parse_json(const std::string& image, const std::string& templates, const std::string& text_elements,
                       double tau, double nms, bool multiscale) {
  const RgbImage screen = read_png_rgb(image);
  const auto tmpl = load_template_dir(templates);
  const StaticTextRecognizer text(elements_from_json(text_elements));
  ParserConfig cfg;
  cfg.tau = tau;
  cfg.nms_overlap = nms;
  cfg.multiscale = multiscale;
  return json(parse_screen(screen, tmpl, text, cfg)).dump();
}

// Selector for llm_selector runs: the given endpoint or a private mock.
struct Selector {
  std::unique_ptr<MockSelectorServer> mock;
  std::unique_ptr<LlmSelectorClient> client;
  explicit Selector(const std::string& endpoint) {
    SelectorConfig cfg;
    if (endpoint.empty()) {
      mock = std::make_unique<MockSelectorServer>();
      cfg.endpoint_url = mock->url();
    } else {
      cfg.endpoint_url = endpoint;
    }
    client = std::make_unique<LlmSelectorClient>(cfg);
  }
};

std::string explore_json(const std::string& env_path, const std::string& strategy, std::int64_t budget,
                         std::uint64_t seed, const std::string& out_dir, const std::string& llm_endpoint) {
  ExplorerConfig cfg;
  cfg.strategy = strategy_from_string(strategy);
  cfg.budget = budget;
  cfg.seed = seed;
  auto def = std::make_shared<const EnvDefinition>(load_env(env_path));
  Environment env(def);
  std::optional<Selector> selector;
  if (cfg.strategy == StrategyId::llm_selector) selector.emplace(llm_endpoint);
  std::optional<DatasetRecorder> recorder;
  if (!out_dir.empty()) recorder.emplace(out_dir);
  RunServices services;
  if (recorder) services.recorder = &*recorder;
  if (selector) services.remote = selector->client.get();

  const ExplorationRun run = run_exploration(env, cfg, services);
  const Metrics metrics = compute_metrics(run, oracle_enumerate(*def));
  const std::string log = run_log_jsonl(run);
  json out{{"env_id", run.env_id},     {"strategy", run.strategy_id}, {"seed", seed},
           {"metrics", metrics},       {"completed", run.completed}, {"aborted", run.aborted},
           {"abort_reason", run.abort_reason}, {"trajectories", run.trajectories.size()}, {"run_log", log}};
  if (recorder) {
    const fs::path dir(out_dir);
    write_text_file(dir / "run_log.jsonl", log);
    write_text_file(dir / "metrics.json", json(metrics).dump(2) + "\n");
    DatasetManifest info;
    info.env_id = run.env_id;
    info.strategy_id = run.strategy_id;
    info.seed = seed;
    info.parameters = {{"budget", budget}};
    out["samples"] = write_manifest(dir, info, static_cast<std::int64_t>(recorder->size())).sample_count;
  }
  return out.dump();
}

std::string bench_json(const std::vector<std::string>& envs, const std::vector<std::string>& strategies,
                       const std::vector<std::uint64_t>& seeds, std::int64_t budget, int jobs,
                       const std::string& llm_endpoint) {
  BenchConfig cfg;
  for (const auto& e : envs) cfg.envs.emplace_back(e);
  cfg.strategies.clear();
  for (const auto& s : strategies) cfg.strategies.push_back(strategy_from_string(s));
  cfg.seeds = seeds;
  cfg.budget = budget;
  cfg.jobs = jobs;
  std::optional<Selector> selector;
  if (std::find(cfg.strategies.begin(), cfg.strategies.end(), StrategyId::llm_selector) != cfg.strategies.end()) {
    selector.emplace(llm_endpoint);
    cfg.remote = selector->client.get();
  }
  return json(compare_strategies(cfg)).dump();
}

std::string gen_instructions_json(const std::string& dataset, const std::vector<std::string>& types,
                                  std::uint64_t seed, double eval_fraction) {
  InstructionConfig cfg;
  cfg.types.clear();
  for (const auto& t : types) cfg.types.push_back(query_type_from_string(t));
  cfg.seed = seed;
  cfg.eval_fraction = eval_fraction;
  const InstructionSet set = gen_instructions(load_samples(dataset), cfg);
  return json{{"samples", set.samples}, {"skipped", set.skipped}}.dump();
}

}  // namespace

PYBIND11_MODULE(_uiscout, m) {
  m.doc() = "Screen parsing, GUI exploration and grounding evaluation";

  py::register_exception<EnvLoadError>(m, "EnvLoadError", PyExc_ValueError);
  py::register_exception<EnvValidationError>(m, "EnvValidationError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_RuntimeError);
  py::register_exception<IntegrityError>(m, "IntegrityError", PyExc_RuntimeError);
  py::register_exception<PredictionParseError>(m, "PredictionParseError", PyExc_ValueError);

  m.def(
      "iou", [](const Box& a, const Box& b) { return iou(to_bbox(a), to_bbox(b)); }, py::arg("a"), py::arg("b"));
  m.def(
      "grounding_correct", [](const Box& pred, const Box& gt) { return grounding_correct(to_bbox(pred), to_bbox(gt)); },
      py::arg("pred"), py::arg("gt"));
  m.def(
      "state_fingerprint_json", [](const std::string& elements) { return state_fingerprint(elements_from_json(elements)).hex; },
      py::arg("elements"));
  m.def("parse_json", &parse_json, py::arg("image"), py::arg("templates"), py::arg("text_elements") = "[]",
        py::arg("tau") = 0.95, py::arg("nms") = 0.5, py::arg("multiscale") = false,
        py::call_guard<py::gil_scoped_release>());
  m.def("explore_json", &explore_json, py::arg("env"), py::arg("strategy") = "frontier_auto",
        py::arg("budget") = 500, py::arg("seed") = 0, py::arg("out") = "", py::arg("llm_endpoint") = "",
        py::call_guard<py::gil_scoped_release>());
  m.def("bench_json", &bench_json, py::arg("envs"), py::arg("strategies"), py::arg("seeds"), py::arg("budget") = 500,
        py::arg("jobs") = 1, py::arg("llm_endpoint") = "", py::call_guard<py::gil_scoped_release>());
  m.def("gen_instructions_json", &gen_instructions_json, py::arg("dataset"),
        py::arg("types") = std::vector<std::string>{"name", "shape", "function", "refexpr"}, py::arg("seed") = 0,
        py::arg("eval_fraction") = 0.0, py::call_guard<py::gil_scoped_release>());
  m.def(
      "evaluate_grounding_json",
      [](const std::string& predictions, const std::string& instructions) {
        return json(evaluate_grounding(fs::path(predictions), fs::path(instructions))).dump();
      },
      py::arg("predictions"), py::arg("instructions"), py::call_guard<py::gil_scoped_release>());
  m.def(
      "oracle_json",
      [](const std::string& env) {
        const OracleSummary o = oracle_enumerate(load_env(env));
        return json{{"env_id", o.env_id},
                    {"reachable_states", o.reachable_states},
                    {"element_names", o.element_names},
                    {"error_states", o.error_states},
                    {"feasible_actions", o.feasible.size()}}
            .dump();
      },
      py::arg("env"));
}
