#include "uiscout/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "uiscout/bench.hpp"
#include "uiscout/dataset.hpp"
#include "uiscout/explorer.hpp"
#include "uiscout/llm_selector.hpp"
#include "uiscout/parser.hpp"
#include "uiscout/sim_env.hpp"

#ifndef UISCOUT_FIXTURE_DIR
#define UISCOUT_FIXTURE_DIR "fixtures"
#endif

namespace fs = std::filesystem;

namespace uiscout {

std::string default_fixture_dir() {
  if (const char* env = std::getenv("UISCOUT_FIXTURES"); env && *env) return env;
  return UISCOUT_FIXTURE_DIR;
}

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flags shared by explore and bench.
struct ExploreFlags {
  double tau = 0.95;
  double nms = 0.5;
  bool multiscale = false;
  double ocr_dropout = 0.5;
  double text_dropout = 0.0;
  std::vector<std::string> lexicon{"error", "warning"};
  std::string dedup = "name";
  std::vector<std::string> action_kinds{"click"};
  std::string llm_endpoint;

  void add_to(CLI::App* app) {
    app->add_option("--tau", tau, "NCC match threshold")->check(CLI::Range(-1.0, 1.0));
    app->add_option("--nms", nms, "NMS IoU overlap")->check(CLI::Range(0.0, 1.0));
    app->add_flag("--multiscale", multiscale, "Match templates at 0.75x-1.25x");
    app->add_option("--ocr-dropout", ocr_dropout, "Text omission rate for random_walk_ocr")
        ->check(CLI::Range(0.0, 1.0));
    app->add_option("--text-dropout", text_dropout, "Text omission rate for parser-based strategies")
        ->check(CLI::Range(0.0, 1.0));
    app->add_option("--lexicon", lexicon, "Critic error lexicon (case-insensitive substrings)")->delimiter(',');
    app->add_option("--dedup", dedup, "Frontier dedup mode")->check(CLI::IsMember({"name", "state_name"}));
    app->add_option("--action-kinds", action_kinds, "Action kinds to try on each element")
        ->delimiter(',')
        ->check(CLI::IsMember({"click", "drag", "scroll"}));
    app->add_option("--llm-endpoint", llm_endpoint,
                    "Selector endpoint for llm_selector; the bundled mock is used when empty");
  }

  ExplorerConfig config() const {
    ExplorerConfig c;
    c.dedup = dedup_mode_from_string(dedup);
    c.critic.error_lexicon = lexicon;
    c.perception.parser.tau = tau;
    c.perception.parser.nms_overlap = nms;
    c.perception.parser.multiscale = multiscale;
    c.perception.ocr_dropout = ocr_dropout;
    c.perception.text_dropout = text_dropout;
    c.action_kinds.clear();
    for (const auto& k : action_kinds) {
      const ActionKind kind = action_kind_from_string(k);
      if (std::find(c.action_kinds.begin(), c.action_kinds.end(), kind) == c.action_kinds.end()) {
        c.action_kinds.push_back(kind);
      }
    }
    return c;
  }

  json parameters() const {
    return json{{"tau", tau},         {"nms", nms},
                {"multiscale", multiscale}, {"ocr_dropout", ocr_dropout},
                {"text_dropout", text_dropout}, {"lexicon", lexicon},
                {"dedup", dedup},     {"action_kinds", action_kinds}};
  }
};

// Remote selector for llm_selector: a live endpoint, or the in-process mock.
struct SelectorHandle {
  std::unique_ptr<MockSelectorServer> mock;
  std::unique_ptr<LlmSelectorClient> client;

  explicit SelectorHandle(const std::string& endpoint) {
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

std::string format_metrics(const Metrics& m) {
  std::ostringstream s;
  s << "unique_actions=" << m.unique_actions << " unique_states=" << m.unique_states
    << " element_coverage=" << m.element_coverage << " state_coverage=" << m.state_coverage
    << " error_states=" << m.error_states_found << " steps=" << m.steps_used;
  return s.str();
}

int cmd_explore(const std::string& env_path, const std::string& strategy, std::int64_t budget, std::uint64_t seed,
                const std::string& out_dir, const ExploreFlags& flags, std::ostream& out, std::ostream& err) {
  ExplorerConfig cfg = flags.config();
  cfg.strategy = strategy_from_string(strategy);
  cfg.budget = budget;
  cfg.seed = seed;
  auto def = std::make_shared<const EnvDefinition>(load_env(env_path));
  Environment env(def);

  std::optional<SelectorHandle> selector;
  if (cfg.strategy == StrategyId::llm_selector) selector.emplace(flags.llm_endpoint);

  const fs::path dir(out_dir);
  DatasetRecorder recorder(dir);
  RunServices services;
  services.recorder = &recorder;
  if (selector) services.remote = selector->client.get();
  const ExplorationRun run = run_exploration(env, cfg, services);

  write_text_file(dir / "run_log.jsonl", run_log_jsonl(run));
  const Metrics metrics = compute_metrics(run, oracle_enumerate(*def));
  write_text_file(dir / "metrics.json", json(metrics).dump(2) + "\n");
  DatasetManifest info;
  info.env_id = run.env_id;
  info.strategy_id = run.strategy_id;
  info.seed = seed;
  info.parameters = flags.parameters();
  info.parameters["budget"] = budget;
  const DatasetManifest manifest =
      write_manifest(dir, info, static_cast<std::int64_t>(recorder.size()));

  if (run.aborted) {
    err << "run aborted: " << run.abort_reason << '\n';
    return kExitFailure;
  }
  out << run.env_id << " " << run.strategy_id << " seed=" << seed << " samples=" << manifest.sample_count
      << " trajectories=" << run.trajectories.size() << (run.completed ? " (exploration complete)" : "") << '\n'
      << format_metrics(metrics) << '\n';
  return kExitOk;
}

std::vector<std::string> suite_envs() {
  std::vector<std::string> out;
  const fs::path dir = fs::path(default_fixture_dir()) / "suite";
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const fs::path doc = e.path() / (e.path().filename().string() + ".json");
    if (e.is_directory() && fs::exists(doc)) out.push_back(doc.string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

int cmd_bench(std::vector<std::string> envs, const std::vector<std::string>& strategies, int seeds,
              std::uint64_t seed_base, std::int64_t budget, int jobs, const std::string& out_dir,
              bool write_runs, const ExploreFlags& flags, std::ostream& out, std::ostream& err) {
  if (envs.empty()) envs = suite_envs();
  if (envs.empty()) throw std::runtime_error("no envs given and no fixture suite at " + default_fixture_dir());
  BenchConfig cfg;
  for (const auto& e : envs) cfg.envs.emplace_back(e);
  cfg.strategies.clear();
  for (const auto& s : strategies) cfg.strategies.push_back(strategy_from_string(s));
  cfg.seeds.clear();
  for (int i = 0; i < seeds; ++i) cfg.seeds.push_back(seed_base + static_cast<std::uint64_t>(i));
  cfg.budget = budget;
  cfg.jobs = jobs;
  cfg.base = flags.config();

  std::optional<SelectorHandle> selector;
  if (std::find(cfg.strategies.begin(), cfg.strategies.end(), StrategyId::llm_selector) != cfg.strategies.end()) {
    selector.emplace(flags.llm_endpoint);
    cfg.remote = selector->client.get();
  }
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  if (write_runs) {
    cfg.run_log_dir = dir / "runs";
    fs::create_directories(*cfg.run_log_dir);
  }
  const BenchReport report = compare_strategies(cfg);
  write_text_file(dir / "report.json", json(report).dump(2) + "\n");
  const std::string table = render_report_table(report);
  write_text_file(dir / "report.txt", table);
  out << table;
  for (const auto& c : report.cells) {
    if (!c.ok) err << "failed cell " << c.env_id << "/" << c.strategy << "/" << c.seed << ": " << c.error << '\n';
  }
  if (report.failed_cells() == static_cast<std::int64_t>(report.cells.size())) return kExitFailure;
  return kExitOk;
}

int cmd_parse(const std::string& image, const std::string& templates_dir, const std::string& env_path,
              const std::string& state_id, const std::string& text_json, const std::string& ocr_endpoint,
              const std::string& out_file, const ExploreFlags& flags, std::ostream& out) {
  ParserConfig pc;
  pc.tau = flags.tau;
  pc.nms_overlap = flags.nms;
  pc.multiscale = flags.multiscale;

  std::optional<EnvDefinition> def;
  if (!env_path.empty()) def = load_env(env_path);
  std::vector<IconTemplate> templates;
  if (!templates_dir.empty()) {
    templates = load_template_dir(templates_dir);
  } else if (def) {
    templates = def->templates;
  }

  RgbImage screenshot;
  std::unique_ptr<TextRecognizer> text;
  if (!image.empty()) {
    screenshot = read_png_rgb(image);
  } else {
    if (!def || state_id.empty()) throw UsageError("parse needs --image, or --env with --state");
    screenshot = render(def->state(state_id), *def);
  }
  if (!text_json.empty()) {
    std::vector<UIElement> elements;
    for (const auto& e : json::parse(read_text_file(text_json))) {
      UIElement el;
      el.name = e.at("name").get<std::string>();
      el.kind = ElementKind::text;
      el.bbox = e.at("bbox").get<BBox>();
      el.source = ElementSource::ocr;
      elements.push_back(std::move(el));
    }
    text = std::make_unique<StaticTextRecognizer>(std::move(elements));
  } else if (!ocr_endpoint.empty()) {
    text = std::make_unique<HttpTextRecognizer>(ocr_endpoint, 10.0);
  } else if (def && !state_id.empty()) {
    text = oracle_text_adapter(state_truth(def->state(state_id), *def), flags.text_dropout, 0);
  } else {
    text = std::make_unique<NullTextRecognizer>();
  }
  const ScreenParse parse = parse_screen(screenshot, templates, *text, pc);
  const std::string doc = json(parse).dump(2) + "\n";
  if (out_file.empty()) {
    out << doc;
  } else {
    write_text_file(out_file, doc);
    out << parse.elements.size() << " elements, fingerprint " << parse.fingerprint.hex << '\n';
  }
  return kExitOk;
}

int cmd_gen_instructions(const std::string& dataset, const std::vector<std::string>& types, std::uint64_t seed,
                         double eval_fraction, std::ostream& out) {
  const fs::path dir(dataset);
  DatasetManifest manifest = read_manifest(dir);
  InstructionConfig cfg;
  cfg.seed = seed;
  cfg.eval_fraction = eval_fraction;
  cfg.types.clear();
  for (const auto& t : types) cfg.types.push_back(query_type_from_string(t));
  const InstructionSet set = gen_instructions(load_samples(dir), cfg);
  write_instructions(dir / "instructions.jsonl", set.samples);
  manifest.skipped_counts = set.skipped;
  manifest.parameters["instructions"] = json{{"types", types}, {"seed", seed}, {"eval_fraction", eval_fraction}};
  manifest = write_manifest(dir, manifest, manifest.sample_count);
  out << set.samples.size() << " instructions";
  for (const auto& [t, n] : manifest.instruction_counts) out << ' ' << t << '=' << n;
  out << '\n';
  return kExitOk;
}

int cmd_eval_grounding(const std::string& predictions, const std::string& instructions, const std::string& out_file,
                       std::ostream& out) {
  const GroundingEvalResult r = evaluate_grounding(fs::path(predictions), fs::path(instructions));
  if (!out_file.empty()) write_text_file(out_file, json(r).dump(2) + "\n");
  out << "overall accuracy " << r.overall.value() << " (" << r.overall.correct << "/" << r.overall.total << ")\n";
  for (const auto& [t, a] : r.per_type) out << "  type " << t << ": " << a.value() << '\n';
  for (const auto& [k, a] : r.per_kind) out << "  kind " << k << ": " << a.value() << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"GUI exploration, parsing and grounding-dataset toolkit", "uiscout"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  std::vector<std::string> strategy_names;
  for (StrategyId s : kAllStrategies) strategy_names.push_back(to_string(s));

  // explore
  auto* explore = app.add_subcommand("explore", "Explore one environment and record a dataset");
  std::string env_path;
  std::string strategy = "frontier_auto";
  std::int64_t budget = 500;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  ExploreFlags explore_flags;
  explore->add_option("--env", env_path, "Environment definition (JSON)")->required()->check(CLI::ExistingFile);
  explore->add_option("--strategy", strategy, "Exploration strategy")->check(CLI::IsMember(strategy_names));
  explore->add_option("--budget", budget, "Action budget")->check(CLI::NonNegativeNumber);
  explore->add_option("--seed", seed, "RNG seed");
  explore->add_option("--out", out_dir, "Output directory");
  explore_flags.add_to(explore);

  // bench
  auto* bench = app.add_subcommand("bench", "Run a strategy x environment x seed matrix");
  std::vector<std::string> bench_envs;
  std::vector<std::string> bench_strategies = strategy_names;
  int bench_seeds = 10;
  std::uint64_t seed_base = 0;
  std::int64_t bench_budget = 500;
  int jobs = 1;
  std::string bench_out = "bench_out";
  bool write_runs = false;
  ExploreFlags bench_flags;
  bench->add_option("--env", bench_envs, "Environment definitions (default: bundled fixture suite)")
      ->check(CLI::ExistingFile);
  bench->add_option("--strategy", bench_strategies, "Strategies")->delimiter(',')->check(CLI::IsMember(strategy_names));
  bench->add_option("--seeds", bench_seeds, "Number of seeds")->check(CLI::PositiveNumber);
  bench->add_option("--seed-base", seed_base, "First seed");
  bench->add_option("--budget", bench_budget, "Action budget per run")->check(CLI::NonNegativeNumber);
  bench->add_option("--jobs", jobs, "Concurrent cells")->check(CLI::PositiveNumber);
  bench->add_option("--out", bench_out, "Output directory");
  bench->add_flag("--write-runs", write_runs, "Also write each cell's run log");
  bench_flags.add_to(bench);

  // parse
  auto* parse = app.add_subcommand("parse", "Parse one screenshot into elements");
  std::string image;
  std::string templates_dir;
  std::string parse_env_path;
  std::string state_id;
  std::string text_json;
  std::string ocr_endpoint;
  std::string parse_out;
  ExploreFlags parse_flags;
  parse->add_option("--image", image, "Screenshot PNG");
  parse->add_option("--templates", templates_dir, "Icon template directory")->check(CLI::ExistingDirectory);
  parse->add_option("--env", parse_env_path, "Environment (templates, and truth text with --state)")
      ->check(CLI::ExistingFile);
  parse->add_option("--state", state_id, "State to render when no --image is given");
  parse->add_option("--text-json", text_json, "Text elements as JSON list of {name, bbox}")->check(CLI::ExistingFile);
  parse->add_option("--ocr-endpoint", ocr_endpoint, "HTTP OCR endpoint");
  parse->add_option("--out", parse_out, "Write the parse JSON here instead of stdout");
  parse->add_option("--tau", parse_flags.tau, "NCC match threshold")->check(CLI::Range(-1.0, 1.0));
  parse->add_option("--nms", parse_flags.nms, "NMS IoU overlap")->check(CLI::Range(0.0, 1.0));
  parse->add_flag("--multiscale", parse_flags.multiscale, "Match templates at 0.75x-1.25x");
  parse->add_option("--text-dropout", parse_flags.text_dropout, "Oracle text omission rate")
      ->check(CLI::Range(0.0, 1.0));

  // gen-instructions
  auto* gen = app.add_subcommand("gen-instructions", "Generate grounding instructions for a dataset");
  std::string dataset;
  std::vector<std::string> types{"name", "shape", "function", "refexpr"};
  std::uint64_t gen_seed = 0;
  double eval_fraction = 0.0;
  gen->add_option("--dataset", dataset, "Dataset directory")->required();
  gen->add_option("--types", types, "Query types")
      ->delimiter(',')
      ->check(CLI::IsMember({"name", "shape", "function", "refexpr"}));
  gen->add_option("--seed", gen_seed, "Seed for the train/eval split");
  gen->add_option("--eval-fraction", eval_fraction, "Share of queries in the eval split")->check(CLI::Range(0.0, 1.0));

  // eval-grounding
  auto* eval = app.add_subcommand("eval-grounding", "Score grounding predictions (correct iff IoU > 0.3)");
  std::string predictions;
  std::string instructions;
  std::string eval_out;
  eval->add_option("--predictions", predictions, "Predictions JSONL {sample_id, query_id, bbox}")->required();
  eval->add_option("--instructions", instructions, "instructions.jsonl")->required();
  eval->add_option("--out", eval_out, "Write the result JSON here");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (explore->parsed()) {
      return cmd_explore(env_path, strategy, budget, seed, out_dir, explore_flags, out, err);
    }
    if (bench->parsed()) {
      return cmd_bench(bench_envs, bench_strategies, bench_seeds, seed_base, bench_budget, jobs, bench_out,
                       write_runs, bench_flags, out, err);
    }
    if (parse->parsed()) {
      return cmd_parse(image, templates_dir, parse_env_path, state_id, text_json, ocr_endpoint, parse_out,
                       parse_flags, out);
    }
    if (gen->parsed()) return cmd_gen_instructions(dataset, types, gen_seed, eval_fraction, out);
    if (eval->parsed()) return cmd_eval_grounding(predictions, instructions, eval_out, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace uiscout
