#include "uiscout/explorer.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace uiscout {

namespace {

constexpr std::pair<StrategyId, const char*> kStrategies[] = {
    {StrategyId::random_walk_ocr, "random_walk_ocr"},
    {StrategyId::random_walk_parser, "random_walk_parser"},
    {StrategyId::frontier_auto, "frontier_auto"},
    {StrategyId::llm_selector, "llm_selector"}};

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

}  // namespace

std::string to_string(StrategyId s) {
  for (const auto& [id, name] : kStrategies) {
    if (id == s) return name;
  }
  throw std::invalid_argument("unknown strategy");
}

StrategyId strategy_from_string(const std::string& s) {
  for (const auto& [id, name] : kStrategies) {
    if (s == name) return id;
  }
  throw std::invalid_argument("unknown strategy id '" + s + "'");
}

std::string to_string(DedupMode m) { return m == DedupMode::name ? "name" : "state_name"; }

DedupMode dedup_mode_from_string(const std::string& s) {
  if (s == "name") return DedupMode::name;
  if (s == "state_name") return DedupMode::state_name;
  throw std::invalid_argument("unknown dedup mode '" + s + "'");
}

std::string to_string(VerdictKind v) {
  switch (v) {
    case VerdictKind::proceed:
      return "continue";
    case VerdictKind::no_new_elements:
      return "no_new_elements";
    case VerdictKind::no_change:
      return "no_change";
    case VerdictKind::error_state:
      return "error_state";
  }
  return "?";
}

ElementDiff diff_elements(const ScreenParse& pre, const ScreenParse& post) {
  std::set<std::string> before;
  std::set<std::string> after;
  for (const auto& e : pre.elements) before.insert(e.name);
  for (const auto& e : post.elements) after.insert(e.name);
  ElementDiff d;
  std::set_difference(after.begin(), after.end(), before.begin(), before.end(),
                      std::inserter(d.added, d.added.end()));
  std::set_difference(before.begin(), before.end(), after.begin(), after.end(),
                      std::inserter(d.removed, d.removed.end()));
  return d;
}

Verdict critic_evaluate(const ScreenParse& pre, const ScreenParse& post, const ElementDiff& diff,
                        const StepFlags& flags, const CriticConfig& config) {
  for (const auto& e : post.elements) {
    const std::string name = lower(e.name);
    for (const auto& pattern : config.error_lexicon) {
      if (!pattern.empty() && name.find(lower(pattern)) != std::string::npos) {
        return {VerdictKind::error_state, "error dialog element '" + e.name + "'"};
      }
    }
  }
  if (flags.env_is_error) return {VerdictKind::error_state, "environment reported an error state"};
  if (flags.target_missing) return {VerdictKind::no_change, "target element missing"};
  if (flags.noop) return {VerdictKind::no_change, "action had no effect"};
  if (pre.fingerprint == post.fingerprint) return {VerdictKind::no_change, "screen unchanged"};
  if (diff.added.empty()) return {VerdictKind::no_new_elements, "no new elements"};
  return {VerdictKind::proceed, {}};
}

// ---------------------------------------------------------------- frontier

std::string Frontier::key(const std::string& name, const StateFingerprint& state, ActionKind kind) const {
  if (mode_ == DedupMode::name) return to_string(kind) + "|" + name;
  return to_string(kind) + "|" + state.hex + "|" + name;
}

bool Frontier::offer(FrontierEntry entry) {
  if (!offered_.insert(key(entry.element_name, entry.discovered_in, entry.action_kind)).second) return false;
  entries_.push_back(std::move(entry));
  return true;
}

std::optional<FrontierEntry> Frontier::pop(Rng& rng, const std::set<std::string>& actuated) {
  std::erase_if(entries_, [&](const FrontierEntry& e) {
    return actuated.count(key(e.element_name, e.discovered_in, e.action_kind)) > 0;
  });
  if (entries_.empty()) return std::nullopt;
  const std::size_t i = rng.index(entries_.size());
  FrontierEntry out = std::move(entries_[i]);
  entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(i));
  return out;
}

// ---------------------------------------------------------------- perception

std::optional<std::vector<UIElement>> IconCache::find(const std::string& content_hash) const {
  std::lock_guard lock(mu_);
  auto it = icons_.find(content_hash);
  if (it == icons_.end()) return std::nullopt;
  return it->second;
}

void IconCache::store(const std::string& content_hash, std::vector<UIElement> icons) {
  std::lock_guard lock(mu_);
  icons_.emplace(content_hash, std::move(icons));
}

Perception::Perception(const EnvDefinition& env, StrategyId strategy, const PerceptionConfig& config,
                       std::uint64_t seed, std::shared_ptr<IconCache> cache)
    : env_(env),
      use_templates_(strategy != StrategyId::random_walk_ocr),
      dropout_(strategy == StrategyId::random_walk_ocr ? config.ocr_dropout : config.text_dropout),
      seed_(seed),
      parser_(config.parser),
      cache_(cache ? std::move(cache) : std::make_shared<IconCache>()) {}

ScreenParse Perception::perceive(const Observation& obs) {
  const RgbImage& img = *obs.screenshot.image;
  std::vector<UIElement> icons;
  if (use_templates_) {
    if (auto hit = cache_->find(obs.screenshot.content_hash)) {
      icons = std::move(*hit);
    } else {
      icons = detect_icons(to_gray(img), env_.templates, parser_);
      cache_->store(obs.screenshot.content_hash, icons);
    }
  }
  std::vector<UIElement> truth;
  if (obs.truth) truth = obs.truth->elements;
  const OracleTextRecognizer text(std::move(truth), dropout_, seed_);
  auto texts = recognize_text(text, img, icons);
  return assemble_parse(std::move(icons), std::move(texts), img, obs.screenshot.content_hash, parser_);
}

// ---------------------------------------------------------------- selection

Action make_action(ActionKind kind, const std::string& name, const ExplorerConfig& config) {
  switch (kind) {
    case ActionKind::click:
      return Action::click(name);
    case ActionKind::drag:
      return Action::drag(name, config.drag_dx, config.drag_dy);
    case ActionKind::scroll:
      return Action::scroll(name, config.scroll_ticks);
  }
  return Action::click(name);
}

namespace {

Selection act(Action a) {
  Selection s;
  s.kind = Selection::Kind::act;
  s.action = std::move(a);
  return s;
}

Selection end_trajectory() {
  Selection s;
  s.kind = Selection::Kind::end_trajectory;
  return s;
}

// Distinct (name, kind) candidates of a parse in canonical element order.
std::vector<std::pair<std::string, ActionKind>> candidates(const ScreenParse& parse,
                                                           const std::vector<ActionKind>& kinds) {
  std::vector<std::pair<std::string, ActionKind>> out;
  std::set<std::pair<std::string, int>> seen;
  for (const auto& e : parse.elements) {
    for (ActionKind k : kinds) {
      if (seen.insert({e.name, static_cast<int>(k)}).second) out.emplace_back(e.name, k);
    }
  }
  return out;
}

}  // namespace

Selection select_next(StrategyId strategy, const ScreenParse& current, Frontier* frontier,
                      const SelectionHistory& history, Rng& rng, const ExplorerConfig& config,
                      const ElementSelector* remote, const std::string& category_hint) {
  switch (strategy) {
    case StrategyId::frontier_auto: {
      if (!frontier || !history.actuated_keys) {
        throw std::invalid_argument("frontier_auto needs a frontier and actuation history");
      }
      if (history.in_trajectory) {
        std::vector<std::pair<std::string, ActionKind>> pool;
        for (auto& c : candidates(current, config.action_kinds)) {
          if (!history.trajectory_new || !history.trajectory_new->count(c.first)) continue;
          if (history.actuated_keys->count(frontier->key(c.first, current.fingerprint, c.second))) continue;
          pool.push_back(std::move(c));
        }
        if (pool.empty()) return end_trajectory();
        const auto& [name, kind] = pool[rng.index(pool.size())];
        return act(make_action(kind, name, config));
      }
      auto entry = frontier->pop(rng, *history.actuated_keys);
      Selection s;
      if (!entry) {
        s.kind = Selection::Kind::exploration_complete;
        return s;
      }
      s.kind = Selection::Kind::start_entry;
      s.action = make_action(entry->action_kind, entry->element_name, config);
      s.entry = std::move(entry);
      return s;
    }
    case StrategyId::random_walk_ocr:
    case StrategyId::random_walk_parser: {
      const auto pool = candidates(current, config.action_kinds);
      if (pool.empty()) return end_trajectory();
      const auto& [name, kind] = pool[rng.index(pool.size())];
      return act(make_action(kind, name, config));
    }
    case StrategyId::llm_selector: {
      if (current.elements.empty()) return end_trajectory();
      FallbackRecord fallback{0, "selector_unavailable", "no remote selector configured"};
      if (remote) {
        const auto ctx = SelectorContext::from_parse(current, history.explored_names, category_hint);
        const SelectOutcome out = remote->select(ctx);
        if (out.status == SelectStatus::ok && current.has_name(out.element_name)) {
          return act(Action::click(out.element_name));
        }
        fallback.status = to_string(out.status);
        fallback.detail = out.detail;
      }
      const auto pool = candidates(current, {ActionKind::click});
      Selection s = act(Action::click(pool[rng.index(pool.size())].first));
      s.fallback = std::move(fallback);
      return s;
    }
  }
  throw std::invalid_argument("unknown strategy");
}

ReplayResult replay_prefix(Environment& env, Perception& perception, const std::vector<Action>& prefix,
                           const std::string& expect_element) {
  ReplayResult out;
  out.observation = env.reset();
  out.parse = perception.perceive(out.observation);
  for (const auto& a : prefix) {
    out.observation = env.step(a);
    out.parse = perception.perceive(out.observation);
    out.steps.emplace_back(out.observation, out.parse);
    if (out.observation.noop) {
      out.stale = true;
      out.stale_reason = "replayed action on '" + a.target_name + "' had no effect";
      return out;
    }
  }
  if (!expect_element.empty() && !out.parse.has_name(expect_element)) {
    out.stale = true;
    out.stale_reason = "element '" + expect_element + "' absent after replay";
  }
  return out;
}

// ---------------------------------------------------------------- run loop

namespace {

Termination termination_for(VerdictKind v) {
  switch (v) {
    case VerdictKind::no_new_elements:
      return Termination::no_new_elements;
    case VerdictKind::no_change:
      return Termination::no_change;
    case VerdictKind::error_state:
      return Termination::error_state;
    case VerdictKind::proceed:
      break;
  }
  return Termination::no_new_elements;
}

class RunDriver {
 public:
  RunDriver(Environment& env, const ExplorerConfig& config, const RunServices& services, ExplorationRun& run)
      : env_(env),
        config_(config),
        services_(services),
        run_(run),
        perception_(env.definition(), config.strategy, config.perception, config.seed, services.icons),
        rng_(config.seed),
        frontier_(config.dedup) {}

  void run() {
    cur_obs_ = env_.reset();
    cur_parse_ = perception_.perceive(cur_obs_);
    run_.initial_fingerprint = cur_parse_.fingerprint;
    note(cur_obs_, cur_parse_);
    if (config_.strategy == StrategyId::frontier_auto) {
      offer_all(cur_parse_, {});
      run_frontier();
    } else {
      run_walk();
    }
  }

 private:
  bool budget_left() const { return run_.steps_used < config_.budget; }

  void note(const Observation& obs, const ScreenParse& parse) {
    run_.visited.insert(parse.fingerprint);
    if (obs.truth) run_.visited_state_ids.insert(obs.truth->state_id);
    for (const auto& e : parse.elements) run_.observed_names.insert(e.name);
    if (services_.recorder) services_.recorder->record(parse, *obs.screenshot.image);
  }

  void reset() {
    cur_obs_ = env_.reset();
    cur_parse_ = perception_.perceive(cur_obs_);
    note(cur_obs_, cur_parse_);
  }

  void offer_all(const ScreenParse& parse, const std::vector<Action>& path) {
    for (const auto& e : parse.elements) offer(e.name, parse.fingerprint, path);
  }

  void offer(const std::string& name, const StateFingerprint& fp, const std::vector<Action>& path) {
    for (ActionKind k : config_.action_kinds) frontier_.offer({name, fp, path, k});
  }

  struct StepOutcome {
    ElementDiff diff;
    Verdict verdict;
  };

  // Executes one action from the current state and appends it to `traj`.
  StepOutcome execute(const Action& action, Trajectory& traj, bool replay) {
    const ScreenParse pre = cur_parse_;
    Observation post_obs = env_.step(action);
    ScreenParse post = perception_.perceive(post_obs);
    ++run_.steps_used;
    ++run_.actuated_names[action.target_name];
    actuated_keys_.insert(frontier_.key(action.target_name, pre.fingerprint, action.kind));
    note(post_obs, post);

    StepOutcome out;
    out.diff = diff_elements(pre, post);
    const StepFlags flags{post_obs.target_missing, post_obs.noop,
                          post_obs.truth.has_value() && post_obs.truth->is_error};
    out.verdict = critic_evaluate(pre, post, out.diff, flags, config_.critic);

    TrajectoryStep step{pre.fingerprint, action, post.fingerprint};
    run_.log.push_back({run_.trajectories.size(), traj.steps.size(), step,
                        replay ? std::string("replay") : to_string(out.verdict.kind)});
    traj.steps.push_back(std::move(step));
    cur_obs_ = std::move(post_obs);
    cur_parse_ = std::move(post);
    return out;
  }

  void close(Trajectory& traj, Termination t, const std::string& reason = {}) {
    traj.termination = t;
    if (t == Termination::error_state) {
      traj.error_record = ErrorRecord{reason, traj.steps};
      run_.error_records.push_back(*traj.error_record);
    }
    run_.trajectories.push_back(std::move(traj));
    traj = Trajectory{};
  }

  void run_frontier() {
    bool fresh = true;
    while (budget_left()) {
      SelectionHistory history;
      history.actuated_keys = &actuated_keys_;
      Selection sel = select_next(StrategyId::frontier_auto, cur_parse_, &frontier_, history, rng_, config_);
      if (sel.kind == Selection::Kind::exploration_complete) {
        run_.completed = true;
        return;
      }
      const FrontierEntry entry = std::move(*sel.entry);
      if (!fresh) reset();
      fresh = false;

      Trajectory traj;
      std::vector<Action> path;
      bool stale = false;
      std::string stale_reason;
      for (const auto& a : entry.prefix) {
        if (!budget_left()) {
          if (!traj.steps.empty()) close(traj, Termination::budget_exhausted);
          return;
        }
        const StepOutcome o = execute(a, traj, true);
        path.push_back(a);
        if (config_.dedup == DedupMode::state_name) {
          offer_all(cur_parse_, path);
        } else {
          for (const auto& n : o.diff.added) offer(n, cur_parse_.fingerprint, path);
        }
        if (cur_obs_.noop) {
          stale = true;
          stale_reason = "replayed action on '" + a.target_name + "' had no effect";
          break;
        }
      }
      if (!stale && !cur_parse_.has_name(entry.element_name)) {
        stale = true;
        stale_reason = "element '" + entry.element_name + "' absent after replay";
      }
      if (stale) {
        run_.discards.push_back({entry.element_name, stale_reason});
        if (!traj.steps.empty()) close(traj, Termination::no_change);
        continue;
      }

      std::set<std::string> trajectory_new;
      Action action = sel.action;
      while (true) {
        if (!budget_left()) {
          close(traj, Termination::budget_exhausted);
          return;
        }
        const StepOutcome o = execute(action, traj, false);
        path.push_back(action);
        if (config_.dedup == DedupMode::state_name) {
          offer_all(cur_parse_, path);
        } else {
          for (const auto& n : o.diff.added) offer(n, cur_parse_.fingerprint, path);
        }
        if (o.verdict.terminates()) {
          close(traj, termination_for(o.verdict.kind), o.verdict.reason);
          break;
        }
        trajectory_new.insert(o.diff.added.begin(), o.diff.added.end());
        history.in_trajectory = true;
        history.trajectory_new = &trajectory_new;
        Selection next = select_next(StrategyId::frontier_auto, cur_parse_, &frontier_, history, rng_, config_);
        if (next.kind != Selection::Kind::act) {
          close(traj, Termination::no_new_elements);
          break;
        }
        action = std::move(next.action);
      }
    }
  }

  void run_walk() {
    Trajectory traj;
    while (budget_left()) {
      SelectionHistory history;
      history.actuated_keys = &actuated_keys_;
      history.in_trajectory = true;
      if (config_.strategy == StrategyId::llm_selector) {
        for (const auto& [name, count] : run_.actuated_names) history.explored_names.push_back(name);
      }
      Selection sel = select_next(config_.strategy, cur_parse_, nullptr, history, rng_, config_, services_.remote,
                                  env_.definition().category);
      if (sel.fallback) {
        sel.fallback->step = run_.steps_used;
        run_.fallbacks.push_back(*sel.fallback);
      }
      if (sel.kind != Selection::Kind::act) {
        if (traj.steps.empty()) {
          // Nothing actionable right after a reset: the walk cannot proceed.
          run_.completed = true;
          return;
        }
        close(traj, Termination::no_new_elements);
        reset();
        continue;
      }
      const StepOutcome o = execute(sel.action, traj, false);
      if (o.verdict.kind == VerdictKind::error_state) {
        close(traj, Termination::error_state, o.verdict.reason);
        reset();
      }
    }
    if (!traj.steps.empty()) close(traj, Termination::budget_exhausted);
  }

  Environment& env_;
  const ExplorerConfig& config_;
  const RunServices& services_;
  ExplorationRun& run_;
  Perception perception_;
  Rng rng_;
  Frontier frontier_;
  std::set<std::string> actuated_keys_;
  Observation cur_obs_;
  ScreenParse cur_parse_;
};

}  // namespace

ExplorationRun run_exploration(Environment& env, const ExplorerConfig& config, const RunServices& services) {
  if (config.budget < 0) throw std::invalid_argument("budget must be >= 0");
  if (config.action_kinds.empty()) throw std::invalid_argument("at least one action kind is required");
  ExplorationRun run;
  run.env_id = env.definition().env_id;
  run.strategy_id = to_string(config.strategy);
  run.seed = config.seed;
  run.budget = config.budget;
  run.dedup_mode = to_string(config.dedup);
  RunDriver driver(env, config, services, run);
  try {
    driver.run();
  } catch (const RecorderError& ex) {
    run.aborted = true;
    run.abort_reason = std::string("recorder: ") + ex.what();
  } catch (const ParseError& ex) {
    run.aborted = true;
    run.abort_reason = std::string("parser: ") + ex.what();
  }
  return run;
}

// ---------------------------------------------------------------- run log

std::string run_log_jsonl(const ExplorationRun& run) {
  std::ostringstream out;
  for (const auto& r : run.log) {
    json line{{"trajectory_idx", r.trajectory_idx},
              {"step_idx", r.step_idx},
              {"pre_fp", r.step.pre},
              {"action", r.step.action},
              {"post_fp", r.step.post},
              {"verdict", r.verdict}};
    out << line.dump() << '\n';
  }
  json trajectories = json::array();
  for (const auto& t : run.trajectories) {
    json tj{{"steps", t.steps.size()}, {"termination", to_string(t.termination)}};
    if (t.error_record) tj["error_reason"] = t.error_record->reason;
    trajectories.push_back(std::move(tj));
  }
  json discards = json::array();
  for (const auto& d : run.discards) discards.push_back({{"element_name", d.element_name}, {"reason", d.reason}});
  json fallbacks = json::array();
  for (const auto& f : run.fallbacks) {
    fallbacks.push_back({{"step", f.step}, {"status", f.status}, {"detail", f.detail}});
  }
  json summary{{"env_id", run.env_id},
               {"strategy_id", run.strategy_id},
               {"seed", run.seed},
               {"budget", run.budget},
               {"rng_algorithm", run.rng_algorithm},
               {"dedup_mode", run.dedup_mode},
               {"steps_used", run.steps_used},
               {"completed", run.completed},
               {"aborted", run.aborted},
               {"abort_reason", run.abort_reason},
               {"initial_fingerprint", run.initial_fingerprint},
               {"visited", run.visited},
               {"visited_state_ids", run.visited_state_ids},
               {"observed_names", run.observed_names},
               {"actuated_names", run.actuated_names},
               {"trajectories", trajectories},
               {"error_records", run.error_records},
               {"discards", discards},
               {"fallbacks", fallbacks}};
  out << json{{"summary", summary}}.dump() << '\n';
  return out.str();
}

ExplorationRun parse_run_log(const std::string& jsonl) {
  ExplorationRun run;
  std::istringstream in(jsonl);
  std::string line;
  std::optional<json> summary;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& ex) {
      throw std::invalid_argument("run log line " + std::to_string(line_no) + ": " + ex.what());
    }
    if (j.contains("summary")) {
      summary = j.at("summary");
      continue;
    }
    StepRecord r;
    r.trajectory_idx = j.at("trajectory_idx").get<std::size_t>();
    r.step_idx = j.at("step_idx").get<std::size_t>();
    r.step.pre = j.at("pre_fp").get<StateFingerprint>();
    r.step.action = j.at("action").get<Action>();
    r.step.post = j.at("post_fp").get<StateFingerprint>();
    r.verdict = j.at("verdict").get<std::string>();
    run.log.push_back(std::move(r));
  }
  if (!summary) throw std::invalid_argument("run log has no summary line");
  const json& s = *summary;
  run.env_id = s.at("env_id").get<std::string>();
  run.strategy_id = s.at("strategy_id").get<std::string>();
  run.seed = s.at("seed").get<std::uint64_t>();
  run.budget = s.at("budget").get<std::int64_t>();
  run.rng_algorithm = s.at("rng_algorithm").get<std::string>();
  run.dedup_mode = s.at("dedup_mode").get<std::string>();
  run.steps_used = s.at("steps_used").get<std::int64_t>();
  run.completed = s.at("completed").get<bool>();
  run.aborted = s.at("aborted").get<bool>();
  run.abort_reason = s.at("abort_reason").get<std::string>();
  run.initial_fingerprint = s.at("initial_fingerprint").get<StateFingerprint>();
  run.visited = s.at("visited").get<std::set<StateFingerprint>>();
  run.visited_state_ids = s.at("visited_state_ids").get<std::set<std::string>>();
  run.observed_names = s.at("observed_names").get<std::set<std::string>>();
  run.actuated_names = s.at("actuated_names").get<std::map<std::string, std::int64_t>>();
  run.error_records = s.at("error_records").get<std::vector<ErrorRecord>>();
  for (const auto& d : s.at("discards")) {
    run.discards.push_back({d.at("element_name").get<std::string>(), d.at("reason").get<std::string>()});
  }
  for (const auto& f : s.at("fallbacks")) {
    run.fallbacks.push_back(
        {f.at("step").get<std::int64_t>(), f.at("status").get<std::string>(), f.at("detail").get<std::string>()});
  }
  std::size_t cursor = 0;
  std::size_t error_idx = 0;
  for (const auto& t : s.at("trajectories")) {
    Trajectory traj;
    const std::size_t n = t.at("steps").get<std::size_t>();
    for (std::size_t i = 0; i < n && cursor < run.log.size(); ++i) traj.steps.push_back(run.log[cursor++].step);
    traj.termination = termination_from_string(t.at("termination").get<std::string>());
    if (traj.termination == Termination::error_state && error_idx < run.error_records.size()) {
      traj.error_record = run.error_records[error_idx++];
    }
    run.trajectories.push_back(std::move(traj));
  }
  return run;
}

}  // namespace uiscout
