#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <deque>

#include "support.hpp"
#include "uiscout/sim_env.hpp"

using namespace uiscout;

namespace {

json tiny_env() {
  return json::parse(R"({
    "env_id": "tiny", "category": "micro", "screen": {"w": 100, "h": 60},
    "initial_state": "a", "templates": [],
    "states": {
      "a": {"background": [240, 240, 240], "elements": [
        {"name": "Go", "kind": "text", "bbox": {"x": 2, "y": 2, "w": 13, "h": 9},
         "render": {"text": "Go"}, "transitions": {"click": "b", "scroll": "c"}},
        {"name": "Idle", "kind": "text", "bbox": {"x": 2, "y": 20, "w": 25, "h": 9},
         "render": {"text": "Idle"}}]},
      "b": {"background": [20, 20, 30], "elements": [
        {"name": "Back", "kind": "text", "bbox": {"x": 2, "y": 2, "w": 25, "h": 9},
         "render": {"text": "Back"}, "transitions": {"click": "a"}}]},
      "c": {"background": [120, 30, 30], "is_error": true, "elements": [
        {"name": "Error: nope", "kind": "text", "bbox": {"x": 2, "y": 2, "w": 67, "h": 9},
         "render": {"text": "Error: nope"}}]},
      "orphan": {"background": [0, 0, 0], "elements": []}
    }})");
}

std::string load_error(const json& doc) {
  try {
    parse_env(doc, ".");
  } catch (const EnvLoadError& e) {
    return e.field() + ": " + e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("oracle agrees with the fixture generator's own BFS") {
  const json counts = testing::oracle_counts();
  REQUIRE(counts.size() >= 7);
  for (const auto& [rel, c] : counts.items()) {
    CAPTURE(rel);
    const auto def = load_env(testing::fixtures() / rel);
    const OracleSummary o = oracle_enumerate(def);
    CHECK(o.env_id == def.env_id);
    CHECK(o.reachable_states.size() == c.at("reachable_states").get<std::size_t>());
    CHECK(o.element_names.size() == c.at("element_names").get<std::size_t>());
    CHECK(o.error_states.size() == c.at("error_states").get<std::size_t>());
    CHECK(o.feasible.size() == c.at("feasible_actions").get<std::size_t>());
  }
}

TEST_CASE("suite envs are large enough") {
  for (const auto& f : testing::suite_files()) {
    const auto def = load_env(f);
    CHECK(oracle_enumerate(def).reachable_states.size() >= 60);
    CHECK_FALSE(def.category.empty());
  }
  CHECK(oracle_enumerate(load_env(testing::env_file("office_mini"))).reachable_states.size() == 12);
}

TEST_CASE("unreachable states are excluded by the oracle") {
  const auto def = parse_env(tiny_env(), ".");
  const auto o = oracle_enumerate(def);
  CHECK(o.reachable_states == std::set<std::string>{"a", "b", "c"});
  CHECK(o.error_states == std::set<std::string>{"c"});
  CHECK(o.feasible.count({"a", "Go", ActionKind::scroll}) == 1);
  CHECK(o.feasible.count({"a", "Idle", ActionKind::click}) == 1);
  CHECK(o.feasible.count({"a", "Idle", ActionKind::drag}) == 0);
}

TEST_CASE("step semantics") {
  auto def = std::make_shared<const EnvDefinition>(parse_env(tiny_env(), "."));
  Environment env(def);
  const Observation first = env.reset();
  CHECK(env.current_state() == "a");
  REQUIRE(first.truth);
  CHECK(first.truth->elements.size() == 2);

  Observation o = env.step(Action::click("Idle"));
  CHECK(o.noop);
  CHECK_FALSE(o.target_missing);
  CHECK(o.screenshot.content_hash == first.screenshot.content_hash);

  o = env.step(Action::click("Nowhere"));
  CHECK(o.target_missing);
  CHECK(o.noop);
  CHECK(env.current_state() == "a");

  o = env.step(Action::drag("Go", 3, 0));  // no drag transition declared
  CHECK(o.noop);

  o = env.step(Action::click("Go"));
  CHECK_FALSE(o.noop);
  CHECK(env.current_state() == "b");
  CHECK_FALSE(o.truth->is_error);

  env.reset();
  o = env.step(Action::scroll("Go", 1));
  CHECK(env.current_state() == "c");
  CHECK(o.truth->is_error);

  Action broken = Action::scroll("Go", 1);
  broken.ticks = 0;
  CHECK_THROWS_AS(env.step(broken), std::invalid_argument);

  Environment blind(def, false);
  CHECK_FALSE(blind.reset().truth.has_value());
}

TEST_CASE("rendering is deterministic and confined to element boxes") {
  const auto def = load_env(testing::env_file("office_mini"));
  for (const auto& [id, st] : def.states) {
    const RgbImage a = render(st, def);
    CHECK(a == render(st, def));
    CHECK(a.width() == def.width);
    for (int y = 0; y < a.height(); ++y) {
      for (int x = 0; x < a.width(); ++x) {
        bool inside = false;
        for (const auto& e : st.elements) {
          inside = inside || (x >= e.bbox.x && x < e.bbox.right() && y >= e.bbox.y && y < e.bbox.bottom());
        }
        if (inside) continue;
        const std::uint8_t* p = a.pixel(x, y);
        REQUIRE((p[0] == st.background.r && p[1] == st.background.g && p[2] == st.background.b));
      }
    }
    for (const auto& e : st.elements) {
      if (e.kind != ElementKind::icon) continue;
      const IconTemplate* t = def.find_template(e.template_id);
      REQUIRE(t);
      CHECK(crop(to_gray(a), e.bbox.x, e.bbox.y, e.bbox.w, e.bbox.h) == t->image);
    }
  }
}

TEST_CASE("render cache returns one frame per state") {
  auto def = testing::load(testing::env_file("chain3"));
  auto cache = std::make_shared<RenderCache>();
  Environment a(def, true, cache), b(def, true, cache);
  const auto fa = a.reset().screenshot;
  const auto fb = b.reset().screenshot;
  CHECK(fa.image.get() == fb.image.get());
  CHECK(fa.content_hash == content_hash(*fa.image));
}

TEST_CASE("load errors name the offending field") {
  json doc = tiny_env();
  doc["states"]["a"]["elements"][0].erase("bbox");
  CHECK(load_error(doc).find("states.a.elements[0].bbox") == 0);

  doc = tiny_env();
  doc["states"]["a"]["elements"][0]["kind"] = "widget";
  CHECK(load_error(doc).find("states.a.elements[0].kind") == 0);

  doc = tiny_env();
  doc["states"]["b"]["elements"][0]["transitions"]["click"] = "ghost";
  doc["states"]["a"]["elements"][1]["transitions"] = {{"click", "phantom"}};
  try {
    parse_env(doc, ".");
    FAIL("expected validation error");
  } catch (const EnvValidationError& e) {
    CHECK(e.offending() == std::vector<std::string>{"ghost", "phantom"});
  }

  doc = tiny_env();
  doc["states"]["c"]["elements"][0]["transitions"] = {{"click", "a"}};
  CHECK_THROWS_AS(parse_env(doc, "."), EnvValidationError);

  doc = tiny_env();
  doc["initial_state"] = "zzz";
  CHECK_THROWS_AS(parse_env(doc, "."), EnvValidationError);

  doc = tiny_env();
  doc["states"]["a"]["elements"][0]["bbox"]["x"] = 95;
  CHECK_THROWS_AS(parse_env(doc, "."), EnvValidationError);

  CHECK_THROWS_AS(load_env(testing::fixtures() / "missing.json"), EnvLoadError);
}

TEST_CASE("truth carries template meta for icons") {
  const auto def = load_env(testing::env_file("office_mini"));
  const auto truth = state_truth(def.state("doc"), def);
  bool found = false;
  for (const auto& e : truth) {
    if (e.name == "Bold icon") {
      found = true;
      CHECK(e.meta.function_desc == std::optional<std::string>("Makes text bold"));
    }
  }
  CHECK(found);
}

TEST_CASE("render and parse agree on every fixture state") {
  const json counts = testing::oracle_counts();
  for (const auto& [rel, c] : counts.items()) {
    CAPTURE(rel);
    const auto def = load_env(testing::fixtures() / rel);
    for (const auto& [id, st] : def.states) {
      CAPTURE(id);
      const auto truth = state_truth(st, def);
      const OracleTextRecognizer text(truth, 0.0, 1);
      CHECK(parse_screen(render(st, def), def.templates, text).fingerprint == state_fingerprint(truth));
    }
  }
}

TEST_CASE("reachable set is closed under feasible actions") {
  const json counts = testing::oracle_counts();
  for (const auto& [rel, c] : counts.items()) {
    CAPTURE(rel);
    auto def = testing::load(testing::fixtures() / rel);
    const auto o = oracle_enumerate(*def);
    Environment env(def);
    // Drive the real env: BFS over states by shortest action paths.
    std::map<std::string, std::vector<Action>> path{{def->initial_state, {}}};
    std::deque<std::string> queue{def->initial_state};
    while (!queue.empty()) {
      const std::string s = queue.front();
      queue.pop_front();
      for (const auto& f : o.feasible) {
        if (f.state_id != s) continue;
        env.reset();
        for (const auto& a : path[s]) env.step(a);
        REQUIRE(env.current_state() == s);
        const Action a = f.kind == ActionKind::click  ? Action::click(f.element_name)
                         : f.kind == ActionKind::drag ? Action::drag(f.element_name, 8, 0)
                                                      : Action::scroll(f.element_name, 1);
        env.step(a);
        CHECK(o.reachable_states.count(env.current_state()) == 1);
        if (!path.count(env.current_state())) {
          auto p = path[s];
          p.push_back(a);
          path[env.current_state()] = p;
          queue.push_back(env.current_state());
        }
      }
    }
    CHECK(path.size() == o.reachable_states.size());
  }
}
