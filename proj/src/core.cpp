#include "uiscout/core.hpp"

#include <algorithm>
#include <tuple>

#include "uiscout/util.hpp"

namespace uiscout {

bool ScreenParse::has_name(const std::string& name) const {
  return std::any_of(elements.begin(), elements.end(),
                     [&](const UIElement& e) { return e.name == name; });
}

Action Action::click(std::string name) {
  Action a;
  a.kind = ActionKind::click;
  a.target_name = std::move(name);
  return a;
}

Action Action::drag(std::string name, int dx, int dy) {
  Action a;
  a.kind = ActionKind::drag;
  a.target_name = std::move(name);
  a.dx = dx;
  a.dy = dy;
  return a;
}

Action Action::scroll(std::string name, int ticks) {
  Action a;
  a.kind = ActionKind::scroll;
  a.target_name = std::move(name);
  a.ticks = ticks;
  return a;
}

bool Action::well_formed() const {
  if (target_name.empty()) return false;
  switch (kind) {
    case ActionKind::click:
      return !dx && !dy && !ticks;
    case ActionKind::drag:
      return dx && dy && !ticks;
    case ActionKind::scroll:
      return !dx && !dy && ticks && *ticks != 0;
  }
  return false;
}

bool Trajectory::consistent() const {
  for (std::size_t i = 1; i < steps.size(); ++i) {
    if (steps[i - 1].post != steps[i].pre) return false;
  }
  if (termination == Termination::error_state && !error_record) return false;
  return true;
}

double iou(const BBox& a, const BBox& b) {
  const std::int64_t ix = std::max(0, std::min(a.right(), b.right()) - std::max(a.x, b.x));
  const std::int64_t iy = std::max(0, std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y));
  const std::int64_t inter = ix * iy;
  const std::int64_t uni = a.area() + b.area() - inter;
  if (uni <= 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

bool grounding_correct(const BBox& pred, const BBox& gt) {
  return iou(pred, gt) > kGroundingIouThreshold;
}

StateFingerprint state_fingerprint(const std::vector<UIElement>& elements) {
  using Key = std::tuple<std::string, std::string, int, int, int, int>;
  std::vector<Key> keys;
  keys.reserve(elements.size());
  for (const auto& e : elements) {
    keys.emplace_back(e.name, to_string(e.kind), e.bbox.x / kFingerprintGrid,
                      e.bbox.y / kFingerprintGrid, e.bbox.w / kFingerprintGrid,
                      e.bbox.h / kFingerprintGrid);
  }
  std::sort(keys.begin(), keys.end());
  json canon = json::array();
  for (const auto& [name, kind, x, y, w, h] : keys) {
    canon.push_back(json::array({name, kind, x, y, w, h}));
  }
  return StateFingerprint{sha256_hex(canon.dump())};
}

namespace {

template <typename E, std::size_t N>
const char* lookup(E value, const std::pair<E, const char*> (&table)[N]) {
  for (const auto& [v, s] : table) {
    if (v == value) return s;
  }
  throw std::invalid_argument("unknown enum value");
}

template <typename E, std::size_t N>
E reverse_lookup(const std::string& s, const std::pair<E, const char*> (&table)[N],
                 const char* what) {
  for (const auto& [v, name] : table) {
    if (s == name) return v;
  }
  throw std::invalid_argument(std::string("unknown ") + what + ": '" + s + "'");
}

constexpr std::pair<ElementKind, const char*> kKinds[] = {
    {ElementKind::icon, "icon"}, {ElementKind::text, "text"}, {ElementKind::control, "control"}};
constexpr std::pair<ElementSource, const char*> kSources[] = {
    {ElementSource::template_match, "template"},
    {ElementSource::ocr, "ocr"},
    {ElementSource::synthetic_oracle, "synthetic_oracle"}};
constexpr std::pair<ActionKind, const char*> kActions[] = {
    {ActionKind::click, "click"}, {ActionKind::drag, "drag"}, {ActionKind::scroll, "scroll"}};
constexpr std::pair<Termination, const char*> kTerminations[] = {
    {Termination::no_new_elements, "no_new_elements"},
    {Termination::no_change, "no_change"},
    {Termination::error_state, "error_state"},
    {Termination::budget_exhausted, "budget_exhausted"}};

}  // namespace

std::string to_string(ElementKind k) { return lookup(k, kKinds); }
std::string to_string(ElementSource s) { return lookup(s, kSources); }
std::string to_string(ActionKind k) { return lookup(k, kActions); }
std::string to_string(Termination t) { return lookup(t, kTerminations); }
ElementKind element_kind_from_string(const std::string& s) {
  return reverse_lookup(s, kKinds, "element kind");
}
ElementSource element_source_from_string(const std::string& s) {
  return reverse_lookup(s, kSources, "element source");
}
ActionKind action_kind_from_string(const std::string& s) {
  return reverse_lookup(s, kActions, "action kind");
}
Termination termination_from_string(const std::string& s) {
  return reverse_lookup(s, kTerminations, "termination");
}

void to_json(json& j, const BBox& b) { j = json{{"x", b.x}, {"y", b.y}, {"w", b.w}, {"h", b.h}}; }

void from_json(const json& j, BBox& b) {
  b.x = j.at("x").get<int>();
  b.y = j.at("y").get<int>();
  b.w = j.at("w").get<int>();
  b.h = j.at("h").get<int>();
}

void to_json(json& j, const ElementMeta& m) {
  j = json::object();
  if (m.function_desc) j["function_desc"] = *m.function_desc;
  if (m.neighbors_desc) j["neighbors_desc"] = *m.neighbors_desc;
  if (m.shape_desc) j["shape_desc"] = *m.shape_desc;
}

void from_json(const json& j, ElementMeta& m) {
  m = ElementMeta{};
  if (j.contains("function_desc")) m.function_desc = j.at("function_desc").get<std::string>();
  if (j.contains("neighbors_desc")) m.neighbors_desc = j.at("neighbors_desc").get<std::string>();
  if (j.contains("shape_desc")) m.shape_desc = j.at("shape_desc").get<std::string>();
}

void to_json(json& j, const UIElement& e) {
  j = json{{"id", e.id},
           {"name", e.name},
           {"kind", to_string(e.kind)},
           {"bbox", e.bbox},
           {"source", to_string(e.source)}};
  if (!e.meta.empty()) j["meta"] = e.meta;
}

void from_json(const json& j, UIElement& e) {
  e.id = j.value("id", std::string{});
  e.name = j.at("name").get<std::string>();
  e.kind = element_kind_from_string(j.at("kind").get<std::string>());
  e.bbox = j.at("bbox").get<BBox>();
  e.source = element_source_from_string(j.value("source", std::string{"synthetic_oracle"}));
  e.meta = j.contains("meta") ? j.at("meta").get<ElementMeta>() : ElementMeta{};
}

void to_json(json& j, const StateFingerprint& f) { j = f.hex; }
void from_json(const json& j, StateFingerprint& f) { f.hex = j.get<std::string>(); }

void to_json(json& j, const ScreenParse& p) {
  j = json{{"screenshot_ref", p.screenshot_ref},
           {"elements", p.elements},
           {"fingerprint", p.fingerprint}};
}

void from_json(const json& j, ScreenParse& p) {
  p.screenshot_ref = j.at("screenshot_ref").get<std::string>();
  p.elements = j.at("elements").get<std::vector<UIElement>>();
  p.fingerprint = j.at("fingerprint").get<StateFingerprint>();
}

void to_json(json& j, const Action& a) {
  j = json{{"kind", to_string(a.kind)}, {"target_name", a.target_name}};
  if (a.dx) j["dx"] = *a.dx;
  if (a.dy) j["dy"] = *a.dy;
  if (a.ticks) j["ticks"] = *a.ticks;
}

void from_json(const json& j, Action& a) {
  a = Action{};
  a.kind = action_kind_from_string(j.at("kind").get<std::string>());
  a.target_name = j.at("target_name").get<std::string>();
  if (j.contains("dx")) a.dx = j.at("dx").get<int>();
  if (j.contains("dy")) a.dy = j.at("dy").get<int>();
  if (j.contains("ticks")) a.ticks = j.at("ticks").get<int>();
}

void to_json(json& j, const TrajectoryStep& s) {
  j = json{{"pre_fp", s.pre}, {"action", s.action}, {"post_fp", s.post}};
}

void from_json(const json& j, TrajectoryStep& s) {
  s.pre = j.at("pre_fp").get<StateFingerprint>();
  s.action = j.at("action").get<Action>();
  s.post = j.at("post_fp").get<StateFingerprint>();
}

void to_json(json& j, const ErrorRecord& r) { j = json{{"reason", r.reason}, {"steps", r.steps}}; }

void from_json(const json& j, ErrorRecord& r) {
  r.reason = j.at("reason").get<std::string>();
  r.steps = j.at("steps").get<std::vector<TrajectoryStep>>();
}

void to_json(json& j, const Trajectory& t) {
  j = json{{"steps", t.steps}, {"termination", to_string(t.termination)}};
  if (t.error_record) j["error_record"] = *t.error_record;
}

void from_json(const json& j, Trajectory& t) {
  t.steps = j.at("steps").get<std::vector<TrajectoryStep>>();
  t.termination = termination_from_string(j.at("termination").get<std::string>());
  if (j.contains("error_record")) {
    t.error_record = j.at("error_record").get<ErrorRecord>();
  } else {
    t.error_record.reset();
  }
}

}  // namespace uiscout
