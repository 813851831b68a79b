#include "uiscout/sim_env.hpp"

#include <algorithm>
#include <deque>
#include <fstream>

namespace uiscout {

const ElementDef* StateDef::find(const std::string& name) const {
  for (const auto& e : elements) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

const StateDef& EnvDefinition::state(const std::string& id) const {
  auto it = states.find(id);
  if (it == states.end()) throw std::out_of_range("unknown state '" + id + "'");
  return it->second;
}

const IconTemplate* EnvDefinition::find_template(const std::string& id) const {
  for (const auto& t : templates) {
    if (t.template_id == id) return &t;
  }
  return nullptr;
}

namespace {

const json& field(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw EnvLoadError(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw EnvLoadError(path.empty() ? key : path + "." + key, "missing field");
  return *it;
}

template <typename T>
T get(const json& obj, const char* key, const std::string& path) {
  const json& v = field(obj, key, path);
  try {
    return v.get<T>();
  } catch (const json::exception& ex) {
    throw EnvLoadError(path.empty() ? key : path + "." + key, std::string("wrong type: ") + ex.what());
  }
}

BBox get_bbox(const json& obj, const std::string& path) {
  const json& b = field(obj, "bbox", path);
  const std::string p = path + ".bbox";
  return BBox{get<int>(b, "x", p), get<int>(b, "y", p), get<int>(b, "w", p), get<int>(b, "h", p)};
}

ElementMeta get_meta(const json& obj, const std::string& path) {
  if (!obj.contains("meta")) return {};
  try {
    return obj.at("meta").get<ElementMeta>();
  } catch (const json::exception& ex) {
    throw EnvLoadError(path + ".meta", ex.what());
  }
}

}  // namespace

EnvDefinition parse_env(const json& doc, const std::filesystem::path& base_dir) {
  EnvDefinition env;
  env.env_id = get<std::string>(doc, "env_id", "");
  if (env.env_id.empty()) throw EnvLoadError("env_id", "must be non-empty");
  env.category = doc.value("category", std::string{});
  const json& screen = field(doc, "screen", "");
  env.width = get<int>(screen, "w", "screen");
  env.height = get<int>(screen, "h", "screen");
  if (env.width <= 0 || env.height <= 0) throw EnvLoadError("screen", "dimensions must be positive");
  env.initial_state = get<std::string>(doc, "initial_state", "");

  const json& templates = field(doc, "templates", "");
  if (!templates.is_array()) throw EnvLoadError("templates", "expected an array");
  for (std::size_t i = 0; i < templates.size(); ++i) {
    const std::string p = "templates[" + std::to_string(i) + "]";
    const json& t = templates[i];
    const auto id = get<std::string>(t, "template_id", p);
    if (env.find_template(id)) throw EnvValidationError(p + ".template_id", "duplicate template id", {id});
    json sidecar{{"template_id", id}, {"name", get<std::string>(t, "name", p)}};
    if (t.contains("meta")) sidecar["meta"] = t.at("meta");
    const auto png = base_dir / get<std::string>(t, "path", p);
    try {
      env.templates.push_back(load_template(png, sidecar));
    } catch (const std::exception& ex) {
      throw EnvLoadError(p, ex.what());
    }
  }

  const json& states = field(doc, "states", "");
  if (!states.is_object()) throw EnvLoadError("states", "expected an object");
  std::vector<std::string> dangling;
  for (const auto& [id, s] : states.items()) {
    const std::string p = "states." + id;
    StateDef st;
    st.state_id = id;
    const auto bg = get<std::vector<int>>(s, "background", p);
    if (bg.size() != 3 || std::any_of(bg.begin(), bg.end(), [](int v) { return v < 0 || v > 255; })) {
      throw EnvLoadError(p + ".background", "expected [r, g, b] with components in 0..255");
    }
    st.background = Rgb{static_cast<std::uint8_t>(bg[0]), static_cast<std::uint8_t>(bg[1]),
                        static_cast<std::uint8_t>(bg[2])};
    st.is_error = s.value("is_error", false);
    const json& elements = field(s, "elements", p);
    if (!elements.is_array()) throw EnvLoadError(p + ".elements", "expected an array");
    for (std::size_t i = 0; i < elements.size(); ++i) {
      const std::string ep = p + ".elements[" + std::to_string(i) + "]";
      const json& e = elements[i];
      ElementDef el;
      el.name = get<std::string>(e, "name", ep);
      if (el.name.empty()) throw EnvLoadError(ep + ".name", "must be non-empty");
      try {
        el.kind = element_kind_from_string(get<std::string>(e, "kind", ep));
      } catch (const std::invalid_argument& ex) {
        throw EnvLoadError(ep + ".kind", ex.what());
      }
      if (el.kind == ElementKind::control) throw EnvLoadError(ep + ".kind", "must be icon or text");
      el.bbox = get_bbox(e, ep);
      if (!el.bbox.fits_within(env.width, env.height)) {
        throw EnvValidationError(ep + ".bbox", "does not fit the screen", {el.name});
      }
      const json& render = field(e, "render", ep);
      if (el.kind == ElementKind::icon) {
        el.template_id = get<std::string>(render, "template_id", ep + ".render");
        const IconTemplate* t = env.find_template(el.template_id);
        if (!t) throw EnvValidationError(ep + ".render.template_id", "unknown template", {el.template_id});
        if (t->image.width() != el.bbox.w || t->image.height() != el.bbox.h) {
          throw EnvValidationError(ep + ".bbox", "icon bbox must match its template size", {el.name});
        }
        if (t->name != el.name) {
          throw EnvValidationError(ep + ".name", "icon name must equal its template label '" + t->name + "'",
                                   {el.name});
        }
      } else {
        el.text = get<std::string>(render, "text", ep + ".render");
        if (el.text.empty()) throw EnvLoadError(ep + ".render.text", "must be non-empty");
      }
      el.meta = get_meta(e, ep);
      if (e.contains("transitions")) {
        const json& tr = e.at("transitions");
        if (!tr.is_object()) throw EnvLoadError(ep + ".transitions", "expected an object");
        for (const auto& [kind, target] : tr.items()) {
          ActionKind k;
          try {
            k = action_kind_from_string(kind);
          } catch (const std::invalid_argument& ex) {
            throw EnvLoadError(ep + ".transitions." + kind, ex.what());
          }
          if (!target.is_string()) throw EnvLoadError(ep + ".transitions." + kind, "expected a state id");
          el.transitions[k] = target.get<std::string>();
        }
      }
      if (st.find(el.name)) throw EnvValidationError(ep + ".name", "duplicate element name in state", {el.name});
      st.elements.push_back(std::move(el));
    }
    if (st.is_error) {
      for (const auto& el : st.elements) {
        if (!el.transitions.empty()) {
          throw EnvValidationError(p, "error states must not have outgoing transitions", {el.name});
        }
      }
    }
    env.states.emplace(id, std::move(st));
  }

  for (const auto& [id, st] : env.states) {
    for (const auto& el : st.elements) {
      for (const auto& [kind, target] : el.transitions) {
        if (!env.states.count(target)) dangling.push_back(target);
      }
    }
  }
  if (!dangling.empty()) {
    std::sort(dangling.begin(), dangling.end());
    dangling.erase(std::unique(dangling.begin(), dangling.end()), dangling.end());
    std::string list;
    for (const auto& d : dangling) list += (list.empty() ? "" : ", ") + d;
    throw EnvValidationError("transitions", "undefined transition target(s): " + list, dangling);
  }
  if (!env.states.count(env.initial_state)) {
    throw EnvValidationError("initial_state", "undefined state '" + env.initial_state + "'",
                             {env.initial_state});
  }
  return env;
}

EnvDefinition load_env(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw EnvLoadError("", "cannot open env file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& ex) {
    throw EnvLoadError("", "malformed JSON in " + path.string() + ": " + ex.what());
  }
  return parse_env(doc, path.parent_path());
}

std::vector<UIElement> state_truth(const StateDef& state, const EnvDefinition& env) {
  std::vector<UIElement> out;
  out.reserve(state.elements.size());
  for (const auto& el : state.elements) {
    UIElement e;
    e.name = el.name;
    e.kind = el.kind;
    e.bbox = el.bbox;
    e.source = ElementSource::synthetic_oracle;
    if (el.kind == ElementKind::icon) {
      if (const IconTemplate* t = env.find_template(el.template_id)) e.meta = t->meta;
    }
    if (el.meta.function_desc) e.meta.function_desc = el.meta.function_desc;
    if (el.meta.shape_desc) e.meta.shape_desc = el.meta.shape_desc;
    if (el.meta.neighbors_desc) e.meta.neighbors_desc = el.meta.neighbors_desc;
    out.push_back(std::move(e));
  }
  canonicalize_elements(out);
  return out;
}

namespace {

void draw_text(RgbImage& img, const ElementDef& el, Rgb ink) {
  const BBox& box = el.bbox;
  int pen_x = box.x + kTextPadding;
  const int pen_y = box.y + kTextPadding;
  for (char c : el.text) {
    const std::uint8_t* glyph = font5x7_glyph(c);
    for (int col = 0; col < 5; ++col) {
      for (int row = 0; row < 7; ++row) {
        if (!((glyph[col] >> row) & 1)) continue;
        const int px = pen_x + col;
        const int py = pen_y + row;
        if (px < box.x || py < box.y || px >= box.right() || py >= box.bottom()) continue;
        std::uint8_t* d = img.pixel(px, py);
        d[0] = ink.r;
        d[1] = ink.g;
        d[2] = ink.b;
      }
    }
    pen_x += kGlyphAdvance;
    if (pen_x >= box.right()) break;
  }
}

}  // namespace

RgbImage render(const StateDef& state, const EnvDefinition& env) {
  RgbImage img(env.width, env.height);
  auto px = img.bytes();
  for (std::size_t i = 0; i < px.size(); i += 3) {
    px[i] = state.background.r;
    px[i + 1] = state.background.g;
    px[i + 2] = state.background.b;
  }
  const bool dark = luma(state.background.r, state.background.g, state.background.b) < 128;
  const Rgb ink = dark ? Rgb{240, 240, 240} : Rgb{16, 16, 16};
  for (const auto& el : state.elements) {
    if (el.kind == ElementKind::icon) {
      if (const IconTemplate* t = env.find_template(el.template_id)) blit(img, t->image, el.bbox.x, el.bbox.y);
    } else {
      draw_text(img, el, ink);
    }
  }
  return img;
}

Frame RenderCache::get(const StateDef& state, const EnvDefinition& env) {
  std::lock_guard lock(mu_);
  auto it = frames_.find(state.state_id);
  if (it != frames_.end()) return it->second;
  auto image = std::make_shared<const RgbImage>(render(state, env));
  Frame f{image, content_hash(*image)};
  frames_.emplace(state.state_id, f);
  return f;
}

Environment::Environment(std::shared_ptr<const EnvDefinition> def, bool oracle_mode,
                         std::shared_ptr<RenderCache> cache)
    : def_(std::move(def)), oracle_(oracle_mode), cache_(std::move(cache)) {
  if (!def_) throw std::invalid_argument("null environment definition");
  if (!cache_) cache_ = std::make_shared<RenderCache>();
  current_ = def_->initial_state;
}

Observation Environment::observe() const {
  const StateDef& st = def_->state(current_);
  Observation obs;
  obs.screenshot = cache_->get(st, *def_);
  if (oracle_) obs.truth = GroundTruth{st.state_id, st.is_error, state_truth(st, *def_)};
  return obs;
}

Observation Environment::reset() {
  current_ = def_->initial_state;
  return observe();
}

Observation Environment::step(const Action& action) {
  if (!action.well_formed()) throw std::invalid_argument("malformed action on '" + action.target_name + "'");
  const StateDef& st = def_->state(current_);
  const ElementDef* el = st.find(action.target_name);
  if (!el) {
    Observation obs = observe();
    obs.target_missing = true;
    obs.noop = true;
    return obs;
  }
  auto it = el->transitions.find(action.kind);
  if (it == el->transitions.end()) {
    Observation obs = observe();
    obs.noop = true;
    return obs;
  }
  current_ = it->second;
  return observe();
}

OracleSummary oracle_enumerate(const EnvDefinition& env) {
  OracleSummary out;
  out.env_id = env.env_id;
  std::deque<std::string> queue{env.initial_state};
  out.reachable_states.insert(env.initial_state);
  while (!queue.empty()) {
    const StateDef& st = env.state(queue.front());
    queue.pop_front();
    if (st.is_error) out.error_states.insert(st.state_id);
    for (const auto& el : st.elements) {
      out.element_names.insert(el.name);
      out.feasible.insert({st.state_id, el.name, ActionKind::click});
      for (const auto& [kind, target] : el.transitions) {
        out.feasible.insert({st.state_id, el.name, kind});
        if (out.reachable_states.insert(target).second) queue.push_back(target);
      }
    }
  }
  return out;
}

}  // namespace uiscout
