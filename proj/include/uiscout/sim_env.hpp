#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "uiscout/core.hpp"
#include "uiscout/image.hpp"
#include "uiscout/parser.hpp"

namespace uiscout {

struct ElementDef {
  std::string name;
  ElementKind kind = ElementKind::icon;
  BBox bbox;
  std::string template_id;  // icon elements
  std::string text;         // text elements
  ElementMeta meta;
  std::map<ActionKind, std::string> transitions;
};

struct StateDef {
  std::string state_id;
  Rgb background;
  bool is_error = false;
  std::vector<ElementDef> elements;

  const ElementDef* find(const std::string& name) const;
};

struct EnvDefinition {
  std::string env_id;
  std::string category;  // free-form hint, may be empty
  int width = 0;
  int height = 0;
  std::string initial_state;
  std::map<std::string, StateDef> states;
  std::vector<IconTemplate> templates;

  const StateDef& state(const std::string& id) const;
  const IconTemplate* find_template(const std::string& id) const;
};

// Malformed document; `field()` is the dotted path of the offending field.
class EnvLoadError : public std::runtime_error {
 public:
  EnvLoadError(std::string field, const std::string& message)
      : std::runtime_error(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Well-formed document that breaks a cross-reference invariant.
class EnvValidationError : public EnvLoadError {
 public:
  EnvValidationError(std::string field, const std::string& message, std::vector<std::string> offending)
      : EnvLoadError(std::move(field), message), offending_(std::move(offending)) {}
  const std::vector<std::string>& offending() const { return offending_; }

 private:
  std::vector<std::string> offending_;
};

// Template paths are resolved relative to `base_dir`.
EnvDefinition parse_env(const json& doc, const std::filesystem::path& base_dir);
EnvDefinition load_env(const std::filesystem::path& path);

// Ground-truth elements of a state, as a perfect parser would report them.
std::vector<UIElement> state_truth(const StateDef& state, const EnvDefinition& env);

// Solid background, icons blitted verbatim, text in the built-in 5x7 font
// drawn from the bbox origin and clipped to the bbox.
RgbImage render(const StateDef& state, const EnvDefinition& env);

struct Frame {
  std::shared_ptr<const RgbImage> image;
  std::string content_hash;
};

// Rendered frames by state id. Safe to share between environment instances.
class RenderCache {
 public:
  Frame get(const StateDef& state, const EnvDefinition& env);

 private:
  std::mutex mu_;
  std::map<std::string, Frame> frames_;
};

struct GroundTruth {
  std::string state_id;
  bool is_error = false;
  std::vector<UIElement> elements;
};

struct Observation {
  Frame screenshot;
  std::optional<GroundTruth> truth;  // oracle mode only
  bool target_missing = false;
  bool noop = false;
};

// Single-owner mutable session over a shared definition.
class Environment {
 public:
  explicit Environment(std::shared_ptr<const EnvDefinition> def, bool oracle_mode = true,
                       std::shared_ptr<RenderCache> cache = nullptr);

  Observation reset();
  Observation step(const Action& action);

  const EnvDefinition& definition() const { return *def_; }
  const std::string& current_state() const { return current_; }
  bool oracle_mode() const { return oracle_; }

 private:
  Observation observe() const;

  std::shared_ptr<const EnvDefinition> def_;
  bool oracle_;
  std::shared_ptr<RenderCache> cache_;
  std::string current_;
};

struct FeasibleAction {
  std::string state_id;
  std::string element_name;
  ActionKind kind;
  friend auto operator<=>(const FeasibleAction&, const FeasibleAction&) = default;
};

struct OracleSummary {
  std::string env_id;
  std::set<std::string> reachable_states;
  std::set<std::string> element_names;
  // Every (reachable state, element, kind) with kind = click or a declared
  // transition kind. Clicking an element without a click transition is
  // feasible but a no-op.
  std::set<FeasibleAction> feasible;
  std::set<std::string> error_states;
};

OracleSummary oracle_enumerate(const EnvDefinition& env);

// 5x7 glyph columns for ASCII 32..126, bit 0 is the top row.
const std::uint8_t* font5x7_glyph(char c);
inline constexpr int kGlyphAdvance = 6;
inline constexpr int kTextPadding = 1;

}  // namespace uiscout
