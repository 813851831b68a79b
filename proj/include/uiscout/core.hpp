#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace uiscout {

using json = nlohmann::json;

// Pixel rectangle, top-left origin. Valid boxes have w > 0 and h > 0.
struct BBox {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  int right() const { return x + w; }
  int bottom() const { return y + h; }
  std::int64_t area() const { return static_cast<std::int64_t>(w) * h; }
  double center_x() const { return x + w / 2.0; }
  double center_y() const { return y + h / 2.0; }

  bool valid() const { return w > 0 && h > 0 && x >= 0 && y >= 0; }
  bool fits_within(int width, int height) const {
    return valid() && right() <= width && bottom() <= height;
  }

  friend bool operator==(const BBox&, const BBox&) = default;
  friend auto operator<=>(const BBox&, const BBox&) = default;
};

enum class ElementKind { icon, text, control };
enum class ElementSource { template_match, ocr, synthetic_oracle };

// Free-text descriptions attached to an element by a template label or the
// environment author. Used only by instruction generation.
struct ElementMeta {
  std::optional<std::string> function_desc;
  std::optional<std::string> shape_desc;
  std::optional<std::string> neighbors_desc;

  bool empty() const { return !function_desc && !shape_desc && !neighbors_desc; }
  friend bool operator==(const ElementMeta&, const ElementMeta&) = default;
};

struct UIElement {
  std::string id;
  std::string name;
  ElementKind kind = ElementKind::icon;
  BBox bbox;
  ElementSource source = ElementSource::synthetic_oracle;
  ElementMeta meta;

  friend bool operator==(const UIElement&, const UIElement&) = default;
};

// Lowercase hex SHA-256 over the canonical element multiset.
struct StateFingerprint {
  std::string hex;

  bool empty() const { return hex.empty(); }
  friend bool operator==(const StateFingerprint&, const StateFingerprint&) = default;
  friend auto operator<=>(const StateFingerprint&, const StateFingerprint&) = default;
};

struct ScreenParse {
  std::string screenshot_ref;
  std::vector<UIElement> elements;
  StateFingerprint fingerprint;

  bool has_name(const std::string& name) const;
  friend bool operator==(const ScreenParse&, const ScreenParse&) = default;
};

enum class ActionKind { click, drag, scroll };

struct Action {
  ActionKind kind = ActionKind::click;
  std::string target_name;
  std::optional<int> dx;
  std::optional<int> dy;
  std::optional<int> ticks;

  static Action click(std::string name);
  static Action drag(std::string name, int dx, int dy);
  static Action scroll(std::string name, int ticks);

  // click: no params; drag: dx and dy; scroll: ticks != 0.
  bool well_formed() const;

  friend bool operator==(const Action&, const Action&) = default;
};

enum class Termination { no_new_elements, no_change, error_state, budget_exhausted };

struct TrajectoryStep {
  StateFingerprint pre;
  Action action;
  StateFingerprint post;

  friend bool operator==(const TrajectoryStep&, const TrajectoryStep&) = default;
};

struct ErrorRecord {
  std::string reason;
  std::vector<TrajectoryStep> steps;

  friend bool operator==(const ErrorRecord&, const ErrorRecord&) = default;
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
  Termination termination = Termination::no_new_elements;
  std::optional<ErrorRecord> error_record;

  // Step chaining and the error_state <=> error_record rule.
  bool consistent() const;
  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

double iou(const BBox& a, const BBox& b);

inline constexpr double kGroundingIouThreshold = 0.3;

// Strictly greater than the threshold; a tie counts as incorrect.
bool grounding_correct(const BBox& pred, const BBox& gt);

inline constexpr int kFingerprintGrid = 4;

StateFingerprint state_fingerprint(const std::vector<UIElement>& elements);

// Enum <-> string. Unknown strings throw std::invalid_argument.
std::string to_string(ElementKind k);
std::string to_string(ElementSource s);
std::string to_string(ActionKind k);
std::string to_string(Termination t);
ElementKind element_kind_from_string(const std::string& s);
ElementSource element_source_from_string(const std::string& s);
ActionKind action_kind_from_string(const std::string& s);
Termination termination_from_string(const std::string& s);

void to_json(json& j, const BBox& b);
void from_json(const json& j, BBox& b);
void to_json(json& j, const ElementMeta& m);
void from_json(const json& j, ElementMeta& m);
void to_json(json& j, const UIElement& e);
void from_json(const json& j, UIElement& e);
void to_json(json& j, const StateFingerprint& f);
void from_json(const json& j, StateFingerprint& f);
void to_json(json& j, const ScreenParse& p);
void from_json(const json& j, ScreenParse& p);
void to_json(json& j, const Action& a);
void from_json(const json& j, Action& a);
void to_json(json& j, const TrajectoryStep& s);
void from_json(const json& j, TrajectoryStep& s);
void to_json(json& j, const ErrorRecord& r);
void from_json(const json& j, ErrorRecord& r);
void to_json(json& j, const Trajectory& t);
void from_json(const json& j, Trajectory& t);

}  // namespace uiscout
