#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "uiscout/core.hpp"
#include "uiscout/image.hpp"

namespace uiscout {

// A manually labelled icon. `name` becomes the element name of every match.
struct IconTemplate {
  std::string template_id;
  std::string name;
  GrayImage image;
  ElementMeta meta;
};

// Throws std::invalid_argument unless the template is at least 4x4, named,
// and not a flat image (NCC is undefined for zero variance).
void validate_template(const IconTemplate& t);

struct Detection {
  std::string template_id;
  BBox bbox;
  double score = 0.0;
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Precomputed window statistics of one grayscale screen, reusable across
// templates.
class MatchSurface {
 public:
  explicit MatchSurface(const GrayImage& screen);

  const GrayImage& image() const { return *screen_; }
  int width() const { return screen_->width(); }
  int height() const { return screen_->height(); }

  // Sum and sum of squares over [x, x+w) x [y, y+h).
  std::int64_t sum(int x, int y, int w, int h) const { return rect(sum_, x, y, w, h); }
  std::int64_t sum_sq(int x, int y, int w, int h) const { return rect(sq_, x, y, w, h); }

 private:
  std::int64_t rect(const std::vector<std::int64_t>& t, int x, int y, int w, int h) const {
    const std::size_t s = static_cast<std::size_t>(screen_->width()) + 1;
    return t[(y + h) * s + (x + w)] - t[y * s + (x + w)] - t[(y + h) * s + x] + t[y * s + x];
  }

  const GrayImage* screen_;
  std::vector<std::int64_t> sum_;
  std::vector<std::int64_t> sq_;
};

// Every window whose zero-mean normalized cross-correlation with the
// template is >= tau, sized exactly like the template, by descending score
// (ties by y then x). Windows with zero variance never match.
std::vector<Detection> match_template(const GrayImage& screen, const IconTemplate& tmpl, double tau);
std::vector<Detection> match_template(const MatchSurface& surface, const IconTemplate& tmpl, double tau);

// Greedy suppression by descending score: a detection is kept iff its IoU
// with every kept detection is < overlap.
std::vector<Detection> nms(std::vector<Detection> detections, double overlap);

struct TextCapabilities {
  bool deterministic = true;
  bool region_scoped = false;
  bool concurrent_safe = true;
};

class AdapterError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Source of text elements. Implementations return kind=text elements whose
// boxes lie inside the screenshot, or throw AdapterError.
class TextRecognizer {
 public:
  virtual ~TextRecognizer() = default;
  virtual TextCapabilities capabilities() const = 0;
  virtual std::vector<UIElement> recognize(const RgbImage& screenshot) const = 0;
};

class NullTextRecognizer final : public TextRecognizer {
 public:
  TextCapabilities capabilities() const override { return {}; }
  std::vector<UIElement> recognize(const RgbImage&) const override { return {}; }
};

// Returns a fixed element list regardless of the image.
class StaticTextRecognizer final : public TextRecognizer {
 public:
  explicit StaticTextRecognizer(std::vector<UIElement> elements) : elements_(std::move(elements)) {}
  TextCapabilities capabilities() const override { return {}; }
  std::vector<UIElement> recognize(const RgbImage& screenshot) const override;

 private:
  std::vector<UIElement> elements_;
};

// Stand-in for an OCR engine on synthetic screens: returns the ground-truth
// text elements, each independently omitted with probability `dropout`. The
// omission draw is keyed on (seed, name, bbox), so one element is dropped
// consistently every time the same screen is recognized.
class OracleTextRecognizer final : public TextRecognizer {
 public:
  OracleTextRecognizer(std::vector<UIElement> truth, double dropout, std::uint64_t seed);
  TextCapabilities capabilities() const override { return {true, false, true}; }
  std::vector<UIElement> recognize(const RgbImage& screenshot) const override;

  static bool omitted(const UIElement& e, double dropout, std::uint64_t seed);

 private:
  std::vector<UIElement> truth_;
  double dropout_;
  std::uint64_t seed_;
};

std::unique_ptr<TextRecognizer> oracle_text_adapter(std::vector<UIElement> truth, double dropout,
                                                    std::uint64_t seed);

// Posts the screenshot as base64 PNG to an OCR endpoint:
//   request  {"image_png_base64": "..."}
//   response {"elements": [{"name": ..., "bbox": {...}}, ...]}
// Not exercised by default tests.
class HttpTextRecognizer final : public TextRecognizer {
 public:
  HttpTextRecognizer(std::string endpoint_url, double timeout_s);
  TextCapabilities capabilities() const override { return {false, false, true}; }
  std::vector<UIElement> recognize(const RgbImage& screenshot) const override;

 private:
  std::string url_;
  double timeout_s_;
};

struct ParserConfig {
  double tau = 0.95;
  double nms_overlap = 0.5;
  bool multiscale = false;
  // Text elements overlapping a same-named icon above this IoU are dropped.
  double dedup_iou = 0.5;
};

inline constexpr double kMultiscaleScales[] = {0.75, 0.875, 1.0, 1.125, 1.25};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& diagnostic, std::vector<UIElement> partial)
      : std::runtime_error("text adapter failed: " + diagnostic),
        diagnostic_(diagnostic), partial_(std::move(partial)) {}

  const std::string& diagnostic() const { return diagnostic_; }
  // Icon elements found before the adapter failed.
  const std::vector<UIElement>& partial() const { return partial_; }

 private:
  std::string diagnostic_;
  std::vector<UIElement> partial_;
};

std::vector<UIElement> detect_icons(const GrayImage& screen, std::span<const IconTemplate> templates,
                                    const ParserConfig& config);

// Merges icon and text elements: drops text shadowed by a same-named icon,
// canonicalizes, and fingerprints. Throws ParseError on invalid text.
ScreenParse assemble_parse(std::vector<UIElement> icons, std::vector<UIElement> texts,
                           const RgbImage& screenshot, std::string screenshot_ref, const ParserConfig& config);

// Runs the adapter; on failure throws ParseError carrying `icons`.
std::vector<UIElement> recognize_text(const TextRecognizer& text, const RgbImage& screenshot,
                                      std::vector<UIElement>& icons);

ScreenParse parse_screen(const RgbImage& screenshot, std::span<const IconTemplate> templates,
                         const TextRecognizer& text, const ParserConfig& config = {});

// Sorts elements canonically (y, x, name, kind, w, h), drops exact
// (name, kind, bbox) duplicates and assigns ids e0, e1, ...
void canonicalize_elements(std::vector<UIElement>& elements);

// Each template is <stem>.png with a sidecar <stem>.json holding
// {"template_id", "name"} and optional "meta". Sorted by template_id.
std::vector<IconTemplate> load_template_dir(const std::filesystem::path& dir);
IconTemplate load_template(const std::filesystem::path& png, const json& sidecar);

}  // namespace uiscout
