#include "uiscout/parser.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <tuple>

#include "uiscout/util.hpp"

namespace uiscout {

void validate_template(const IconTemplate& t) {
  if (t.name.empty()) throw std::invalid_argument("template '" + t.template_id + "' has no name");
  if (t.image.width() < 4 || t.image.height() < 4) {
    throw std::invalid_argument("template '" + t.template_id + "' is smaller than 4x4");
  }
  const auto px = t.image.bytes();
  if (std::all_of(px.begin(), px.end(), [&](std::uint8_t v) { return v == px[0]; })) {
    throw std::invalid_argument("template '" + t.template_id + "' is a flat image");
  }
}

MatchSurface::MatchSurface(const GrayImage& screen) : screen_(&screen) {
  const int w = screen.width();
  const int h = screen.height();
  const std::size_t stride = static_cast<std::size_t>(w) + 1;
  sum_.assign(stride * (h + 1), 0);
  sq_.assign(stride * (h + 1), 0);
  for (int y = 0; y < h; ++y) {
    std::int64_t row_sum = 0;
    std::int64_t row_sq = 0;
    const std::uint8_t* row = screen.pixel(0, y);
    for (int x = 0; x < w; ++x) {
      row_sum += row[x];
      row_sq += static_cast<std::int64_t>(row[x]) * row[x];
      sum_[(y + 1) * stride + x + 1] = sum_[y * stride + x + 1] + row_sum;
      sq_[(y + 1) * stride + x + 1] = sq_[y * stride + x + 1] + row_sq;
    }
  }
}

namespace {

// Template-side constants. With n pixels and template sum S_T, the weights
// c(p) = n*T(p) - S_T make sum_p I(p) c(p) equal to n^2 times the window
// covariance, so the score is that sum over sqrt(D_I * D_T).
struct PreparedTemplate {
  int w = 0;
  int h = 0;
  std::int64_t n = 0;
  std::int64_t d_t = 0;
  std::vector<std::int32_t> weights;
  std::vector<std::int64_t> rest_weight_sum;  // per row r: sum of weights in rows >= r
  std::vector<double> rest_weight_norm;       // per row r: sqrt(sum of weights^2 in rows >= r)
};

PreparedTemplate prepare(const GrayImage& img) {
  PreparedTemplate p;
  p.w = img.width();
  p.h = img.height();
  p.n = static_cast<std::int64_t>(p.w) * p.h;
  std::int64_t s = 0;
  std::int64_t ss = 0;
  for (std::uint8_t v : img.bytes()) {
    s += v;
    ss += static_cast<std::int64_t>(v) * v;
  }
  p.d_t = p.n * ss - s * s;
  p.weights.resize(static_cast<std::size_t>(p.n));
  for (std::size_t i = 0; i < p.weights.size(); ++i) {
    p.weights[i] = static_cast<std::int32_t>(p.n * img.bytes()[i] - s);
  }
  p.rest_weight_sum.assign(p.h + 1, 0);
  std::vector<double> rest_sq(p.h + 1, 0.0);
  for (int r = p.h - 1; r >= 0; --r) {
    std::int64_t rs = 0;
    double rq = 0.0;
    for (int c = 0; c < p.w; ++c) {
      const std::int64_t wgt = p.weights[static_cast<std::size_t>(r) * p.w + c];
      rs += wgt;
      rq += static_cast<double>(wgt) * static_cast<double>(wgt);
    }
    p.rest_weight_sum[r] = p.rest_weight_sum[r + 1] + rs;
    rest_sq[r] = rest_sq[r + 1] + rq;
  }
  p.rest_weight_norm.resize(p.h + 1);
  for (int r = 0; r <= p.h; ++r) p.rest_weight_norm[r] = std::sqrt(rest_sq[r]);
  return p;
}

std::vector<Detection> match_prepared(const MatchSurface& surface, const PreparedTemplate& t,
                                      const std::string& template_id, double tau) {
  std::vector<Detection> out;
  const GrayImage& img = surface.image();
  const double d_t = static_cast<double>(t.d_t);
  const double sqrt_d_t = std::sqrt(d_t);
  for (int y = 0; y + t.h <= img.height(); ++y) {
    for (int x = 0; x + t.w <= img.width(); ++x) {
      const std::int64_t s_i = surface.sum(x, y, t.w, t.h);
      const std::int64_t d_i = t.n * surface.sum_sq(x, y, t.w, t.h) - s_i * s_i;
      if (d_i <= 0) continue;
      const double need = tau * std::sqrt(static_cast<double>(d_i)) * sqrt_d_t;
      // Slack keeps rounding in the bound from rejecting a true match.
      const double reject_below = need - 1e-9 * std::abs(need) - 1.0;
      const double mean = static_cast<double>(s_i) / static_cast<double>(t.n);

      std::int64_t acc = 0;
      bool rejected = false;
      for (int r = 0; r < t.h; ++r) {
        const std::uint8_t* row = img.pixel(x, y + r);
        const std::int32_t* wrow = t.weights.data() + static_cast<std::size_t>(r) * t.w;
        std::int64_t row_acc = 0;
        for (int c = 0; c < t.w; ++c) row_acc += static_cast<std::int64_t>(row[c]) * wrow[c];
        acc += row_acc;
        const int next = r + 1;
        if (next == t.h) break;
        // Cauchy-Schwarz bound on the rows not yet visited.
        const int rows_left = t.h - next;
        const double p = static_cast<double>(surface.sum(x, y + next, t.w, rows_left));
        const double q = static_cast<double>(surface.sum_sq(x, y + next, t.w, rows_left));
        const double m = static_cast<double>(rows_left) * t.w;
        const double centered = std::max(0.0, q - 2.0 * mean * p + m * mean * mean);
        const double bound = static_cast<double>(acc) +
                             mean * static_cast<double>(t.rest_weight_sum[next]) +
                             std::sqrt(centered) * t.rest_weight_norm[next];
        if (bound < reject_below) {
          rejected = true;
          break;
        }
      }
      if (rejected) continue;

      double score;
      const __int128 lhs = static_cast<__int128>(acc) * acc;
      const __int128 rhs = static_cast<__int128>(d_i) * t.d_t;
      if (acc > 0 && lhs == rhs) {
        score = 1.0;
      } else {
        score = static_cast<double>(acc) / (std::sqrt(static_cast<double>(d_i)) * sqrt_d_t);
        score = std::clamp(score, -1.0, 1.0);
      }
      if (score >= tau) out.push_back({template_id, BBox{x, y, t.w, t.h}, score});
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) {
    if (a.score != b.score) return a.score > b.score;
    return std::tie(a.bbox.y, a.bbox.x) < std::tie(b.bbox.y, b.bbox.x);
  });
  return out;
}

}  // namespace

std::vector<Detection> match_template(const MatchSurface& surface, const IconTemplate& tmpl, double tau) {
  if (tmpl.image.width() > surface.width() || tmpl.image.height() > surface.height()) {
    throw DimensionError("template '" + tmpl.template_id + "' (" + std::to_string(tmpl.image.width()) +
                         "x" + std::to_string(tmpl.image.height()) + ") is larger than the screenshot (" +
                         std::to_string(surface.width()) + "x" + std::to_string(surface.height()) + ")");
  }
  if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must be in (0, 1]");
  return match_prepared(surface, prepare(tmpl.image), tmpl.template_id, tau);
}

std::vector<Detection> match_template(const GrayImage& screen, const IconTemplate& tmpl, double tau) {
  const MatchSurface surface(screen);
  return match_template(surface, tmpl, tau);
}

std::vector<Detection> nms(std::vector<Detection> detections, double overlap) {
  std::stable_sort(detections.begin(), detections.end(), [](const Detection& a, const Detection& b) {
    if (a.score != b.score) return a.score > b.score;
    return std::tie(a.bbox.y, a.bbox.x, a.bbox.w, a.bbox.h) < std::tie(b.bbox.y, b.bbox.x, b.bbox.w, b.bbox.h);
  });
  std::vector<Detection> kept;
  for (auto& d : detections) {
    const bool clear = std::all_of(kept.begin(), kept.end(),
                                   [&](const Detection& k) { return iou(k.bbox, d.bbox) < overlap; });
    if (clear) kept.push_back(std::move(d));
  }
  return kept;
}

std::vector<UIElement> StaticTextRecognizer::recognize(const RgbImage& screenshot) const {
  for (const auto& e : elements_) {
    if (!e.bbox.fits_within(screenshot.width(), screenshot.height())) {
      throw AdapterError("text element '" + e.name + "' lies outside the screenshot");
    }
  }
  return elements_;
}

OracleTextRecognizer::OracleTextRecognizer(std::vector<UIElement> truth, double dropout, std::uint64_t seed)
    : dropout_(dropout), seed_(seed) {
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must be in [0, 1)");
  for (auto& e : truth) {
    if (e.kind == ElementKind::text) truth_.push_back(std::move(e));
  }
}

bool OracleTextRecognizer::omitted(const UIElement& e, double dropout, std::uint64_t seed) {
  if (dropout <= 0.0) return false;
  std::uint64_t h = fnv1a64(e.name);
  h = fnv1a64(to_string(e.kind), h);
  for (int v : {e.bbox.x, e.bbox.y, e.bbox.w, e.bbox.h}) h = splitmix64(h ^ static_cast<std::uint64_t>(v));
  return unit_interval(splitmix64(h ^ splitmix64(seed))) < dropout;
}

std::vector<UIElement> OracleTextRecognizer::recognize(const RgbImage&) const {
  std::vector<UIElement> out;
  for (const auto& e : truth_) {
    if (omitted(e, dropout_, seed_)) continue;
    UIElement copy = e;
    copy.source = ElementSource::synthetic_oracle;
    out.push_back(std::move(copy));
  }
  return out;
}

std::unique_ptr<TextRecognizer> oracle_text_adapter(std::vector<UIElement> truth, double dropout,
                                                    std::uint64_t seed) {
  return std::make_unique<OracleTextRecognizer>(std::move(truth), dropout, seed);
}

std::vector<UIElement> detect_icons(const GrayImage& screen, std::span<const IconTemplate> templates,
                                    const ParserConfig& config) {
  std::vector<UIElement> icons;
  const MatchSurface surface(screen);
  for (const auto& tmpl : templates) {
    std::vector<Detection> found;
    if (config.multiscale) {
      for (double s : kMultiscaleScales) {
        const int w = std::max(4, static_cast<int>(std::lround(tmpl.image.width() * s)));
        const int h = std::max(4, static_cast<int>(std::lround(tmpl.image.height() * s)));
        if (w > screen.width() || h > screen.height()) continue;
        IconTemplate scaled{tmpl.template_id, tmpl.name,
                            s == 1.0 ? tmpl.image : resize_nearest(tmpl.image, w, h), tmpl.meta};
        auto d = match_template(surface, scaled, config.tau);
        found.insert(found.end(), d.begin(), d.end());
      }
    } else {
      found = match_template(surface, tmpl, config.tau);
    }
    for (const auto& d : nms(std::move(found), config.nms_overlap)) {
      UIElement e;
      e.name = tmpl.name;
      e.kind = ElementKind::icon;
      e.bbox = d.bbox;
      e.source = ElementSource::template_match;
      e.meta = tmpl.meta;
      icons.push_back(std::move(e));
    }
  }
  return icons;
}

void canonicalize_elements(std::vector<UIElement>& elements) {
  std::stable_sort(elements.begin(), elements.end(), [](const UIElement& a, const UIElement& b) {
    const int ka = static_cast<int>(a.kind);
    const int kb = static_cast<int>(b.kind);
    return std::tie(a.bbox.y, a.bbox.x, a.name, ka, a.bbox.w, a.bbox.h) <
           std::tie(b.bbox.y, b.bbox.x, b.name, kb, b.bbox.w, b.bbox.h);
  });
  elements.erase(std::unique(elements.begin(), elements.end(),
                             [](const UIElement& a, const UIElement& b) {
                               return a.name == b.name && a.kind == b.kind && a.bbox == b.bbox;
                             }),
                 elements.end());
  for (std::size_t i = 0; i < elements.size(); ++i) elements[i].id = "e" + std::to_string(i);
}

ScreenParse assemble_parse(std::vector<UIElement> icons, std::vector<UIElement> texts,
                           const RgbImage& screenshot, std::string screenshot_ref, const ParserConfig& config) {
  std::vector<UIElement> elements = std::move(icons);
  const std::size_t icon_count = elements.size();
  for (auto& t : texts) {
    t.kind = ElementKind::text;
    if (t.name.empty() || !t.bbox.fits_within(screenshot.width(), screenshot.height())) {
      elements.resize(icon_count);
      canonicalize_elements(elements);
      throw ParseError("adapter returned an invalid text element '" + t.name + "'", std::move(elements));
    }
    const bool shadowed = std::any_of(elements.begin(), elements.begin() + icon_count, [&](const UIElement& icon) {
      return icon.name == t.name && iou(icon.bbox, t.bbox) > config.dedup_iou;
    });
    if (!shadowed) elements.push_back(std::move(t));
  }
  canonicalize_elements(elements);
  ScreenParse parse;
  parse.screenshot_ref = std::move(screenshot_ref);
  parse.fingerprint = state_fingerprint(elements);
  parse.elements = std::move(elements);
  return parse;
}

std::vector<UIElement> recognize_text(const TextRecognizer& text, const RgbImage& screenshot,
                                      std::vector<UIElement>& icons) {
  try {
    return text.recognize(screenshot);
  } catch (const std::exception& ex) {
    canonicalize_elements(icons);
    throw ParseError(ex.what(), std::move(icons));
  }
}

ScreenParse parse_screen(const RgbImage& screenshot, std::span<const IconTemplate> templates,
                         const TextRecognizer& text, const ParserConfig& config) {
  std::vector<UIElement> icons = detect_icons(to_gray(screenshot), templates, config);
  std::vector<UIElement> texts = recognize_text(text, screenshot, icons);
  return assemble_parse(std::move(icons), std::move(texts), screenshot, content_hash(screenshot), config);
}

IconTemplate load_template(const std::filesystem::path& png, const json& sidecar) {
  IconTemplate t;
  t.template_id = sidecar.at("template_id").get<std::string>();
  t.name = sidecar.at("name").get<std::string>();
  if (sidecar.contains("meta")) t.meta = sidecar.at("meta").get<ElementMeta>();
  t.image = read_png_gray(png);
  validate_template(t);
  return t;
}

std::vector<IconTemplate> load_template_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw std::invalid_argument("template directory not found: " + dir.string());
  }
  std::vector<IconTemplate> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".png") continue;
    auto sidecar_path = entry.path();
    sidecar_path.replace_extension(".json");
    std::ifstream in(sidecar_path);
    if (!in) throw std::invalid_argument("missing sidecar for template " + entry.path().string());
    json sidecar;
    try {
      sidecar = json::parse(in);
    } catch (const json::exception& ex) {
      throw std::invalid_argument("malformed sidecar " + sidecar_path.string() + ": " + ex.what());
    }
    out.push_back(load_template(entry.path(), sidecar));
  }
  std::sort(out.begin(), out.end(),
            [](const IconTemplate& a, const IconTemplate& b) { return a.template_id < b.template_id; });
  return out;
}

}  // namespace uiscout
