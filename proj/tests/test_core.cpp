#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <random>

#include "support.hpp"
#include "uiscout/core.hpp"
#include "uiscout/image.hpp"
#include "uiscout/util.hpp"

using namespace uiscout;
using testing::element;

namespace {

// IoU by counting covered pixels on a grid.
double pixel_iou(const BBox& a, const BBox& b) {
  const int x0 = std::min(a.x, b.x), y0 = std::min(a.y, b.y);
  const int x1 = std::max(a.right(), b.right()), y1 = std::max(a.bottom(), b.bottom());
  long inter = 0, uni = 0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const bool in_a = x >= a.x && x < a.right() && y >= a.y && y < a.bottom();
      const bool in_b = x >= b.x && x < b.right() && y >= b.y && y < b.bottom();
      inter += in_a && in_b;
      uni += in_a || in_b;
    }
  }
  return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

TEST_CASE("iou examples") {
  CHECK(iou({0, 0, 10, 10}, {0, 0, 10, 10}) == 1.0);
  CHECK(iou({0, 0, 10, 10}, {20, 20, 5, 5}) == 0.0);
  CHECK(iou({0, 0, 10, 10}, {5, 0, 10, 10}) == doctest::Approx(50.0 / 150.0).epsilon(1e-12));
  CHECK(iou({0, 0, 10, 10}, {10, 0, 10, 10}) == 0.0);  // touching edges
}

TEST_CASE("iou matches a pixel-count oracle, is symmetric and bounded") {
  std::mt19937_64 g(17);
  for (int i = 0; i < 400; ++i) {
    const BBox a = testing::random_box(g, 64, 48);
    const BBox b = i % 5 == 0 ? a : testing::random_box(g, 64, 48);
    const double v = iou(a, b);
    CHECK(v == doctest::Approx(pixel_iou(a, b)).epsilon(1e-12));
    CHECK(v == iou(b, a));
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK((v == 1.0) == (a == b));
  }
}

TEST_CASE("grounding threshold is strict") {
  const BBox gt{0, 0, 100, 100};
  CHECK(grounding_correct({0, 0, 100, 31}, gt));   // 0.31
  CHECK_FALSE(grounding_correct({0, 0, 100, 30}, gt));  // exactly 0.30
  CHECK(grounding_correct(gt, gt));
  CHECK_FALSE(grounding_correct({200, 200, 5, 5}, {0, 0, 5, 5}));
}

TEST_CASE("grounding_correct is monotone in iou") {
  std::mt19937_64 g(3);
  const BBox gt{40, 40, 60, 50};
  std::vector<BBox> preds;
  for (int i = 0; i < 300; ++i) preds.push_back(testing::random_box(g, 200, 200));
  std::sort(preds.begin(), preds.end(), [&](const BBox& a, const BBox& b) { return iou(a, gt) < iou(b, gt); });
  bool seen_correct = false;
  for (const auto& p : preds) {
    if (seen_correct) CHECK(grounding_correct(p, gt));
    seen_correct = seen_correct || grounding_correct(p, gt);
  }
  CHECK(seen_correct);
}

TEST_CASE("fingerprint: golden value from an independent implementation") {
  // sha256 of [["Bold","icon",1,1,3,3],["Open file","text",10,5,13,2],["Save","icon",2,5,3,3]]
  // serialized compactly, as produced by Python's json + hashlib.
  std::vector<UIElement> els{element("Save", ElementKind::icon, {10, 20, 12, 12}),
                             element("Open file", ElementKind::text, {40, 22, 55, 9}),
                             element("Bold", ElementKind::icon, {4, 4, 12, 12})};
  CHECK(state_fingerprint(els).hex == "da56039bdce7d9978bf08e04fc240e5384a451d3eb0bb82ee72d4d70cab64e79");
}

TEST_CASE("fingerprint properties") {
  std::mt19937_64 g(99);
  for (int round = 0; round < 50; ++round) {
    std::vector<UIElement> els;
    const int n = 1 + static_cast<int>(g() % 12);
    for (int i = 0; i < n; ++i) {
      els.push_back(element("e" + std::to_string(g() % 1000), i % 2 ? ElementKind::text : ElementKind::icon,
                            testing::random_box(g)));
    }
    const auto fp = state_fingerprint(els);
    CHECK(fp.hex.size() == 64);

    auto shuffled = els;
    std::shuffle(shuffled.begin(), shuffled.end(), g);
    for (auto& e : shuffled) {
      e.id = "x" + std::to_string(g() % 50);
      e.source = ElementSource::ocr;
    }
    CHECK(state_fingerprint(shuffled) == fp);

    auto moved = els;
    moved[0].bbox.x = moved[0].bbox.x >= 16 ? moved[0].bbox.x - 16 : moved[0].bbox.x + 16;
    CHECK(state_fingerprint(moved) != fp);

    auto renamed = els;
    renamed[0].name += "_renamed";
    CHECK(state_fingerprint(renamed) != fp);
  }
  // Sub-grid jitter is absorbed.
  CHECK(state_fingerprint({element("a", ElementKind::icon, {8, 8, 12, 12})}) ==
        state_fingerprint({element("a", ElementKind::icon, {9, 10, 12, 12})}));
}

TEST_CASE("action params") {
  CHECK(Action::click("a").well_formed());
  CHECK(Action::drag("a", 3, -2).well_formed());
  CHECK(Action::scroll("a", -1).well_formed());
  CHECK_FALSE(Action::scroll("a", 0).well_formed());
  Action bad = Action::click("a");
  bad.dx = 1;
  CHECK_FALSE(bad.well_formed());
  Action unnamed = Action::click("");
  CHECK_FALSE(unnamed.well_formed());
}

TEST_CASE("trajectory consistency") {
  Trajectory t;
  t.steps.push_back({{"a"}, Action::click("x"), {"b"}});
  t.steps.push_back({{"b"}, Action::click("y"), {"c"}});
  CHECK(t.consistent());
  t.steps[1].pre = {"z"};
  CHECK_FALSE(t.consistent());
  t.steps[1].pre = {"b"};
  t.termination = Termination::error_state;
  CHECK_FALSE(t.consistent());
  t.error_record = ErrorRecord{"boom", t.steps};
  CHECK(t.consistent());
}

TEST_CASE("json round trips") {
  UIElement e = element("Star icon", ElementKind::icon, {1, 2, 3, 4});
  e.id = "e0";
  e.source = ElementSource::template_match;
  e.meta.shape_desc = "A gray star";
  CHECK(json(e).get<UIElement>() == e);
  CHECK(json(e).at("source") == "template");

  ScreenParse p;
  p.screenshot_ref = "abc";
  p.elements = {e};
  p.fingerprint = state_fingerprint(p.elements);
  CHECK(json(p).get<ScreenParse>() == p);

  for (const Action& a : {Action::click("a"), Action::drag("b", 4, 5), Action::scroll("c", -3)}) {
    CHECK(json(a).get<Action>() == a);
  }
  Trajectory t;
  t.steps.push_back({{"a"}, Action::click("x"), {"b"}});
  t.termination = Termination::error_state;
  t.error_record = ErrorRecord{"dialog", t.steps};
  CHECK(json(t).get<Trajectory>() == t);
  CHECK_THROWS_AS(element_kind_from_string("widget"), std::invalid_argument);
}

TEST_CASE("sha256 and rng reference values") {
  CHECK(sha256_hex(std::string_view("abc")) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  // The C++ standard fixes the 10000th output of a default-seeded mt19937_64.
  Rng r(5489u);
  std::uint64_t v = 0;
  for (int i = 0; i < 10000; ++i) v = r.next();
  CHECK(v == 9981545732273789042ull);
}

TEST_CASE("rng index is uniform enough") {
  Rng r(7);
  std::vector<int> counts(6, 0);
  const int n = 60000;
  for (int i = 0; i < n; ++i) ++counts[r.index(6)];
  double chi2 = 0;
  for (int c : counts) chi2 += (c - n / 6.0) * (c - n / 6.0) / (n / 6.0);
  CHECK(chi2 < 20.5);  // p ~ 0.001 for 5 dof
  Rng a(11), b(11);
  for (int i = 0; i < 100; ++i) CHECK(a.index(97) == b.index(97));
}

TEST_CASE("luma and png round trip") {
  CHECK(luma(255, 255, 255) == 255);
  CHECK(luma(0, 0, 0) == 0);
  CHECK(luma(255, 0, 0) == 76);   // 76.245
  CHECK(luma(0, 255, 0) == 150);  // 149.685
  CHECK(luma(0, 0, 255) == 29);   // 29.07

  RgbImage img(17, 9);
  std::mt19937_64 g(1);
  for (auto& b : img.bytes()) b = static_cast<std::uint8_t>(g());
  testing::TempDir dir("png");
  write_png(dir.path() / "a.png", img);
  CHECK(read_png_rgb(dir.path() / "a.png") == img);
  CHECK(encode_png(img) == encode_png(img));
  CHECK(content_hash(img) != content_hash(RgbImage(17, 9)));
  CHECK_THROWS_AS(read_png_rgb(dir.path() / "missing.png"), ImageError);
}
