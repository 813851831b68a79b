#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "uiscout/core.hpp"
#include "uiscout/dataset.hpp"
#include "uiscout/sim_env.hpp"

#ifndef UISCOUT_TEST_FIXTURES
#define UISCOUT_TEST_FIXTURES "fixtures"
#endif

namespace testing {

namespace fs = std::filesystem;

inline fs::path fixtures() { return fs::path(UISCOUT_TEST_FIXTURES); }
inline fs::path env_file(const std::string& name) { return fixtures() / "envs" / name / (name + ".json"); }
inline fs::path suite_file(const std::string& name) { return fixtures() / "suite" / name / (name + ".json"); }

inline std::vector<fs::path> suite_files() {
  return {suite_file("canvas_studio"), suite_file("ribbon_writer"), suite_file("shop_flow")};
}

inline std::shared_ptr<const uiscout::EnvDefinition> load(const fs::path& p) {
  return std::make_shared<const uiscout::EnvDefinition>(uiscout::load_env(p));
}

inline uiscout::json oracle_counts() {
  return uiscout::json::parse(uiscout::read_text_file(fixtures() / "oracle_counts.json"));
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("uiscout_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

inline uiscout::UIElement element(std::string name, uiscout::ElementKind kind, uiscout::BBox b) {
  uiscout::UIElement e;
  e.name = std::move(name);
  e.kind = kind;
  e.bbox = b;
  return e;
}

// Random valid box inside a w x h screen.
inline uiscout::BBox random_box(std::mt19937_64& g, int w = 320, int h = 240) {
  std::uniform_int_distribution<int> dw(1, w / 2), dh(1, h / 2);
  const int bw = dw(g), bh = dh(g);
  std::uniform_int_distribution<int> dx(0, w - bw), dy(0, h - bh);
  return {dx(g), dy(g), bw, bh};
}

}  // namespace testing
