#include "uiscout/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "uiscout/util.hpp"

namespace fs = std::filesystem;

namespace uiscout {

void to_json(json& j, const DatasetSample& s) {
  j = json{{"sample_id", s.sample_id},
           {"screenshot_path", s.screenshot_path},
           {"fingerprint", s.fingerprint},
           {"elements", s.elements}};
}

void from_json(const json& j, DatasetSample& s) {
  s.sample_id = j.at("sample_id").get<std::string>();
  s.screenshot_path = j.at("screenshot_path").get<std::string>();
  s.fingerprint = j.at("fingerprint").get<StateFingerprint>();
  s.elements = j.at("elements").get<std::vector<UIElement>>();
}

std::string to_string(QueryType t) {
  switch (t) {
    case QueryType::name:
      return "name";
    case QueryType::shape:
      return "shape";
    case QueryType::function:
      return "function";
    case QueryType::refexpr:
      return "refexpr";
  }
  return "?";
}

QueryType query_type_from_string(const std::string& s) {
  for (QueryType t : kAllQueryTypes) {
    if (to_string(t) == s) return t;
  }
  throw std::invalid_argument("unknown query type '" + s + "'");
}

void to_json(json& j, const InstructionSample& s) {
  j = json{{"query_id", s.query_id},
           {"sample_id", s.sample_id},
           {"query_type", to_string(s.query_type)},
           {"query", s.query},
           {"gt_bbox", s.gt_bbox},
           {"element_name", s.element_name},
           {"element_kind", to_string(s.element_kind)},
           {"split", s.split}};
}

void from_json(const json& j, InstructionSample& s) {
  s.query_id = j.at("query_id").get<std::string>();
  s.sample_id = j.at("sample_id").get<std::string>();
  s.query_type = query_type_from_string(j.at("query_type").get<std::string>());
  s.query = j.at("query").get<std::string>();
  s.gt_bbox = j.at("gt_bbox").get<BBox>();
  s.element_name = j.value("element_name", std::string{});
  s.element_kind = element_kind_from_string(j.value("element_kind", std::string("icon")));
  s.split = j.value("split", std::string("train"));
}

// ---------------------------------------------------------------- templates

namespace {

// Typographic double quotes, as in the instruction templates.
std::string quoted(const std::string& s) { return "\u201c" + s + "\u201d"; }

}  // namespace

std::string name_query(const std::string& name) { return "Find " + quoted(name); }

std::string shape_query(const std::string& shape_desc) {
  return "Find the element which has the following description: " + shape_desc;
}

std::string function_query(const std::string& function_desc) {
  return "Find the element which has the following function: " + function_desc;
}

std::string refexpr_query(const std::string& name, const std::string& surroundings) {
  return "Find " + name + ". The surrounding information is: " + surroundings;
}

std::string spatial_phrase(const std::optional<std::string>& left, const std::optional<std::string>& right) {
  if (left && right) return "To the right of " + quoted(*left) + " and to the left of " + quoted(*right);
  if (left) return "To the right of " + quoted(*left);
  if (right) return "To the left of " + quoted(*right);
  return {};
}

Neighbors row_neighbors(const UIElement& e, const std::vector<UIElement>& all) {
  Neighbors out;
  double best_left = 0;
  double best_right = 0;
  const double cx = e.bbox.center_x();
  const double cy = e.bbox.center_y();
  for (const auto& o : all) {
    if (o.name == e.name) continue;
    const double reach = std::max(e.bbox.h, o.bbox.h) / 2.0;
    if (std::abs(o.bbox.center_y() - cy) > reach) continue;
    const double dx = o.bbox.center_x() - cx;
    if (dx < 0) {
      if (!out.left || -dx < best_left || (-dx == best_left && o.name < *out.left)) {
        out.left = o.name;
        best_left = -dx;
      }
    } else if (dx > 0) {
      if (!out.right || dx < best_right || (dx == best_right && o.name < *out.right)) {
        out.right = o.name;
        best_right = dx;
      }
    }
  }
  return out;
}

namespace {

std::optional<std::string> template_query(QueryType type, const UIElement& e, const DatasetSample& sample) {
  switch (type) {
    case QueryType::name:
      return name_query(e.name);
    case QueryType::shape:
      if (!e.meta.shape_desc) return std::nullopt;
      return shape_query(*e.meta.shape_desc);
    case QueryType::function:
      if (!e.meta.function_desc) return std::nullopt;
      return function_query(*e.meta.function_desc);
    case QueryType::refexpr: {
      const Neighbors n = row_neighbors(e, sample.elements);
      if (n.left || n.right) return refexpr_query(e.name, spatial_phrase(n.left, n.right));
      if (e.meta.neighbors_desc) return refexpr_query(e.name, *e.meta.neighbors_desc);
      return std::nullopt;
    }
  }
  return std::nullopt;
}

}  // namespace

InstructionSet gen_instructions(const std::vector<DatasetSample>& samples, const InstructionConfig& config) {
  if (config.eval_fraction < 0 || config.eval_fraction > 1) {
    throw std::invalid_argument("eval_fraction must be in [0, 1]");
  }
  InstructionSet out;
  for (QueryType t : config.types) out.skipped[to_string(t)] = 0;
  for (const auto& sample : samples) {
    for (const auto& e : sample.elements) {
      for (QueryType t : config.types) {
        const auto query = config.generator ? config.generator(t, e, sample) : template_query(t, e, sample);
        if (!query) {
          ++out.skipped[to_string(t)];
          continue;
        }
        InstructionSample s;
        s.query_id = sample.sample_id + ":" + e.id + ":" + to_string(t);
        s.sample_id = sample.sample_id;
        s.query_type = t;
        s.query = *query;
        s.gt_bbox = e.bbox;
        s.element_name = e.name;
        s.element_kind = e.kind;
        const double u = unit_interval(splitmix64(fnv1a64(s.query_id, splitmix64(config.seed))));
        s.split = u < config.eval_fraction ? "eval" : "train";
        out.samples.push_back(std::move(s));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------- files

void write_text_file(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw RecorderError("cannot open " + file.string() + " for writing");
  out << text;
  out.close();
  if (!out) throw RecorderError("write failed for " + file.string());
}

std::string read_text_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

DatasetRecorder::DatasetRecorder(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_ / "screens", ec);
  if (!ec) fs::create_directories(dir_ / "annotations", ec);
  if (ec) throw RecorderError("cannot create dataset directory " + dir_.string() + ": " + ec.message());
}

std::optional<std::string> DatasetRecorder::add(const ScreenParse& parse, const RgbImage& screenshot) {
  if (seen_.count(parse.fingerprint)) return std::nullopt;
  char id[16];
  std::snprintf(id, sizeof id, "s%05zu", samples_.size());
  DatasetSample s;
  s.sample_id = id;
  s.screenshot_path = "screens/" + s.sample_id + ".png";
  s.fingerprint = parse.fingerprint;
  s.elements = parse.elements;
  try {
    write_png(dir_ / s.screenshot_path, screenshot);
  } catch (const std::exception& ex) {
    throw RecorderError(ex.what());
  }
  write_text_file(dir_ / "annotations" / (s.sample_id + ".json"), json(s).dump(2) + "\n");
  seen_.insert(parse.fingerprint);
  samples_.push_back(s);
  return s.sample_id;
}

void to_json(json& j, const DatasetManifest& m) {
  j = json{{"env_id", m.env_id},
           {"strategy_id", m.strategy_id},
           {"seed", m.seed},
           {"sample_count", m.sample_count},
           {"instruction_counts", m.instruction_counts},
           {"skipped_counts", m.skipped_counts},
           {"parameters", m.parameters}};
}

void from_json(const json& j, DatasetManifest& m) {
  m.env_id = j.at("env_id").get<std::string>();
  m.strategy_id = j.at("strategy_id").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.sample_count = j.at("sample_count").get<std::int64_t>();
  m.instruction_counts = j.at("instruction_counts").get<std::map<std::string, std::int64_t>>();
  m.skipped_counts = j.value("skipped_counts", std::map<std::string, std::int64_t>{});
  m.parameters = j.value("parameters", json::object());
}

namespace {

std::set<std::string> stems(const fs::path& dir, const std::string& ext) {
  std::set<std::string> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ext) out.insert(entry.path().stem().string());
  }
  return out;
}

std::int64_t count_samples(const fs::path& dir) {
  const auto screens = stems(dir / "screens", ".png");
  const auto annotations = stems(dir / "annotations", ".json");
  if (screens != annotations) {
    throw IntegrityError("dataset " + dir.string() + " has " + std::to_string(screens.size()) + " screens but " +
                         std::to_string(annotations.size()) + " annotations");
  }
  return static_cast<std::int64_t>(screens.size());
}

std::map<std::string, std::int64_t> count_instructions(const fs::path& dir) {
  std::map<std::string, std::int64_t> counts;
  for (QueryType t : kAllQueryTypes) counts[to_string(t)] = 0;
  const fs::path file = dir / "instructions.jsonl";
  if (!fs::exists(file)) return counts;
  for (const auto& s : read_instructions(file)) ++counts[to_string(s.query_type)];
  return counts;
}

}  // namespace

DatasetManifest write_manifest(const fs::path& dir, DatasetManifest info, std::optional<std::int64_t> expected_samples) {
  info.sample_count = count_samples(dir);
  if (expected_samples && *expected_samples != info.sample_count) {
    throw IntegrityError("expected " + std::to_string(*expected_samples) + " samples, directory holds " +
                         std::to_string(info.sample_count));
  }
  info.instruction_counts = count_instructions(dir);
  write_text_file(dir / "manifest.json", json(info).dump(2) + "\n");
  return info;
}

DatasetManifest read_manifest(const fs::path& dir) {
  const fs::path file = dir / "manifest.json";
  if (!fs::exists(file)) throw std::runtime_error("no manifest at " + file.string());
  try {
    return json::parse(read_text_file(file)).get<DatasetManifest>();
  } catch (const json::exception& ex) {
    throw IntegrityError("malformed manifest " + file.string() + ": " + ex.what());
  }
}

void verify_manifest(const fs::path& dir) {
  const DatasetManifest m = read_manifest(dir);
  const std::int64_t samples = count_samples(dir);
  if (samples != m.sample_count) {
    throw IntegrityError("manifest lists " + std::to_string(m.sample_count) + " samples, directory holds " +
                         std::to_string(samples));
  }
  if (count_instructions(dir) != m.instruction_counts) {
    throw IntegrityError("manifest instruction counts do not match instructions.jsonl");
  }
}

std::vector<DatasetSample> load_samples(const fs::path& dir) {
  std::vector<DatasetSample> out;
  for (const auto& stem : stems(dir / "annotations", ".json")) {
    const fs::path file = dir / "annotations" / (stem + ".json");
    try {
      out.push_back(json::parse(read_text_file(file)).get<DatasetSample>());
    } catch (const json::exception& ex) {
      throw IntegrityError("malformed annotation " + file.string() + ": " + ex.what());
    }
  }
  return out;
}

void write_instructions(const fs::path& file, const std::vector<InstructionSample>& samples) {
  std::string text;
  for (const auto& s : samples) text += json(s).dump() + "\n";
  write_text_file(file, text);
}

std::vector<InstructionSample> read_instructions(const fs::path& file) {
  std::istringstream in(read_text_file(file));
  std::vector<InstructionSample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line).get<InstructionSample>());
    } catch (const std::exception& ex) {
      throw std::runtime_error(file.string() + ":" + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return out;
}

}  // namespace uiscout
