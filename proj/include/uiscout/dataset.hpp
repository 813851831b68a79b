#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "uiscout/core.hpp"
#include "uiscout/explorer.hpp"
#include "uiscout/image.hpp"

namespace uiscout {

struct DatasetSample {
  std::string sample_id;
  std::string screenshot_path;  // relative to the dataset dir
  StateFingerprint fingerprint;
  std::vector<UIElement> elements;

  friend bool operator==(const DatasetSample&, const DatasetSample&) = default;
};
void to_json(json& j, const DatasetSample& s);
void from_json(const json& j, DatasetSample& s);

enum class QueryType { name, shape, function, refexpr };
inline constexpr QueryType kAllQueryTypes[] = {QueryType::name, QueryType::shape, QueryType::function,
                                               QueryType::refexpr};
std::string to_string(QueryType t);
QueryType query_type_from_string(const std::string& s);

struct InstructionSample {
  std::string query_id;
  std::string sample_id;
  QueryType query_type = QueryType::name;
  std::string query;
  BBox gt_bbox;
  std::string element_name;
  ElementKind element_kind = ElementKind::icon;
  std::string split = "train";

  friend bool operator==(const InstructionSample&, const InstructionSample&) = default;
};
void to_json(json& j, const InstructionSample& s);
void from_json(const json& j, InstructionSample& s);

// Query text templates.
std::string name_query(const std::string& name);
std::string shape_query(const std::string& shape_desc);
std::string function_query(const std::string& function_desc);
std::string refexpr_query(const std::string& name, const std::string& surroundings);
// To the right of “L” and to the left of “R”; either side optional.
std::string spatial_phrase(const std::optional<std::string>& left, const std::optional<std::string>& right);

struct Neighbors {
  std::optional<std::string> left;
  std::optional<std::string> right;
};

// Nearest differently-named elements on the same row (vertical centers
// within half the taller box), by horizontal center distance, ties by name.
Neighbors row_neighbors(const UIElement& e, const std::vector<UIElement>& all);

// Optional substitute for the fixed templates; returning nullopt skips.
using QueryGenerator =
    std::function<std::optional<std::string>(QueryType, const UIElement&, const DatasetSample&)>;

struct InstructionConfig {
  std::vector<QueryType> types{std::begin(kAllQueryTypes), std::end(kAllQueryTypes)};
  std::uint64_t seed = 0;
  double eval_fraction = 0.0;  // share of queries assigned split "eval"
  QueryGenerator generator;
};

struct InstructionSet {
  std::vector<InstructionSample> samples;
  std::map<std::string, std::int64_t> skipped;  // per query type
};

InstructionSet gen_instructions(const std::vector<DatasetSample>& samples, const InstructionConfig& config = {});

// ---------------------------------------------------------------- on disk

class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Writes one sample per unseen fingerprint into <dir>/screens and
// <dir>/annotations. Single writer.
class DatasetRecorder final : public RunRecorder {
 public:
  explicit DatasetRecorder(std::filesystem::path dir);

  // New sample id, or nullopt when the fingerprint was already recorded.
  std::optional<std::string> add(const ScreenParse& parse, const RgbImage& screenshot);
  void record(const ScreenParse& parse, const RgbImage& screenshot) override { add(parse, screenshot); }

  std::size_t size() const { return samples_.size(); }
  const std::vector<DatasetSample>& samples() const { return samples_; }
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::set<StateFingerprint> seen_;
  std::vector<DatasetSample> samples_;
};

struct DatasetManifest {
  std::string env_id;
  std::string strategy_id;
  std::uint64_t seed = 0;
  std::int64_t sample_count = 0;
  std::map<std::string, std::int64_t> instruction_counts;
  std::map<std::string, std::int64_t> skipped_counts;
  json parameters = json::object();

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};
void to_json(json& j, const DatasetManifest& m);
void from_json(const json& j, DatasetManifest& m);

// Counts are taken from the directory. Throws IntegrityError when the
// screens and annotations disagree or when `expected_samples` differs.
DatasetManifest write_manifest(const std::filesystem::path& dir, DatasetManifest info,
                               std::optional<std::int64_t> expected_samples = std::nullopt);
DatasetManifest read_manifest(const std::filesystem::path& dir);
// Throws IntegrityError when the manifest no longer matches the directory.
void verify_manifest(const std::filesystem::path& dir);

std::vector<DatasetSample> load_samples(const std::filesystem::path& dir);
void write_instructions(const std::filesystem::path& file, const std::vector<InstructionSample>& samples);
std::vector<InstructionSample> read_instructions(const std::filesystem::path& file);

void write_text_file(const std::filesystem::path& file, const std::string& text);
std::string read_text_file(const std::filesystem::path& file);

}  // namespace uiscout
