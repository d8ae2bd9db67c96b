#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "capreason/domain.hpp"

namespace capreason::dataset {

struct DatasetManifest {
  std::string name;
  int problem_count = 0;
  std::map<domain::KnowledgeLevel, int> level_histogram;
  std::map<std::string, int> category_histogram;
  std::string dataset_digest;  // order-sensitive over all records
};

struct Dataset {
  std::vector<domain::Problem> problems;
  DatasetManifest manifest;
};

class DatasetError : public std::runtime_error {
 public:
  enum class Kind { Parse, Validation, MissingImage, Io };

  DatasetError(Kind kind, std::string detail);
  Kind kind;
};

// Line-delimited JSON records, one problem each:
//   {id, question, ground_truth, level, image?, category?, vision_variant?,
//    image_digest?}
// Image paths resolve against image_root (defaults to the dataset file's
// directory). Any invalid record aborts the load.
Dataset load_dataset(const std::filesystem::path& path,
                     const std::optional<std::filesystem::path>& image_root = std::nullopt);

// Standard base64 of the raw bytes, no line wrapping.
std::string encode_image(const domain::ImageRef& ref);

nlohmann::json problem_to_json(const domain::Problem& p);
nlohmann::ordered_json manifest_to_json(const DatasetManifest& manifest);
std::string render_manifest(const DatasetManifest& manifest);

}  // namespace capreason::dataset
