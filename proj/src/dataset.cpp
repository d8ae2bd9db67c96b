#include "capreason/dataset.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "capreason/util.hpp"

namespace capreason::dataset {

namespace {

std::string kind_label(DatasetError::Kind kind) {
  switch (kind) {
    case DatasetError::Kind::Parse: return "ParseError";
    case DatasetError::Kind::Validation: return "ValidationError";
    case DatasetError::Kind::MissingImage: return "MissingImageFile";
    case DatasetError::Kind::Io: return "IoError";
  }
  return "DatasetError";
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError(DatasetError::Kind::Io, "cannot read " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

domain::Problem parse_record(const nlohmann::json& record, int line_no,
                             const std::filesystem::path& image_root) {
  domain::Problem p;
  p.id = record.at("id").get<std::string>();
  p.question = record.at("question").get<std::string>();
  p.ground_truth = record.at("ground_truth").get<std::string>();

  const std::string level_label = record.at("level").get<std::string>();
  auto level = domain::parse_level(level_label);
  if (!level)
    throw DatasetError(DatasetError::Kind::Validation,
                       "problem " + p.id + ": unknown level \"" + level_label + "\"");
  p.level = *level;

  if (record.contains("category") && !record.at("category").is_null())
    p.category = record.at("category").get<std::string>();

  if (record.contains("vision_variant") && !record.at("vision_variant").is_null()) {
    const std::string token = record.at("vision_variant").get<std::string>();
    auto variant = domain::parse_vision_variant(token);
    if (!variant)
      throw DatasetError(DatasetError::Kind::Validation,
                         "problem " + p.id + ": unknown vision_variant \"" + token + "\"");
    p.vision_variant = *variant;
  }

  if (record.contains("image") && !record.at("image").is_null()) {
    const std::string rel = record.at("image").get<std::string>();
    auto media = domain::media_type_from_path(rel);
    if (!media)
      throw DatasetError(DatasetError::Kind::Validation,
                         "problem " + p.id + ": unsupported image media type for \"" + rel + "\"");
    const std::filesystem::path full = image_root / rel;
    if (!std::filesystem::exists(full))
      throw DatasetError(DatasetError::Kind::MissingImage,
                         "problem " + p.id + ": image file " + full.string() + " not found");
    domain::ImageRef ref;
    ref.path = rel;
    ref.media_type = *media;
    auto bytes = std::make_shared<std::vector<std::uint8_t>>(read_bytes(full));
    ref.bytes_digest = sha256_hex(*bytes);
    ref.bytes = std::move(bytes);
    if (record.contains("image_digest") && !record.at("image_digest").is_null()) {
      const std::string expected = record.at("image_digest").get<std::string>();
      if (expected != ref.bytes_digest)
        throw DatasetError(DatasetError::Kind::Validation,
                           "problem " + p.id + ": image digest mismatch (recorded " + expected +
                               ", actual " + ref.bytes_digest + ")");
    }
    p.image = std::move(ref);
  }

  (void)line_no;
  return p;
}

}  // namespace

DatasetError::DatasetError(Kind kind_in, std::string detail)
    : std::runtime_error(kind_label(kind_in) + " " + detail), kind(kind_in) {}

Dataset load_dataset(const std::filesystem::path& path,
                     const std::optional<std::filesystem::path>& image_root) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError(DatasetError::Kind::Io, "cannot open " + path.string());

  const std::filesystem::path root = image_root.value_or(path.parent_path());

  Dataset ds;
  ds.manifest.name = path.stem().string();
  std::set<std::string> seen_ids;
  std::string digest_feed;

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim_copy(line).empty()) continue;

    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
      if (!record.is_object()) throw std::runtime_error("record must be a JSON object");
    } catch (const std::exception& e) {
      throw DatasetError(DatasetError::Kind::Parse,
                         "line " + std::to_string(line_no) + ": " + e.what());
    }

    domain::Problem p;
    try {
      p = parse_record(record, line_no, root);
    } catch (const DatasetError&) {
      throw;
    } catch (const std::exception& e) {
      throw DatasetError(DatasetError::Kind::Parse,
                         "line " + std::to_string(line_no) + ": " + e.what());
    }

    auto validation = domain::validate_problem(p);
    if (!validation.ok()) {
      std::string joined;
      for (const std::string& v : validation.violations) {
        if (!joined.empty()) joined += "; ";
        joined += v;
      }
      throw DatasetError(DatasetError::Kind::Validation, "problem " + p.id + ": " + joined);
    }
    if (!seen_ids.insert(p.id).second)
      throw DatasetError(DatasetError::Kind::Validation, "problem " + p.id + ": duplicate id");

    digest_feed += problem_to_json(p).dump();
    digest_feed += '\n';
    ds.manifest.level_histogram[p.level] += 1;
    if (p.category) ds.manifest.category_histogram[*p.category] += 1;
    ds.problems.push_back(std::move(p));
  }

  ds.manifest.problem_count = static_cast<int>(ds.problems.size());
  ds.manifest.dataset_digest = sha256_hex(digest_feed);
  return ds;
}

std::string encode_image(const domain::ImageRef& ref) {
  if (!ref.bytes) throw DatasetError(DatasetError::Kind::Io, "image bytes not loaded: " + ref.path);
  return base64_encode(*ref.bytes);
}

nlohmann::json problem_to_json(const domain::Problem& p) {
  nlohmann::json value = {{"id", p.id},
                          {"question", p.question},
                          {"ground_truth", p.ground_truth},
                          {"level", std::string(domain::to_string(p.level))}};
  if (p.category) value["category"] = *p.category;
  if (p.vision_variant) value["vision_variant"] = std::string(domain::to_string(*p.vision_variant));
  if (p.image) {
    value["image"] = {{"path", p.image->path},
                      {"media_type", std::string(domain::to_string(p.image->media_type))},
                      {"bytes_digest", p.image->bytes_digest}};
  }
  return value;
}

nlohmann::ordered_json manifest_to_json(const DatasetManifest& manifest) {
  nlohmann::ordered_json levels = nlohmann::ordered_json::object();
  for (domain::KnowledgeLevel level : domain::kLevelOrder) {
    auto it = manifest.level_histogram.find(level);
    levels[std::string(domain::to_string(level))] = it == manifest.level_histogram.end() ? 0 : it->second;
  }
  nlohmann::ordered_json categories = nlohmann::ordered_json::object();
  for (const auto& [category, count] : manifest.category_histogram) categories[category] = count;
  return {{"name", manifest.name},
          {"problem_count", manifest.problem_count},
          {"level_histogram", levels},
          {"category_histogram", categories},
          {"dataset_digest", manifest.dataset_digest}};
}

std::string render_manifest(const DatasetManifest& manifest) {
  std::ostringstream out;
  out << "dataset: " << manifest.name << '\n';
  out << "problems: " << manifest.problem_count << '\n';
  out << "digest: " << manifest.dataset_digest << '\n';
  out << "levels:\n";
  for (domain::KnowledgeLevel level : domain::kLevelOrder) {
    auto it = manifest.level_histogram.find(level);
    const int count = it == manifest.level_histogram.end() ? 0 : it->second;
    out << "  " << domain::to_string(level) << ": " << count << '\n';
  }
  if (!manifest.category_histogram.empty()) {
    out << "categories:\n";
    for (const auto& [category, count] : manifest.category_histogram)
      out << "  " << category << ": " << count << '\n';
  }
  return out.str();
}

}  // namespace capreason::dataset
