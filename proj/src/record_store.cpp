#include "capreason/record_store.hpp"

#include <fstream>

#include "capreason/backend.hpp"

namespace capreason::backend {

namespace {

nlohmann::json to_json(const StoredRecord& record) {
  return {{"request_canonical", record.request_canonical},
          {"result_text", record.result_text},
          {"usage",
           {{"prompt_units", record.usage.prompt_units},
            {"completion_units", record.usage.completion_units}}},
          {"recorded_at", record.recorded_at},
          {"model_spec", record.model_spec}};
}

StoredRecord record_from_json(const nlohmann::json& value) {
  StoredRecord record;
  record.request_canonical = value.at("request_canonical");
  record.result_text = value.at("result_text").get<std::string>();
  record.usage.prompt_units = value.at("usage").at("prompt_units").get<std::int64_t>();
  record.usage.completion_units = value.at("usage").at("completion_units").get<std::int64_t>();
  record.recorded_at = value.at("recorded_at").get<std::string>();
  record.model_spec = value.at("model_spec");
  return record;
}

}  // namespace

RecordStore::RecordStore(std::filesystem::path root) : root_(std::move(root)) {
  std::filesystem::create_directories(root_);
}

std::filesystem::path RecordStore::path_for(const std::string& key) const {
  return root_ / key.substr(0, 2) / (key + ".json");
}

bool RecordStore::contains(const std::string& key) const {
  return std::filesystem::exists(path_for(key));
}

std::optional<StoredRecord> RecordStore::load(const std::string& key) const {
  const std::filesystem::path path = path_for(key);
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  nlohmann::json value = nlohmann::json::parse(in);
  return record_from_json(value);
}

void RecordStore::append(const std::string& key, const StoredRecord& record) {
  std::lock_guard<std::mutex> lock(mu_);
  if (auto existing = load(key)) {
    if (existing->result_text != record.result_text) throw RecordConflict(key);
    return;  // idempotent re-record
  }
  const std::filesystem::path path = path_for(key);
  std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << to_json(record).dump(2) << '\n';
  }
  std::filesystem::rename(tmp, path);
}

std::vector<std::string> RecordStore::keys() const {
  std::vector<std::string> out;
  if (!std::filesystem::exists(root_)) return out;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root_)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
    out.push_back(entry.path().stem().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace capreason::backend
