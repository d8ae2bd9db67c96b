#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "capreason/messages.hpp"

namespace capreason::backend {

struct StoredRecord {
  nlohmann::json request_canonical;
  std::string result_text;
  Usage usage;
  std::string recorded_at;
  nlohmann::json model_spec;
};

// Append-only content-addressed store: one file per cache key under
// <root>/<first-2-hex>/<digest>.json. Re-recording a key with different
// text raises RecordConflict instead of overwriting.
class RecordStore {
 public:
  explicit RecordStore(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }

  bool contains(const std::string& key) const;
  std::optional<StoredRecord> load(const std::string& key) const;
  void append(const std::string& key, const StoredRecord& record);
  std::vector<std::string> keys() const;

 private:
  std::filesystem::path path_for(const std::string& key) const;

  std::filesystem::path root_;
  mutable std::mutex mu_;
};

}  // namespace capreason::backend
