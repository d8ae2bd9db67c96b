#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "capreason/pipeline.hpp"

namespace capreason::pipeline {

// Per-run persistence: runs/<run_id>/<problem_id>.json plus manifest.json.
class RunStore {
 public:
  RunStore(std::filesystem::path runs_root, std::string run_id);

  const std::string& run_id() const { return run_id_; }
  std::filesystem::path dir() const { return dir_; }
  static bool exists(const std::filesystem::path& runs_root, const std::string& run_id);

  std::optional<RunRecord> load(const std::string& problem_id) const;
  void save(const RunRecord& record);

  // Records for the given ids, in that order; ids without a stored record
  // are skipped.
  std::vector<RunRecord> load_many(const std::vector<std::string>& problem_ids) const;
  std::vector<std::string> stored_problem_ids() const;

  void write_manifest(const nlohmann::json& manifest);
  std::optional<nlohmann::json> load_manifest() const;

 private:
  std::filesystem::path record_path(const std::string& problem_id) const;

  std::filesystem::path dir_;
  std::string run_id_;
  std::mutex mu_;
};

}  // namespace capreason::pipeline
