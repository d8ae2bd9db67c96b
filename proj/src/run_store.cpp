#include "capreason/run_store.hpp"

#include <algorithm>
#include <fstream>

namespace capreason::pipeline {

namespace {

void write_json_atomic(const std::filesystem::path& path, const nlohmann::json& value) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << value.dump(2) << '\n';
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

RunStore::RunStore(std::filesystem::path runs_root, std::string run_id)
    : dir_(runs_root / run_id), run_id_(std::move(run_id)) {
  std::filesystem::create_directories(dir_);
}

bool RunStore::exists(const std::filesystem::path& runs_root, const std::string& run_id) {
  return std::filesystem::exists(runs_root / run_id / "manifest.json");
}

std::filesystem::path RunStore::record_path(const std::string& problem_id) const {
  return dir_ / (problem_id + ".json");
}

std::optional<RunRecord> RunStore::load(const std::string& problem_id) const {
  std::ifstream in(record_path(problem_id), std::ios::binary);
  if (!in) return std::nullopt;
  return run_record_from_json(nlohmann::json::parse(in));
}

void RunStore::save(const RunRecord& record) {
  // distinct problem ids write distinct files; the lock only guards
  // same-id rewrites (e.g. attaching verdicts)
  std::lock_guard<std::mutex> lock(mu_);
  write_json_atomic(record_path(record.problem_id), to_json(record));
}

std::vector<RunRecord> RunStore::load_many(const std::vector<std::string>& problem_ids) const {
  std::vector<RunRecord> records;
  records.reserve(problem_ids.size());
  for (const std::string& id : problem_ids)
    if (auto record = load(id)) records.push_back(std::move(*record));
  return records;
}

std::vector<std::string> RunStore::stored_problem_ids() const {
  std::vector<std::string> ids;
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
    const std::string stem = entry.path().stem().string();
    if (stem == "manifest" || stem.rfind("report.", 0) == 0) continue;
    ids.push_back(stem);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

void RunStore::write_manifest(const nlohmann::json& manifest) {
  write_json_atomic(dir_ / "manifest.json", manifest);
}

std::optional<nlohmann::json> RunStore::load_manifest() const {
  std::ifstream in(dir_ / "manifest.json", std::ios::binary);
  if (!in) return std::nullopt;
  return nlohmann::json::parse(in);
}

}  // namespace capreason::pipeline
