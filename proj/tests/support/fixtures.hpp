#pragma once

// Shared test fixtures: temp dirs, synthetic datasets shaped like the
// 200-problem evaluation subset, a mock gateway environment, and a
// deterministic fault-injection backend.

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "capreason/backend.hpp"
#include "capreason/gateway.hpp"
#include "capreason/pipeline.hpp"
#include "capreason/prompts.hpp"
#include "capreason/util.hpp"

namespace testsupport {

namespace fs = std::filesystem;
using namespace capreason;

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("capreason-test-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter.fetch_add(1)));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

inline std::vector<std::uint8_t> image_bytes_for(const std::string& id) {
  std::vector<std::uint8_t> bytes = {0x89, 'P', 'N', 'G'};
  for (char c : id) bytes.push_back(static_cast<std::uint8_t>(c));
  return bytes;
}

inline domain::Problem make_problem(std::string id,
                                    domain::KnowledgeLevel level = domain::KnowledgeLevel::Mid,
                                    std::optional<std::string> category = std::nullopt,
                                    bool with_image = true) {
  domain::Problem p;
  p.id = std::move(id);
  p.question = "Compute the quantity asked for in problem " + p.id + ".";
  p.ground_truth = "42 units";
  p.level = level;
  p.category = std::move(category);
  if (with_image) {
    domain::ImageRef ref;
    ref.path = p.id + ".png";
    ref.media_type = domain::MediaType::Png;
    auto bytes = std::make_shared<std::vector<std::uint8_t>>(image_bytes_for(p.id));
    ref.bytes_digest = sha256_hex(*bytes);
    ref.bytes = std::move(bytes);
    p.image = std::move(ref);
  }
  return p;
}

// Per-level sizes of the 200-problem fixture.
inline const std::vector<std::pair<domain::KnowledgeLevel, int>>& mini_histogram() {
  static const std::vector<std::pair<domain::KnowledgeLevel, int>> histogram = {
      {domain::KnowledgeLevel::Mid, 8},  {domain::KnowledgeLevel::High, 18},
      {domain::KnowledgeLevel::BO, 13},  {domain::KnowledgeLevel::AO, 46},
      {domain::KnowledgeLevel::UG, 42},  {domain::KnowledgeLevel::SUG, 19},
      {domain::KnowledgeLevel::MA, 7},   {domain::KnowledgeLevel::PhD, 47}};
  return histogram;
}

inline const std::vector<std::string>& fixture_categories() {
  static const std::vector<std::string> categories = {
      // image-direct ones
      "quantum mechanics", "projectile motion", "electromagnetic fields", "charge distribution",
      "circuit diagrams", "spring force", "atomic physics",
      // caption-based ones
      "thermodynamics", "optics", "fluid mechanics", "waves", "kinematics", "relativity",
      "nuclear physics"};
  return categories;
}

inline std::string padded_id(int n) {
  std::string digits = std::to_string(n);
  return "p" + std::string(3 - std::min<std::size_t>(3, digits.size()), '0') + digits;
}

// In-memory problems matching the fixture histogram, categories cycling
// through fixture_categories().
inline std::vector<domain::Problem> make_mini_problems() {
  std::vector<domain::Problem> problems;
  int n = 0;
  for (const auto& [level, count] : mini_histogram()) {
    for (int i = 0; i < count; ++i) {
      ++n;
      problems.push_back(make_problem(padded_id(n), level,
                                      fixture_categories()[n % fixture_categories().size()]));
    }
  }
  return problems;
}

struct MiniFixtureFiles {
  fs::path dataset_path;
  fs::path image_root;
};

// Writes the fixture to disk as a line-delimited dataset plus image files.
inline MiniFixtureFiles write_mini_dataset(const fs::path& dir) {
  fs::create_directories(dir / "images");
  std::string lines;
  for (const domain::Problem& p : make_mini_problems()) {
    const std::string image_rel = "images/" + p.id + ".png";
    {
      std::ofstream img(dir / image_rel, std::ios::binary | std::ios::trunc);
      const auto bytes = image_bytes_for(p.id);
      img.write(reinterpret_cast<const char*>(bytes.data()),
                static_cast<std::streamsize>(bytes.size()));
    }
    nlohmann::json record = {{"id", p.id},
                             {"question", p.question},
                             {"ground_truth", p.ground_truth},
                             {"level", std::string(domain::to_string(p.level))},
                             {"category", *p.category},
                             {"image", image_rel}};
    lines += record.dump();
    lines += '\n';
  }
  const fs::path dataset_path = dir / "seephys-mini-fixture.jsonl";
  write_file(dataset_path, lines);
  return {dataset_path, dir};
}

inline domain::ModelSpec mock_model(const std::string& model_id) {
  domain::ModelSpec spec;
  spec.provider = "mock";
  spec.model_id = model_id;
  return spec;
}

struct MockEnv {
  std::shared_ptr<backend::BackendRegistry> registry;
  std::shared_ptr<backend::MockBackend> mock;
  std::shared_ptr<backend::RecordStore> store;
  std::unique_ptr<backend::Gateway> gateway;
  prompts::TemplateSet templates;
};

inline MockEnv make_mock_env(const fs::path& records_dir,
                             backend::GatewayMode mode = backend::GatewayMode::Live,
                             backend::RetryPolicy policy = {}) {
  MockEnv env;
  env.registry = std::make_shared<backend::BackendRegistry>();
  env.mock = std::make_shared<backend::MockBackend>();
  env.registry->add("mock", env.mock);
  env.store = std::make_shared<backend::RecordStore>(records_dir);
  env.gateway = std::make_unique<backend::Gateway>(env.registry, env.store, policy, mode);
  env.templates = prompts::TemplateSet::load(CAPREASON_TEMPLATES_DIR);
  return env;
}

// The strongest configuration: structured captioning, image reintegration,
// format optimization, critical review.
inline pipeline::PipelineConfig final_pipeline_config() {
  pipeline::PipelineConfig cfg;
  cfg.caption_mode = domain::CaptionMode::Structured;
  cfg.caption_model = mock_model("captioner");
  cfg.answer_model = mock_model("answerer");
  cfg.reintegrate_image = true;
  cfg.format_optimization = true;
  cfg.critical_review = mock_model("reviewer");
  cfg.image_to_answer_allowed = true;
  return cfg;
}

// Direct multimodal baseline: no captioning at all.
inline pipeline::PipelineConfig direct_config() {
  pipeline::PipelineConfig cfg;
  cfg.answer_model = mock_model("answerer");
  cfg.image_to_answer_allowed = true;
  return cfg;
}

// Caption-only: the answer and review stages never see the image.
inline pipeline::PipelineConfig caption_only_config() {
  pipeline::PipelineConfig cfg;
  cfg.caption_mode = domain::CaptionMode::Structured;
  cfg.caption_model = mock_model("captioner");
  cfg.answer_model = mock_model("answerer");
  cfg.format_optimization = true;
  cfg.critical_review = mock_model("reviewer");
  cfg.image_to_answer_allowed = false;
  return cfg;
}

// Deterministic fault injection: whether attempt k for a problem fails is a
// pure function of (problem id, k), so outcomes are independent of thread
// scheduling.
class FaultInjectingBackend : public backend::ChatBackend {
 public:
  explicit FaultInjectingBackend(double transient_rate,
                                 std::set<std::string> permanent_ids = {})
      : transient_rate_(transient_rate), permanent_ids_(std::move(permanent_ids)) {}

  static double fail_fraction(const std::string& problem_id, int attempt) {
    const std::string hex = sha256_hex(problem_id + "#" + std::to_string(attempt));
    return static_cast<double>(std::stoull(hex.substr(0, 8), nullptr, 16)) / 4294967296.0;
  }

  backend::BackendReply complete(const backend::CompletionRequest& req) override {
    int attempt = 0;
    {
      std::lock_guard<std::mutex> lock(mu_);
      attempt = ++attempts_[req.meta.problem_id];
    }
    if (permanent_ids_.count(req.meta.problem_id) > 0)
      throw backend::PermanentRejection("scripted permanent rejection");
    if (fail_fraction(req.meta.problem_id, attempt) < transient_rate_)
      throw backend::TransientBackendError("injected transient fault");
    const std::string reply = "ANSWER: ok-" + req.meta.problem_id;
    return {reply, backend::estimate_usage(req, reply)};
  }

  backend::ResultSource source_kind() const override { return backend::ResultSource::Mock; }

  int attempts(const std::string& problem_id) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = attempts_.find(problem_id);
    return it == attempts_.end() ? 0 : it->second;
  }

 private:
  double transient_rate_;
  std::set<std::string> permanent_ids_;
  mutable std::mutex mu_;
  std::map<std::string, int> attempts_;
};

}  // namespace testsupport
