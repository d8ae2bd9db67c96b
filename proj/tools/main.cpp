#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "capreason/dataset.hpp"
#include "capreason/evaluation.hpp"
#include "capreason/run_config.hpp"
#include "capreason/run_store.hpp"
#include "capreason/util.hpp"

namespace {

using namespace capreason;

constexpr int kExitSuccess = 0;
constexpr int kExitPartial = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDataset = 3;

struct CommonPaths {
  std::string runs_dir = "runs";
  std::string records_dir = "records";
};

std::optional<std::filesystem::path> optional_path(const std::string& value) {
  if (value.empty()) return std::nullopt;
  return std::filesystem::path(value);
}

int cmd_validate(const std::string& dataset_path, const std::string& image_root) {
  try {
    dataset::Dataset ds = dataset::load_dataset(dataset_path, optional_path(image_root));
    std::cout << dataset::render_manifest(ds.manifest);
    return kExitSuccess;
  } catch (const dataset::DatasetError& e) {
    std::cerr << e.what() << '\n';
    return kExitDataset;
  }
}

int cmd_route(const std::string& dataset_path, const std::string& image_root) {
  try {
    dataset::Dataset ds = dataset::load_dataset(dataset_path, optional_path(image_root));
    const pipeline::RouteTable table = pipeline::default_route_table();
    for (const domain::Problem& p : ds.problems) {
      std::cout << p.id << '\t' << p.category.value_or("(none)") << '\t'
                << pipeline::to_string(pipeline::route(p, table)) << '\n';
    }
    return kExitSuccess;
  } catch (const dataset::DatasetError& e) {
    std::cerr << e.what() << '\n';
    return kExitDataset;
  }
}

std::string default_run_id(const std::string& config_digest, const std::string& dataset_digest) {
  return "run-" + config_digest.substr(0, 12) + "-" + dataset_digest.substr(0, 12);
}

int cmd_run(const std::string& config_path, const std::string& dataset_path,
            const std::string& image_root, int parallelism, bool replay_only, std::string run_id,
            const CommonPaths& paths) {
  cfg::RunConfig config;
  prompts::TemplateSet templates;
  std::shared_ptr<backend::BackendRegistry> registry;
  const backend::GatewayMode mode =
      replay_only ? backend::GatewayMode::ReplayOnly : backend::GatewayMode::Live;
  try {
    config = cfg::load_run_config(config_path);
    templates = prompts::TemplateSet::load(config.templates_dir);
    registry = cfg::build_registry(config, mode);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  dataset::Dataset ds;
  try {
    ds = dataset::load_dataset(dataset_path, optional_path(image_root));
  } catch (const dataset::DatasetError& e) {
    std::cerr << e.what() << '\n';
    return kExitDataset;
  }

  const std::string digest = pipeline::config_digest(config.pipeline);
  if (run_id.empty()) run_id = default_run_id(digest, ds.manifest.dataset_digest);
  if (parallelism <= 0) parallelism = config.parallelism;

  auto store = std::make_shared<backend::RecordStore>(paths.records_dir);
  auto gateway = cfg::build_gateway(config, registry, store, mode);
  pipeline::Engine engine(templates, *gateway, pipeline::EngineOptions{config.answer_marker});

  pipeline::RunStore run_store(paths.runs_dir, run_id);
  std::vector<std::string> problem_ids;
  problem_ids.reserve(ds.problems.size());
  for (const domain::Problem& p : ds.problems) problem_ids.push_back(p.id);

  nlohmann::json manifest = {{"run_id", run_id},
                             {"created_at", iso8601_utc_now()},
                             {"config", cfg::run_config_to_json(config)},
                             {"config_digest", digest},
                             {"dataset_path", dataset_path},
                             {"image_root", image_root},
                             {"dataset_digest", ds.manifest.dataset_digest},
                             {"problem_ids", problem_ids}};
  run_store.write_manifest(manifest);

  pipeline::BatchResult batch = engine.run_batch(ds.problems, config.pipeline, parallelism,
                                                 &run_store);

  manifest["status"] = {{"completed", static_cast<int>(batch.records.size() -
                                                       batch.failures.size())},
                        {"failed", static_cast<int>(batch.failures.size())},
                        {"reused", batch.reused}};
  run_store.write_manifest(manifest);

  std::cout << "run " << run_id << ": " << batch.records.size() - batch.failures.size() << "/"
            << batch.records.size() << " problems completed";
  if (batch.reused > 0) std::cout << " (" << batch.reused << " reused)";
  std::cout << '\n';
  for (const pipeline::BatchFailure& failure : batch.failures)
    std::cout << "  failed " << failure.problem_id << " at " << failure.stage << ": "
              << failure.message << '\n';
  return batch.all_completed() ? kExitSuccess : kExitPartial;
}

int cmd_judge(const std::string& run_id, const std::string& judge_model_ref, int parallelism,
              bool replay_only, const CommonPaths& paths) {
  if (!pipeline::RunStore::exists(paths.runs_dir, run_id)) {
    std::cerr << "unknown run id \"" << run_id << "\"\n";
    return kExitConfig;
  }
  pipeline::RunStore run_store(paths.runs_dir, run_id);
  const auto manifest = run_store.load_manifest();
  if (!manifest) {
    std::cerr << "run " << run_id << " has no manifest\n";
    return kExitConfig;
  }

  cfg::RunConfig config;
  prompts::TemplateSet templates;
  std::shared_ptr<backend::BackendRegistry> registry;
  domain::ModelSpec judge_model;
  const backend::GatewayMode mode =
      replay_only ? backend::GatewayMode::ReplayOnly : backend::GatewayMode::Live;
  try {
    config = cfg::run_config_from_json(manifest->at("config"), ".");
    templates = prompts::TemplateSet::load(config.templates_dir);
    registry = cfg::build_registry(config, mode);
    if (!judge_model_ref.empty()) {
      auto parsed = domain::parse_model_ref(judge_model_ref);
      if (!parsed) throw cfg::ConfigError("--judge-model must look like provider:model_id");
      judge_model = *parsed;
    } else if (config.judge_model) {
      judge_model = *config.judge_model;
    } else {
      throw cfg::ConfigError("no judge model: set judge_model in the config or pass --judge-model");
    }
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  std::vector<std::string> problem_ids;
  for (const auto& id : manifest->at("problem_ids")) problem_ids.push_back(id.get<std::string>());
  std::vector<pipeline::RunRecord> records = run_store.load_many(problem_ids);
  if (records.empty()) {
    std::cerr << "run " << run_id << " has no records to judge\n";
    return kExitConfig;
  }

  dataset::Dataset ds;
  try {
    ds = dataset::load_dataset(manifest->at("dataset_path").get<std::string>(),
                               optional_path(manifest->value("image_root", "")));
  } catch (const dataset::DatasetError& e) {
    std::cerr << e.what() << '\n';
    return kExitDataset;
  }
  std::map<std::string, const domain::Problem*> by_id;
  for (const domain::Problem& p : ds.problems) by_id[p.id] = &p;

  auto store = std::make_shared<backend::RecordStore>(paths.records_dir);
  auto gateway = cfg::build_gateway(config, registry, store, mode);

  std::atomic<std::size_t> next{0};
  std::atomic<int> judged{0};
  std::atomic<int> failed{0};
  std::mutex io_mu;

  auto worker = [&]() {
    for (;;) {
      const std::size_t index = next.fetch_add(1);
      if (index >= records.size()) return;
      pipeline::RunRecord& record = records[index];
      if (!record.completed() || record.verdict.has_value()) continue;
      auto it = by_id.find(record.problem_id);
      if (it == by_id.end()) {
        std::lock_guard<std::mutex> lock(io_mu);
        std::cerr << "  problem " << record.problem_id << " not in dataset; skipped\n";
        failed.fetch_add(1);
        continue;
      }
      try {
        domain::JudgeVerdict verdict =
            eval::judge(*it->second, record.final_answer, judge_model, templates, *gateway);
        if (verdict.rationale && *verdict.rationale == "unparseable")
          record.warnings.push_back("judge output unparseable; scored Incorrect");
        record.verdict = verdict;
        run_store.save(record);
        judged.fetch_add(1);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(io_mu);
        std::cerr << "  judge failed for " << record.problem_id << ": " << e.what() << '\n';
        failed.fetch_add(1);
      }
    }
  };

  if (parallelism <= 0) parallelism = config.parallelism;
  const int threads = std::min<int>(parallelism, static_cast<int>(records.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  std::cout << "judged " << judged.load() << " records in run " << run_id;
  if (failed.load() > 0) std::cout << " (" << failed.load() << " failures)";
  std::cout << '\n';
  return failed.load() == 0 ? kExitSuccess : kExitPartial;
}

int cmd_report(const std::string& run_id, const std::string& group_by, const std::string& format,
               const CommonPaths& paths) {
  auto grouping = eval::parse_grouping(group_by);
  if (!grouping) {
    std::cerr << "unknown --group-by \"" << group_by << "\" (level|category|vision)\n";
    return kExitConfig;
  }
  auto report_format = eval::parse_report_format(format);
  if (!report_format) {
    std::cerr << "unknown --format \"" << format << "\" (table-text|csv)\n";
    return kExitConfig;
  }
  if (!pipeline::RunStore::exists(paths.runs_dir, run_id)) {
    std::cerr << "unknown run id \"" << run_id << "\"\n";
    return kExitConfig;
  }
  pipeline::RunStore run_store(paths.runs_dir, run_id);
  const auto manifest = run_store.load_manifest();
  std::vector<std::string> problem_ids;
  if (manifest && manifest->contains("problem_ids"))
    for (const auto& id : manifest->at("problem_ids")) problem_ids.push_back(id.get<std::string>());
  else
    problem_ids = run_store.stored_problem_ids();

  std::vector<pipeline::RunRecord> all = run_store.load_many(problem_ids);
  std::vector<pipeline::RunRecord> completed;
  for (pipeline::RunRecord& record : all)
    if (record.completed()) completed.push_back(std::move(record));
  const std::size_t skipped = all.size() - completed.size();

  eval::AccuracyReport report;
  try {
    report = eval::aggregate(completed, *grouping);
  } catch (const eval::MissingVerdict& e) {
    std::cerr << e.what() << " (run `judge` first)\n";
    return kExitConfig;
  }

  const std::string table = eval::render_report(report, eval::ReportFormat::TableText);
  const std::string csv = eval::render_report(report, eval::ReportFormat::Csv);
  const std::string base = "report." + std::string(eval::to_string(*grouping));
  {
    std::ofstream txt(run_store.dir() / (base + ".txt"), std::ios::binary | std::ios::trunc);
    txt << table;
    std::ofstream csv_out(run_store.dir() / (base + ".csv"), std::ios::binary | std::ios::trunc);
    csv_out << csv;
  }

  std::cout << (*report_format == eval::ReportFormat::Csv ? csv : table);
  if (skipped > 0) std::cout << "(" << skipped << " failed records excluded)\n";
  return kExitSuccess;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"caption-assisted multimodal reasoning pipeline"};
  app.require_subcommand(1);

  CommonPaths paths;

  std::string dataset_path;
  std::string image_root;
  std::string config_path;
  std::string run_id;
  std::string judge_model_ref;
  std::string group_by = "level";
  std::string format = "table-text";
  int parallelism = 0;  // 0 = take the config's value
  bool replay_only = false;

  CLI::App* validate = app.add_subcommand("validate", "validate a dataset and print its manifest");
  validate->add_option("--dataset", dataset_path, "line-delimited dataset file")->required();
  validate->add_option("--image-root", image_root, "image path root (default: dataset directory)");

  CLI::App* run = app.add_subcommand("run", "execute a pipeline over a dataset");
  run->add_option("--config", config_path, "run config file")->required();
  run->add_option("--dataset", dataset_path, "line-delimited dataset file")->required();
  run->add_option("--image-root", image_root, "image path root");
  run->add_option("--parallelism", parallelism, "concurrent problems");
  run->add_flag("--replay-only", replay_only, "serve every request from the record store");
  run->add_option("--run-id", run_id, "run identifier (default derives from digests)");
  run->add_option("--runs-dir", paths.runs_dir, "run store root");
  run->add_option("--records-dir", paths.records_dir, "record/replay store root");

  CLI::App* judge = app.add_subcommand("judge", "attach judge verdicts to a run");
  judge->add_option("--run-id", run_id, "run identifier")->required();
  judge->add_option("--judge-model", judge_model_ref, "provider:model_id override");
  judge->add_option("--parallelism", parallelism, "concurrent judge calls");
  judge->add_flag("--replay-only", replay_only, "serve every request from the record store");
  judge->add_option("--runs-dir", paths.runs_dir, "run store root");
  judge->add_option("--records-dir", paths.records_dir, "record/replay store root");

  CLI::App* report = app.add_subcommand("report", "aggregate verdicts and render accuracy tables");
  report->add_option("--run-id", run_id, "run identifier")->required();
  report->add_option("--group-by", group_by, "level|category|vision");
  report->add_option("--format", format, "table-text|csv (stdout format)");
  report->add_option("--runs-dir", paths.runs_dir, "run store root");

  CLI::App* route_cmd = app.add_subcommand("route", "print per-problem routing decisions");
  route_cmd->add_option("--dataset", dataset_path, "line-delimited dataset file")->required();
  route_cmd->add_option("--image-root", image_root, "image path root");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitSuccess : kExitConfig;
  }

  try {
    if (validate->parsed()) return cmd_validate(dataset_path, image_root);
    if (run->parsed())
      return cmd_run(config_path, dataset_path, image_root, parallelism, replay_only, run_id,
                     paths);
    if (judge->parsed())
      return cmd_judge(run_id, judge_model_ref, parallelism, replay_only, paths);
    if (report->parsed()) return cmd_report(run_id, group_by, format, paths);
    if (route_cmd->parsed()) return cmd_route(dataset_path, image_root);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}
