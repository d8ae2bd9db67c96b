#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "support/fixtures.hpp"

using namespace capreason;
using testsupport::TempDir;
using testsupport::write_file;

namespace {

struct CmdResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

CmdResult run_cli(const std::filesystem::path& cwd, const std::string& args) {
  const std::filesystem::path out_file = cwd / ".cli-output.txt";
  std::ostringstream cmd;
  cmd << "cd '" << cwd.string() << "' && '" << CAPREASON_BIN << "' " << args << " > '"
      << out_file.string() << "' 2>&1";
  const int rc = std::system(cmd.str().c_str());

  CmdResult result;
  result.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  std::ifstream in(out_file, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  result.output = buffer.str();
  return result;
}

std::string mock_config_json(bool with_caption = true) {
  nlohmann::json pipeline;
  if (with_caption) {
    pipeline["caption_mode"] = "Structured";
    pipeline["caption_model"] = {{"provider", "mock"}, {"model_id", "captioner"}};
    pipeline["reintegrate_image"] = true;
  }
  pipeline["answer_model"] = {{"provider", "mock"}, {"model_id", "answerer"}};
  pipeline["format_optimization"] = with_caption;
  if (with_caption) pipeline["critical_review"] = {{"provider", "mock"}, {"model_id", "reviewer"}};
  pipeline["image_to_answer_allowed"] = true;

  nlohmann::json config = {
      {"pipeline", pipeline},
      {"backends", {{"mock", {{"kind", "mock"}}}}},
      {"judge_model", {{"provider", "mock"}, {"model_id", "judge"}}},
      {"templates_dir", CAPREASON_TEMPLATES_DIR},
      {"parallelism", 4}};
  return config.dump(2);
}

}  // namespace

TEST_CASE("cli validate prints the manifest and exits 0") {
  TempDir dir;
  auto fixture = testsupport::write_mini_dataset(dir.path());
  auto result = run_cli(dir.path(), "validate --dataset '" + fixture.dataset_path.string() + "'");
  CHECK(result.exit_code == 0);
  CHECK(result.output.find("problems: 200") != std::string::npos);
  CHECK(result.output.find("PhD: 47") != std::string::npos);
}

TEST_CASE("cli validate reports parse errors with exit 3") {
  TempDir dir;
  std::string lines;
  nlohmann::json good = {
      {"id", "p1"}, {"question", "q"}, {"ground_truth", "g"}, {"level", "Mid"}};
  for (int i = 0; i < 6; ++i) {
    good["id"] = "p" + std::to_string(i + 1);
    lines += good.dump() + "\n";
  }
  lines += "not json at all\n";
  write_file(dir / "bad.jsonl", lines);

  auto result = run_cli(dir.path(), "validate --dataset bad.jsonl");
  CHECK(result.exit_code == 3);
  CHECK(result.output.find("ParseError line 7") != std::string::npos);
}

TEST_CASE("cli route prints image-direct decisions for the seven categories") {
  TempDir dir;
  auto fixture = testsupport::write_mini_dataset(dir.path());
  auto result = run_cli(dir.path(), "route --dataset '" + fixture.dataset_path.string() + "'");
  CHECK(result.exit_code == 0);
  CHECK(result.output.find("spring force\tImageDirect") != std::string::npos);
  CHECK(result.output.find("thermodynamics\tCaptionBased") != std::string::npos);
}

TEST_CASE("cli rejects an invalid pipeline config before creating a run directory") {
  TempDir dir;
  auto fixture = testsupport::write_mini_dataset(dir.path());
  nlohmann::json config = nlohmann::json::parse(mock_config_json(false));
  config["pipeline"]["reintegrate_image"] = true;  // Img without caption mode
  write_file(dir / "config.json", config.dump());

  auto result = run_cli(dir.path(), "run --config config.json --dataset '" +
                                        fixture.dataset_path.string() + "' --run-id r1");
  CHECK(result.exit_code == 2);
  CHECK_FALSE(std::filesystem::exists(dir / "runs" / "r1"));
}

TEST_CASE("cli run, judge, and report complete against the mock backend") {
  TempDir dir;
  auto fixture = testsupport::write_mini_dataset(dir.path());
  write_file(dir / "config.json", mock_config_json());

  auto run = run_cli(dir.path(), "run --config config.json --dataset '" +
                                     fixture.dataset_path.string() + "' --run-id r1");
  CHECK(run.exit_code == 0);
  CHECK(run.output.find("200/200 problems completed") != std::string::npos);
  CHECK(std::filesystem::exists(dir / "runs" / "r1" / "manifest.json"));
  CHECK(std::filesystem::exists(dir / "runs" / "r1" / "p001.json"));
  CHECK(std::filesystem::exists(dir / "runs" / "r1" / "p200.json"));

  SUBCASE("rerunning reuses completed records") {
    auto rerun = run_cli(dir.path(), "run --config config.json --dataset '" +
                                         fixture.dataset_path.string() + "' --run-id r1");
    CHECK(rerun.exit_code == 0);
    CHECK(rerun.output.find("(200 reused)") != std::string::npos);
  }

  SUBCASE("report before judging exits 2") {
    auto report = run_cli(dir.path(), "report --run-id r1");
    CHECK(report.exit_code == 2);
    CHECK(report.output.find("judge") != std::string::npos);
  }

  SUBCASE("judge then report produce Table-shaped output and files") {
    auto judge = run_cli(dir.path(), "judge --run-id r1");
    CHECK(judge.exit_code == 0);
    CHECK(judge.output.find("judged 200 records") != std::string::npos);

    auto report = run_cli(dir.path(), "report --run-id r1 --group-by level");
    CHECK(report.exit_code == 0);
    CHECK(report.output.find("Mid") != std::string::npos);
    CHECK(report.output.find("Total") != std::string::npos);
    CHECK(std::filesystem::exists(dir / "runs" / "r1" / "report.level.txt"));
    CHECK(std::filesystem::exists(dir / "runs" / "r1" / "report.level.csv"));

    // the fallback mock has no verdict marker, so judging scores 0/200
    std::ifstream csv(dir / "runs" / "r1" / "report.level.csv");
    std::ostringstream buffer;
    buffer << csv.rdbuf();
    CHECK(buffer.str().find("OVERALL,0,200,0.0") != std::string::npos);

    SUBCASE("a fully recorded run replays with zero failures") {
      auto replay = run_cli(dir.path(), "run --config config.json --dataset '" +
                                            fixture.dataset_path.string() +
                                            "' --run-id r2 --replay-only --parallelism 1");
      CHECK(replay.exit_code == 0);
      CHECK(replay.output.find("200/200") != std::string::npos);

      auto judge_replay = run_cli(dir.path(), "judge --run-id r2 --replay-only");
      CHECK(judge_replay.exit_code == 0);

      auto report2 = run_cli(dir.path(), "report --run-id r2 --group-by level");
      CHECK(report2.exit_code == 0);
      CHECK(report2.output == report.output);
    }
  }
}

TEST_CASE("cli replay-only against an empty record store fails partially with exit 1") {
  TempDir dir;
  auto fixture = testsupport::write_mini_dataset(dir.path());
  write_file(dir / "config.json", mock_config_json());

  auto result = run_cli(dir.path(), "run --config config.json --dataset '" +
                                        fixture.dataset_path.string() +
                                        "' --run-id r1 --replay-only --records-dir empty-records");
  CHECK(result.exit_code == 1);
  CHECK(result.output.find("failed") != std::string::npos);
}

TEST_CASE("cli judge on an unknown run id exits 2") {
  TempDir dir;
  auto result = run_cli(dir.path(), "judge --run-id nonexistent");
  CHECK(result.exit_code == 2);
  CHECK(result.output.find("unknown run id") != std::string::npos);
}

TEST_CASE("cli judge on a run with zero records exits 2") {
  TempDir dir;
  write_file(dir / "empty.jsonl", "");
  write_file(dir / "config.json", mock_config_json(false));
  auto run = run_cli(dir.path(), "run --config config.json --dataset empty.jsonl --run-id r0");
  CHECK(run.exit_code == 0);

  auto judge = run_cli(dir.path(), "judge --run-id r0");
  CHECK(judge.exit_code == 2);
  CHECK(judge.output.find("no records") != std::string::npos);
}

TEST_CASE("cli report with a csv stdout format matches the written file") {
  TempDir dir;
  auto fixture = testsupport::write_mini_dataset(dir.path());
  write_file(dir / "config.json", mock_config_json(false));  // answer-only, fast

  REQUIRE(run_cli(dir.path(), "run --config config.json --dataset '" +
                                  fixture.dataset_path.string() + "' --run-id r1")
              .exit_code == 0);
  REQUIRE(run_cli(dir.path(), "judge --run-id r1").exit_code == 0);

  auto report = run_cli(dir.path(), "report --run-id r1 --group-by category --format csv");
  CHECK(report.exit_code == 0);
  CHECK(report.output.find("group,correct,total,accuracy_pct") != std::string::npos);

  std::ifstream csv(dir / "runs" / "r1" / "report.category.csv");
  std::ostringstream buffer;
  buffer << csv.rdbuf();
  CHECK(report.output.rfind(buffer.str(), 0) == 0);
}

TEST_CASE("cli usage errors exit 2") {
  TempDir dir;
  CHECK(run_cli(dir.path(), "run --dataset missing-config.jsonl").exit_code == 2);
  CHECK(run_cli(dir.path(), "nonsense-subcommand").exit_code == 2);
  CHECK(run_cli(dir.path(), "report --run-id r1 --group-by bogus").exit_code == 2);
}
