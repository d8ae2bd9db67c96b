#include <doctest.h>

#include <random>

#include "support/fixtures.hpp"

using namespace capreason;
using testsupport::TempDir;
using testsupport::write_file;

namespace {

// Copies the shipped templates into a scratch dir so cases can perturb them.
void copy_templates(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& entry : std::filesystem::directory_iterator(CAPREASON_TEMPLATES_DIR))
    std::filesystem::copy_file(entry.path(), dir / entry.path().filename());
}

}  // namespace

TEST_CASE("shipped template directory loads all nine templates") {
  auto set = prompts::TemplateSet::load(CAPREASON_TEMPLATES_DIR);
  CHECK(set.size() == 9);
  CHECK(set.get(prompts::TemplateId::JudgePrompt).required_vars ==
        std::set<std::string>{"question", "ground_truth", "answer"});
  CHECK(set.get(prompts::TemplateId::CriticalReviewPrompt).required_vars.count("question") == 1);
  CHECK(set.get(prompts::TemplateId::CriticalReviewPrompt).required_vars.count("answer") == 1);
}

TEST_CASE("loading fails with MissingTemplate when a file is absent") {
  TempDir dir;
  copy_templates(dir.path());
  std::filesystem::remove(dir / "JudgePrompt.prompt");
  try {
    prompts::TemplateSet::load(dir.path());
    FAIL("expected MissingTemplate");
  } catch (const prompts::MissingTemplate& e) {
    CHECK(e.id == prompts::TemplateId::JudgePrompt);
  }
}

TEST_CASE("loading fails with PlaceholderMismatch on a typo placeholder") {
  TempDir dir;
  copy_templates(dir.path());
  write_file(dir / "AnswerPrompt.prompt",
             "# id: AnswerPrompt\nSolve {question} given {captoin}.\n");
  try {
    prompts::TemplateSet::load(dir.path());
    FAIL("expected PlaceholderMismatch");
  } catch (const prompts::PlaceholderMismatch& e) {
    CHECK(e.id == prompts::TemplateId::AnswerPrompt);
  }
}

TEST_CASE("loading fails when a required placeholder is missing") {
  TempDir dir;
  copy_templates(dir.path());
  write_file(dir / "JudgePrompt.prompt",
             "# id: JudgePrompt\nJudge {question} against {answer}.\nVERDICT: CORRECT or "
             "VERDICT: INCORRECT\n");
  CHECK_THROWS_AS(prompts::TemplateSet::load(dir.path()), prompts::PlaceholderMismatch);
}

TEST_CASE("loading rejects a wrong header line") {
  TempDir dir;
  copy_templates(dir.path());
  write_file(dir / "RephrasePrompt.prompt", "# id: AnswerPrompt\nRephrase {question}.\n");
  CHECK_THROWS_AS(prompts::TemplateSet::load(dir.path()), prompts::MissingTemplate);
}

TEST_CASE("render substitutes placeholders literally") {
  prompts::PromptTemplate tmpl;
  tmpl.id = prompts::TemplateId::AnswerPrompt;
  tmpl.body = "Solve: {question}";
  tmpl.required_vars = {"question"};

  auto rendered = prompts::render(tmpl, {{"question", "Q1 text"}});
  CHECK(rendered.text == "Solve: Q1 text");

  SUBCASE("binding values containing placeholder-like text pass through") {
    auto tricky = prompts::render(tmpl, {{"question", "literal {answer} stays"}});
    CHECK(tricky.text == "Solve: literal {answer} stays");
  }

  SUBCASE("missing bindings raise MissingBinding") {
    tmpl.body = "{question} {caption}";
    tmpl.required_vars = {"question", "caption"};
    try {
      prompts::render(tmpl, {{"question", "q"}});
      FAIL("expected MissingBinding");
    } catch (const prompts::MissingBinding& e) {
      CHECK(e.name == "caption");
    }
  }

  SUBCASE("extra bindings are ignored") {
    auto extra = prompts::render(tmpl, {{"question", "q"}, {"unused", "x"}});
    CHECK(extra.text == "Solve: q");
  }
}

TEST_CASE("doubled braces escape literals") {
  prompts::PromptTemplate tmpl;
  tmpl.id = prompts::TemplateId::AnswerPrompt;
  tmpl.body = "set {{x}} to {question}";
  tmpl.required_vars = prompts::scan_placeholders(tmpl.id, tmpl.body);
  CHECK(tmpl.required_vars == std::set<std::string>{"question"});
  CHECK(prompts::render(tmpl, {{"question", "1"}}).text == "set {x} to 1");
}

TEST_CASE("render is deterministic and length-linear in substituted values") {
  std::mt19937 rng(7);
  auto random_word = [&rng](std::size_t max_len) {
    std::string word;
    std::size_t len = rng() % max_len;
    for (std::size_t i = 0; i < len; ++i) word.push_back(static_cast<char>('a' + rng() % 26));
    return word;
  };

  for (int trial = 0; trial < 100; ++trial) {
    prompts::PromptTemplate tmpl;
    tmpl.id = prompts::TemplateId::AnswerPrompt;
    tmpl.body = random_word(30) + "{question}" + random_word(30) + "{caption}" + random_word(30);
    tmpl.required_vars = {"question", "caption"};

    std::map<std::string, std::string> bindings = {{"question", random_word(50)},
                                                   {"caption", random_word(50)}};
    auto a = prompts::render(tmpl, bindings);
    auto b = prompts::render(tmpl, bindings);
    CHECK(a.text == b.text);
    CHECK(a.bindings_digest == b.bindings_digest);

    const std::size_t placeholder_tokens = std::string("{question}{caption}").size();
    CHECK(a.text.size() == tmpl.body.size() - placeholder_tokens +
                               bindings.at("question").size() + bindings.at("caption").size());
  }
}

TEST_CASE("template loading is independent of directory enumeration order") {
  // Two directories with identical content but different file creation
  // order must produce identical template sets.
  TempDir first;
  TempDir second;
  copy_templates(first.path());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(first.path()))
    files.push_back(entry.path());
  std::sort(files.begin(), files.end(), std::greater<>());
  std::filesystem::create_directories(second.path());
  for (const auto& file : files) std::filesystem::copy_file(file, second.path() / file.filename());

  auto a = prompts::TemplateSet::load(first.path());
  auto b = prompts::TemplateSet::load(second.path());
  REQUIRE(a.size() == b.size());
  for (prompts::TemplateId id : prompts::kAllTemplates) {
    CHECK(a.get(id).body == b.get(id).body);
    CHECK(a.get(id).required_vars == b.get(id).required_vars);
  }
}
