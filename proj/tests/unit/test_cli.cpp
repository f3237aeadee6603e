#include <doctest.h>

#include <sstream>

#include "charactergpt/cli.hpp"
#include "support.hpp"

using namespace charactergpt;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code = -1;
    std::string out;
    std::string err;
};

Outcome run(std::vector<std::string> args, const std::string& input = {}) {
    args.insert(args.begin(), "charactergpt");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::istringstream in(input);
    std::ostringstream out, err;
    Outcome o;
    o.code = run_cli(static_cast<int>(argv.size()), argv.data(), in, out, err);
    o.out = out.str();
    o.err = err.str();
    return o;
}

struct Env {
    testsupport::TempDir tmp;
    std::vector<std::string> globals;

    Env() {
        testsupport::write_synthetic_corpus(tmp / "corpus", "cli", 3);
        globals = {"--store",
                   (tmp / "store").string(),
                   "--corpus-root",
                   (tmp / "corpus").string(),
                   "--prompts",
                   testsupport::prompts_dir().string(),
                   "--provider",
                   "mock:" + (testsupport::data_dir() / "mock" / "script.json").string(),
                   "--fixed-clock"};
    }

    Outcome operator()(std::vector<std::string> args, const std::string& input = {}) const {
        args.insert(args.end(), globals.begin(), globals.end());
        return run(args, input);
    }
};

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("exit code mapping") {
    CHECK(exit_code(ErrorKind::validation) == 1);
    CHECK(exit_code(ErrorKind::precondition) == 1);
    CHECK(exit_code(ErrorKind::not_found) == 1);
    CHECK(exit_code(ErrorKind::conflict) == 1);
    CHECK(exit_code(ErrorKind::transport) == 2);
    CHECK(exit_code(ErrorKind::protocol) == 2);
    CHECK(exit_code(ErrorKind::internal) == 3);
}

TEST_CASE("help and usage errors") {
    CHECK(run({"--help"}).code == 0);
    CHECK(run({}).code == 1);
    CHECK(run({"frobnicate"}).code == 1);
    CHECK(run({"persona", "x"}).code == 1);
}

TEST_CASE("corpus validate") {
    const auto ok = run({"corpus", "validate", (testsupport::data_dir() / "corpus" / "wren").string()});
    CHECK(ok.code == 0);
    CHECK(ok.out.find("Wren Halloway") != std::string::npos);
    CHECK(ok.out.find("ch003") != std::string::npos);
    const auto json = run({"corpus", "validate", (testsupport::data_dir() / "corpus" / "wren").string(), "--json"});
    CHECK(nlohmann::json::parse(json.out)["chapters"].size() == 3);
    testsupport::TempDir tmp;
    const auto bad = run({"corpus", "validate", (tmp / "nothing").string()});
    CHECK(bad.code == 1);
    CHECK_FALSE(bad.err.empty());
}

TEST_CASE("init, train, inspect, chat") {
    Env env;
    const auto early = env({"persona", "cli", "--epoch", "0"});
    CHECK(early.code == 1);
    CHECK(early.err.find("charactergpt init cli") != std::string::npos);

    CHECK(env({"init", "cli"}).code == 0);
    CHECK(env({"init", "cli"}).code == 1);
    const auto train = env({"train", "cli"});
    CHECK(train.code == 0);
    CHECK(train.out.find("epoch 3:") != std::string::npos);
    CHECK(env({"train", "cli"}).code == 1);
    CHECK(env({"train", "cli", "--resume-from", "1"}).code == 1);

    const auto epochs = env({"epochs", "cli", "--json"});
    CHECK(nlohmann::json::parse(epochs.out)["epochs"].size() == 4);
    const auto persona = env({"persona", "cli", "--epoch", "2"});
    CHECK(persona.code == 0);
    CHECK(persona.out.find("## Initialization") != std::string::npos);
    CHECK(persona.out.find("chapmark-3") == std::string::npos);
    const auto missing = env({"persona", "cli", "--epoch", "8"});
    CHECK(missing.code == 1);
    CHECK(missing.err.find("8") != std::string::npos);

    const auto out_file = (env.tmp / "p.md").string();
    CHECK(env({"persona", "cli", "--epoch", "3", "--out", out_file}).code == 0);
    CHECK(testsupport::read_file(out_file).find("## Trained") != std::string::npos);

    const auto chat = env({"chat", "cli", "--epoch", "1", "--json"}, "hello\nhow are you\n\nignored\n");
    CHECK(chat.code == 0);
    std::istringstream lines(chat.out);
    int n = 0;
    for (std::string line; std::getline(lines, line);) {
        CHECK(nlohmann::json::parse(line).contains("reply"));
        ++n;
    }
    CHECK(n == 2);
    CHECK(env({"stats", "cli"}).out.find("trained tokens") != std::string::npos);
}

TEST_CASE("eval commands") {
    Env env;
    REQUIRE(env({"init", "cli"}).code == 0);
    REQUIRE(env({"train", "cli"}).code == 0);

    const auto table = (env.tmp / "bfi.json").string();
    const auto bfi = env({"eval", "bfi", "cli", "--epoch", "3", "--runs", "2", "--out", table});
    CHECK(bfi.code == 0);
    CHECK(bfi.out.find("Fantasy") != std::string::npos);
    CHECK(nlohmann::json::parse(testsupport::read_file(table))["respondent"] == "cli@epoch3");
    CHECK(env({"eval", "bfi", "cli", "--epoch", "3", "--runs", "0"}).code == 1);

    const auto stories = env({"eval", "stories", "cli", "--epoch", "2", "-n", "2", "--json"});
    CHECK(stories.code == 0);
    CHECK(nlohmann::json::parse(stories.out)["stories"].size() == 2);

    const auto dir = testsupport::data_dir() / "bfi_tables" / "megumin";
    std::vector<std::string> cmp = {"eval", "compare", "--human", (dir / "human.json").string(),
                                    "--model", "ChatGPT=" + (dir / "chatgpt.json").string(),
                                    "--model", "ChatGPT+Ours=" + (dir / "chatgpt_ours.json").string(),
                                    "--model", "GPT-4=" + (dir / "gpt4.json").string(),
                                    "--model", "GPT-4+Ours=" + (dir / "gpt4_ours.json").string()};
    auto plain = run(cmp);
    CHECK(plain.code == 0);
    CHECK(plain.out.find("# Wins") != std::string::npos);
    cmp.insert(cmp.end(), {"--expected", (dir / "footer.json").string()});
    const auto checked = run(cmp);
    CHECK(checked.code == 0);
    CHECK(checked.out.find("DIVERGENCE:") == std::string::npos);
    CHECK(checked.out.find("divergence (annotated)") != std::string::npos);

    // A tampered footer is reported and fails the command.
    auto footer = nlohmann::json::parse(testsupport::read_file(dir / "footer.json"));
    footer["rows"]["OPN"]["sum_abs"][0] = 131;
    testsupport::write_file(env.tmp / "footer.json", footer.dump());
    cmp.back() = (env.tmp / "footer.json").string();
    const auto tampered = run(cmp);
    CHECK(tampered.code == 1);
    CHECK(tampered.out.find("DIVERGENCE: OPN sum_abs ChatGPT") != std::string::npos);

    CHECK(run({"eval", "compare", "--human", (dir / "human.json").string(), "--model", "nofile"}).code == 1);
}

TEST_CASE("ratings aggregation") {
    testsupport::TempDir tmp;
    testsupport::write_file(tmp / "r.csv",
                            "rater_id,story_id,Grammar,Coherence,Likability,Relevance,Complexity,Creativity\n"
                            "r1,a-e1-s1,5,4,3,4,2,3\nr2,a-e1-s2,4,4,4,4,4,4\nr1,b-e1-s1,3,3,3,3,3,3\n");
    const auto text = run({"eval", "aggregate", (tmp / "r.csv").string()});
    CHECK(text.code == 0);
    CHECK(text.out.find("4.50") != std::string::npos);
    CHECK(text.out.find("avg") != std::string::npos);
    const auto by_story = run({"eval", "aggregate", (tmp / "r.csv").string(), "--grouping", "story", "--json"});
    CHECK(nlohmann::json::parse(by_story.out)["rows"].size() == 3);
    CHECK(run({"eval", "aggregate", (tmp / "r.csv").string(), "--grouping", "rater"}).code == 1);
    testsupport::write_file(tmp / "bad.csv", "rater_id,story_id,Grammar\nr,s,3\n");
    CHECK(run({"eval", "aggregate", (tmp / "bad.csv").string()}).code == 1);
    const auto sample = run({"eval", "aggregate", (testsupport::data_dir() / "ratings" / "sample.csv").string()});
    CHECK(sample.code == 0);
}

TEST_CASE("provider failures exit with code 2") {
    Env env;
    REQUIRE(env({"init", "cli"}).code == 0);
    testsupport::write_file(env.tmp / "cfg.json", R"({"provider": {"kind": "openai", "endpoint": "http://127.0.0.1:1/v1",
        "api_key_env": "CGPT_CLI_TEST_KEY", "max_attempts": 1, "timeout_ms": 500}})");
    ::setenv("CGPT_CLI_TEST_KEY", "k", 1);
    const auto r = run({"chat", "cli", "--epoch", "0", "--config", (env.tmp / "cfg.json").string(), "--store",
                        (env.tmp / "store").string(), "--corpus-root", (env.tmp / "corpus").string(), "--prompts",
                        testsupport::prompts_dir().string()},
                       "hello\n");
    ::unsetenv("CGPT_CLI_TEST_KEY");
    CHECK(r.code == 2);
    CHECK_FALSE(r.err.empty());
}

}
