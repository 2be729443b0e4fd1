#include "fixtures.hpp"

#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace diatomic;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream in(line);
    for (std::string field; std::getline(in, field, ',');) out.push_back(field);
    return out;
}

/// Fresh scratch directory per test.
fs::path scratch() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    fs::path dir = fs::path(::testing::TempDir()) / "diatomic_cli" / (std::string(info->test_suite_name()) + "." + info->name());
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

struct CliRun {
    int code;
    std::string stdout_text;
    std::string stderr_text;
};

CliRun run_cli(const std::string& args, const fs::path& dir) {
    const fs::path out = dir / "stdout.txt";
    const fs::path err = dir / "stderr.txt";
    const std::string cmd = std::string("\"") + DIATOMIC_CLI_PATH + "\" " + args + " > \"" + out.string() + "\" 2> \"" +
                            err.string() + "\"";
    const int status = std::system(cmd.c_str());
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return {code, slurp(out), slurp(err)};
}

std::string shell_arg(const fs::path& p) { return "\"" + p.string() + "\""; }

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

} // namespace

TEST(JsonIo, SyntaxErrorReportsLineAndColumn) {
    try {
        parse_mdp("{\n  \"gamma\": 0.5,\n  \"states\": [\"x1\",,]\n}", "bad.json");
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
        EXPECT_EQ(e.column(), 19u);
        EXPECT_EQ(std::string(e.what()).rfind("bad.json:3:19:", 0), 0u) << e.what();
    }
}

TEST(JsonIo, SchemaErrorsNameTheLocation) {
    try {
        parse_mdp(R"({"gamma": 0.5, "states": ["x"], "actions": ["a"],
                      "transitions": [{"x": 0, "a": 0, "next": 3, "p": 1}]})",
                  "s.json");
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("/transitions/0"), std::string::npos) << e.what();
    }
    EXPECT_THROW(parse_mdp(R"({"states": ["x"], "actions": ["a"], "transitions": []})"), ParseError);
    EXPECT_THROW(parse_mdp(R"({"gamma": 0.5, "states": ["x"], "actions": ["a"], "transitions": []})"), ParseError);
    EXPECT_THROW(parse_mdp(R"({"gamma": 1.5, "states": ["x"], "actions": ["a"],
                               "transitions": [{"x": 0, "a": 0, "next": 0, "p": 1}]})"),
                 ParseError);
    EXPECT_THROW(parse_mdp(R"({"gamma": 0.5, "states": ["x"], "actions": ["a"],
                               "transitions": [{"x": 0, "a": 0, "next": 0, "p": 0.7}]})"),
                 ParseError);
    EXPECT_THROW(parse_dist(R"([{"value": 1, "prob": 0.5}])"), ParseError);
    EXPECT_THROW(parse_dist(R"([])"), ParseError);
    EXPECT_THROW(load_mdp("/nonexistent/file.json"), ParseError);
}

TEST(JsonIo, NamesAndMissingPairs) {
    const Mdp mdp = parse_mdp(R"({"gamma": 0.9, "states": ["s", "t"], "actions": ["go", "stay"],
        "transitions": [{"x": "s", "a": "go", "next": "t", "p": 1},
                        {"x": "s", "a": "stay", "next": "s", "p": 1},
                        {"x": "t", "a": "stay", "next": "t", "p": 1}],
        "rewards": [{"x": "s", "a": "go", "next": "t", "r": 2}]})");
    EXPECT_EQ(mdp.state_names()[1], "t");
    EXPECT_TRUE(mdp.offers(0, 0));
    EXPECT_FALSE(mdp.offers(1, 0));
    EXPECT_DOUBLE_EQ(mdp.r(0, 0, 1), 2.0);
    EXPECT_DOUBLE_EQ(mdp.r(0, 1, 0), 0.0);
}

TEST(JsonIo, MdpRoundTrip) {
    Rng rng(503);
    for (int trial = 0; trial < 10; ++trial) {
        const Mdp mdp = random_mdp(rng, 3, 2);
        const Mdp back = mdp_from_json(Json::parse(mdp_to_json(mdp).dump()));
        EXPECT_EQ(back.gamma(), mdp.gamma());
        for (StateId x = 0; x < 3; ++x) {
            for (ActionId a = 0; a < 2; ++a) {
                for (StateId y = 0; y < 3; ++y) {
                    EXPECT_EQ(back.p(x, a, y), mdp.p(x, a, y));
                    EXPECT_EQ(back.r(x, a, y), mdp.r(x, a, y));
                }
            }
        }
    }
}

TEST(JsonIo, DistRoundTrip) {
    const DiscreteDist d = fixtures::fig4();
    const DiscreteDist back = dist_from_json(Json::parse(dist_to_json(d).dump()));
    EXPECT_TRUE(fixtures::dists_near(back, d, 0.0));
}

TEST(JsonIo, PolicyAndWeightSpecs) {
    const Mdp mdp = fixtures::fig1();
    EXPECT_DOUBLE_EQ(parse_policy(mdp, "always:a2")(0, 1), 1.0);
    EXPECT_DOUBLE_EQ(parse_policy(mdp, "always:0")(1, 0), 1.0);
    EXPECT_DOUBLE_EQ(parse_policy(mdp, "[[0.25, 0.75], [1, 0]]")(0, 1), 0.75);
    EXPECT_DOUBLE_EQ(parse_policy(mdp, R"({"x1": {"a1": 1}, "x2": {"a2": 1}})")(1, 1), 1.0);
    EXPECT_THROW(parse_policy(mdp, "always:a3"), DomainError);
    EXPECT_THROW(parse_policy(mdp, "[[1, 0]]"), StructuralError);
    EXPECT_EQ(parse_weights("uniform", 2), (std::vector<double>{0.5, 0.5}));
    EXPECT_EQ(parse_weights("0.25,0.75", 2), (std::vector<double>{0.25, 0.75}));
    EXPECT_EQ(parse_weights("[0.25, 0.75]", 2), (std::vector<double>{0.25, 0.75}));
}

TEST(Corpus, EveryFileLoadsAndMatchesManifest) {
    const Json manifest = Json::parse(slurp(fixtures::data_path("corpus.json")));
    ASSERT_EQ(manifest.size(), 25u);
    for (const Json& entry : manifest) {
        const Mdp mdp = load_mdp(fixtures::data_path(entry["file"].get<std::string>()));
        EXPECT_EQ(mdp.n_states(), entry["states"].get<std::size_t>());
        EXPECT_EQ(mdp.n_actions(), entry["actions"].get<std::size_t>());
        EXPECT_TRUE(is_balanced(mdp, 1e-6)) << entry["file"];
    }
}

TEST(Corpus, Fig1File) {
    const Mdp mdp = load_mdp(fixtures::data_path("fig1.json"));
    EXPECT_TRUE(is_balanced(mdp, 1e-8));
    const QTable q = value_iteration(mdp, {1e-12, 10'000}).value;
    EXPECT_NEAR(q(0, 0), 2.0, 1e-10);
    EXPECT_NEAR(q(0, 1), 2.0, 1e-10);
    EXPECT_NEAR(q(1, 0), 4.0, 1e-10);
    EXPECT_NEAR(q(1, 1), 4.0, 1e-10);
    EXPECT_TRUE(fixtures::dists_near(load_dist(fixtures::data_path("fig4_dist.json")), fixtures::fig4(), 0.0));
}

TEST(Cli, SpeWritesTwentyIterations) {
    const fs::path dir = scratch();
    const CliRun run = run_cli("spe " + shell_arg(fixtures::data_path("fig1.json")) +
                                " --policy always:a2 --alpha 0.5 --max-iter 20 --tol 1e-300 --out " + shell_arg(dir),
                            dir);
    ASSERT_EQ(run.code, 0) << run.stderr_text;
    const auto lines = lines_of(slurp(dir / "trace.csv"));
    ASSERT_EQ(lines.size(), 1u + 20u * 4u);
    EXPECT_EQ(lines.front(), "iter,x,a,q1,q2,residual");
    const auto last = split(lines.back());
    ASSERT_EQ(last.size(), 6u);
    EXPECT_EQ(last[0], "20");
    EXPECT_EQ(last[1], "x2");
    EXPECT_EQ(last[2], "a2");
    EXPECT_NEAR(std::stod(last[3]), 3.5, 1e-5);
    EXPECT_NEAR(std::stod(last[4]), 4.5, 1e-5);
    const Json result = Json::parse(slurp(dir / "result.json"));
    EXPECT_EQ(result["command"], "spe");
    EXPECT_EQ(result["iterations"], 20);
    EXPECT_FALSE(result["converged"].get<bool>());
    EXPECT_TRUE(result["alpha_coherent"].get<bool>());
}

TEST(Cli, SafeAndRiskyActionSets) {
    const fs::path dir = scratch();
    ASSERT_EQ(run_cli("safe " + shell_arg(fixtures::data_path("fig1.json")) + " --out " + shell_arg(dir), dir).code, 0);
    Json result = Json::parse(slurp(dir / "result.json"));
    EXPECT_EQ(result["action_sets"]["x1"], Json::array({"a1"}));
    EXPECT_EQ(result["action_sets"]["x2"], Json::array({"a1"}));
    EXPECT_NEAR(result["q1"]["x1"]["a1"].get<double>(), 2.0, 1e-8);
    ASSERT_EQ(run_cli("risky " + shell_arg(fixtures::data_path("fig1.json")) + " --out " + shell_arg(dir), dir).code, 0);
    result = Json::parse(slurp(dir / "result.json"));
    EXPECT_EQ(result["action_sets"]["x1"], Json::array({"a2"}));
    EXPECT_NEAR(result["q2"]["x2"]["a2"].get<double>(), 4.5, 1e-8);
}

TEST(Cli, AvarPrintsBothSides) {
    const fs::path dir = scratch();
    const CliRun run = run_cli("avar " + shell_arg(fixtures::data_path("fig4_dist.json")) + " --alpha 0.7 --out " + shell_arg(dir), dir);
    ASSERT_EQ(run.code, 0) << run.stderr_text;
    double left = 0.0, right = 0.0;
    ASSERT_EQ(std::sscanf(run.stdout_text.c_str(), "(%lf, %lf)", &left, &right), 2) << run.stdout_text;
    EXPECT_NEAR(left, -1.0 / 0.7, 1e-12);
    EXPECT_NEAR(right, 2.0 / 0.3, 1e-12);
}

TEST(Cli, RobustVerifyAndRiskyLp) {
    const fs::path dir = scratch();
    const CliRun robust = run_cli("robust-verify " + shell_arg(fixtures::data_path("fig1.json")) +
                                   " --policy always:a2 --out " + shell_arg(dir),
                               dir);
    ASSERT_EQ(robust.code, 0) << robust.stderr_text;
    const Json result = Json::parse(slurp(dir / "result.json"));
    EXPECT_NEAR(result["worst"]["x1"].get<double>(), 1.5, 1e-9);
    EXPECT_TRUE(result["kernel_in_uncertainty_set"].get<bool>());

    const CliRun lp = run_cli("risky-lp " + shell_arg(fixtures::data_path("fig1.json")) + " --dump-lp " + shell_arg(dir / "risky.lp") +
                               " --out " + shell_arg(dir),
                           dir);
    ASSERT_EQ(lp.code, 0) << lp.stderr_text;
    EXPECT_NE(lp.stdout_text.find("primal 1.25"), std::string::npos) << lp.stdout_text;
    EXPECT_NE(lp.stdout_text.find("dual 1.25"), std::string::npos) << lp.stdout_text;
    EXPECT_EQ(slurp(dir / "risky.lp").rfind("Maximize", 0), 0u);
    EXPECT_EQ(slurp(dir / "risky.lp.dual").rfind("Minimize", 0), 0u);
}

TEST(Cli, DboTraceStartsAtIterationZero) {
    const fs::path dir = scratch();
    const CliRun run = run_cli("dbo " + shell_arg(fixtures::data_path("fig1.json")) + " --policy always:a2 --k 2 --out " + shell_arg(dir), dir);
    ASSERT_EQ(run.code, 0) << run.stderr_text;
    const auto lines = lines_of(slurp(dir / "trace.csv"));
    EXPECT_EQ(lines.front(), "iter,x,a,value,prob");
    EXPECT_EQ(split(lines[1])[0], "0");
    EXPECT_EQ(split(lines.back())[0], "2");
}

TEST(Cli, ExitCodes) {
    const fs::path dir = scratch();
    write_text(dir / "broken.json", "{\"gamma\": 0.5,\n \"states\": [}");
    const CliRun parse = run_cli("spe " + shell_arg(dir / "broken.json") + " --out " + shell_arg(dir), dir);
    EXPECT_EQ(parse.code, 1);
    EXPECT_NE(parse.stderr_text.find(":2:"), std::string::npos) << parse.stderr_text;
    EXPECT_EQ(run_cli("spe " + shell_arg(dir / "missing.json") + " --out " + shell_arg(dir), dir).code, 1);
    EXPECT_EQ(run_cli("spe " + shell_arg(fixtures::data_path("fig1.json")) + " --alpha 1.5 --out " + shell_arg(dir), dir).code, 2);
    EXPECT_EQ(run_cli("safe " + shell_arg(fixtures::data_path("fig1.json")) + " --gamma 0.9 --out " + shell_arg(dir), dir).code, 2);
    EXPECT_EQ(run_cli("robust-verify " + shell_arg(fixtures::data_path("fig1.json")) + " --policy uniform --out " + shell_arg(dir), dir).code, 2);
    EXPECT_EQ(run_cli("frobnicate", dir).code, 2);
    EXPECT_EQ(run_cli("spe", dir).code, 2);
}

TEST(Cli, OutputsAreDeterministic) {
    const fs::path a = scratch() / "a";
    const fs::path b = a.parent_path() / "b";
    for (const fs::path& dir : {a, b}) {
        fs::create_directories(dir);
        ASSERT_EQ(run_cli("spe " + shell_arg(fixtures::data_path("random_3s_seed101.json")) + " --alpha 0.3 --out " + shell_arg(dir), dir).code, 0);
    }
    EXPECT_EQ(slurp(a / "trace.csv"), slurp(b / "trace.csv"));
    EXPECT_EQ(slurp(a / "result.json"), slurp(b / "result.json"));
}
