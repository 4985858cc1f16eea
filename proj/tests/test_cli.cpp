#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("vie_cli_test_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p.parent_path());
    return p;
}

int run(const std::string& args) {
    const std::string cmd = std::string(VIE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

fs::path write_config(const std::string& name, const json& j) {
    const fs::path p = scratch(name + ".json");
    std::ofstream(p) << j.dump(2);
    return p;
}

std::string preset(const std::string& name) { return std::string(VIE_SCENARIO_DIR) + "/" + name + ".json"; }

json small_solve() {
    return json::parse(R"({
      "name": "cli-solve",
      "task": "solve",
      "geometry": {"shape": "disc", "radius": 1.0},
      "wave": {"k": 1.0, "dim": 2},
      "coefficient": {"name": "constant-a", "a": 2.0, "k_in_sq": 2.0},
      "discretization": {"n_per_axis": 16},
      "seed": 3
    })");
}

class CleanScratch : public ::testing::Environment {
public:
    void TearDown() override { fs::remove_all(scratch("x").parent_path()); }
};

const auto* const clean_env = ::testing::AddGlobalTestEnvironment(new CleanScratch);

}  // namespace

TEST(Cli, SolveWritesStampedOutputs) {
    const fs::path out = scratch("solve");
    ASSERT_EQ(run("solve --config " + preset("solve_zero_contrast") + " --out " + out.string()), 0);
    const json rep = json::parse(slurp(out / "report.json"));
    EXPECT_EQ(rep["status"], "ok");
    EXPECT_EQ(rep["complete"], true);
    EXPECT_EQ(rep["task"], "solve");
    const std::string hash = rep["config_hash"];
    ASSERT_EQ(hash.size(), 16u);
    ASSERT_FALSE(rep["files"].empty());
    for (const auto& f : rep["files"]) {
        const std::string text = slurp(out / f.get<std::string>());
        const std::string first = text.substr(0, text.find('\n'));
        EXPECT_EQ(first, "# vie 0.1.0 config_hash=" + hash) << f;
    }
    EXPECT_EQ(rep["version"], "0.1.0");
}

TEST(Cli, SameSeedIsByteIdentical) {
    const fs::path a = scratch("det_a"), b = scratch("det_b"), c = scratch("det_c");
    const auto cfg = write_config("det", small_solve());
    ASSERT_EQ(run("solve --config " + cfg.string() + " --out " + a.string()), 0);
    ASSERT_EQ(run("solve --config " + cfg.string() + " --out " + b.string()), 0);
    ASSERT_EQ(run("solve --config " + cfg.string() + " --out " + c.string() + " --seed 99"), 0);
    std::size_t compared = 0;
    for (const auto& e : fs::directory_iterator(a)) {
        EXPECT_EQ(slurp(e.path()), slurp(b / e.path().filename())) << e.path();
        ++compared;
    }
    EXPECT_GE(compared, 2u);
    const json ra = json::parse(slurp(a / "report.json")), rc = json::parse(slurp(c / "report.json"));
    EXPECT_EQ(rc["seed"], 99);
    EXPECT_NE(ra["config_hash"], rc["config_hash"]);
}

TEST(Cli, OutputDirectoryDoesNotAffectHash) {
    const fs::path a = scratch("hash_a"), b = scratch("hash_b");
    const auto cfg = write_config("hash", small_solve());
    ASSERT_EQ(run("solve --config " + cfg.string() + " --out " + a.string()), 0);
    ASSERT_EQ(run("solve --config " + cfg.string() + " --out " + b.string()), 0);
    EXPECT_EQ(json::parse(slurp(a / "report.json"))["config_hash"], json::parse(slurp(b / "report.json"))["config_hash"]);
}

TEST(Cli, ValidationFailuresWriteNothing) {
    std::vector<std::pair<std::string, json>> bad;
    json neg = small_solve();
    neg["solve"] = {{"tol", -1.0}};
    bad.emplace_back("negative_tol", neg);
    json unknown = small_solve();
    unknown["geometry"]["colour"] = "red";
    bad.emplace_back("unknown_key", unknown);
    json shape = small_solve();
    shape["geometry"] = {{"shape", "torus"}};
    bad.emplace_back("bad_shape", shape);
    json coef = small_solve();
    coef["coefficient"]["name"] = "mystery";
    bad.emplace_back("bad_coefficient", coef);
    json big = small_solve();
    big["solve"] = {{"method", "direct"}};
    big["discretization"]["n_per_axis"] = 400;
    bad.emplace_back("dense_too_large", big);
    for (const auto& [name, cfg] : bad) {
        const fs::path out = scratch("invalid_" + name);
        EXPECT_EQ(run("solve --config " + write_config(name, cfg).string() + " --out " + out.string()), 2) << name;
        EXPECT_FALSE(fs::exists(out)) << name;
    }
    // the file declares a different task
    const fs::path out = scratch("task_mismatch");
    EXPECT_EQ(run("spectrum --config " + write_config("mismatch", small_solve()).string() + " --out " + out.string()), 2);
    EXPECT_FALSE(fs::exists(out));
}

TEST(Cli, UsageErrors) {
    const fs::path junk = scratch("junk.json");
    std::ofstream(junk) << "{ not json";
    EXPECT_EQ(run("solve --config " + junk.string()), 2);
    EXPECT_EQ(run("solve --config /nonexistent/file.json"), 2);
    EXPECT_EQ(run("solve"), 2);
    EXPECT_EQ(run("transmogrify --config " + junk.string()), 2);
    EXPECT_EQ(run("solve --config " + preset("solve_zero_contrast") + " --seed notanumber"), 2);
}

TEST(Cli, NumericalFailureExitsThree) {
    json cfg = small_solve();
    cfg["coefficient"]["a"] = 5.0;
    cfg["solve"] = {{"tol", 1e-13}, {"restart", 10}, {"max_iterations", 2}};
    const fs::path out = scratch("nonconverged");
    EXPECT_EQ(run("solve --config " + write_config("nonconverged", cfg).string() + " --out " + out.string()), 3);
    const json rep = json::parse(slurp(out / "report.json"));
    EXPECT_EQ(rep["status"], "numerical-failure");
    EXPECT_EQ(rep["complete"], false);
    EXPECT_TRUE(rep.contains("error"));
}

TEST(Cli, VerifySigmaMapPreset) {
    const fs::path out = scratch("verify");
    ASSERT_EQ(run("verify --config " + preset("c11_sigma_map") + " --out " + out.string()), 0);
    const json rep = json::parse(slurp(out / "report.json"));
    EXPECT_EQ(rep["results"]["all_passed"], true);
}

TEST(Cli, FailedCheckExitsThree) {
    json cfg = json::parse(R"({
      "name": "cli-strict-fft",
      "task": "verify",
      "geometry": {"shape": "disc", "radius": 1.0},
      "wave": {"k": 1.0, "dim": 2},
      "coefficient": {"name": "constant-a", "a": 2.0},
      "discretization": {"n_per_axis": 12},
      "verify": {"checks": ["fft_consistency"], "fft_tol": 1e-300},
      "seed": 1
    })");
    const fs::path out = scratch("strict");
    EXPECT_EQ(run("verify --config " + write_config("strict", cfg).string() + " --out " + out.string()), 3);
    const json rep = json::parse(slurp(out / "report.json"));
    EXPECT_EQ(rep["status"], "checks-failed");
    EXPECT_EQ(rep["results"]["all_passed"], false);
}

TEST(Cli, SmallSweep) {
    json cfg = json::parse(R"({
      "name": "cli-sweep",
      "task": "sweep",
      "geometry": {"shape": "disc", "radius": 1.0},
      "wave": {"k": 1.0, "dim": 2},
      "coefficient": {"name": "constant-a", "a": 2.0},
      "discretization": {"n_per_axis": 12, "boundary_nodes": 48, "representation": "augmented"},
      "sweep": {"a_values": [-1.4, -1.1], "reference_a": -3.0, "min_ratio": 1.0},
      "seed": 5
    })");
    const fs::path out = scratch("sweep");
    ASSERT_EQ(run("sweep --config " + write_config("sweep", cfg).string() + " --out " + out.string()), 0);
    const std::string csv = slurp(out / "sweep.csv");
    EXPECT_NE(csv.find("a_re,a_im,condition_weighted"), std::string::npos);
    const json rep = json::parse(slurp(out / "report.json"));
    EXPECT_EQ(rep["results"]["monotone_weighted"], true);
}
