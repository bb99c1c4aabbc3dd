#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "hinf/rng.hpp"
#include "hinf/runner.hpp"

using namespace hinf;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

const char* kLendingDgp = R"({
  "name": "lending",
  "dx": 2, "d_c": 2,
  "theta0": [
    {"kind": "sine", "c0": 0.4, "a": 0.5, "w": 1.0, "i": 0},
    {"kind": "interaction", "c0": -0.35, "a": -0.1, "i": 0, "j": 0}
  ],
  "design": "randomized",
  "ft": {"kind": "discrete",
         "support": [[1.0, 0.0], [1.0, 2.0], [1.0, 5.0]],
         "probs": [0.4, 0.3, 0.3]},
  "loss": "logit",
  "n": 900,
  "seed": 31
})";

}  // namespace

TEST_CASE("simulate then infer end to end, with deterministic artifacts") {
    const std::string dir = "/tmp/hinf_cli_test";
    fs::remove_all(dir);
    fs::create_directories(dir);

    // simulate: lending-style logit draw with known truth.
    RunConfig sim;
    sim.command = "simulate";
    sim.dgp = DGPSpec::from_json(kLendingDgp);
    sim.dgp_present = true;
    sim.target_key = "ame:2";
    sim.tstar_raw = {2.0};  // rate coordinate of t*, intercept auto-prepended
    sim.out_dir = dir;
    CHECK(run(sim) == 0);
    CHECK(fs::exists(dir + "/simulated.csv"));
    CHECK(fs::exists(dir + "/truth.json"));

    // infer on the simulated CSV through the full config path.
    const std::string cfg_json = std::string(R"({
      "command": "infer",
      "data": ")") + dir + R"(/simulated.csv",
      "columns": {"y": ["y1"], "t": ["t2"], "x": ["x1", "x2"], "rescale_x": false},
      "loss": "logit",
      "target": "ame:2",
      "t_star": [2.0],
      "projector": "L:randomized",
      "ft": {"kind": "discrete",
             "support": [[1.0, 0.0], [1.0, 2.0], [1.0, 5.0]],
             "probs": [0.4, 0.3, 0.3]},
      "regularization": "reg:eig_floor:1e-8",
      "net": {"hidden": [8], "seed": 3},
      "train": {"epochs": 25, "batch_size": 64, "learning_rate": 0.01, "patience": 6},
      "inference": {"folds": 2, "seed": 11, "levels": [0.9, 0.95]},
      "out_dir": ")" + dir + R"("
    })";
    RunConfig inf = RunConfig::from_json(cfg_json);
    inf.command = "infer";
    CHECK(run(inf) == 0);
    REQUIRE(fs::exists(dir + "/inference.json"));
    REQUIRE(fs::exists(dir + "/theta_hat.csv"));
    REQUIRE(fs::exists(dir + "/scores.csv"));
    REQUIRE(fs::exists(dir + "/density_data.csv"));

    const std::string first = slurp(dir + "/inference.json");
    CHECK(first.find("\"mu\"") != std::string::npos);
    CHECK(first.find("\"psi_matrix\"") != std::string::npos);
    CHECK(first.find("\"ci\"") != std::string::npos);
    CHECK(first.find("nan") == std::string::npos);

    // Identical config + data: byte-identical result JSON.
    CHECK(run(inf) == 0);
    CHECK(slurp(dir + "/inference.json") == first);

    fs::remove_all(dir);
}

TEST_CASE("fit writes a loadable model and a trace") {
    const std::string dir = "/tmp/hinf_cli_fit";
    fs::remove_all(dir);
    fs::create_directories(dir);

    RunConfig sim;
    sim.command = "simulate";
    sim.dgp = DGPSpec::from_json(kLendingDgp);
    sim.dgp_present = true;
    sim.target_key = "coef:2";
    sim.tstar_raw = {0.0};
    sim.out_dir = dir;
    REQUIRE(run(sim) == 0);

    RunConfig fit = RunConfig::from_json(std::string(R"({
      "data": ")") + dir + R"(/simulated.csv",
      "columns": {"y": ["y1"], "t": ["t2"], "x": ["x1", "x2"], "rescale_x": false},
      "loss": "logit",
      "net": {"hidden": [6], "seed": 4},
      "train": {"epochs": 8, "batch_size": 32},
      "out_dir": ")" + dir + R"("
    })");
    fit.command = "fit";
    CHECK(run(fit) == 0);
    REQUIRE(fs::exists(dir + "/model.hinf"));
    REQUIRE(fs::exists(dir + "/training_trace.csv"));
    StructuredNet net = load_net(dir + "/model.hinf");
    CHECK(net.config().dtheta == 2);
    CHECK(net.config().input_dim == 2);
    fs::remove_all(dir);
}

TEST_CASE("mismatched t_star length is a config error") {
    const std::string dir = "/tmp/hinf_cli_badcfg";
    fs::remove_all(dir);
    fs::create_directories(dir);

    RunConfig sim;
    sim.command = "simulate";
    sim.dgp = DGPSpec::from_json(kLendingDgp);
    sim.dgp_present = true;
    sim.target_key = "coef:2";
    sim.tstar_raw = {0.0};
    sim.out_dir = dir;
    REQUIRE(run(sim) == 0);

    RunConfig inf = RunConfig::from_json(std::string(R"({
      "data": ")") + dir + R"(/simulated.csv",
      "columns": {"y": ["y1"], "t": ["t2"], "x": ["x1", "x2"], "rescale_x": false},
      "loss": "logit",
      "target": "ame:2",
      "t_star": [1.0, 2.0, 3.0],
      "out_dir": ")" + dir + R"("
    })");
    inf.command = "infer";
    try {
        run(inf);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(static_cast<int>(e.cls()) == 2);
    }
    fs::remove_all(dir);
}

TEST_CASE("coverage command writes report artifacts") {
    const std::string dir = "/tmp/hinf_cli_cov";
    fs::remove_all(dir);
    fs::create_directories(dir);

    RunConfig cov = RunConfig::from_json(R"({
      "dgp": {
        "name": "lin", "dx": 1, "d_c": 1,
        "theta0": [
          {"kind": "affine", "c0": 0.5, "coefs": [0.4]},
          {"kind": "interaction", "c0": 1.0, "a": 0.5, "i": 0, "j": 0}
        ],
        "design": "randomized",
        "ft": {"kind": "discrete", "support": [[1,0],[1,1]], "probs": [0.5, 0.5]},
        "loss": "linear", "noise_sd": 0.4, "n": 300, "seed": 5
      },
      "loss": "linear",
      "target": "coef:2",
      "t_star": [0.0],
      "projector": "L:glm",
      "net": {"hidden": [5], "seed": 2},
      "train": {"epochs": 8, "batch_size": 32},
      "inference": {"folds": 2, "seed": 3},
      "replications": 6,
      "nominal": 0.9,
      "threads": 2
    })");
    cov.command = "coverage";
    cov.out_dir = dir;
    CHECK(run(cov) == 0);
    REQUIRE(std::filesystem::exists(dir + "/coverage.json"));
    REQUIRE(std::filesystem::exists(dir + "/coverage_records.csv"));
    const std::string rep = slurp(dir + "/coverage.json");
    CHECK(rep.find("\"coverage\"") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("numeric failures surface with error class 4") {
    const std::string dir = "/tmp/hinf_cli_numeric";
    fs::remove_all(dir);
    fs::create_directories(dir);

    // Constant treatment: L(x) is rank-1, and with regularization disabled
    // the Cholesky solve must abort with NotSPD (numeric class).
    std::ofstream csv(dir + "/flat.csv");
    csv << "y,t,x\n";
    Rng rng(1);
    for (int i = 0; i < 120; ++i)
        csv << rng.normal() << ",1.0," << rng.uniform(-1, 1) << "\n";
    csv.close();

    RunConfig inf = RunConfig::from_json(std::string(R"({
      "data": ")") + dir + R"(/flat.csv",
      "columns": {"y": ["y"], "t": ["t"], "x": ["x"], "rescale_x": false},
      "loss": "linear",
      "target": "coef:2",
      "t_star": [1.0],
      "projector": "L:glm",
      "regularization": "reg:none",
      "net": {"hidden": [4], "seed": 1},
      "train": {"epochs": 3, "batch_size": 16},
      "inference": {"folds": 2, "seed": 2},
      "out_dir": ")" + dir + R"("
    })");
    inf.command = "infer";
    try {
        run(inf);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(static_cast<int>(e.cls()) == 4);
        CHECK(e.kind() == "NotSPD");
    }
    fs::remove_all(dir);
}

TEST_CASE("requested orthogonality diagnostic lands in the result JSON") {
    const std::string dir = "/tmp/hinf_cli_orth";
    fs::remove_all(dir);
    fs::create_directories(dir);

    RunConfig sim;
    sim.command = "simulate";
    sim.dgp = DGPSpec::from_json(kLendingDgp);
    sim.dgp.n = 400;
    sim.dgp_present = true;
    sim.target_key = "coef:2";
    sim.tstar_raw = {0.0};
    sim.out_dir = dir;
    REQUIRE(run(sim) == 0);

    RunConfig inf = RunConfig::from_json(std::string(R"({
      "data": ")") + dir + R"(/simulated.csv",
      "columns": {"y": ["y1"], "t": ["t2"], "x": ["x1", "x2"], "rescale_x": false},
      "loss": "logit",
      "target": "coef:2",
      "t_star": [0.0],
      "projector": "L:randomized",
      "ft": {"kind": "discrete",
             "support": [[1.0, 0.0], [1.0, 2.0], [1.0, 5.0]],
             "probs": [0.4, 0.3, 0.3]},
      "net": {"hidden": [5], "seed": 2},
      "train": {"epochs": 5, "batch_size": 32},
      "inference": {"folds": 2, "seed": 4, "orthogonality_diag": true},
      "out_dir": ")" + dir + R"("
    })");
    inf.command = "infer";
    REQUIRE(run(inf) == 0);
    const std::string json = slurp(dir + "/inference.json");
    CHECK(json.find("orthogonality_slopes") != std::string::npos);
    CHECK(json.find("shift:1") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("run_cli maps bad usage to exit code 2 and check to 0") {
    {
        const char* argv[] = {"hinf", "infer", "--config", "/nonexistent/cfg.json"};
        CHECK(run_cli(4, const_cast<char**>(argv)) == 2);
    }
    {
        const char* argv[] = {"hinf", "nonsense"};
        CHECK(run_cli(2, const_cast<char**>(argv)) == 2);
    }
}
