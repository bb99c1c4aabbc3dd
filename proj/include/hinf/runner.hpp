#pragma once

#include <string>

#include "hinf/dgp.hpp"
#include "hinf/ingest.hpp"
#include "hinf/inference.hpp"

namespace hinf {

// Configuration-file driven entry points behind the hinf CLI. The whole run
// is one JSON document for reproducibility; command-line flags only override
// paths, seed, thread cap, and verbosity. Identical config + data produce
// byte-identical artifacts; wall-clock information goes to a separate
// run_log.txt.

struct RunConfig {
    std::string command;  // fit | infer | simulate | coverage | check
    std::string data_path;
    ColumnMapping columns;
    std::string loss_key = "linear";
    std::string target_key = "coef:2";
    std::vector<double> tstar_raw;  // intercept is prepended when the loss expects it
    std::string projector_key = "L:glm";
    std::string reg_key = "reg:eig_floor:1e-8";
    NetConfig net;
    TrainConfig train;
    NetConfig aux_net;        // auxiliary L regression; defaults to net
    TrainConfig aux_train;    // defaults to train
    bool aux_overridden = false;
    TreatmentDistribution ft;  // randomized projector
    bool ft_present = false;
    InferenceConfig inf;
    DefaultSpec defaults;
    double loan = 1.0;
    DGPSpec dgp;              // simulate / coverage
    bool dgp_present = false;
    std::size_t replications = 200;
    double nominal = 0.95;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    int verbosity = 0;

    static RunConfig from_json(const std::string& text);
    static RunConfig from_file(const std::string& path);
};

/// Execute one command. Returns the process exit code (0 = success; the check
/// command returns 1 when any suite fails). Throws Error for config/data/
/// numeric problems; main() maps the error class to exit codes 2/3/4/5.
int run(const RunConfig& cfg);

/// Fast deterministic oracle + diagnostic suites behind `hinf check`;
/// prints one PASS/FAIL line per suite and returns the failure count.
int run_selfcheck(std::ostream& out);

/// Full argv-level entry: parses flags, maps Error classes to exit codes.
int run_cli(int argc, char** argv);

}  // namespace hinf
