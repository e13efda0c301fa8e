#pragma once

#include <string>
#include <vector>

#include "sigflow/dataset.hpp"
#include "sigflow/training.hpp"

namespace sigflow::cli {

// Everything a run needs, assembled from (in order of precedence) command-line
// flags, a key=value config file, and the defaults below. Unknown config keys
// are rejected. Every writing command drops the fully-resolved config next to
// its outputs.
struct RunConfig {
    SynthConfig synth;
    TrainConfig train;
    int n_stages = -1;          // -1: auto from the trial length
    std::size_t kernel_size = 7;
    std::uint64_t init_seed = 0;
    double split_fraction = 0.8;
    std::uint64_t split_seed = 0;
    std::string output_dir = ".";
};

// Defaults, with output_dir taken from $SIGFLOW_OUTPUT_DIR when set.
RunConfig default_run_config();

// key = value lines, '#' comments; throws DataError on unknown keys or bad values.
void load_run_config(const std::string& path, RunConfig& config);
void write_resolved_config(const RunConfig& config, const std::string& path);

// Command bodies, shared by the binary and the tests. They throw the library's
// structured errors; run() maps those to exit codes.
int cmd_synth(const RunConfig& config, const std::string& out_path);
int cmd_train(const RunConfig& config, const std::string& dataset_path);
int cmd_sample(const RunConfig& config, const std::string& model_path, int cls,
               std::size_t count, std::uint64_t seed, const std::string& out_path);
int cmd_eval(const RunConfig& config, const std::string& model_path,
             const std::string& dataset_path, const std::string& summary_name);
int cmd_spectra(const RunConfig& config, const std::string& model_path,
                const std::string& dataset_path);
int cmd_prototype(const RunConfig& config, const std::string& model_path);
int cmd_sweep(const RunConfig& config, const std::string& model_path, int cls,
              std::size_t dim, const std::vector<double>& values);
int cmd_match(const RunConfig& config, const std::string& model_path,
              const std::string& dataset_path, std::size_t ratio, std::uint64_t seed);
int cmd_selfcheck();

// Exit codes: 0 success, 1 usage, 2 data/file problems, 3 numeric failures.
int run(int argc, const char* const* argv);

}  // namespace sigflow::cli
