#pragma once

#include <string>
#include <vector>

#include "rde/obfuscation.hpp"
#include "rde/rdecore.hpp"
#include "rde/wavelet.hpp"

namespace rde::cli {

struct RunConfig {
    std::string command;

    std::string input_path;
    std::string weights_path;
    std::string out_path;

    // train
    std::string images_path;
    std::string labels_path;
    std::string test_images_path;
    std::string test_labels_path;
    int classes = 10;
    int epochs = 3;
    int batch_size = 16;
    double train_lr = 0.05;

    RdeConfig rde;
    WaveletSpec wavelet;
    ObfuscationStrategy strategy = ObfuscationStrategy::AdaptiveGaussian;

    std::string representation = "wavelet"; // eval-rd / eval-rand
    std::vector<double> lambda_list = {5, 10, 20, 40, 80};
    int grid_points = 21;
    int threads = 0;
};

// Parses subcommand and flags; reads RDE_SEED as the default seed and an
// optional key=value config file (flags win). Throws UsageError.
RunConfig parse_args(const std::vector<std::string>& args);

// Dispatches a parsed config; throws on failure.
void run(const RunConfig& config);

// Exit codes: 0 success, 1 usage, 2 i/o or format, 3 numerical failure.
int cli_main(int argc, char** argv);

std::string usage_text();

} // namespace rde::cli
