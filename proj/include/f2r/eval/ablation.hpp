#pragma once

#include <map>
#include <string>
#include <vector>

#include "f2r/train/trainer.hpp"

namespace f2r {

enum class Suite { stages, components, alignment_pairing, window_T };

Suite parse_suite(const std::string& name);
std::string suite_name(Suite s);

struct AblationConfig {
    Suite suite = Suite::stages;
    int seeds = 3;
    DataConfig data;
    NoiseModel noise = NoiseModel::awgn(0.1);
    TrainConfig base;                          // per-arm iteration budget etc.
    std::vector<int> window_sizes = {3, 5, 7, 9};
    std::string out_dir = "report";
    bool plots = true;
};

struct ArmResult {
    std::string arm;
    int seed = 0;
    double psnr = 0.0;
    double ssim = 0.0;
    bool failed = false;
    std::string error;
};

struct AblationReport {
    Suite suite;
    std::vector<ArmResult> rows;
    std::vector<std::string> arm_order;
    std::map<std::string, double> mean_psnr;
    std::map<std::string, double> mean_ssim;
    // mean per-frame PSNR curves on the validation clips, per arm
    std::map<std::string, std::vector<double>> frame_psnr;

    double mean(const std::string& arm) const { return mean_psnr.at(arm); }
};

// Trains and evaluates every arm of the suite over `seeds` independent
// seeds and writes results.csv / results.json / plots under
// <out_dir>/<suite>/. A failing arm is recorded as FAILED instead of
// aborting the suite.
AblationReport run_ablation(const AblationConfig& cfg);

void write_report(const AblationReport& rep, const std::string& dir, bool plots);

}  // namespace f2r
