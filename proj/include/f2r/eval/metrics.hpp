#pragma once

#include <limits>
#include <vector>

#include "f2r/core/tensor.hpp"
#include "f2r/data/video.hpp"

namespace f2r {

// PSNR in dB with peak 1.0; identical inputs return the +infinity
// sentinel. Sequence PSNR is the mean of per-frame values.
double psnr(const Tensor& a, const Tensor& b);
double psnr_sequence(const std::vector<Tensor>& a, const std::vector<Tensor>& b);

struct SsimOptions {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01, k2 = 0.03;
    double luminance_range = 1.0;
};

// Windowed SSIM over valid positions, averaged over channels.
double ssim(const Tensor& a, const Tensor& b, const SsimOptions& opt = {});
double ssim_sequence(const std::vector<Tensor>& a, const std::vector<Tensor>& b,
                     const SsimOptions& opt = {});

inline bool psnr_is_inf(double v) { return v == std::numeric_limits<double>::infinity(); }

}  // namespace f2r
