#pragma once

#include <cstdint>
#include <string>

#include "f2r/core/rng.hpp"
#include "f2r/core/tensor.hpp"

namespace f2r {

struct VideoSequence;

// Generative noise specification used both for corrupting clean data and
// for the Stage-2 recorruption draw. Variances are in squared normalized
// intensity units; the signal-dependent model is the Gaussian
// approximation with Var(x) = shot_gain * x + read_var.
struct NoiseModel {
    enum class Kind { awgn, signal_dependent };

    Kind kind = Kind::awgn;
    double sigma = 0.0;      // awgn standard deviation
    double shot_gain = 0.0;  // a
    double read_var = 0.0;   // b
    int iso = 0;             // label only

    void validate() const;
    double variance_at(double x) const;
    bool is_zero() const;
    std::string describe() const;

    static NoiseModel awgn(double sigma);
    static NoiseModel signal_dependent(double a, double b, int iso = 0);
};

// Zero-mean noise field of the given shape. For signal_dependent models
// ref_intensity parameterizes the per-pixel variance and must match the
// shape. Bit-identical for identical (shape, model, ref, seed).
Tensor sample_recorruption(const std::vector<int>& shape, const NoiseModel& model,
                           const Tensor* ref_intensity, uint64_t seed);

// y = x + n with n drawn i.i.d. per pixel per frame. Noise is added in the
// unclipped continuous domain; clipping happens only at export. Each frame
// uses a seed derived from (seed, frame index), so the stream does not
// depend on call order.
VideoSequence corrupt(const VideoSequence& clean, const NoiseModel& model, uint64_t seed);

}  // namespace f2r
