#pragma once

#include <memory>
#include <string>
#include <vector>

#include "f2r/core/tensor.hpp"

namespace f2r {

// Frozen frame-wise image denoiser D. The framework only requires a
// consistent deterministic mapping; no trainer ever updates it, and the
// parameter checksum is audited before and after every training stage.
class DenoiserPrior {
public:
    virtual ~DenoiserPrior() = default;
    virtual Tensor denoise(const Tensor& frame) const = 0;
    virtual uint64_t param_checksum() const = 0;
    virtual std::string describe() const = 0;
    // -1 = any channel count
    virtual int expected_channels() const { return -1; }
};

Tensor denoise_frame(const DenoiserPrior& d, const Tensor& y);

struct JointInput {
    Tensor baseline;  // x_hat = D(y)
    Tensor residual;  // r = y - x_hat, unclipped arithmetic

    Tensor concat() const;  // network input z with 2*Ch channels
    static JointInput split(const Tensor& z);
};

JointInput make_joint_input(const Tensor& y, const DenoiserPrior& d);

// Separable Gaussian smoother with reflective borders; the zero-training
// classical baseline.
class GaussianSmoother : public DenoiserPrior {
public:
    explicit GaussianSmoother(double sigma_k);
    Tensor denoise(const Tensor& frame) const override;
    uint64_t param_checksum() const override;
    std::string describe() const override;
    double sigma_k() const { return sigma_k_; }

private:
    double sigma_k_;
    std::vector<float> kernel_;
};

class IdentityDenoiser : public DenoiserPrior {
public:
    Tensor denoise(const Tensor& frame) const override { return frame; }
    uint64_t param_checksum() const override { return 0x1d1d1d1d1d1d1d1dULL; }
    std::string describe() const override { return "identity"; }
};

// Small residual CNN pretrained supervised on a disjoint synthetic image
// set, then frozen. Stored as a self-describing binary with checksum.
class LearnedDenoiser : public DenoiserPrior {
public:
    Tensor denoise(const Tensor& frame) const override;
    uint64_t param_checksum() const override;
    std::string describe() const override;
    int expected_channels() const override { return channels_; }

    void save(const std::string& path) const;
    static LearnedDenoiser load(const std::string& path);

    struct TrainOptions {
        int channels = 3;
        int hidden = 24;
        int layers = 4;
        int iters = 1200;
        int batch = 8;
        int patch = 32;
        double lr = 1e-3;
        double noise_sigma = 0.1;
        uint64_t seed = 1;
        int train_images = 12;
    };
    static LearnedDenoiser train(const TrainOptions& opt);

private:
    friend class LearnedDenoiserBuilder;
    int channels_ = 3;
    int hidden_ = 24;
    int layers_ = 4;
    std::vector<std::pair<std::string, Tensor>> params_;
};

}  // namespace f2r
