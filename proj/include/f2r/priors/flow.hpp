#pragma once

#include <memory>
#include <string>
#include <vector>

#include "f2r/core/tensor.hpp"
#include "f2r/data/video.hpp"

namespace f2r {

// Context for a flow request. Fields beyond the two frames exist for the
// ground-truth variant, which needs to know which stored pair (and crop)
// the frames correspond to.
struct FlowQuery {
    int src_pos = -1;
    int dst_pos = -1;
    const GroundTruthFlow* gt = nullptr;
    int crop_y = 0, crop_x = 0;
};

// Frozen flow estimator E. Fields are returned in backward-warp
// convention on the dst grid: warp(src, V) lines up with dst. Every
// variant returns an exactly zero field for identical inputs.
class FlowEstimatorPrior {
public:
    virtual ~FlowEstimatorPrior() = default;
    virtual Tensor estimate(const Tensor& src, const Tensor& dst,
                            const FlowQuery* q = nullptr) const = 0;
    virtual uint64_t param_checksum() const = 0;
    virtual std::string describe() const = 0;
};

Tensor estimate_flow(const FlowEstimatorPrior& e, const Tensor& src, const Tensor& dst,
                     const FlowQuery* q = nullptr);

// Pass-through oracle over the generator's analytic flow store.
class GroundTruthFlowPrior : public FlowEstimatorPrior {
public:
    Tensor estimate(const Tensor& src, const Tensor& dst, const FlowQuery* q) const override;
    uint64_t param_checksum() const override { return 0x67746f7261636c65ULL; }
    std::string describe() const override { return "ground_truth"; }
};

// Exhaustive block matching on a luminance proxy with parabolic subpixel
// refinement and an optional 3x3 median smoothing of the components.
class BlockMatchingFlow : public FlowEstimatorPrior {
public:
    BlockMatchingFlow(int radius = 8, int block = 9, bool median = true);
    Tensor estimate(const Tensor& src, const Tensor& dst, const FlowQuery* q) const override;
    uint64_t param_checksum() const override;
    std::string describe() const override;

private:
    int radius_, block_;
    bool median_;
};

// Per-level flow fields matched to the U-Net resolutions: level 0 is the
// base field; each level is the 2x2 average pool of the previous one with
// the magnitude halved, in pixel units at that level.
struct FlowPyramid {
    std::vector<Tensor> levels;
};

FlowPyramid build_flow_pyramid(const Tensor& base, int levels);

}  // namespace f2r
