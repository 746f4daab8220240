#pragma once

#include <vector>

#include "f2r/align/deform.hpp"
#include "f2r/align/warp.hpp"
#include "f2r/autograd/ops.hpp"

namespace f2r {
namespace ag {

// Flow-guided deformable alignment. `beta` is the learnable fusion scale;
// it is absent (-1) in the blind variant used by the alignment-pairing
// ablation, where no center feature exists to add back onto.
struct FdamVars {
    VarId off1_w, off1_b;
    VarId off2_w, off2_b;
    VarId off3_w, off3_b;
    VarId dcn_w, dcn_b;
    VarId fuse_w, fuse_b;
    VarId beta = -1;
    int groups = 8;
    double offset_clamp = 10.0;
};

// Per neighbor: regress residual offsets from (F_t, F_i, warp(F_i, V), V),
// clamp them, add the flow broadcast over every kernel tap as the base
// offset, and deformable-sample F_i. Aligned neighbors are fused by a 1x1
// conv; the center feature is added back scaled by beta. Pass center = -1
// for the blind variant (offsets regressed without F_t, output is the
// fused map itself).
template <class S>
VarId fdam_forward(Tape<S>& t, VarId center, const std::vector<VarId>& neighbors,
                   const std::vector<VarId>& flows, const FdamVars& p, S lrelu_slope) {
    if (neighbors.empty() || neighbors.size() != flows.size())
        throw ConfigError("fdam_forward: neighbor/flow count mismatch");
    const bool has_center = center >= 0;
    const int k = t.val(p.dcn_w).dim(2);

    std::vector<VarId> aligned;
    aligned.reserve(neighbors.size());
    for (std::size_t i = 0; i < neighbors.size(); ++i) {
        VarId warped = backward_warp(t, neighbors[i], flows[i]);
        std::vector<VarId> off_in;
        if (has_center) off_in.push_back(center);
        off_in.push_back(neighbors[i]);
        off_in.push_back(warped);
        off_in.push_back(flows[i]);
        VarId h = leaky_relu(t, conv2d(t, concat_ch(t, off_in), p.off1_w, p.off1_b), lrelu_slope);
        h = leaky_relu(t, conv2d(t, h, p.off2_w, p.off2_b), lrelu_slope);
        VarId res_off = clamp(t, conv2d(t, h, p.off3_w, p.off3_b),
                              static_cast<S>(-p.offset_clamp), static_cast<S>(p.offset_clamp));
        VarId base_off = broadcast_flow_to_taps(t, flows[i], p.groups, k);
        VarId off = add(t, base_off, res_off);
        aligned.push_back(deform_sample(t, neighbors[i], off, p.dcn_w, p.dcn_b, p.groups));
    }

    VarId fused = conv2d(t, concat_ch(t, aligned), p.fuse_w, p.fuse_b);
    if (!has_center) return fused;
    return add(t, center, scale_by_scalar(t, fused, p.beta));
}

}  // namespace ag
}  // namespace f2r
