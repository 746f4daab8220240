#pragma once

#include <vector>

#include "f2r/align/warp.hpp"
#include "f2r/autograd/ops.hpp"

namespace f2r {
namespace ag {

// Flow-guided attention alignment. Tape handles for one module instance;
// the parameter tensors live in the owning ModelState.
struct FaamVars {
    VarId fc1_w, fc1_b;  // squeeze
    VarId fc2_w, fc2_b;  // excite
    VarId sp_w, sp_b;    // spatial attention conv over [mean, max] maps
    VarId agg_w, agg_b;  // 1x1 aggregation to the level width
};

// Warp each input feature map to the center by its flow, stack along
// channels, gate with channel attention (temporal selector) then spatial
// attention (warping-artifact filter), and aggregate with a 1x1 conv.
// The center frame is not an argument: in blind mode this module is the
// only cross-frame path, and it is structurally unable to see F_t.
template <class S>
VarId faam_forward(Tape<S>& t, const std::vector<VarId>& features,
                   const std::vector<VarId>& flows, const FaamVars& p, S lrelu_slope) {
    if (features.empty() || features.size() != flows.size())
        throw ConfigError("faam_forward: feature/flow count mismatch");
    std::vector<VarId> warped;
    warped.reserve(features.size());
    for (std::size_t i = 0; i < features.size(); ++i)
        warped.push_back(backward_warp(t, features[i], flows[i]));
    VarId stacked = concat_ch(t, warped);

    const int m = t.val(stacked).dim(0);
    if (t.val(p.fc1_w).dim(1) != m)
        throw ConfigError("faam_forward: params built for " + std::to_string(t.val(p.fc1_w).dim(1)) +
                          " stacked channels, got " + std::to_string(m));

    // channel attention: GAP -> squeeze/excite -> sigmoid gate
    VarId g = global_avg_pool(t, stacked);
    g = leaky_relu(t, conv2d(t, g, p.fc1_w, p.fc1_b), lrelu_slope);
    g = sigmoid(t, conv2d(t, g, p.fc2_w, p.fc2_b));
    VarId gated = scale_channels(t, stacked, g);

    // spatial attention over pooled channel statistics; reflect padding so
    // a constant statistics map yields a constant gate
    VarId stats = concat_ch(t, {channel_mean(t, gated), channel_max(t, gated)});
    const int sk = t.val(p.sp_w).dim(2);
    VarId smap = sigmoid(t, conv2d(t, reflect_pad2d(t, stats, (sk - 1) / 2), p.sp_w, p.sp_b, 1, 0));
    VarId refined = scale_spatial(t, gated, smap);

    return conv2d(t, refined, p.agg_w, p.agg_b);
}

}  // namespace ag
}  // namespace f2r
