#include "f2r/priors/flow.hpp"

#include <algorithm>
#include <cmath>

#include "f2r/core/checksum.hpp"
#include "f2r/core/errors.hpp"

namespace f2r {

Tensor estimate_flow(const FlowEstimatorPrior& e, const Tensor& src, const Tensor& dst,
                     const FlowQuery* q) {
    if (src.ndim() != 3 || dst.ndim() != 3 || !src.same_shape(dst))
        throw InputError("estimate_flow: src/dst shape mismatch");
    return e.estimate(src, dst, q);
}

Tensor GroundTruthFlowPrior::estimate(const Tensor& src, const Tensor& dst,
                                      const FlowQuery* q) const {
    if (q == nullptr || q->gt == nullptr)
        throw InputError("ground_truth flow prior needs a query with an attached flow store");
    if (q->src_pos < 0 || q->dst_pos < 0)
        throw InputError("ground_truth flow prior needs source/target frame positions");
    const int h = dst.dim(1), w = dst.dim(2);
    if (q->src_pos == q->dst_pos) return Tensor({2, h, w});
    const Tensor full = q->gt->flow(q->src_pos, q->dst_pos);
    if (q->crop_y + h > full.dim(1) || q->crop_x + w > full.dim(2))
        throw InputError("ground_truth flow prior: crop outside stored field");
    Tensor out({2, h, w});
    for (int c = 0; c < 2; ++c)
        for (int y = 0; y < h; ++y)
            std::copy(&full.at(c, q->crop_y + y, q->crop_x), &full.at(c, q->crop_y + y, q->crop_x) + w,
                      &out.at(c, y, 0));
    return out;
}

BlockMatchingFlow::BlockMatchingFlow(int radius, int block, bool median)
    : radius_(radius), block_(block), median_(median) {
    if (radius < 1) throw ParamError("block matching: radius must be >= 1");
    if (block < 3 || block % 2 == 0) throw ParamError("block matching: block must be odd and >= 3");
}

uint64_t BlockMatchingFlow::param_checksum() const {
    const int v[3] = {radius_, block_, median_ ? 1 : 0};
    return fnv1a64(v, sizeof(v));
}

std::string BlockMatchingFlow::describe() const {
    return "block_matching(radius=" + std::to_string(radius_) +
           ", block=" + std::to_string(block_) + ")";
}

namespace {

// Mean over channels; flows are estimated on this proxy for both sRGB and
// packed RGBG data.
Tensor luminance(const Tensor& f) {
    const int ch = f.dim(0), h = f.dim(1), w = f.dim(2);
    Tensor out({1, h, w});
    const float inv = 1.0f / static_cast<float>(ch);
    for (int c = 0; c < ch; ++c)
        for (int i = 0; i < h * w; ++i)
            out.data[static_cast<std::size_t>(i)] += f.data[static_cast<std::size_t>(c) * h * w + i] * inv;
    return out;
}

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

double block_sad(const Tensor& a, const Tensor& b, int ay, int ax, int by, int bx, int half) {
    const int h = a.dim(1), w = a.dim(2);
    double acc = 0.0;
    for (int dy = -half; dy <= half; ++dy)
        for (int dx = -half; dx <= half; ++dx) {
            const float va = a.at(0, clampi(ay + dy, 0, h - 1), clampi(ax + dx, 0, w - 1));
            const float vb = b.at(0, clampi(by + dy, 0, h - 1), clampi(bx + dx, 0, w - 1));
            acc += std::abs(static_cast<double>(va) - static_cast<double>(vb));
        }
    return acc;
}

float median3x3(const Tensor& f, int c, int y, int x) {
    const int h = f.dim(1), w = f.dim(2);
    float v[9];
    int n = 0;
    for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
            v[n++] = f.at(c, clampi(y + dy, 0, h - 1), clampi(x + dx, 0, w - 1));
    std::nth_element(v, v + 4, v + 9);
    return v[4];
}

}  // namespace

Tensor BlockMatchingFlow::estimate(const Tensor& src, const Tensor& dst, const FlowQuery*) const {
    const Tensor ls = luminance(src), ld = luminance(dst);
    const int h = dst.dim(1), w = dst.dim(2);
    const int half = (block_ - 1) / 2;
    Tensor flow({2, h, w});
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            int bdx = 0, bdy = 0;
            double best = block_sad(ld, ls, y, x, y, x, half);
            for (int dy = -radius_; dy <= radius_; ++dy)
                for (int dx = -radius_; dx <= radius_; ++dx) {
                    if (dx == 0 && dy == 0) continue;
                    const double c = block_sad(ld, ls, y, x, y + dy, x + dx, half);
                    // strict improvement keeps the zero-displacement bias
                    if (c < best - 1e-12 ||
                        (std::abs(c - best) <= 1e-12 &&
                         dx * dx + dy * dy < bdx * bdx + bdy * bdy)) {
                        best = c;
                        bdx = dx;
                        bdy = dy;
                    }
                }
            double fx = bdx, fy = bdy;
            // parabolic refinement, only strictly inside the search range
            if (std::abs(bdx) < radius_) {
                const double cm = block_sad(ld, ls, y, x, y + bdy, x + bdx - 1, half);
                const double cp = block_sad(ld, ls, y, x, y + bdy, x + bdx + 1, half);
                const double den = cm - 2.0 * best + cp;
                if (den > 1e-12) fx += std::min(0.5, std::max(-0.5, 0.5 * (cm - cp) / den));
            }
            if (std::abs(bdy) < radius_) {
                const double cm = block_sad(ld, ls, y, x, y + bdy - 1, x + bdx, half);
                const double cp = block_sad(ld, ls, y, x, y + bdy + 1, x + bdx, half);
                const double den = cm - 2.0 * best + cp;
                if (den > 1e-12) fy += std::min(0.5, std::max(-0.5, 0.5 * (cm - cp) / den));
            }
            flow.at(0, y, x) = static_cast<float>(fx);
            flow.at(1, y, x) = static_cast<float>(fy);
        }
    }
    if (median_) {
        Tensor sm = flow;
        for (int c = 0; c < 2; ++c)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) sm.at(c, y, x) = median3x3(flow, c, y, x);
        return sm;
    }
    return flow;
}

FlowPyramid build_flow_pyramid(const Tensor& base, int levels) {
    if (base.ndim() != 3 || base.dim(0) != 2) throw InputError("flow pyramid: expects [2,H,W]");
    if (levels < 1) throw ConfigError("flow pyramid: levels must be >= 1");
    const int div = 1 << (levels - 1);
    if (base.dim(1) % div != 0 || base.dim(2) % div != 0)
        throw ConfigError("flow pyramid: " + std::to_string(base.dim(1)) + "x" +
                          std::to_string(base.dim(2)) + " not divisible by 2^" +
                          std::to_string(levels - 1));
    FlowPyramid pyr;
    pyr.levels.push_back(base);
    for (int l = 1; l < levels; ++l) {
        const Tensor& prev = pyr.levels.back();
        const int h = prev.dim(1) / 2, w = prev.dim(2) / 2;
        Tensor cur({2, h, w});
        for (int c = 0; c < 2; ++c)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    // 2x2 average pool, then halve the magnitude for the
                    // resolution change: combined factor 1/8.
                    const float s = prev.at(c, 2 * y, 2 * x) + prev.at(c, 2 * y, 2 * x + 1) +
                                    prev.at(c, 2 * y + 1, 2 * x) + prev.at(c, 2 * y + 1, 2 * x + 1);
                    cur.at(c, y, x) = s * 0.125f;
                }
        pyr.levels.push_back(std::move(cur));
    }
    return pyr;
}

}  // namespace f2r
