#pragma once

#include <cmath>

#include "f2r/autograd/ops.hpp"

namespace f2r {

// Plain bilinear backward warp with border clamping, no gradients.
// out(p) = F(p + V(p)), flow channels are (dx, dy) in pixels at this
// resolution. Used on images by evaluation and the synthetic-data oracle;
// the tape op below is the differentiable twin used inside the networks.
template <class S>
TensorT<S> warp_image(const TensorT<S>& f, const TensorT<S>& v) {
    const int c = f.dim(0), h = f.dim(1), w = f.dim(2);
    if (v.ndim() != 3 || v.dim(0) != 2 || v.dim(1) != h || v.dim(2) != w)
        throw InputError("warp_image: flow resolution mismatch");
    TensorT<S> out({c, h, w});
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double sx = x + static_cast<double>(v.at(0, y, x));
            double sy = y + static_cast<double>(v.at(1, y, x));
            sx = std::min(std::max(sx, 0.0), static_cast<double>(w - 1));
            sy = std::min(std::max(sy, 0.0), static_cast<double>(h - 1));
            const int x0 = static_cast<int>(std::floor(sx));
            const int y0 = static_cast<int>(std::floor(sy));
            const int x1 = std::min(x0 + 1, w - 1);
            const int y1 = std::min(y0 + 1, h - 1);
            const S fx = static_cast<S>(sx - x0), fy = static_cast<S>(sy - y0);
            for (int ci = 0; ci < c; ++ci) {
                const S v00 = f.at(ci, y0, x0), v01 = f.at(ci, y0, x1);
                const S v10 = f.at(ci, y1, x0), v11 = f.at(ci, y1, x1);
                out.at(ci, y, x) = (S(1) - fy) * ((S(1) - fx) * v00 + fx * v01) +
                                   fy * ((S(1) - fx) * v10 + fx * v11);
            }
        }
    }
    return out;
}

namespace ag {

// Differentiable backward warp. Border-clamped sampling; gradients flow
// into both the feature map and the flow field (flow gradient is zero
// where the sample position saturates at the border).
template <class S>
VarId backward_warp(Tape<S>& t, VarId f, VarId v) {
    const auto& fv = t.val(f);
    const auto& vv = t.val(v);
    const int c = fv.dim(0), h = fv.dim(1), w = fv.dim(2);
    if (vv.ndim() != 3 || vv.dim(0) != 2 || vv.dim(1) != h || vv.dim(2) != w)
        throw InputError("backward_warp: flow resolution mismatch");
    TensorT<S> out = warp_image(fv, vv);
    return t.push(std::move(out), {f, v}, [f, v, c, h, w](Tape<S>& tp, VarId out_id) {
        const auto& fv = tp.val(f);
        const auto& vv = tp.val(v);
        const auto& go = tp.grad(out_id);
        const bool gf = tp.needs_grad(f), gv = tp.needs_grad(v);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                double sx = x + static_cast<double>(vv.at(0, y, x));
                double sy = y + static_cast<double>(vv.at(1, y, x));
                const bool inx = sx > 0.0 && sx < static_cast<double>(w - 1);
                const bool iny = sy > 0.0 && sy < static_cast<double>(h - 1);
                sx = std::min(std::max(sx, 0.0), static_cast<double>(w - 1));
                sy = std::min(std::max(sy, 0.0), static_cast<double>(h - 1));
                const int x0 = static_cast<int>(std::floor(sx));
                const int y0 = static_cast<int>(std::floor(sy));
                const int x1 = std::min(x0 + 1, w - 1);
                const int y1 = std::min(y0 + 1, h - 1);
                const S fx = static_cast<S>(sx - x0), fy = static_cast<S>(sy - y0);
                double ax = 0.0, ay = 0.0;
                for (int ci = 0; ci < c; ++ci) {
                    const S g = go.at(ci, y, x);
                    if (g == S(0)) continue;
                    const S v00 = fv.at(ci, y0, x0), v01 = fv.at(ci, y0, x1);
                    const S v10 = fv.at(ci, y1, x0), v11 = fv.at(ci, y1, x1);
                    if (gf) {
                        auto& gfm = tp.grad(f);
                        gfm.at(ci, y0, x0) += g * (S(1) - fy) * (S(1) - fx);
                        gfm.at(ci, y0, x1) += g * (S(1) - fy) * fx;
                        gfm.at(ci, y1, x0) += g * fy * (S(1) - fx);
                        gfm.at(ci, y1, x1) += g * fy * fx;
                    }
                    if (gv) {
                        ax += static_cast<double>(g) *
                              ((S(1) - fy) * (v01 - v00) + fy * (v11 - v10));
                        ay += static_cast<double>(g) *
                              ((S(1) - fx) * (v10 - v00) + fx * (v11 - v01));
                    }
                }
                if (gv) {
                    auto& gvm = tp.grad(v);
                    if (inx) gvm.at(0, y, x) += static_cast<S>(ax);
                    if (iny) gvm.at(1, y, x) += static_cast<S>(ay);
                }
            }
        }
    });
}

}  // namespace ag
}  // namespace f2r
