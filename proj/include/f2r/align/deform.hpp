#pragma once

#include <cmath>
#include <memory>

#include "f2r/autograd/ops.hpp"

namespace f2r {
namespace ag {

namespace detail {

// Zero-padded bilinear sample plus corner bookkeeping shared by the
// forward and backward passes of the deformable kernel.
template <class S>
struct SamplePoint {
    int x0, y0;
    S fx, fy;
    bool v00, v01, v10, v11;
};

template <class S>
inline SamplePoint<S> sample_point(double sx, double sy, int h, int w) {
    SamplePoint<S> sp;
    const double fx0 = std::floor(sx), fy0 = std::floor(sy);
    sp.x0 = static_cast<int>(fx0);
    sp.y0 = static_cast<int>(fy0);
    sp.fx = static_cast<S>(sx - fx0);
    sp.fy = static_cast<S>(sy - fy0);
    const bool x0in = sp.x0 >= 0 && sp.x0 < w;
    const bool x1in = sp.x0 + 1 >= 0 && sp.x0 + 1 < w;
    const bool y0in = sp.y0 >= 0 && sp.y0 < h;
    const bool y1in = sp.y0 + 1 >= 0 && sp.y0 + 1 < h;
    sp.v00 = x0in && y0in;
    sp.v01 = x1in && y0in;
    sp.v10 = x0in && y1in;
    sp.v11 = x1in && y1in;
    return sp;
}

}  // namespace detail

// Deformable k x k convolution, stride 1, same padding, zero-fill
// sampling. Offsets are per deformable group and per kernel tap:
// [G*k*k*2, h, w] with index ((g*k*k + tap)*2 + comp), comp 0 = dx.
// Deformable groups partition input channels; the kernel weights stay
// dense. With all offsets at zero this reduces to an ordinary zero-padded
// convolution.
template <class S>
VarId deform_sample(Tape<S>& t, VarId f, VarId off, VarId w_, VarId b, int groups) {
    const auto& fv = t.val(f);
    const auto& ov = t.val(off);
    const auto& wv = t.val(w_);
    const int cin = fv.dim(0), h = fv.dim(1), w = fv.dim(2);
    const int cout = wv.dim(0), k = wv.dim(2);
    if (wv.dim(1) != cin || wv.dim(3) != k) throw InputError("deform_sample: weight shape");
    if (groups <= 0 || cin % groups != 0)
        throw ConfigError("deform_sample: groups " + std::to_string(groups) +
                          " must divide input channels " + std::to_string(cin));
    const int kk = k * k;
    if (ov.dim(0) != groups * kk * 2 || ov.dim(1) != h || ov.dim(2) != w)
        throw InputError("deform_sample: offset shape");
    const int cpg = cin / groups;
    const int half = (k - 1) / 2;
    const std::size_t P = static_cast<std::size_t>(h) * w;
    const int K = cin * kk;

    static thread_local std::vector<S> col;
    col.assign(static_cast<std::size_t>(K) * P, S(0));
    for (int g = 0; g < groups; ++g) {
        for (int tap = 0; tap < kk; ++tap) {
            const int ky = tap / k, kx = tap % k;
            const S* odx = &ov.at((g * kk + tap) * 2 + 0, 0, 0);
            const S* ody = &ov.at((g * kk + tap) * 2 + 1, 0, 0);
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    const std::size_t p = static_cast<std::size_t>(y) * w + x;
                    const double sx = x + kx - half + static_cast<double>(odx[p]);
                    const double sy = y + ky - half + static_cast<double>(ody[p]);
                    const auto sp = detail::sample_point<S>(sx, sy, h, w);
                    const S w00 = (S(1) - sp.fy) * (S(1) - sp.fx);
                    const S w01 = (S(1) - sp.fy) * sp.fx;
                    const S w10 = sp.fy * (S(1) - sp.fx);
                    const S w11 = sp.fy * sp.fx;
                    for (int c = 0; c < cpg; ++c) {
                        const int ci = g * cpg + c;
                        S acc = S(0);
                        if (sp.v00) acc += w00 * fv.at(ci, sp.y0, sp.x0);
                        if (sp.v01) acc += w01 * fv.at(ci, sp.y0, sp.x0 + 1);
                        if (sp.v10) acc += w10 * fv.at(ci, sp.y0 + 1, sp.x0);
                        if (sp.v11) acc += w11 * fv.at(ci, sp.y0 + 1, sp.x0 + 1);
                        col[(static_cast<std::size_t>(ci) * kk + tap) * P + p] = acc;
                    }
                }
            }
        }
    }

    TensorT<S> out({cout, h, w});
    CMapRM<S> wm(wv.ptr(), cout, K);
    CMapRM<S> cm(col.data(), K, static_cast<Eigen::Index>(P));
    MapRM<S> om(out.ptr(), cout, static_cast<Eigen::Index>(P));
    om.noalias() = wm * cm;
    if (b >= 0) {
        const auto& bv = t.val(b);
        for (int co = 0; co < cout; ++co) om.row(co).array() += bv.data[static_cast<std::size_t>(co)];
    }

    std::vector<VarId> ins = (b >= 0) ? std::vector<VarId>{f, off, w_, b}
                                      : std::vector<VarId>{f, off, w_};
    // col is saved for the backward pass: rebuilding it would repeat the
    // sampling sweep, and unlike plain conv the dW term cannot reuse a
    // shared scratch safely across nested modules.
    auto saved_col = std::make_shared<std::vector<S>>(col);
    return t.push(std::move(out), std::move(ins),
                  [f, off, w_, b, groups, k, saved_col](Tape<S>& tp, VarId out_id) {
                      const auto& fv = tp.val(f);
                      const auto& ov = tp.val(off);
                      const auto& wv = tp.val(w_);
                      const auto& go = tp.grad(out_id);
                      const int cin = fv.dim(0), h = fv.dim(1), w = fv.dim(2);
                      const int cout = wv.dim(0), kk = k * k, cpg = cin / groups;
                      const int half = (k - 1) / 2;
                      const std::size_t P = static_cast<std::size_t>(h) * w;
                      const int K = cin * kk;
                      CMapRM<S> gom(go.ptr(), cout, static_cast<Eigen::Index>(P));
                      if (b >= 0 && tp.needs_grad(b)) {
                          auto& gb = tp.grad(b);
                          for (int co = 0; co < cout; ++co)
                              gb.data[static_cast<std::size_t>(co)] += gom.row(co).sum();
                      }
                      if (tp.needs_grad(w_)) {
                          CMapRM<S> cm(saved_col->data(), K, static_cast<Eigen::Index>(P));
                          MapRM<S> gwm(tp.grad(w_).ptr(), cout, K);
                          gwm.noalias() += gom * cm.transpose();
                      }
                      const bool gf = tp.needs_grad(f), goff = tp.needs_grad(off);
                      if (!gf && !goff) return;
                      static thread_local std::vector<S> dcol;
                      dcol.assign(static_cast<std::size_t>(K) * P, S(0));
                      MapRM<S> dcm(dcol.data(), K, static_cast<Eigen::Index>(P));
                      CMapRM<S> wm(wv.ptr(), cout, K);
                      dcm.noalias() = wm.transpose() * gom;
                      for (int g = 0; g < groups; ++g) {
                          for (int tap = 0; tap < kk; ++tap) {
                              const int ky = tap / k, kx = tap % k;
                              const S* odx = &ov.at((g * kk + tap) * 2 + 0, 0, 0);
                              const S* ody = &ov.at((g * kk + tap) * 2 + 1, 0, 0);
                              for (int y = 0; y < h; ++y) {
                                  for (int x = 0; x < w; ++x) {
                                      const std::size_t p = static_cast<std::size_t>(y) * w + x;
                                      const double sx = x + kx - half + static_cast<double>(odx[p]);
                                      const double sy = y + ky - half + static_cast<double>(ody[p]);
                                      const auto sp = detail::sample_point<S>(sx, sy, h, w);
                                      const S w00 = (S(1) - sp.fy) * (S(1) - sp.fx);
                                      const S w01 = (S(1) - sp.fy) * sp.fx;
                                      const S w10 = sp.fy * (S(1) - sp.fx);
                                      const S w11 = sp.fy * sp.fx;
                                      double ax = 0.0, ay = 0.0;
                                      for (int c = 0; c < cpg; ++c) {
                                          const int ci = g * cpg + c;
                                          const S dg =
                                              dcol[(static_cast<std::size_t>(ci) * kk + tap) * P + p];
                                          if (dg == S(0)) continue;
                                          const S v00 = sp.v00 ? fv.at(ci, sp.y0, sp.x0) : S(0);
                                          const S v01 = sp.v01 ? fv.at(ci, sp.y0, sp.x0 + 1) : S(0);
                                          const S v10 = sp.v10 ? fv.at(ci, sp.y0 + 1, sp.x0) : S(0);
                                          const S v11 = sp.v11 ? fv.at(ci, sp.y0 + 1, sp.x0 + 1) : S(0);
                                          if (gf) {
                                              auto& gfm = tp.grad(f);
                                              if (sp.v00) gfm.at(ci, sp.y0, sp.x0) += dg * w00;
                                              if (sp.v01) gfm.at(ci, sp.y0, sp.x0 + 1) += dg * w01;
                                              if (sp.v10) gfm.at(ci, sp.y0 + 1, sp.x0) += dg * w10;
                                              if (sp.v11) gfm.at(ci, sp.y0 + 1, sp.x0 + 1) += dg * w11;
                                          }
                                          if (goff) {
                                              ax += static_cast<double>(dg) *
                                                    ((S(1) - sp.fy) * (v01 - v00) + sp.fy * (v11 - v10));
                                              ay += static_cast<double>(dg) *
                                                    ((S(1) - sp.fx) * (v10 - v00) + sp.fx * (v11 - v01));
                                          }
                                      }
                                      if (goff) {
                                          auto& gov = tp.grad(off);
                                          gov.at((g * kk + tap) * 2 + 0, y, x) += static_cast<S>(ax);
                                          gov.at((g * kk + tap) * 2 + 1, y, x) += static_cast<S>(ay);
                                      }
                                  }
                              }
                          }
                      }
                  });
}

// Replicates a flow field over every tap of every deformable group,
// producing the base offsets that initialize the deformable sampler.
template <class S>
VarId broadcast_flow_to_taps(Tape<S>& t, VarId v, int groups, int k) {
    const auto& vv = t.val(v);
    if (vv.dim(0) != 2) throw InputError("broadcast_flow_to_taps: expects [2,h,w] flow");
    const int h = vv.dim(1), w = vv.dim(2), kk = k * k;
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    TensorT<S> out({groups * kk * 2, h, w});
    for (int g = 0; g < groups; ++g)
        for (int tap = 0; tap < kk; ++tap)
            for (int comp = 0; comp < 2; ++comp)
                std::copy(vv.ptr() + comp * hw, vv.ptr() + (comp + 1) * hw,
                          out.ptr() + static_cast<std::size_t>((g * kk + tap) * 2 + comp) * hw);
    return t.push(std::move(out), {v}, [v, groups, kk, hw](Tape<S>& tp, VarId out_id) {
        const auto& go = tp.grad(out_id);
        auto& gv = tp.grad(v);
        for (int g = 0; g < groups; ++g)
            for (int tap = 0; tap < kk; ++tap)
                for (int comp = 0; comp < 2; ++comp) {
                    const S* src = go.ptr() + static_cast<std::size_t>((g * kk + tap) * 2 + comp) * hw;
                    S* dst = gv.ptr() + comp * hw;
                    for (std::size_t i = 0; i < hw; ++i) dst[i] += src[i];
                }
    });
}

}  // namespace ag
}  // namespace f2r
