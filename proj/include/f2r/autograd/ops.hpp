#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <vector>

#include "f2r/autograd/tape.hpp"

namespace f2r {
namespace ag {

template <class S>
using MatRM = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using MapRM = Eigen::Map<MatRM<S>>;
template <class S>
using CMapRM = Eigen::Map<const MatRM<S>>;

namespace detail {

// im2col for zero-padded convolution. col is [Cin*kh*kw, Ho*Wo] row-major.
template <class S>
void im2col(const TensorT<S>& x, int kh, int kw, int stride, int pad, int ho, int wo,
            std::vector<S>& col) {
    const int cin = x.dim(0), h = x.dim(1), w = x.dim(2);
    col.assign(static_cast<std::size_t>(cin) * kh * kw * ho * wo, S(0));
    const std::size_t plane = static_cast<std::size_t>(ho) * wo;
    for (int ci = 0; ci < cin; ++ci) {
        for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
                S* dst = col.data() + (static_cast<std::size_t>((ci * kh + ky) * kw + kx)) * plane;
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= h) {
                        dst += wo;
                        continue;
                    }
                    const S* src = &x.at(ci, iy, 0);
                    for (int ox = 0; ox < wo; ++ox, ++dst) {
                        const int ix = ox * stride - pad + kx;
                        if (ix >= 0 && ix < w) *dst = src[ix];
                    }
                }
            }
        }
    }
}

template <class S>
void col2im_acc(const std::vector<S>& col, int cin, int h, int w, int kh, int kw, int stride,
                int pad, int ho, int wo, TensorT<S>& dx) {
    const std::size_t plane = static_cast<std::size_t>(ho) * wo;
    for (int ci = 0; ci < cin; ++ci) {
        for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
                const S* src = col.data() + (static_cast<std::size_t>((ci * kh + ky) * kw + kx)) * plane;
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= h) {
                        src += wo;
                        continue;
                    }
                    S* dst = &dx.at(ci, iy, 0);
                    for (int ox = 0; ox < wo; ++ox, ++src) {
                        const int ix = ox * stride - pad + kx;
                        if (ix >= 0 && ix < w) dst[ix] += *src;
                    }
                }
            }
        }
    }
}

}  // namespace detail

// 2-D convolution, zero padding. x [Cin,H,W], w [Cout,Cin,kh,kw], b [Cout]
// or -1 for none. Output [Cout,Ho,Wo].
template <class S>
VarId conv2d(Tape<S>& t, VarId x, VarId w, VarId b, int stride = 1, int pad = -1) {
    const auto& xv = t.val(x);
    const auto& wv = t.val(w);
    if (xv.ndim() != 3 || wv.ndim() != 4) throw InputError("conv2d: rank mismatch");
    const int cin = xv.dim(0), h = xv.dim(1), wd = xv.dim(2);
    const int cout = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
    if (wv.dim(1) != cin)
        throw InputError("conv2d: channel mismatch, input " + std::to_string(cin) + " vs weight " +
                         std::to_string(wv.dim(1)));
    if (pad < 0) pad = (kh - 1) / 2;
    const int ho = (h + 2 * pad - kh) / stride + 1;
    const int wo = (wd + 2 * pad - kw) / stride + 1;
    const int K = cin * kh * kw;
    const std::size_t P = static_cast<std::size_t>(ho) * wo;

    static thread_local std::vector<S> col;
    detail::im2col(xv, kh, kw, stride, pad, ho, wo, col);

    TensorT<S> out({cout, ho, wo});
    CMapRM<S> wm(wv.ptr(), cout, K);
    CMapRM<S> cm(col.data(), K, static_cast<Eigen::Index>(P));
    MapRM<S> om(out.ptr(), cout, static_cast<Eigen::Index>(P));
    om.noalias() = wm * cm;
    if (b >= 0) {
        const auto& bv = t.val(b);
        for (int co = 0; co < cout; ++co) om.row(co).array() += bv.data[static_cast<std::size_t>(co)];
    }

    std::vector<VarId> ins = (b >= 0) ? std::vector<VarId>{x, w, b} : std::vector<VarId>{x, w};
    return t.push(std::move(out), std::move(ins),
                  [x, w, b, stride, pad, kh, kw, ho, wo](Tape<S>& tp, VarId out_id) {
                      const auto& xv = tp.val(x);
                      const auto& wv = tp.val(w);
                      const auto& go = tp.grad(out_id);
                      const int cin = xv.dim(0), h = xv.dim(1), wd = xv.dim(2);
                      const int cout = wv.dim(0);
                      const int K = cin * kh * kw;
                      const std::size_t P = static_cast<std::size_t>(ho) * wo;
                      CMapRM<S> gom(go.ptr(), cout, static_cast<Eigen::Index>(P));
                      if (b >= 0 && tp.needs_grad(b)) {
                          auto& gb = tp.grad(b);
                          for (int co = 0; co < cout; ++co)
                              gb.data[static_cast<std::size_t>(co)] += gom.row(co).sum();
                      }
                      if (tp.needs_grad(w)) {
                          static thread_local std::vector<S> col;
                          detail::im2col(xv, kh, kw, stride, pad, ho, wo, col);
                          CMapRM<S> cm(col.data(), K, static_cast<Eigen::Index>(P));
                          MapRM<S> gwm(tp.grad(w).ptr(), cout, K);
                          gwm.noalias() += gom * cm.transpose();
                      }
                      if (tp.needs_grad(x)) {
                          static thread_local std::vector<S> dcol;
                          dcol.assign(static_cast<std::size_t>(K) * P, S(0));
                          MapRM<S> dcm(dcol.data(), K, static_cast<Eigen::Index>(P));
                          CMapRM<S> wm(wv.ptr(), cout, K);
                          dcm.noalias() = wm.transpose() * gom;
                          detail::col2im_acc(dcol, cin, h, wd, kh, kw, stride, pad, ho, wo,
                                             tp.grad(x));
                      }
                  });
}

template <class S>
VarId leaky_relu(Tape<S>& t, VarId x, S slope) {
    TensorT<S> out = t.val(x);
    for (auto& v : out.data) v = v >= S(0) ? v : slope * v;
    return t.push(std::move(out), {x}, [x, slope](Tape<S>& tp, VarId out_id) {
        const auto& xv = tp.val(x);
        const auto& go = tp.grad(out_id);
        auto& gx = tp.grad(x);
        for (std::size_t i = 0; i < xv.numel(); ++i)
            gx.data[i] += go.data[i] * (xv.data[i] >= S(0) ? S(1) : slope);
    });
}

template <class S>
VarId sigmoid(Tape<S>& t, VarId x) {
    TensorT<S> out = t.val(x);
    for (auto& v : out.data) v = S(1) / (S(1) + std::exp(-v));
    return t.push(std::move(out), {x}, [x](Tape<S>& tp, VarId out_id) {
        const auto& yv = tp.val(out_id);
        const auto& go = tp.grad(out_id);
        auto& gx = tp.grad(x);
        for (std::size_t i = 0; i < yv.numel(); ++i)
            gx.data[i] += go.data[i] * yv.data[i] * (S(1) - yv.data[i]);
    });
}

template <class S>
VarId add(Tape<S>& t, VarId a, VarId b) {
    if (!t.val(a).same_shape(t.val(b))) throw InputError("add: shape mismatch");
    TensorT<S> out = t.val(a);
    out.add_(t.val(b));
    return t.push(std::move(out), {a, b}, [a, b](Tape<S>& tp, VarId out_id) {
        const auto& go = tp.grad(out_id);
        if (tp.needs_grad(a)) tp.grad(a).add_(go);
        if (tp.needs_grad(b)) tp.grad(b).add_(go);
    });
}

template <class S>
VarId sub(Tape<S>& t, VarId a, VarId b) {
    if (!t.val(a).same_shape(t.val(b))) throw InputError("sub: shape mismatch");
    TensorT<S> out = t.val(a);
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] -= t.val(b).data[i];
    return t.push(std::move(out), {a, b}, [a, b](Tape<S>& tp, VarId out_id) {
        const auto& go = tp.grad(out_id);
        if (tp.needs_grad(a)) tp.grad(a).add_(go);
        if (tp.needs_grad(b)) {
            auto& gb = tp.grad(b);
            for (std::size_t i = 0; i < go.numel(); ++i) gb.data[i] -= go.data[i];
        }
    });
}

// y = x * s, s a one-element tensor (the FDAM fusion scale beta).
template <class S>
VarId scale_by_scalar(Tape<S>& t, VarId x, VarId s) {
    if (t.val(s).numel() != 1) throw InputError("scale_by_scalar: scale must be scalar");
    const S sv = t.val(s).data[0];
    TensorT<S> out = t.val(x);
    out.scale_(sv);
    return t.push(std::move(out), {x, s}, [x, s](Tape<S>& tp, VarId out_id) {
        const auto& go = tp.grad(out_id);
        const auto& xv = tp.val(x);
        const S sv = tp.val(s).data[0];
        if (tp.needs_grad(x)) {
            auto& gx = tp.grad(x);
            for (std::size_t i = 0; i < go.numel(); ++i) gx.data[i] += go.data[i] * sv;
        }
        if (tp.needs_grad(s)) {
            double acc = 0.0;
            for (std::size_t i = 0; i < go.numel(); ++i)
                acc += static_cast<double>(go.data[i]) * static_cast<double>(xv.data[i]);
            tp.grad(s).data[0] += static_cast<S>(acc);
        }
    });
}

template <class S>
VarId concat_ch(Tape<S>& t, const std::vector<VarId>& xs) {
    if (xs.empty()) throw InputError("concat_ch: empty input list");
    const int h = t.val(xs[0]).dim(1), w = t.val(xs[0]).dim(2);
    int ctot = 0;
    for (VarId id : xs) {
        const auto& v = t.val(id);
        if (v.ndim() != 3 || v.dim(1) != h || v.dim(2) != w)
            throw InputError("concat_ch: spatial shape mismatch");
        ctot += v.dim(0);
    }
    TensorT<S> out({ctot, h, w});
    std::size_t off = 0;
    for (VarId id : xs) {
        const auto& v = t.val(id);
        std::copy(v.data.begin(), v.data.end(), out.data.begin() + off);
        off += v.numel();
    }
    std::vector<VarId> ins = xs;
    return t.push(std::move(out), std::move(ins), [xs](Tape<S>& tp, VarId out_id) {
        const auto& go = tp.grad(out_id);
        std::size_t off = 0;
        for (VarId id : xs) {
            const std::size_t n = tp.val(id).numel();
            if (tp.needs_grad(id)) {
                auto& g = tp.grad(id);
                for (std::size_t i = 0; i < n; ++i) g.data[i] += go.data[off + i];
            }
            off += n;
        }
    });
}

// Nearest-neighbour 2x upsampling.
template <class S>
VarId upsample_nn2(Tape<S>& t, VarId x) {
    const auto& xv = t.val(x);
    const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
    TensorT<S> out({c, 2 * h, 2 * w});
    for (int ci = 0; ci < c; ++ci)
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) {
                const S v = xv.at(ci, y, xx);
                out.at(ci, 2 * y, 2 * xx) = v;
                out.at(ci, 2 * y, 2 * xx + 1) = v;
                out.at(ci, 2 * y + 1, 2 * xx) = v;
                out.at(ci, 2 * y + 1, 2 * xx + 1) = v;
            }
    return t.push(std::move(out), {x}, [x, c, h, w](Tape<S>& tp, VarId out_id) {
        const auto& go = tp.grad(out_id);
        auto& gx = tp.grad(x);
        for (int ci = 0; ci < c; ++ci)
            for (int y = 0; y < h; ++y)
                for (int xx = 0; xx < w; ++xx)
                    gx.at(ci, y, xx) += go.at(ci, 2 * y, 2 * xx) + go.at(ci, 2 * y, 2 * xx + 1) +
                                        go.at(ci, 2 * y + 1, 2 * xx) +
                                        go.at(ci, 2 * y + 1, 2 * xx + 1);
    });
}

template <class S>
VarId global_avg_pool(Tape<S>& t, VarId x) {
    const auto& xv = t.val(x);
    const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
    TensorT<S> out({c, 1, 1});
    const double inv = 1.0 / (static_cast<double>(h) * w);
    for (int ci = 0; ci < c; ++ci) {
        double acc = 0.0;
        const S* p = &xv.at(ci, 0, 0);
        for (int i = 0; i < h * w; ++i) acc += static_cast<double>(p[i]);
        out.data[static_cast<std::size_t>(ci)] = static_cast<S>(acc * inv);
    }
    return t.push(std::move(out), {x}, [x, c, h, w](Tape<S>& tp, VarId out_id) {
        const auto& go = tp.grad(out_id);
        auto& gx = tp.grad(x);
        const S inv = static_cast<S>(1.0 / (static_cast<double>(h) * w));
        for (int ci = 0; ci < c; ++ci) {
            const S g = go.data[static_cast<std::size_t>(ci)] * inv;
            S* p = &gx.at(ci, 0, 0);
            for (int i = 0; i < h * w; ++i) p[i] += g;
        }
    });
}

// Per-channel gating: y[c,:,:] = x[c,:,:] * g[c]. g is [C,1,1].
template <class S>
VarId scale_channels(Tape<S>& t, VarId x, VarId g) {
    const auto& xv = t.val(x);
    const auto& gv = t.val(g);
    const int c = xv.dim(0), hw = xv.dim(1) * xv.dim(2);
    if (gv.numel() != static_cast<std::size_t>(c)) throw InputError("scale_channels: gate size");
    TensorT<S> out = xv;
    for (int ci = 0; ci < c; ++ci) {
        const S gc = gv.data[static_cast<std::size_t>(ci)];
        S* p = out.ptr() + static_cast<std::size_t>(ci) * hw;
        for (int i = 0; i < hw; ++i) p[i] *= gc;
    }
    return t.push(std::move(out), {x, g}, [x, g, c, hw](Tape<S>& tp, VarId out_id) {
        const auto& go = tp.grad(out_id);
        const auto& xv = tp.val(x);
        const auto& gv = tp.val(g);
        if (tp.needs_grad(x)) {
            auto& gx = tp.grad(x);
            for (int ci = 0; ci < c; ++ci) {
                const S gc = gv.data[static_cast<std::size_t>(ci)];
                const std::size_t o = static_cast<std::size_t>(ci) * hw;
                for (int i = 0; i < hw; ++i) gx.data[o + i] += go.data[o + i] * gc;
            }
        }
        if (tp.needs_grad(g)) {
            auto& gg = tp.grad(g);
            for (int ci = 0; ci < c; ++ci) {
                const std::size_t o = static_cast<std::size_t>(ci) * hw;
                double acc = 0.0;
                for (int i = 0; i < hw; ++i)
                    acc += static_cast<double>(go.data[o + i]) * static_cast<double>(xv.data[o + i]);
                gg.data[static_cast<std::size_t>(ci)] += static_cast<S>(acc);
            }
        }
    });
}

// Spatial gating: y[c,y,x] = x[c,y,x] * g[0,y,x].
template <class S>
VarId scale_spatial(Tape<S>& t, VarId x, VarId g) {
    const auto& xv = t.val(x);
    const auto& gv = t.val(g);
    const int c = xv.dim(0), hw = xv.dim(1) * xv.dim(2);
    if (gv.dim(0) != 1 || gv.dim(1) != xv.dim(1) || gv.dim(2) != xv.dim(2))
        throw InputError("scale_spatial: gate shape");
    TensorT<S> out = xv;
    for (int ci = 0; ci < c; ++ci) {
        S* p = out.ptr() + static_cast<std::size_t>(ci) * hw;
        for (int i = 0; i < hw; ++i) p[i] *= gv.data[static_cast<std::size_t>(i)];
    }
    return t.push(std::move(out), {x, g}, [x, g, c, hw](Tape<S>& tp, VarId out_id) {
        const auto& go = tp.grad(out_id);
        const auto& xv = tp.val(x);
        const auto& gv = tp.val(g);
        if (tp.needs_grad(x)) {
            auto& gx = tp.grad(x);
            for (int ci = 0; ci < c; ++ci) {
                const std::size_t o = static_cast<std::size_t>(ci) * hw;
                for (int i = 0; i < hw; ++i)
                    gx.data[o + i] += go.data[o + i] * gv.data[static_cast<std::size_t>(i)];
            }
        }
        if (tp.needs_grad(g)) {
            auto& gg = tp.grad(g);
            for (int i = 0; i < hw; ++i) {
                double acc = 0.0;
                for (int ci = 0; ci < c; ++ci) {
                    const std::size_t o = static_cast<std::size_t>(ci) * hw + i;
                    acc += static_cast<double>(go.data[o]) * static_cast<double>(xv.data[o]);
                }
                gg.data[static_cast<std::size_t>(i)] += static_cast<S>(acc);
            }
        }
    });
}

template <class S>
VarId channel_mean(Tape<S>& t, VarId x) {
    const auto& xv = t.val(x);
    const int c = xv.dim(0), hw = xv.dim(1) * xv.dim(2);
    TensorT<S> out({1, xv.dim(1), xv.dim(2)});
    const S inv = static_cast<S>(1.0 / c);
    for (int i = 0; i < hw; ++i) {
        double acc = 0.0;
        for (int ci = 0; ci < c; ++ci) acc += xv.data[static_cast<std::size_t>(ci) * hw + i];
        out.data[static_cast<std::size_t>(i)] = static_cast<S>(acc) * inv;
    }
    return t.push(std::move(out), {x}, [x, c, hw](Tape<S>& tp, VarId out_id) {
        const auto& go = tp.grad(out_id);
        auto& gx = tp.grad(x);
        const S inv = static_cast<S>(1.0 / c);
        for (int i = 0; i < hw; ++i) {
            const S g = go.data[static_cast<std::size_t>(i)] * inv;
            for (int ci = 0; ci < c; ++ci) gx.data[static_cast<std::size_t>(ci) * hw + i] += g;
        }
    });
}

template <class S>
VarId channel_max(Tape<S>& t, VarId x) {
    const auto& xv = t.val(x);
    const int c = xv.dim(0), hw = xv.dim(1) * xv.dim(2);
    TensorT<S> out({1, xv.dim(1), xv.dim(2)});
    auto argmax = std::make_shared<std::vector<int>>(static_cast<std::size_t>(hw));
    for (int i = 0; i < hw; ++i) {
        int best = 0;
        S bv = xv.data[static_cast<std::size_t>(i)];
        for (int ci = 1; ci < c; ++ci) {
            const S v = xv.data[static_cast<std::size_t>(ci) * hw + i];
            if (v > bv) {
                bv = v;
                best = ci;
            }
        }
        out.data[static_cast<std::size_t>(i)] = bv;
        (*argmax)[static_cast<std::size_t>(i)] = best;
    }
    return t.push(std::move(out), {x}, [x, hw, argmax](Tape<S>& tp, VarId out_id) {
        const auto& go = tp.grad(out_id);
        auto& gx = tp.grad(x);
        for (int i = 0; i < hw; ++i)
            gx.data[static_cast<std::size_t>((*argmax)[static_cast<std::size_t>(i)]) * hw + i] +=
                go.data[static_cast<std::size_t>(i)];
    });
}

// Symmetric reflection padding (border sample not repeated). Keeps
// constants constant, which zero padding does not.
template <class S>
VarId reflect_pad2d(Tape<S>& t, VarId x, int p) {
    const auto& xv = t.val(x);
    const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
    if (p >= h || p >= w) throw InputError("reflect_pad2d: padding exceeds the map");
    auto reflect = [](int i, int n) {
        const int period = 2 * n - 2;
        int m = ((i % period) + period) % period;
        return m < n ? m : period - m;
    };
    TensorT<S> out({c, h + 2 * p, w + 2 * p});
    for (int ci = 0; ci < c; ++ci)
        for (int y = 0; y < h + 2 * p; ++y)
            for (int xx = 0; xx < w + 2 * p; ++xx)
                out.at(ci, y, xx) = xv.at(ci, reflect(y - p, h), reflect(xx - p, w));
    return t.push(std::move(out), {x}, [x, p, c, h, w, reflect](Tape<S>& tp, VarId out_id) {
        const auto& go = tp.grad(out_id);
        auto& gx = tp.grad(x);
        for (int ci = 0; ci < c; ++ci)
            for (int y = 0; y < h + 2 * p; ++y)
                for (int xx = 0; xx < w + 2 * p; ++xx)
                    gx.at(ci, reflect(y - p, h), reflect(xx - p, w)) += go.at(ci, y, xx);
    });
}

template <class S>
VarId clamp(Tape<S>& t, VarId x, S lo, S hi) {
    TensorT<S> out = t.val(x);
    for (auto& v : out.data) v = v < lo ? lo : (v > hi ? hi : v);
    return t.push(std::move(out), {x}, [x, lo, hi](Tape<S>& tp, VarId out_id) {
        const auto& xv = tp.val(x);
        const auto& go = tp.grad(out_id);
        auto& gx = tp.grad(x);
        for (std::size_t i = 0; i < xv.numel(); ++i)
            if (xv.data[i] > lo && xv.data[i] < hi) gx.data[i] += go.data[i];
    });
}

// Mean absolute / squared error against a second variable (usually a
// constant leaf). Reductions accumulate in double regardless of S.
template <class S>
VarId mean_abs(Tape<S>& t, VarId a, VarId b) {
    const auto& av = t.val(a);
    const auto& bv = t.val(b);
    if (!av.same_shape(bv)) throw InputError("mean_abs: shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < av.numel(); ++i)
        acc += std::abs(static_cast<double>(av.data[i]) - static_cast<double>(bv.data[i]));
    TensorT<S> out({1});
    out.data[0] = static_cast<S>(acc / static_cast<double>(av.numel()));
    return t.push(std::move(out), {a, b}, [a, b](Tape<S>& tp, VarId out_id) {
        const auto& av = tp.val(a);
        const auto& bv = tp.val(b);
        const S g = tp.grad(out_id).data[0] / static_cast<S>(av.numel());
        for (std::size_t i = 0; i < av.numel(); ++i) {
            const S d = av.data[i] - bv.data[i];
            const S s = d > S(0) ? g : (d < S(0) ? -g : S(0));
            if (tp.needs_grad(a)) tp.grad(a).data[i] += s;
            if (tp.needs_grad(b)) tp.grad(b).data[i] -= s;
        }
    });
}

template <class S>
VarId mean_sq(Tape<S>& t, VarId a, VarId b) {
    const auto& av = t.val(a);
    const auto& bv = t.val(b);
    if (!av.same_shape(bv)) throw InputError("mean_sq: shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < av.numel(); ++i) {
        const double d = static_cast<double>(av.data[i]) - static_cast<double>(bv.data[i]);
        acc += d * d;
    }
    TensorT<S> out({1});
    out.data[0] = static_cast<S>(acc / static_cast<double>(av.numel()));
    return t.push(std::move(out), {a, b}, [a, b](Tape<S>& tp, VarId out_id) {
        const auto& av = tp.val(a);
        const auto& bv = tp.val(b);
        const S g = tp.grad(out_id).data[0] * S(2) / static_cast<S>(av.numel());
        for (std::size_t i = 0; i < av.numel(); ++i) {
            const S d = (av.data[i] - bv.data[i]) * g;
            if (tp.needs_grad(a)) tp.grad(a).data[i] += d;
            if (tp.needs_grad(b)) tp.grad(b).data[i] -= d;
        }
    });
}

// Mean of scalar losses (batch reduction).
template <class S>
VarId mean_of(Tape<S>& t, const std::vector<VarId>& xs) {
    if (xs.empty()) throw InputError("mean_of: empty list");
    double acc = 0.0;
    for (VarId id : xs) acc += static_cast<double>(t.val(id).data[0]);
    TensorT<S> out({1});
    out.data[0] = static_cast<S>(acc / static_cast<double>(xs.size()));
    std::vector<VarId> ins = xs;
    return t.push(std::move(out), std::move(ins), [xs](Tape<S>& tp, VarId out_id) {
        const S g = tp.grad(out_id).data[0] / static_cast<S>(xs.size());
        for (VarId id : xs)
            if (tp.needs_grad(id)) tp.grad(id).data[0] += g;
    });
}

}  // namespace ag
}  // namespace f2r
