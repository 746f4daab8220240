#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "f2r/align/faam.hpp"
#include "f2r/align/fdam.hpp"
#include "gradcheck.hpp"

using namespace f2r;
using namespace f2r::testing;
namespace ops = f2r::ag;

namespace {

template <class S>
TensorT<S> shift_x(const TensorT<S>& f, int dx) {
    TensorT<S> out(f.shape);
    const int c = f.dim(0), h = f.dim(1), w = f.dim(2);
    for (int ci = 0; ci < c; ++ci)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const int sx = x - dx;
                out.at(ci, y, x) = (sx >= 0 && sx < w) ? f.at(ci, y, sx) : f.at(ci, y, std::clamp(sx, 0, w - 1));
            }
    return out;
}

TensorD uniform_flow(int h, int w, double dx, double dy) {
    TensorD v({2, h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            v.at(0, y, x) = dx;
            v.at(1, y, x) = dy;
        }
    return v;
}

ops::FaamVars make_faam(ops::Tape<double>& t, int n_in, int c, uint64_t seed,
                        double gate_bias = 0.0) {
    const int m = n_in * c;
    const int hidden = std::max(1, m / 4);
    ops::FaamVars p;
    p.fc1_w = t.leaf(random_tensor({hidden, m, 1, 1}, seed + 1), true);
    p.fc1_b = t.leaf(TensorD({hidden}), true);
    p.fc2_w = t.leaf(random_tensor({m, hidden, 1, 1}, seed + 2), true);
    p.fc2_b = t.leaf(TensorD({m}, gate_bias), true);
    p.sp_w = t.leaf(random_tensor({1, 2, 7, 7}, seed + 3), true);
    p.sp_b = t.leaf(TensorD({1}, gate_bias), true);
    p.agg_w = t.leaf(random_tensor({c, m, 1, 1}, seed + 4), true);
    p.agg_b = t.leaf(TensorD({c}), true);
    return p;
}

ops::FdamVars make_fdam(ops::Tape<double>& t, int neighbors, int c, int groups, uint64_t seed,
                        bool has_center, double beta) {
    const int k = 3, kk = 9;
    ops::FdamVars p;
    const int in_ch = (has_center ? 3 : 2) * c + 2;
    p.off1_w = t.leaf(random_tensor({c, in_ch, 3, 3}, seed + 1), true);
    p.off1_b = t.leaf(TensorD({c}), true);
    p.off2_w = t.leaf(random_tensor({c, c, 3, 3}, seed + 2), true);
    p.off2_b = t.leaf(TensorD({c}), true);
    p.off3_w = t.leaf(random_tensor({groups * kk * 2, c, 3, 3}, seed + 3, -0.2, 0.2), true);
    p.off3_b = t.leaf(TensorD({groups * kk * 2}), true);
    p.dcn_w = t.leaf(random_tensor({c, c, k, k}, seed + 4), true);
    p.dcn_b = t.leaf(TensorD({c}), true);
    p.fuse_w = t.leaf(random_tensor({c, neighbors * c, 1, 1}, seed + 5), true);
    p.fuse_b = t.leaf(TensorD({c}), true);
    if (has_center) p.beta = t.leaf(TensorD({1}, beta), true);
    p.groups = groups;
    p.offset_clamp = 10.0;
    return p;
}

}  // namespace

TEST_CASE("backward_warp: zero flow is the identity") {
    const TensorD f = random_tensor({3, 10, 12}, 1);
    ops::Tape<double> t;
    const auto out = t.val(ops::backward_warp(t, t.leaf(f), t.leaf(TensorD({2, 10, 12}))));
    CHECK(max_abs_diff(out, f) <= 1e-6);
}

TEST_CASE("backward_warp: integer shift inversion recovers the original") {
    const TensorD f = random_tensor({2, 12, 12}, 2);
    const TensorD shifted = shift_x(f, 2);
    ops::Tape<double> t;
    const auto out =
        t.val(ops::backward_warp(t, t.leaf(shifted), t.leaf(uniform_flow(12, 12, 2.0, 0.0))));
    for (int c = 0; c < 2; ++c)
        for (int y = 0; y < 12; ++y)
            for (int x = 0; x < 10; ++x)  // interior: sample position stays in range
                CHECK(out.at(c, y, x) == doctest::Approx(f.at(c, y, x)).epsilon(1e-12));
}

TEST_CASE("backward_warp gradients w.r.t. features and flow") {
    const auto res = grad_check(
        {random_tensor({2, 8, 8}, 3), random_flow(8, 8, 4)},
        [](ops::Tape<double>& t, const std::vector<ops::VarId>& in) {
            const auto y = ops::backward_warp(t, in[0], in[1]);
            return ops::mean_sq(t, y, t.leaf(random_tensor({2, 8, 8}, 5)));
        },
        96);
    CHECK(res.coords_checked > 150);
    CHECK(res.max_rel_err < 1e-3);
}

TEST_CASE("warp by V then -V returns the original up to curvature * |V|^2") {
    // smooth feature map: single low-frequency mode, interior support
    TensorD f({1, 24, 24});
    for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 24; ++x)
            f.at(0, y, x) = std::sin(0.4 * x) * std::cos(0.35 * y);
    const double vx = 1.3, vy = -0.7;
    ops::Tape<double> t;
    const auto fwd = ops::backward_warp(t, t.leaf(f), t.leaf(uniform_flow(24, 24, vx, vy)));
    const auto back = t.val(ops::backward_warp(t, fwd, t.leaf(uniform_flow(24, 24, -vx, -vy))));
    // second derivative of the test signal is bounded by 0.16 * amplitude
    const double bound = 2.0 * 0.16 * (vx * vx + vy * vy);
    for (int y = 6; y < 18; ++y)
        for (int x = 6; x < 18; ++x)
            CHECK(std::abs(back.at(0, y, x) - f.at(0, y, x)) <= bound);
}

TEST_CASE("deform_sample with zero offsets equals ordinary convolution") {
    const TensorD f = random_tensor({4, 9, 9}, 6);
    const TensorD w = random_tensor({4, 4, 3, 3}, 7);
    const TensorD b = random_tensor({4}, 8);
    ops::Tape<double> t;
    const auto ref = t.val(ops::conv2d(t, t.leaf(f), t.leaf(w), t.leaf(b), 1, 1));
    const auto dcn = t.val(ops::deform_sample(t, t.leaf(f), t.leaf(TensorD({2 * 9 * 2, 9, 9})),
                                              t.leaf(w), t.leaf(b), 2));
    CHECK(max_abs_diff(dcn, ref) <= 1e-5);
}

TEST_CASE("deform_sample with uniform (1,0) offsets equals conv of the pre-shifted map") {
    const TensorD f = random_tensor({2, 10, 10}, 9);
    const TensorD w = random_tensor({3, 2, 3, 3}, 10);
    const TensorD b({3});
    const int groups = 2, kk = 9;
    TensorD off({groups * kk * 2, 10, 10});
    for (int g = 0; g < groups; ++g)
        for (int tap = 0; tap < kk; ++tap)
            for (int y = 0; y < 10; ++y)
                for (int x = 0; x < 10; ++x) off.at((g * kk + tap) * 2 + 0, y, x) = 1.0;

    ops::Tape<double> t;
    const auto dcn =
        t.val(ops::deform_sample(t, t.leaf(f), t.leaf(off), t.leaf(w), t.leaf(b), groups));
    // oracle: shift the feature map left by one (content moves -x), zero-fill
    TensorD pre({2, 10, 10});
    for (int c = 0; c < 2; ++c)
        for (int y = 0; y < 10; ++y)
            for (int x = 0; x < 10; ++x) pre.at(c, y, x) = (x + 1 < 10) ? f.at(c, y, x + 1) : 0.0;
    const auto ref = t.val(ops::conv2d(t, t.leaf(pre), t.leaf(w), t.leaf(b), 1, 1));
    for (int c = 0; c < 3; ++c)
        for (int y = 1; y < 9; ++y)
            for (int x = 1; x < 8; ++x)  // interior where both stencils see real data
                CHECK(dcn.at(c, y, x) == doctest::Approx(ref.at(c, y, x)).epsilon(1e-9));
}

TEST_CASE("deform_sample gradients w.r.t. features, offsets, weights and bias") {
    const int groups = 2, kk = 9;
    TensorD off({groups * kk * 2, 6, 6});
    {
        Rng rng(11);
        for (auto& v : off.data) {
            const int k = rng.uniform_int(3) - 1;
            v = k + (rng.uniform() < 0.5 ? 1 : -1) * rng.uniform(0.15, 0.85);
        }
    }
    const auto res = grad_check(
        {random_tensor({2, 6, 6}, 12), off, random_tensor({2, 2, 3, 3}, 13),
         random_tensor({2}, 14)},
        [groups](ops::Tape<double>& t, const std::vector<ops::VarId>& in) {
            const auto y = ops::deform_sample(t, in[0], in[1], in[2], in[3], groups);
            return ops::mean_sq(t, y, t.leaf(random_tensor({2, 6, 6}, 15)));
        },
        64);
    CHECK(res.max_rel_err < 1e-3);
}

TEST_CASE("deform_sample validates group divisibility") {
    ops::Tape<double> t;
    const auto f = t.leaf(random_tensor({3, 6, 6}, 16));
    const auto off = t.leaf(TensorD({2 * 9 * 2, 6, 6}));
    const auto w = t.leaf(random_tensor({3, 3, 3, 3}, 17));
    CHECK_THROWS_AS(ops::deform_sample(t, f, off, w, -1, 2), ConfigError);
}

TEST_CASE("faam: degenerate pipeline equals the 1x1 aggregation") {
    // one neighbor, zero flow, gates forced to ~1 via large positive biases
    const int c = 4;
    ops::Tape<double> t;
    auto p = make_faam(t, 1, c, 20, /*gate_bias=*/50.0);
    t.val_mut(p.fc2_w).fill(0.0);  // gate = sigmoid(bias) = 1 - 2e-22
    t.val_mut(p.sp_w).fill(0.0);
    const TensorD f = random_tensor({c, 8, 8}, 21);
    const auto out = t.val(ops::faam_forward(t, {t.leaf(f)}, {t.leaf(TensorD({2, 8, 8}))}, p, 0.1));
    const auto ref = t.val(ops::conv2d(t, t.leaf(f), p.agg_w, p.agg_b));
    CHECK(max_abs_diff(out, ref) < 1e-12);
}

TEST_CASE("faam: permuting neighbors with matching weight re-indexing is invariant") {
    const int c = 3, n = 3, h = 8, w = 8;
    const int m = n * c;
    std::vector<TensorD> feats, flows;
    for (int i = 0; i < n; ++i) {
        feats.push_back(random_tensor({c, h, w}, 30 + i));
        flows.push_back(random_flow(h, w, 40 + i, 1));
    }
    const std::vector<int> perm = {2, 0, 1};

    auto run = [&](const std::vector<int>& order, bool permute_params) {
        ops::Tape<double> t;
        auto p = make_faam(t, n, c, 50);
        if (permute_params) {
            // channel block b of the stack moves to position order^-1 — build
            // re-indexed copies of every stack-indexed parameter
            auto remap_in = [&](const TensorD& w_) {
                TensorD out = w_;
                for (int o = 0; o < w_.dim(0); ++o)
                    for (int b = 0; b < n; ++b)
                        for (int ci = 0; ci < c; ++ci)
                            out.at(o, b * c + ci, 0, 0) = w_.at(o, order[static_cast<std::size_t>(b)] * c + ci, 0, 0);
                return out;
            };
            auto remap_out = [&](const TensorD& w_, const TensorD& bias) {
                std::pair<TensorD, TensorD> out{w_, bias};
                for (int b = 0; b < n; ++b)
                    for (int ci = 0; ci < c; ++ci) {
                        for (int i2 = 0; i2 < w_.dim(1); ++i2)
                            out.first.at(b * c + ci, i2, 0, 0) =
                                w_.at(order[static_cast<std::size_t>(b)] * c + ci, i2, 0, 0);
                        out.second.data[static_cast<std::size_t>(b * c + ci)] =
                            bias.data[static_cast<std::size_t>(order[static_cast<std::size_t>(b)] * c + ci)];
                    }
                return out;
            };
            TensorD fc1 = remap_in(t.val(p.fc1_w));
            t.val_mut(p.fc1_w) = fc1;
            auto [fc2w, fc2b] = remap_out(t.val(p.fc2_w), t.val(p.fc2_b));
            t.val_mut(p.fc2_w) = fc2w;
            t.val_mut(p.fc2_b) = fc2b;
            TensorD agg = remap_in(t.val(p.agg_w));
            t.val_mut(p.agg_w) = agg;
        }
        std::vector<ops::VarId> fv, vv;
        for (int i = 0; i < n; ++i) {
            const int src = permute_params ? order[static_cast<std::size_t>(i)] : i;
            fv.push_back(t.leaf(feats[static_cast<std::size_t>(src)]));
            vv.push_back(t.leaf(flows[static_cast<std::size_t>(src)]));
        }
        return t.val(ops::faam_forward(t, fv, vv, p, 0.1));
    };

    const TensorD base = run({0, 1, 2}, false);
    const TensorD permuted = run(perm, true);
    CHECK(max_abs_diff(base, permuted) < 1e-12);
}

TEST_CASE("faam: constant stacked input gives a spatially constant gate map") {
    const int c = 3;
    ops::Tape<double> t;
    auto p = make_faam(t, 2, c, 60);
    const TensorD f({c, 12, 12}, 0.37);
    const auto z = t.leaf(TensorD({2, 12, 12}));
    const auto out =
        t.val(ops::faam_forward(t, {t.leaf(f), t.leaf(f)}, {z, z}, p, 0.1));
    // constant input + constant gates -> constant output per channel
    for (int ci = 0; ci < c; ++ci)
        for (std::size_t i = 0; i < 144; ++i)
            CHECK(out.data[static_cast<std::size_t>(ci) * 144 + i] ==
                  doctest::Approx(out.data[static_cast<std::size_t>(ci) * 144]).epsilon(1e-12));
}

TEST_CASE("faam gradients through the full module") {
    const int c = 3, n = 2, h = 8, w = 8;
    const auto res = grad_check(
        {random_tensor({c, h, w}, 61), random_tensor({c, h, w}, 62), random_flow(h, w, 63, 1)},
        [&](ops::Tape<double>& t, const std::vector<ops::VarId>& in) {
            auto p = make_faam(t, n, c, 64);
            const auto out = ops::faam_forward(t, {in[0], in[1]}, {in[2], t.leaf(TensorD({2, h, w}))},
                                               p, 0.1);
            return ops::mean_sq(t, out, t.leaf(random_tensor({c, h, w}, 65)));
        },
        48);
    CHECK(res.max_rel_err < 1e-3);
}

TEST_CASE("fdam: beta = 0 returns the center feature bitwise") {
    const int c = 4, groups = 2;
    ops::Tape<double> t;
    auto p = make_fdam(t, 2, c, groups, 70, true, 0.0);
    const TensorD center = random_tensor({c, 8, 8}, 71);
    const auto out = t.val(ops::fdam_forward(
        t, t.leaf(center), {t.leaf(random_tensor({c, 8, 8}, 72)), t.leaf(random_tensor({c, 8, 8}, 73))},
        {t.leaf(random_flow(8, 8, 74, 1)), t.leaf(random_flow(8, 8, 75, 1))}, p, 0.1));
    CHECK(bitwise_equal(out, center));

    // and neighbor content cannot matter
    const auto out2 = t.val(ops::fdam_forward(
        t, t.leaf(center), {t.leaf(random_tensor({c, 8, 8}, 80)), t.leaf(random_tensor({c, 8, 8}, 81))},
        {t.leaf(random_flow(8, 8, 74, 1)), t.leaf(random_flow(8, 8, 75, 1))}, p, 0.1));
    CHECK(bitwise_equal(out2, center));
}

TEST_CASE("fdam: degenerate composition equals zero-offset DCN plus identity fusion") {
    // zero flows, offset head forced to 0, one neighbor, fuse = identity,
    // beta = 1: output must equal F_t + dcn(F_t)
    const int c = 4, groups = 2;
    ops::Tape<double> t;
    auto p = make_fdam(t, 1, c, groups, 90, true, 1.0);
    t.val_mut(p.off3_w).fill(0.0);
    TensorD fuse({c, c, 1, 1});
    for (int i = 0; i < c; ++i) fuse.at(i, i, 0, 0) = 1.0;
    t.val_mut(p.fuse_w) = fuse;
    t.val_mut(p.fuse_b).fill(0.0);

    const TensorD f = random_tensor({c, 8, 8}, 91);
    const auto fid = t.leaf(f);
    const auto zero_flow = t.leaf(TensorD({2, 8, 8}));
    const auto out = t.val(ops::fdam_forward(t, fid, {fid}, {zero_flow}, p, 0.1));

    const auto dcn_only = t.val(ops::conv2d(t, fid, p.dcn_w, p.dcn_b, 1, 1));
    TensorD expect = f;
    expect.add_(dcn_only);
    CHECK(max_abs_diff(out, expect) <= 1e-9);
}

TEST_CASE("fdam: gradient w.r.t. beta and all inputs") {
    const int c = 2, groups = 2, h = 6, w = 6;
    ops::Tape<double> t0;  // probe beta specifically
    {
        const auto res = grad_check(
            {random_tensor({c, h, w}, 100), random_tensor({c, h, w}, 101),
             random_flow(h, w, 102, 1), TensorD({1}, 0.4)},
            [&](ops::Tape<double>& t, const std::vector<ops::VarId>& in) {
                auto p = make_fdam(t, 1, c, groups, 103, true, 0.0);
                p.beta = in[3];
                const auto out = ops::fdam_forward(t, in[0], {in[1]}, {in[2]}, p, 0.1);
                return ops::mean_sq(t, out, t.leaf(random_tensor({c, h, w}, 104)));
            },
            40);
        CHECK(res.max_rel_err < 1e-3);
    }
}

TEST_CASE("fdam blind variant has no center path") {
    const int c = 4, groups = 2;
    ops::Tape<double> t;
    auto p = make_fdam(t, 2, c, groups, 110, false, 0.0);
    const auto out = t.val(ops::fdam_forward(
        t, -1, {t.leaf(random_tensor({c, 8, 8}, 111)), t.leaf(random_tensor({c, 8, 8}, 112))},
        {t.leaf(TensorD({2, 8, 8})), t.leaf(TensorD({2, 8, 8}))}, p, 0.1));
    CHECK(out.shape == std::vector<int>{c, 8, 8});
    CHECK(out.all_finite());
}
