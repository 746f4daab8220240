#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gradcheck.hpp"

using namespace f2r;
using namespace f2r::testing;
namespace ops = f2r::ag;

namespace {

// Direct nested-loop convolution used as the oracle for the GEMM path.
TensorD naive_conv2d(const TensorD& x, const TensorD& w, const TensorD& b, int stride, int pad) {
    const int cin = x.dim(0), h = x.dim(1), wd = x.dim(2);
    const int cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    const int ho = (h + 2 * pad - kh) / stride + 1;
    const int wo = (wd + 2 * pad - kw) / stride + 1;
    TensorD out({cout, ho, wo});
    for (int co = 0; co < cout; ++co)
        for (int oy = 0; oy < ho; ++oy)
            for (int ox = 0; ox < wo; ++ox) {
                double acc = b.empty() ? 0.0 : b.data[static_cast<std::size_t>(co)];
                for (int ci = 0; ci < cin; ++ci)
                    for (int ky = 0; ky < kh; ++ky)
                        for (int kx = 0; kx < kw; ++kx) {
                            const int iy = oy * stride - pad + ky;
                            const int ix = ox * stride - pad + kx;
                            if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
                            acc += x.at(ci, iy, ix) * w.at(co, ci, ky, kx);
                        }
                out.at(co, oy, ox) = acc;
            }
    return out;
}

}  // namespace

TEST_CASE("conv2d forward matches the direct-summation oracle") {
    for (const auto [stride, pad] : {std::pair{1, 1}, std::pair{2, 1}, std::pair{1, 0}}) {
        const TensorD x = random_tensor({3, 9, 11}, 100 + stride * 10 + pad);
        const TensorD w = random_tensor({4, 3, 3, 3}, 7);
        const TensorD b = random_tensor({4}, 8);
        ops::Tape<double> t;
        const auto y = t.val(
            ops::conv2d(t, t.leaf(x), t.leaf(w), t.leaf(b), stride, pad));
        const TensorD ref = naive_conv2d(x, w, b, stride, pad);
        REQUIRE(y.shape == ref.shape);
        CHECK(max_abs_diff(y, ref) < 1e-12);
    }
}

TEST_CASE("conv2d gradients (stride 1 and 2)") {
    for (int stride : {1, 2}) {
        const auto res = grad_check(
            {random_tensor({2, 8, 8}, 1), random_tensor({3, 2, 3, 3}, 2), random_tensor({3}, 3)},
            [stride](ops::Tape<double>& t, const std::vector<ops::VarId>& in) {
                const auto y = ops::conv2d(t, in[0], in[1], in[2], stride, 1);
                return ops::mean_sq(t, y, t.leaf(random_tensor(t.val(y).shape, 9)));
            },
            48);
        CHECK(res.max_rel_err < 1e-3);
    }
}

TEST_CASE("elementwise and gating op gradients") {
    auto quad = [](ops::Tape<double>& t, ops::VarId y) {
        return ops::mean_sq(t, y, t.leaf(random_tensor(t.val(y).shape, 77)));
    };

    SUBCASE("leaky_relu") {
        const auto res = grad_check({random_tensor({2, 6, 6}, 4)},
                                    [&](ops::Tape<double>& t, const std::vector<ops::VarId>& in) {
                                        return quad(t, ops::leaky_relu(t, in[0], 0.1));
                                    },
                                    72);
        CHECK(res.max_rel_err < 1e-3);
    }
    SUBCASE("sigmoid") {
        const auto res = grad_check({random_tensor({2, 5, 5}, 5)},
                                    [&](ops::Tape<double>& t, const std::vector<ops::VarId>& in) {
                                        return quad(t, ops::sigmoid(t, in[0]));
                                    },
                                    50);
        CHECK(res.max_rel_err < 1e-3);
    }
    SUBCASE("add/sub/scale_by_scalar") {
        const auto res = grad_check(
            {random_tensor({2, 4, 4}, 6), random_tensor({2, 4, 4}, 7), random_tensor({1}, 8)},
            [&](ops::Tape<double>& t, const std::vector<ops::VarId>& in) {
                const auto s = ops::sub(t, ops::add(t, in[0], in[1]), in[1]);
                return quad(t, ops::scale_by_scalar(t, s, in[2]));
            },
            32);
        CHECK(res.max_rel_err < 1e-3);
    }
    SUBCASE("concat + upsample + gap") {
        const auto res = grad_check(
            {random_tensor({2, 4, 4}, 9), random_tensor({3, 4, 4}, 10)},
            [&](ops::Tape<double>& t, const std::vector<ops::VarId>& in) {
                const auto c = ops::concat_ch(t, {in[0], in[1]});
                const auto u = ops::upsample_nn2(t, c);
                return quad(t, ops::global_avg_pool(t, u));
            },
            32);
        CHECK(res.max_rel_err < 1e-3);
    }
    SUBCASE("channel and spatial gating") {
        const auto res = grad_check(
            {random_tensor({3, 5, 5}, 11), random_tensor({3, 1, 1}, 12),
             random_tensor({1, 5, 5}, 13)},
            [&](ops::Tape<double>& t, const std::vector<ops::VarId>& in) {
                const auto g = ops::scale_channels(t, in[0], in[1]);
                return quad(t, ops::scale_spatial(t, g, in[2]));
            },
            40);
        CHECK(res.max_rel_err < 1e-3);
    }
    SUBCASE("channel mean/max") {
        const auto res = grad_check(
            {random_tensor({4, 5, 5}, 14)},
            [&](ops::Tape<double>& t, const std::vector<ops::VarId>& in) {
                const auto c = ops::concat_ch(t, {ops::channel_mean(t, in[0]),
                                                  ops::channel_max(t, in[0])});
                return quad(t, c);
            },
            60);
        CHECK(res.max_rel_err < 1e-3);
    }
    SUBCASE("clamp passes gradient only strictly inside") {
        const auto res = grad_check({random_tensor({2, 4, 4}, 15, -2.0, 2.0)},
                                    [&](ops::Tape<double>& t, const std::vector<ops::VarId>& in) {
                                        return quad(t, ops::clamp(t, in[0], -1.5, 1.5));
                                    },
                                    32);
        CHECK(res.max_rel_err < 1e-3);
    }
}

TEST_CASE("loss reductions match brute-force definitions") {
    const TensorD a = random_tensor({3, 7, 7}, 16);
    const TensorD b = random_tensor({3, 7, 7}, 17);
    double l1 = 0.0, l2 = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        l1 += std::abs(a.data[i] - b.data[i]);
        l2 += (a.data[i] - b.data[i]) * (a.data[i] - b.data[i]);
    }
    l1 /= static_cast<double>(a.numel());
    l2 /= static_cast<double>(a.numel());

    ops::Tape<double> t;
    CHECK(t.val(ops::mean_abs(t, t.leaf(a), t.leaf(b))).data[0] == doctest::Approx(l1).epsilon(1e-12));
    CHECK(t.val(ops::mean_sq(t, t.leaf(a), t.leaf(b))).data[0] == doctest::Approx(l2).epsilon(1e-12));

    const auto res = grad_check(
        {a, b},
        [](ops::Tape<double>& tp, const std::vector<ops::VarId>& in) {
            return ops::mean_sq(tp, in[0], in[1]);
        },
        40);
    CHECK(res.max_rel_err < 1e-3);
}

TEST_CASE("mean_of distributes gradient over scalar losses") {
    const auto res = grad_check(
        {random_tensor({2, 3, 3}, 18), random_tensor({2, 3, 3}, 19)},
        [](ops::Tape<double>& t, const std::vector<ops::VarId>& in) {
            const auto l1 = ops::mean_sq(t, in[0], t.leaf(random_tensor({2, 3, 3}, 20)));
            const auto l2 = ops::mean_sq(t, in[1], t.leaf(random_tensor({2, 3, 3}, 21)));
            return ops::mean_of(t, {l1, l2});
        },
        18);
    CHECK(res.max_rel_err < 1e-3);
}

TEST_CASE("gradients accumulate across shared-parameter applications") {
    // the same weight drives two branches; the tape must sum both paths
    const auto res = grad_check(
        {random_tensor({2, 6, 6}, 22), random_tensor({2, 2, 3, 3}, 23)},
        [](ops::Tape<double>& t, const std::vector<ops::VarId>& in) {
            const auto y1 = ops::conv2d(t, in[0], in[1], -1, 1, 1);
            const auto y2 = ops::conv2d(t, y1, in[1], -1, 1, 1);
            return ops::mean_sq(t, y2, t.leaf(random_tensor(t.val(y2).shape, 24)));
        },
        40);
    CHECK(res.max_rel_err < 1e-3);
}

TEST_CASE("backward skips subgraphs that do not reach the loss") {
    ops::Tape<double> t;
    const auto x = t.leaf(random_tensor({2, 4, 4}, 25), true);
    const auto w = t.leaf(random_tensor({2, 2, 3, 3}, 26), true);
    const auto unused = ops::conv2d(t, x, w, -1);
    (void)unused;
    const auto loss = ops::mean_sq(t, x, t.leaf(random_tensor({2, 4, 4}, 27)));
    t.backward(loss);
    CHECK(t.has_grad(x));
    CHECK(!t.has_grad(w));
}
