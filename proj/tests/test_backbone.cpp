#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "f2r/model/backbone.hpp"
#include "gradcheck.hpp"

using namespace f2r;
using namespace f2r::testing;
namespace ops = f2r::ag;
namespace fs = std::filesystem;

namespace {

ArchConfig small_arch(int window = 3) {
    ArchConfig a;
    a.levels = 4;
    a.base_ch = 8;
    a.data_ch = 3;
    a.input_ch = 6;
    a.window = window;
    a.dcn_groups = 4;
    return a;
}

template <class S>
std::vector<std::vector<TensorT<S>>> zero_pyramids(int n, int h, int w, int levels) {
    std::vector<std::vector<TensorT<S>>> out;
    for (int i = 0; i < n; ++i) {
        std::vector<TensorT<S>> lv;
        for (int l = 0; l < levels; ++l) lv.push_back(TensorT<S>({2, h >> l, w >> l}));
        out.push_back(std::move(lv));
    }
    return out;
}

}  // namespace

TEST_CASE("encoder is strictly per-frame: joint vs separate calls are bitwise equal") {
    const ArchConfig arch = small_arch();
    const auto st = ModelStateT<double>::create(Mode::blind, SkipKind::faam, arch, 3);
    const TensorD f1 = random_tensor({6, 16, 16}, 1);
    const TensorD f2 = random_tensor({6, 16, 16}, 2);

    ops::Tape<double> t;
    auto bm = ops::bind_model(t, st, false);
    auto joint = ops::encode_frames(bm, {t.leaf(f1), t.leaf(f2)});

    ops::Tape<double> t2;
    auto bm2 = ops::bind_model(t2, st, false);
    auto solo = ops::encode_frame(bm2, t2.leaf(f1));

    for (int l = 0; l < arch.levels; ++l)
        CHECK(bitwise_equal(t.val(joint[0][static_cast<std::size_t>(l)]),
                            t2.val(solo[static_cast<std::size_t>(l)])));
}

TEST_CASE("encoder level shapes follow H/2^l and the channel schedule") {
    const ArchConfig arch = small_arch();
    const auto st = ModelStateT<double>::create(Mode::blind, SkipKind::faam, arch, 4);
    ops::Tape<double> t;
    auto bm = ops::bind_model(t, st, false);
    auto feats = ops::encode_frame(bm, t.leaf(random_tensor({6, 32, 32}, 5)));
    REQUIRE(static_cast<int>(feats.size()) == 4);
    for (int l = 0; l < 4; ++l) {
        const auto& v = t.val(feats[static_cast<std::size_t>(l)]);
        CHECK(v.dim(0) == arch.level_ch(l));
        CHECK(v.dim(1) == 32 >> l);
        CHECK(v.dim(2) == 32 >> l);
    }
    CHECK(arch.level_ch(0) == 8);
    CHECK(arch.level_ch(1) == 16);
    CHECK(arch.level_ch(2) == 32);
    CHECK(arch.level_ch(3) == 32);  // capped at 4C
}

TEST_CASE("zero input with zero biases gives zero features at every level") {
    const ArchConfig arch = small_arch();
    const auto st = ModelStateT<double>::create(Mode::blind, SkipKind::faam, arch, 6);
    ops::Tape<double> t;
    auto bm = ops::bind_model(t, st, false);
    auto feats = ops::encode_frame(bm, t.leaf(TensorD({6, 16, 16})));
    for (const auto id : feats)
        for (double v : t.val(id).data) CHECK(v == 0.0);
}

TEST_CASE("all-zero parameters give an all-zero residual in both modes") {
    const ArchConfig arch = small_arch();
    auto blind = ModelStateT<double>::create(Mode::blind, SkipKind::faam, arch, 7);
    for (auto& [n, p] : blind.params) p.fill(0.0);
    const auto out = run_blind(blind, {random_tensor({6, 16, 16}, 8), random_tensor({6, 16, 16}, 9)},
                               zero_pyramids<double>(2, 16, 16, 4));
    CHECK(out.shape == std::vector<int>{3, 16, 16});
    for (double v : out.data) CHECK(v == 0.0);

    auto nb = ModelStateT<double>::create(Mode::nonblind, SkipKind::fdam, arch, 10);
    for (auto& [n, p] : nb.params) p.fill(0.0);
    const auto out2 = run_nonblind(nb, random_tensor({6, 16, 16}, 11),
                                   {random_tensor({6, 16, 16}, 12), random_tensor({6, 16, 16}, 13)},
                                   zero_pyramids<double>(2, 16, 16, 4));
    for (double v : out2.data) CHECK(v == 0.0);
}

TEST_CASE("blind and nonblind states share encoder/decoder parameter shapes") {
    const ArchConfig arch = small_arch(5);
    const auto blind = ModelState::create(Mode::blind, SkipKind::faam, arch, 1);
    const auto nb = ModelState::create(Mode::nonblind, SkipKind::fdam, arch, 2);
    auto backbone_shapes = [](const ModelState& st) {
        std::vector<std::pair<std::string, std::vector<int>>> out;
        for (const auto& [n, p] : st.params)
            if (n.rfind("faam", 0) != 0 && n.rfind("fdam", 0) != 0) out.emplace_back(n, p.shape);
        return out;
    };
    CHECK(backbone_shapes(blind) == backbone_shapes(nb));

    auto skip_kinds = [](const ModelState& st, const char* prefix) {
        int n = 0;
        for (const auto& [name, p] : st.params)
            if (name.rfind(prefix, 0) == 0) ++n;
        return n;
    };
    CHECK(skip_kinds(blind, "faam") > 0);
    CHECK(skip_kinds(blind, "fdam") == 0);
    CHECK(skip_kinds(nb, "fdam") > 0);
    CHECK(skip_kinds(nb, "faam") == 0);
}

TEST_CASE("forward_blind validates mode and neighbor count") {
    const ArchConfig arch = small_arch();
    const auto blind = ModelStateT<double>::create(Mode::blind, SkipKind::faam, arch, 20);
    const auto nb = ModelStateT<double>::create(Mode::nonblind, SkipKind::fdam, arch, 21);

    const auto pyr1 = zero_pyramids<double>(1, 16, 16, 4);
    CHECK_THROWS_AS(run_blind(blind, {random_tensor({6, 16, 16}, 22)}, pyr1), InputError);
    CHECK_THROWS_AS(run_blind(nb, {random_tensor({6, 16, 16}, 23), random_tensor({6, 16, 16}, 24)},
                              zero_pyramids<double>(2, 16, 16, 4)),
                    ModeError);
    CHECK_THROWS_AS(run_nonblind(blind, random_tensor({6, 16, 16}, 25),
                                 {random_tensor({6, 16, 16}, 26), random_tensor({6, 16, 16}, 27)},
                                 zero_pyramids<double>(2, 16, 16, 4)),
                    ModeError);
}

TEST_CASE("output shape equals the frame shape in both modes") {
    const ArchConfig arch = small_arch();
    const auto blind = ModelStateT<double>::create(Mode::blind, SkipKind::faam, arch, 30);
    const auto out = run_blind(blind, {random_tensor({6, 24, 16}, 31), random_tensor({6, 24, 16}, 32)},
                               zero_pyramids<double>(2, 24, 16, 4));
    CHECK(out.shape == std::vector<int>{3, 24, 16});
}

TEST_CASE("nonblind with all beta zero ignores neighbor content") {
    const ArchConfig arch = small_arch();
    auto nb = ModelStateT<double>::create(Mode::nonblind, SkipKind::fdam, arch, 40);
    // betas are zero-initialized by construction
    const TensorD center = random_tensor({6, 16, 16}, 41);
    const auto pyr = zero_pyramids<double>(2, 16, 16, 4);
    const auto a = run_nonblind(nb, center, {random_tensor({6, 16, 16}, 42), random_tensor({6, 16, 16}, 43)}, pyr);
    const auto b = run_nonblind(nb, center, {random_tensor({6, 16, 16}, 52), random_tensor({6, 16, 16}, 53)}, pyr);
    CHECK(bitwise_equal(a, b));
}

TEST_CASE("stacked wiring runs with direct skips") {
    ArchConfig arch = small_arch();
    arch.stacked_input = true;
    arch.input_ch = 12;  // (T-1) * 2Ch for T=3
    const auto st = ModelStateT<double>::create(Mode::blind, SkipKind::direct, arch, 60);
    ops::Tape<double> t;
    auto bm = ops::bind_model(t, st, false);
    const auto out = t.val(ops::forward_stacked(bm, t.leaf(random_tensor({12, 16, 16}, 61))));
    CHECK(out.shape == std::vector<int>{3, 16, 16});
}

namespace {

// Finite-difference check of the whole forward with respect to selected
// parameters. The inputs, flows and quadratic target stay fixed while one
// coordinate wiggles.
struct FullForwardCheck {
    ModelStateT<double> st;
    TensorD center;  // empty for blind
    std::vector<TensorD> ins;
    std::vector<std::vector<TensorD>> flows;
    TensorD target;

    double loss() const {
        const TensorD out = center.empty() ? run_blind(st, ins, flows)
                                           : run_nonblind(st, center, ins, flows);
        double acc = 0.0;
        for (std::size_t i = 0; i < out.numel(); ++i) {
            const double d = out.data[i] - target.data[i];
            acc += d * d;
        }
        return acc / static_cast<double>(out.numel());
    }

    double check(const std::vector<std::string>& names, int per_param, uint64_t seed) {
        ops::Tape<double> t;
        auto bm = ops::bind_model(t, st, true);
        ops::VarId out;
        {
            std::vector<ops::VarId> iv;
            for (const auto& z : ins) iv.push_back(t.leaf(z));
            std::vector<std::vector<ops::VarId>> fv;
            for (const auto& pyr : flows) {
                std::vector<ops::VarId> lv;
                for (const auto& f : pyr) lv.push_back(t.leaf(f));
                fv.push_back(std::move(lv));
            }
            out = center.empty() ? ops::forward_blind(bm, iv, fv)
                                 : ops::forward_nonblind(bm, t.leaf(center), iv, fv);
        }
        const auto l = ops::mean_sq(t, out, t.leaf(target));
        t.backward(l);

        Rng rng(seed);
        double max_rel = 0.0;
        for (const auto& name : names) {
            auto& p = st.param(name);
            for (int rep = 0; rep < per_param; ++rep) {
                const std::size_t c =
                    static_cast<std::size_t>(rng.uniform_int(static_cast<int>(p.numel())));
                const double keep = p.data[c];
                p.data[c] = keep + 1e-4;
                const double fp = loss();
                p.data[c] = keep - 1e-4;
                const double fm = loss();
                p.data[c] = keep;
                const double numeric = (fp - fm) / 2e-4;
                const double analytic = t.grad(bm.v(name)).data[c];
                const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
                max_rel = std::max(max_rel, std::abs(numeric - analytic) / denom);
            }
        }
        return max_rel;
    }
};

FullForwardCheck make_forward_check(Mode mode, SkipKind skip, uint64_t seed) {
    FullForwardCheck fc{ModelStateT<double>::create(mode, skip, small_arch(), seed),
                        {}, {}, {}, {}};
    if (mode == Mode::nonblind) fc.center = random_tensor({6, 16, 16}, seed + 1);
    fc.ins = {random_tensor({6, 16, 16}, seed + 2), random_tensor({6, 16, 16}, seed + 3)};
    for (int n = 0; n < 2; ++n) {
        std::vector<TensorD> lv;
        for (int l = 0; l < 4; ++l)
            lv.push_back(random_flow(16 >> l, 16 >> l, seed + 10 + n * 4 + l, 1));
        fc.flows.push_back(std::move(lv));
    }
    fc.target = random_tensor({3, 16, 16}, seed + 20);
    return fc;
}

}  // namespace

TEST_CASE("full blind forward passes the gradient check") {
    auto fc = make_forward_check(Mode::blind, SkipKind::faam, 70);
    const double rel = fc.check(
        {"head.w", "enc2.c1.w", "faam1.agg.w", "faam3.fc1.w", "faam0.sp.w", "dec0.c2.w", "tail.w"},
        5, 74);
    CHECK(rel < 1e-3);
}

TEST_CASE("full nonblind forward passes the gradient check") {
    auto fc = make_forward_check(Mode::nonblind, SkipKind::fdam, 170);
    for (auto& [n, p] : fc.st.params)  // make the fusion path live
        if (n.rfind("fdam", 0) == 0 && n.find("beta") != std::string::npos) p.fill(0.6);
    const double rel = fc.check(
        {"head.w", "fdam0.off1.w", "fdam2.dcn.w", "fdam1.fuse.w", "fdam3.beta", "dec1.c1.w",
         "tail.w"},
        5, 174);
    CHECK(rel < 1e-3);
}

TEST_CASE("model serialization round trip preserves everything") {
    const ArchConfig arch = small_arch(5);
    const auto st = ModelState::create(Mode::nonblind, SkipKind::fdam, arch, 80);
    const auto path = (fs::temp_directory_path() / "f2r_model_rt.bin").string();
    save_model(st, path);
    const ModelState back = load_model(path);
    CHECK(back.mode == st.mode);
    CHECK(back.skip == st.skip);
    CHECK(back.arch.window == st.arch.window);
    CHECK(back.arch.base_ch == st.arch.base_ch);
    CHECK(back.params_checksum() == st.params_checksum());
    REQUIRE(back.params.size() == st.params.size());
    for (std::size_t i = 0; i < st.params.size(); ++i) {
        CHECK(back.params[i].first == st.params[i].first);
        CHECK(bitwise_equal(back.params[i].second, st.params[i].second));
    }

    // corrupting a byte trips the checksum
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(200);
        char c;
        f.seekg(200);
        f.get(c);
        f.seekp(200);
        c = static_cast<char>(c ^ 0x40);
        f.put(c);
    }
    CHECK_THROWS_AS(load_model(path), IoError);
}

TEST_CASE("perturbing one neighbor pixel stays essentially local") {
    // The channel-attention gate is a global statistic, so a strictly zero
    // footprint outside the receptive field is impossible; the leak must
    // be orders of magnitude below the local response.
    const ArchConfig arch = small_arch();
    const auto st = ModelStateT<double>::create(Mode::blind, SkipKind::faam, arch, 90);
    std::vector<TensorD> ins{random_tensor({6, 32, 32}, 91), random_tensor({6, 32, 32}, 92)};
    const auto pyr = zero_pyramids<double>(2, 32, 32, 4);
    const auto base = run_blind(st, ins, pyr);
    auto ins2 = ins;
    ins2[0].at(2, 16, 16) += 1.0;
    const auto pert = run_blind(st, ins2, pyr);

    // conv radius per level: head+2 enc convs+down, skip (7x7 attention),
    // up+2 dec convs; everything at level l acts at scale 2^l
    int radius = 0;
    for (int l = 0; l < arch.levels; ++l) radius += ((l ? 3 : 4) + 3 + 3) * (1 << l);
    double inside = 0.0, outside = 0.0;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x) {
                const double d = std::abs(pert.at(c, y, x) - base.at(c, y, x));
                if (std::max(std::abs(y - 16), std::abs(x - 16)) <= radius)
                    inside = std::max(inside, d);
                else
                    outside = std::max(outside, d);
            }
    CHECK(inside > 0.0);
    if (radius < 31) CHECK(outside <= 1e-3 * inside);
}
