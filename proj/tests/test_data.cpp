#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "f2r/align/warp.hpp"
#include "f2r/core/rng.hpp"
#include "f2r/data/synth.hpp"
#include "f2r/train/dataset.hpp"

using namespace f2r;
namespace fs = std::filesystem;

namespace {

VideoSequence numbered_sequence(int n) {
    VideoSequence seq;
    seq.id = "numbered";
    for (int f = 0; f < n; ++f) seq.frames.push_back(Tensor({1, 8, 8}, static_cast<float>(f)));
    return seq;
}

}  // namespace

TEST_CASE("window extraction and reflection rules") {
    const VideoSequence seq = numbered_sequence(10);

    SUBCASE("interior window") {
        const TemporalWindow w = extract_window(seq, 5, 3);
        CHECK(w.source_positions == std::vector<int>{4, 5, 6});
        CHECK(w.center_pos == 1);
        CHECK(w.center_source == 5);
    }
    SUBCASE("left edge reflects -1 to 1") {
        const TemporalWindow w = extract_window(seq, 0, 5);
        CHECK(w.source_positions == std::vector<int>{2, 1, 0, 1, 2});
    }
    SUBCASE("right edge, long window") {
        const TemporalWindow w = extract_window(seq, 9, 9);
        CHECK(w.source_positions == std::vector<int>{5, 6, 7, 8, 9, 8, 7, 6, 5});
    }
    SUBCASE("window frames carry the reflected content") {
        const TemporalWindow w = extract_window(seq, 0, 5);
        CHECK(w.frames[0].data[0] == 2.0f);
        CHECK(w.frames[4].data[0] == 2.0f);
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(extract_window(seq, 0, 4), ConfigError);   // even T
        CHECK_THROWS_AS(extract_window(seq, 0, 1), ConfigError);   // too small
        CHECK_THROWS_AS(extract_window(seq, 10, 3), InputError);   // t out of range
    }
}

TEST_CASE("reflection positions are always valid and symmetric for interior centers") {
    const VideoSequence seq = numbered_sequence(7);
    for (int t = 0; t < 7; ++t)
        for (int T = 3; T <= 9; T += 2) {
            const TemporalWindow w = extract_window(seq, t, T);
            for (int s : w.source_positions) {
                CHECK(s >= 0);
                CHECK(s < 7);
            }
            // the multiset of |offset| values is symmetric around the center
            const int half = (T - 1) / 2;
            if (t - half >= 0 && t + half < 7)
                for (int k = 1; k <= half; ++k)
                    CHECK(std::abs(w.source_positions[static_cast<std::size_t>(half - k)] - t) ==
                          std::abs(w.source_positions[static_cast<std::size_t>(half + k)] - t));
        }
}

TEST_CASE("single-frame sequence reflects to all-copies") {
    const VideoSequence seq = numbered_sequence(1);
    const TemporalWindow w = extract_window(seq, 0, 3);
    CHECK(w.source_positions == std::vector<int>{0, 0, 0});
}

TEST_CASE("crop_patch is deterministic, identity at full size, slice-consistent") {
    SceneSpec spec;
    spec.length = 6;
    const SyntheticClip clip = generate_synthetic(spec, 17);
    const TemporalWindow w = extract_window(clip.clean, 3, 3);

    const TemporalWindow c1 = crop_patch(w, 32, 123);
    const TemporalWindow c2 = crop_patch(w, 32, 123);
    CHECK(c1.crop_y == c2.crop_y);
    CHECK(c1.crop_x == c2.crop_x);
    for (int i = 0; i < 3; ++i)
        CHECK(bitwise_equal(c1.frames[static_cast<std::size_t>(i)],
                            c2.frames[static_cast<std::size_t>(i)]));

    const TemporalWindow full = crop_patch(w, 64, 5);
    CHECK(full.crop_y == 0);
    CHECK(full.crop_x == 0);
    CHECK(bitwise_equal(full.frames[0], w.frames[0]));

    CHECK_THROWS_AS(crop_patch(w, 65, 1), ConfigError);

    // cropped gt flow equals the full flow restricted to the crop
    const Tensor flow_full = clip.flow->flow(2, 3);
    const Tensor flow_crop = slice_spatial(flow_full, c1.crop_y, c1.crop_x, 32, 32);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            CHECK(flow_crop.at(0, y, x) == flow_full.at(0, c1.crop_y + y, c1.crop_x + x));
            CHECK(flow_crop.at(1, y, x) == flow_full.at(1, c1.crop_y + y, c1.crop_x + x));
        }
}

TEST_CASE("pack_rgbg definitional example and round trip") {
    Tensor mosaic({1, 2, 2});
    mosaic.at(0, 0, 0) = 0.1f;  // R
    mosaic.at(0, 0, 1) = 0.2f;  // G1
    mosaic.at(0, 1, 0) = 0.3f;  // G2
    mosaic.at(0, 1, 1) = 0.4f;  // B
    const Tensor packed = pack_rgbg_frame(mosaic, "rggb");
    CHECK(packed.shape == std::vector<int>{4, 1, 1});
    CHECK(packed.at(0, 0, 0) == 0.1f);
    CHECK(packed.at(1, 0, 0) == 0.2f);
    CHECK(packed.at(2, 0, 0) == 0.4f);
    CHECK(packed.at(3, 0, 0) == 0.3f);

    Rng rng(3);
    Tensor big({1, 16, 20});
    for (auto& v : big.data) v = static_cast<float>(rng.uniform());
    for (const char* phase : {"rggb", "bggr", "grbg", "gbrg"})
        CHECK(bitwise_equal(unpack_rgbg_frame(pack_rgbg_frame(big, phase), phase), big));

    Tensor constant({1, 6, 6}, 0.25f);
    const Tensor cp = pack_rgbg_frame(constant);
    for (float v : cp.data) CHECK(v == 0.25f);

    Tensor odd({1, 5, 6});
    CHECK_THROWS_AS(pack_rgbg_frame(odd), InputError);
}

TEST_CASE("zero-velocity scene has identically zero flow") {
    SceneSpec spec;
    spec.vel_min = spec.vel_max = 0.0;
    spec.length = 5;
    const SyntheticClip clip = generate_synthetic(spec, 8);
    const Tensor f = clip.flow->flow(0, 4);
    for (float v : f.data) CHECK(v == 0.0f);
}

TEST_CASE("rigid translation flow matches velocity arithmetic") {
    // one sprite moving at a fixed velocity; flow over the sprite is v*(i-t)
    SceneSpec spec;
    spec.sprites = 1;
    spec.vel_min = spec.vel_max = 2.0;
    spec.length = 8;
    const SyntheticClip clip = generate_synthetic(spec, 21);
    const auto& sp = clip.flow->sprites()[0];
    const double speed = std::hypot(sp.vx, sp.vy);
    CHECK(speed == doctest::Approx(2.0));

    const int i = 1, t = 5;
    const Tensor f = clip.flow->flow(i, t);
    int sprite_px = 0;
    for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x)
            if (clip.flow->sprite_at(x, y, t) == 0) {
                ++sprite_px;
                CHECK(f.at(0, y, x) == doctest::Approx(sp.vx * (i - t)).epsilon(1e-6));
                CHECK(f.at(1, y, x) == doctest::Approx(sp.vy * (i - t)).epsilon(1e-6));
            }
    CHECK(sprite_px > 100);
    // displacement magnitude |i-t| * speed, direction opposite to motion
    CHECK(std::abs(f.at(0, static_cast<int>(sp.y0 + 3), static_cast<int>(sp.x0 + 3))) ==
          doctest::Approx(std::abs(sp.vx) * 4).epsilon(1e-5));
}

TEST_CASE("flow antisymmetry on rigid regions") {
    SceneSpec spec;
    spec.sprites = 2;
    spec.length = 6;
    const SyntheticClip clip = generate_synthetic(spec, 5);
    const Tensor fwd = clip.flow->flow(1, 4);
    const Tensor bwd = clip.flow->flow(4, 1);
    const Tensor occ_f = clip.flow->occlusion(1, 4);
    const Tensor occ_b = clip.flow->occlusion(4, 1);
    // where both directions are valid and the content matches, v_fwd = -v_bwd
    int checked = 0;
    for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x) {
            if (occ_f.at(0, y, x) > 0.5f || occ_b.at(0, y, x) > 0.5f) continue;
            if (clip.flow->sprite_at(x, y, 4) != clip.flow->sprite_at(x, y, 1)) continue;
            CHECK(fwd.at(0, y, x) == doctest::Approx(-bwd.at(0, y, x)).epsilon(1e-6));
            CHECK(fwd.at(1, y, x) == doctest::Approx(-bwd.at(1, y, x)).epsilon(1e-6));
            ++checked;
        }
    CHECK(checked > 500);
}

TEST_CASE("warping frame i by flow(i->t) reproduces frame t on valid pixels") {
    SceneSpec spec;
    spec.sprites = 3;
    spec.length = 8;
    const SyntheticClip clip = generate_synthetic(spec, 33);
    for (const auto [i, t] : {std::pair{0, 4}, std::pair{6, 3}, std::pair{2, 3}}) {
        const Tensor warped = warp_image(clip.clean.frames[static_cast<std::size_t>(i)],
                                         clip.flow->flow(i, t));
        const Tensor& ref = clip.clean.frames[static_cast<std::size_t>(t)];
        const Tensor occ = clip.flow->occlusion(i, t);
        int valid = 0;
        for (int y = 0; y < spec.height; ++y)
            for (int x = 0; x < spec.width; ++x) {
                if (occ.at(0, y, x) > 0.5f) continue;
                ++valid;
                // local curvature bound on the composite interpolation error
                double curv = 0.0;
                for (int c = 0; c < 3; ++c) {
                    const int ym = std::max(0, y - 1), yp = std::min(spec.height - 1, y + 1);
                    const int xm = std::max(0, x - 1), xp = std::min(spec.width - 1, x + 1);
                    curv = std::max(curv, std::abs(ref.at(c, ym, x) - 2.0 * ref.at(c, y, x) +
                                                   ref.at(c, yp, x)));
                    curv = std::max(curv, std::abs(ref.at(c, y, xm) - 2.0 * ref.at(c, y, x) +
                                                   ref.at(c, y, xp)));
                }
                const double bound = 2.0 * (curv + 1e-4);
                for (int c = 0; c < 3; ++c)
                    CHECK(std::abs(warped.at(c, y, x) - ref.at(c, y, x)) <= bound);
            }
        CHECK(valid > 2000);
    }
}

TEST_CASE("scene velocity check rejects flows beyond half the patch") {
    SceneSpec spec;
    spec.vel_min = 0.4;
    spec.vel_max = 5.0;
    spec.check_window_T = 9;
    spec.check_patch = 32;
    // 5 px/frame * 4 frames = 20 px > 16 = patch/2
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec.vel_max = 3.0;
    CHECK_NOTHROW(spec.validate());
}

TEST_CASE("dataset export and ingestion round trip") {
    DataConfig dc;
    dc.height = 32;
    dc.width = 32;
    dc.clip_len = 6;
    dc.clips = 2;
    dc.val_clips = 1;
    dc.flow_radius = 2;
    dc.window_T = 3;
    dc.patch = 16;
    const fs::path dir = fs::temp_directory_path() / "f2r_test_dataset";
    fs::remove_all(dir);
    export_dataset(dc, dir.string());
    CHECK(fs::exists(dir / "meta.json"));
    CHECK(fs::exists(dir / "clips" / "clip0" / "00000.png"));
    CHECK(fs::exists(dir / "flows" / "clip0" / "0_1.flo"));

    const NoiseModel noise = NoiseModel::awgn(0.1);
    const Dataset ds = load_dataset(dir.string(), noise, 77);
    CHECK(ds.train_noisy.size() == 2);
    CHECK(ds.val_noisy.size() == 1);
    CHECK(ds.train_noisy[0].length() == 6);
    CHECK(ds.has_clean);
    REQUIRE(ds.train_noisy[0].gt_flow != nullptr);

    // flow store serves pairs within the radius, rejects beyond
    const Tensor f = ds.train_noisy[0].gt_flow->flow(0, 2);
    CHECK(f.shape == std::vector<int>{2, 32, 32});
    CHECK_THROWS_AS(ds.train_noisy[0].gt_flow->flow(0, 5), InputError);

    // deterministic reload
    const Dataset ds2 = load_dataset(dir.string(), noise, 77);
    CHECK(bitwise_equal(ds.train_noisy[0].frames[0], ds2.train_noisy[0].frames[0]));
    // in-memory noisy stream differs from a different noise seed
    const Dataset ds3 = load_dataset(dir.string(), noise, 78);
    CHECK(!bitwise_equal(ds.train_noisy[0].frames[0], ds3.train_noisy[0].frames[0]));
}

TEST_CASE("rgbg dataset gets half-scale analytic flow") {
    DataConfig dc;
    dc.layout = "rgbg";
    dc.height = 24;
    dc.width = 24;
    dc.clip_len = 4;
    dc.clips = 1;
    dc.val_clips = 0;
    dc.window_T = 3;
    dc.patch = 16;
    const Dataset ds = build_synthetic_dataset(dc, NoiseModel::signal_dependent(0.01, 1e-4, 1600));
    const auto& seq = ds.train_noisy[0];
    CHECK(seq.layout == Layout::rgbg_packed);
    CHECK(seq.channels() == 4);
    CHECK(seq.height() == 24);
    REQUIRE(seq.gt_flow != nullptr);
    CHECK(seq.gt_flow->height() == 24);
}
