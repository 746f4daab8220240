#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "f2r/data/synth.hpp"
#include "f2r/noise/noise_model.hpp"

using namespace f2r;

namespace {

VideoSequence constant_sequence(int frames, int ch, int h, int w, float value) {
    VideoSequence seq;
    seq.id = "const";
    for (int f = 0; f < frames; ++f) seq.frames.push_back(Tensor({ch, h, w}, value));
    return seq;
}

struct Moments {
    double mean, var;
    std::size_t n;
};

Moments moments(const std::vector<float>& v) {
    double m = 0.0;
    for (float x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (float x : v) s += (x - m) * (x - m);
    return {m, s / static_cast<double>(v.size() - 1), v.size()};
}

}  // namespace

TEST_CASE("zero-sigma corruption is bitwise identity") {
    SceneSpec spec;
    spec.length = 3;
    const SyntheticClip clip = generate_synthetic(spec, 4);
    const VideoSequence noisy = corrupt(clip.clean, NoiseModel::awgn(0.0), 7);
    for (int f = 0; f < 3; ++f)
        CHECK(bitwise_equal(noisy.frames[static_cast<std::size_t>(f)],
                            clip.clean.frames[static_cast<std::size_t>(f)]));
    CHECK(noisy.noise_meta.has_value());
}

TEST_CASE("awgn sample variance matches sigma^2 within 1%") {
    // 10^6 pixels at 0.5, sigma 0.1
    const VideoSequence clean = constant_sequence(4, 1, 500, 500, 0.5f);
    const VideoSequence noisy = corrupt(clean, NoiseModel::awgn(0.1), 1);
    std::vector<float> residual;
    for (int f = 0; f < 4; ++f)
        for (std::size_t i = 0; i < noisy.frames[static_cast<std::size_t>(f)].numel(); ++i)
            residual.push_back(noisy.frames[static_cast<std::size_t>(f)].data[i] - 0.5f);
    const auto m = moments(residual);
    CHECK(m.n == 1000000);
    CHECK(std::abs(m.var - 0.01) < 0.0001);                        // within 1%
    CHECK(std::abs(m.mean) < 3.0 * 0.1 / std::sqrt(1e6));          // 3 standard errors of 0
}

TEST_CASE("signal-dependent variance matches a*x + b within 2%") {
    const VideoSequence clean = constant_sequence(1, 1, 800, 800, 0.25f);
    const NoiseModel m = NoiseModel::signal_dependent(0.04, 0.0004);
    const VideoSequence noisy = corrupt(clean, m, 3);
    std::vector<float> residual;
    for (std::size_t i = 0; i < noisy.frames[0].numel(); ++i)
        residual.push_back(noisy.frames[0].data[i] - 0.25f);
    const double expected = 0.04 * 0.25 + 0.0004;  // 0.0104
    CHECK(std::abs(moments(residual).var - expected) < 0.02 * expected);
}

TEST_CASE("corruption is deterministic and frame-order independent") {
    const VideoSequence clean = constant_sequence(3, 2, 16, 16, 0.3f);
    const VideoSequence n1 = corrupt(clean, NoiseModel::awgn(0.2), 99);
    const VideoSequence n2 = corrupt(clean, NoiseModel::awgn(0.2), 99);
    for (int f = 0; f < 3; ++f)
        CHECK(bitwise_equal(n1.frames[static_cast<std::size_t>(f)],
                            n2.frames[static_cast<std::size_t>(f)]));
    // a single-frame sequence gets the same frame-0 noise as the full clip
    VideoSequence head = clean;
    head.frames.resize(1);
    const VideoSequence n3 = corrupt(head, NoiseModel::awgn(0.2), 99);
    CHECK(bitwise_equal(n3.frames[0], n1.frames[0]));
}

TEST_CASE("corrupt parameter and input validation") {
    NoiseModel bad;
    bad.sigma = -0.1;
    CHECK_THROWS_AS(bad.validate(), ParamError);
    CHECK_THROWS_AS(NoiseModel::signal_dependent(-1.0, 0.0), ParamError);
    VideoSequence empty;
    CHECK_THROWS_AS(corrupt(empty, NoiseModel::awgn(0.1), 1), InputError);
}

TEST_CASE("sample_recorruption zero-variance and shape checks") {
    const Tensor zeros = sample_recorruption({1, 64, 64}, NoiseModel::awgn(0.0), nullptr, 3);
    for (float v : zeros.data) CHECK(v == 0.0f);

    const Tensor ref({1, 64, 64}, 0.0f);
    const Tensor z2 = sample_recorruption({1, 64, 64}, NoiseModel::signal_dependent(1.0, 0.0), &ref, 5);
    for (float v : z2.data) CHECK(v == 0.0f);

    const Tensor small_ref({1, 32, 32}, 0.5f);
    CHECK_THROWS_AS(
        sample_recorruption({1, 64, 64}, NoiseModel::signal_dependent(0.1, 0.0), &small_ref, 5),
        InputError);
    CHECK_THROWS_AS(
        sample_recorruption({1, 64, 64}, NoiseModel::signal_dependent(0.1, 0.0), nullptr, 5),
        InputError);
}

TEST_CASE("sample_recorruption std within 1% on a large field") {
    const Tensor n = sample_recorruption({1, 1024, 1024}, NoiseModel::awgn(0.05), nullptr, 11);
    const auto m = moments(n.data);
    CHECK(std::abs(std::sqrt(m.var) - 0.05) < 0.0005);
    CHECK(std::abs(m.mean) < 3.0 * 0.05 / std::sqrt(static_cast<double>(n.numel())));
}

TEST_CASE("corrupt residual reproduces sample_recorruption statistics") {
    const VideoSequence clean = constant_sequence(1, 1, 512, 512, 0.5f);
    const NoiseModel m = NoiseModel::awgn(0.07);
    const VideoSequence noisy = corrupt(clean, m, 21);
    std::vector<float> residual(noisy.frames[0].data);
    for (auto& v : residual) v -= 0.5f;
    const Tensor field = sample_recorruption({1, 512, 512}, m, nullptr, 22);
    const auto mr = moments(residual);
    const auto mf = moments(field.data);
    CHECK(std::abs(mr.var - mf.var) < 0.05 * mf.var);
    CHECK(std::abs(mr.mean - mf.mean) < 6.0 * 0.07 / std::sqrt(static_cast<double>(field.numel())));
}

TEST_CASE("identical inputs give bitwise-identical noise under any call context") {
    const Tensor a = sample_recorruption({3, 33, 17}, NoiseModel::awgn(0.3), nullptr, 1234);
    sample_recorruption({1, 8, 8}, NoiseModel::awgn(0.5), nullptr, 777);  // interleaved draw
    const Tensor b = sample_recorruption({3, 33, 17}, NoiseModel::awgn(0.3), nullptr, 1234);
    CHECK(bitwise_equal(a, b));
}
