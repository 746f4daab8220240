#include "f2r/noise/noise_model.hpp"

#include <cmath>

#include "f2r/core/errors.hpp"
#include "f2r/data/video.hpp"

namespace f2r {

void NoiseModel::validate() const {
    if (sigma < 0.0) throw ParamError("noise: sigma must be >= 0");
    if (shot_gain < 0.0) throw ParamError("noise: shot_gain must be >= 0");
    if (read_var < 0.0) throw ParamError("noise: read_var must be >= 0");
}

double NoiseModel::variance_at(double x) const {
    if (kind == Kind::awgn) return sigma * sigma;
    return shot_gain * std::max(x, 0.0) + read_var;
}

bool NoiseModel::is_zero() const {
    if (kind == Kind::awgn) return sigma == 0.0;
    return shot_gain == 0.0 && read_var == 0.0;
}

std::string NoiseModel::describe() const {
    if (kind == Kind::awgn) return "awgn(sigma=" + std::to_string(sigma) + ")";
    return "signal_dependent(a=" + std::to_string(shot_gain) + ", b=" + std::to_string(read_var) +
           ", iso=" + std::to_string(iso) + ")";
}

NoiseModel NoiseModel::awgn(double sigma) {
    NoiseModel m;
    m.kind = Kind::awgn;
    m.sigma = sigma;
    m.validate();
    return m;
}

NoiseModel NoiseModel::signal_dependent(double a, double b, int iso) {
    NoiseModel m;
    m.kind = Kind::signal_dependent;
    m.shot_gain = a;
    m.read_var = b;
    m.iso = iso;
    m.validate();
    return m;
}

Tensor sample_recorruption(const std::vector<int>& shape, const NoiseModel& model,
                           const Tensor* ref_intensity, uint64_t seed) {
    model.validate();
    Tensor out(shape);
    if (model.kind == NoiseModel::Kind::signal_dependent) {
        if (ref_intensity == nullptr)
            throw InputError("sample_recorruption: signal_dependent model needs a reference frame");
        if (ref_intensity->shape != out.shape)
            throw InputError("sample_recorruption: reference shape " +
                             Tensor::shape_str(ref_intensity->shape) + " != requested " +
                             Tensor::shape_str(shape));
    }
    Rng rng(seed);
    if (model.kind == NoiseModel::Kind::awgn) {
        const double s = model.sigma;
        for (auto& v : out.data) v = static_cast<float>(s * rng.gaussian());
    } else {
        for (std::size_t i = 0; i < out.numel(); ++i) {
            const double var = model.variance_at(static_cast<double>(ref_intensity->data[i]));
            out.data[i] = static_cast<float>(std::sqrt(var) * rng.gaussian());
        }
    }
    return out;
}

VideoSequence corrupt(const VideoSequence& clean, const NoiseModel& model, uint64_t seed) {
    model.validate();
    if (clean.frames.empty()) throw InputError("corrupt: empty sequence");
    clean.validate();
    VideoSequence noisy = clean;
    noisy.noise_meta = model;
    for (std::size_t f = 0; f < noisy.frames.size(); ++f) {
        const Tensor n = sample_recorruption(noisy.frames[f].shape, model, &clean.frames[f],
                                             hash_seed(seed, static_cast<uint64_t>(f)));
        noisy.frames[f].add_(n);
    }
    return noisy;
}

}  // namespace f2r
