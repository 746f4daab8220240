#include "f2r/priors/denoiser.hpp"

#include <cmath>
#include <unordered_map>

#include "f2r/autograd/ops.hpp"
#include "f2r/core/checksum.hpp"
#include "f2r/core/errors.hpp"
#include "f2r/core/rng.hpp"
#include "f2r/core/serialize.hpp"
#include "f2r/data/synth.hpp"
#include "f2r/noise/noise_model.hpp"

namespace f2r {

Tensor denoise_frame(const DenoiserPrior& d, const Tensor& y) {
    if (y.ndim() != 3) throw InputError("denoise_frame: expects [Ch,H,W]");
    if (d.expected_channels() > 0 && y.dim(0) != d.expected_channels())
        throw InputError("denoise_frame: prior expects " + std::to_string(d.expected_channels()) +
                         " channels, got " + std::to_string(y.dim(0)));
    return d.denoise(y);
}

Tensor JointInput::concat() const {
    Tensor z({2 * baseline.dim(0), baseline.dim(1), baseline.dim(2)});
    std::copy(baseline.data.begin(), baseline.data.end(), z.data.begin());
    std::copy(residual.data.begin(), residual.data.end(), z.data.begin() + baseline.numel());
    return z;
}

JointInput JointInput::split(const Tensor& z) {
    if (z.dim(0) % 2 != 0) throw InputError("JointInput::split: odd channel count");
    const int ch = z.dim(0) / 2;
    JointInput j;
    j.baseline = Tensor({ch, z.dim(1), z.dim(2)});
    j.residual = Tensor({ch, z.dim(1), z.dim(2)});
    std::copy(z.data.begin(), z.data.begin() + j.baseline.numel(), j.baseline.data.begin());
    std::copy(z.data.begin() + j.baseline.numel(), z.data.end(), j.residual.data.begin());
    return j;
}

JointInput make_joint_input(const Tensor& y, const DenoiserPrior& d) {
    JointInput j;
    j.baseline = denoise_frame(d, y);
    j.residual = Tensor(y.shape);
    for (std::size_t i = 0; i < y.numel(); ++i) j.residual.data[i] = y.data[i] - j.baseline.data[i];
    return j;
}

// --- classical smoother -----------------------------------------------------

GaussianSmoother::GaussianSmoother(double sigma_k) : sigma_k_(sigma_k) {
    if (sigma_k <= 0.0) throw ParamError("smoother: sigma_k must be > 0");
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma_k)));
    kernel_.resize(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * (i / sigma_k) * (i / sigma_k));
        kernel_[static_cast<std::size_t>(i + radius)] = static_cast<float>(v);
        sum += v;
    }
    for (auto& v : kernel_) v = static_cast<float>(v / sum);
}

Tensor GaussianSmoother::denoise(const Tensor& frame) const {
    const int ch = frame.dim(0), h = frame.dim(1), w = frame.dim(2);
    const int radius = (static_cast<int>(kernel_.size()) - 1) / 2;
    Tensor tmp(frame.shape), out(frame.shape);
    auto reflect = [](int i, int n) {
        if (n == 1) return 0;
        const int p = 2 * n - 2;
        int m = ((i % p) + p) % p;
        return m < n ? m : p - m;
    };
    for (int c = 0; c < ch; ++c) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int k = -radius; k <= radius; ++k)
                    acc += static_cast<double>(kernel_[static_cast<std::size_t>(k + radius)]) *
                           frame.at(c, y, reflect(x + k, w));
                tmp.at(c, y, x) = static_cast<float>(acc);
            }
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int k = -radius; k <= radius; ++k)
                    acc += static_cast<double>(kernel_[static_cast<std::size_t>(k + radius)]) *
                           tmp.at(c, reflect(y + k, h), x);
                out.at(c, y, x) = static_cast<float>(acc);
            }
    }
    return out;
}

uint64_t GaussianSmoother::param_checksum() const {
    uint64_t h = fnv1a64(&sigma_k_, sizeof(sigma_k_));
    return fnv1a64(kernel_.data(), kernel_.size() * sizeof(float), h);
}

std::string GaussianSmoother::describe() const {
    return "classical(sigma_k=" + std::to_string(sigma_k_) + ")";
}

// --- learned variant ---------------------------------------------------------

namespace {

// Residual CNN: y - net(y). Shared by inference and training.
template <class Bind>
ag::VarId learned_forward(ag::Tape<float>& t, ag::VarId y, int layers, Bind&& v) {
    ag::VarId s = y;
    for (int l = 0; l < layers; ++l) {
        const std::string p = "l" + std::to_string(l);
        s = ag::conv2d(t, s, v(p + ".w"), v(p + ".b"));
        if (l + 1 < layers) s = ag::leaky_relu(t, s, 0.1f);
    }
    return ag::sub(t, y, s);
}

}  // namespace

Tensor LearnedDenoiser::denoise(const Tensor& frame) const {
    ag::Tape<float> t;
    std::unordered_map<std::string, ag::VarId> vars;
    for (const auto& [n, w] : params_) vars.emplace(n, t.leaf(w));
    ag::VarId y = t.leaf(frame);
    ag::VarId out = learned_forward(t, y, layers_, [&](const std::string& n) { return vars.at(n); });
    return t.val(out);
}

uint64_t LearnedDenoiser::param_checksum() const {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [n, w] : params_) {
        h = fnv1a64(n, h);
        h = checksum(w, h);
    }
    return h;
}

std::string LearnedDenoiser::describe() const {
    return "learned(ch=" + std::to_string(channels_) + ", hidden=" + std::to_string(hidden_) +
           ", layers=" + std::to_string(layers_) + ")";
}

void LearnedDenoiser::save(const std::string& path) const {
    BinWriter w(path);
    w.pod<uint32_t>(0x4632524eu);  // "F2RN"
    w.pod<uint32_t>(1u);
    w.pod<int32_t>(channels_);
    w.pod<int32_t>(hidden_);
    w.pod<int32_t>(layers_);
    w.pod<uint32_t>(static_cast<uint32_t>(params_.size()));
    for (const auto& [n, t] : params_) {
        w.str(n);
        w.tensor_f32(t);
    }
    w.pod<uint64_t>(param_checksum());
}

LearnedDenoiser LearnedDenoiser::load(const std::string& path) {
    BinReader r(path);
    if (r.pod<uint32_t>() != 0x4632524eu) throw IoError("not a denoiser checkpoint: " + path);
    if (r.pod<uint32_t>() != 1u) throw IoError("unsupported denoiser version: " + path);
    LearnedDenoiser d;
    d.channels_ = r.pod<int32_t>();
    d.hidden_ = r.pod<int32_t>();
    d.layers_ = r.pod<int32_t>();
    const uint32_t n = r.pod<uint32_t>();
    for (uint32_t i = 0; i < n; ++i) {
        std::string name = r.str();
        d.params_.emplace_back(std::move(name), r.tensor_f32());
    }
    if (r.pod<uint64_t>() != d.param_checksum()) throw IoError("denoiser checksum mismatch: " + path);
    return d;
}

LearnedDenoiser LearnedDenoiser::train(const TrainOptions& opt) {
    LearnedDenoiser d;
    d.channels_ = opt.channels;
    d.hidden_ = opt.hidden;
    d.layers_ = opt.layers;
    for (int l = 0; l < opt.layers; ++l) {
        const int cin = l == 0 ? opt.channels : opt.hidden;
        const int cout = l + 1 == opt.layers ? opt.channels : opt.hidden;
        Tensor w({cout, cin, 3, 3});
        Rng rng(hash_seed(opt.seed, 0xd0, static_cast<uint64_t>(l)));
        const double std = std::sqrt(2.0 / (9.0 * cin));
        for (auto& v : w.data) v = static_cast<float>(std * rng.gaussian());
        d.params_.emplace_back("l" + std::to_string(l) + ".w", std::move(w));
        d.params_.emplace_back("l" + std::to_string(l) + ".b", Tensor({cout}));
    }

    // Disjoint synthetic stills: frames drawn from scenes the video
    // pipeline never uses (separate seed space).
    std::vector<Tensor> clean;
    for (int i = 0; i < opt.train_images; ++i) {
        SceneSpec spec;
        spec.channels = opt.channels;
        spec.length = 1;
        spec.sprites = 4;
        spec.vel_min = spec.vel_max = 0.0;
        SyntheticClip clip = generate_synthetic(spec, hash_seed(opt.seed, 0xd15c0, static_cast<uint64_t>(i)));
        clean.push_back(clip.clean.frames[0]);
    }
    const NoiseModel nm = NoiseModel::awgn(opt.noise_sigma);

    // Plain Adam on L2; small enough to keep self-contained here.
    std::vector<Tensor> m(d.params_.size()), v(d.params_.size());
    for (std::size_t i = 0; i < d.params_.size(); ++i) {
        m[i] = Tensor(d.params_[i].second.shape);
        v[i] = Tensor(d.params_[i].second.shape);
    }
    for (int it = 0; it < opt.iters; ++it) {
        ag::Tape<float> t;
        std::unordered_map<std::string, ag::VarId> vars;
        std::vector<ag::VarId> pids;
        for (const auto& [n, w] : d.params_) {
            ag::VarId id = t.leaf(w, true);
            vars.emplace(n, id);
            pids.push_back(id);
        }
        std::vector<ag::VarId> losses;
        for (int b = 0; b < opt.batch; ++b) {
            const uint64_t s = hash_seed(opt.seed, static_cast<uint64_t>(it), static_cast<uint64_t>(b));
            Rng rng(s);
            const Tensor& img = clean[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(clean.size())))];
            const int y0 = rng.uniform_int(img.dim(1) - opt.patch + 1);
            const int x0 = rng.uniform_int(img.dim(2) - opt.patch + 1);
            Tensor crop({opt.channels, opt.patch, opt.patch});
            for (int c = 0; c < opt.channels; ++c)
                for (int y = 0; y < opt.patch; ++y)
                    for (int x = 0; x < opt.patch; ++x) crop.at(c, y, x) = img.at(c, y0 + y, x0 + x);
            Tensor noisy = crop;
            noisy.add_(sample_recorruption(crop.shape, nm, nullptr, hash_seed(s, 0x90)));
            ag::VarId yv = t.leaf(noisy);
            ag::VarId out = learned_forward(t, yv, opt.layers,
                                            [&](const std::string& n) { return vars.at(n); });
            losses.push_back(ag::mean_sq(t, out, t.leaf(crop)));
        }
        ag::VarId loss = ag::mean_of(t, losses);
        t.backward(loss);
        const double lr = opt.lr * 0.5 * (1.0 + std::cos(3.141592653589793 * it / opt.iters));
        for (std::size_t i = 0; i < d.params_.size(); ++i) {
            auto& p = d.params_[i].second;
            const auto& g = t.grad(pids[i]);
            for (std::size_t j = 0; j < p.numel(); ++j) {
                m[i].data[j] = 0.9f * m[i].data[j] + 0.1f * g.data[j];
                v[i].data[j] = 0.999f * v[i].data[j] + 0.001f * g.data[j] * g.data[j];
                const double mh = m[i].data[j] / (1.0 - std::pow(0.9, it + 1));
                const double vh = v[i].data[j] / (1.0 - std::pow(0.999, it + 1));
                p.data[j] -= static_cast<float>(lr * mh / (std::sqrt(vh) + 1e-8));
            }
        }
    }
    return d;
}

}  // namespace f2r
