// Python bindings for the core numeric operations: noise synthesis,
// joint-input priors, alignment kernels, flow pyramids, metrics and the
// synthetic-clip generator. Training and the full pipeline live in the
// f2r CLI; this module exposes the pieces notebooks want to poke at.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "f2r/align/warp.hpp"
#include "f2r/data/synth.hpp"
#include "f2r/data/video.hpp"
#include "f2r/eval/metrics.hpp"
#include "f2r/noise/noise_model.hpp"
#include "f2r/priors/denoiser.hpp"
#include "f2r/priors/flow.hpp"

namespace py = pybind11;
using namespace f2r;

namespace {

using Arr = py::array_t<float, py::array::c_style | py::array::forcecast>;

// numpy [H,W,C] (or [H,W]) -> Tensor [C,H,W]
Tensor to_tensor(const Arr& a) {
    const auto info = a.request();
    int h, w, c;
    if (info.ndim == 2) {
        h = static_cast<int>(info.shape[0]);
        w = static_cast<int>(info.shape[1]);
        c = 1;
    } else if (info.ndim == 3) {
        h = static_cast<int>(info.shape[0]);
        w = static_cast<int>(info.shape[1]);
        c = static_cast<int>(info.shape[2]);
    } else {
        throw InputError("expected a [H,W] or [H,W,C] array");
    }
    Tensor t({c, h, w});
    const float* src = static_cast<const float*>(info.ptr);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int ci = 0; ci < c; ++ci) t.at(ci, y, x) = src[(y * w + x) * c + ci];
    return t;
}

py::array from_tensor(const Tensor& t) {
    const int c = t.dim(0), h = t.dim(1), w = t.dim(2);
    py::array_t<float> out({h, w, c});
    float* dst = out.mutable_data();
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int ci = 0; ci < c; ++ci) dst[(y * w + x) * c + ci] = t.at(ci, y, x);
    return out;
}

std::vector<Tensor> to_frames(const Arr& a) {
    const auto info = a.request();
    if (info.ndim != 4) throw InputError("expected a [T,H,W,C] array");
    std::vector<Tensor> frames;
    const int T = static_cast<int>(info.shape[0]);
    const int h = static_cast<int>(info.shape[1]);
    const int w = static_cast<int>(info.shape[2]);
    const int c = static_cast<int>(info.shape[3]);
    const float* src = static_cast<const float*>(info.ptr);
    for (int f = 0; f < T; ++f) {
        Tensor t({c, h, w});
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                for (int ci = 0; ci < c; ++ci)
                    t.at(ci, y, x) = src[((static_cast<std::size_t>(f) * h + y) * w + x) * c + ci];
        frames.push_back(std::move(t));
    }
    return frames;
}

py::array from_frames(const std::vector<Tensor>& frames) {
    const int T = static_cast<int>(frames.size());
    const int c = frames[0].dim(0), h = frames[0].dim(1), w = frames[0].dim(2);
    py::array_t<float> out({T, h, w, c});
    float* dst = out.mutable_data();
    for (int f = 0; f < T; ++f)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                for (int ci = 0; ci < c; ++ci)
                    dst[((static_cast<std::size_t>(f) * h + y) * w + x) * c + ci] =
                        frames[static_cast<std::size_t>(f)].at(ci, y, x);
    return out;
}

NoiseModel model_from(const std::string& kind, double sigma, double a, double b, int iso) {
    if (kind == "awgn") return NoiseModel::awgn(sigma);
    if (kind == "signal_dependent") return NoiseModel::signal_dependent(a, b, iso);
    throw InputError("noise kind must be 'awgn' or 'signal_dependent'");
}

// flow numpy convention: [H,W,2] with (dx, dy) in the last axis
Tensor flow_to_tensor(const Arr& a) {
    Tensor t = to_tensor(a);
    if (t.dim(0) != 2) throw InputError("flow must be [H,W,2]");
    return t;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "F2R core operations";

    m.def(
        "corrupt",
        [](const Arr& clean, const std::string& kind, double sigma, double a, double b, int iso,
           uint64_t seed) {
            VideoSequence seq;
            seq.frames = to_frames(clean);
            seq.id = "py";
            const VideoSequence noisy = corrupt(seq, model_from(kind, sigma, a, b, iso), seed);
            return from_frames(noisy.frames);
        },
        py::arg("clean"), py::arg("kind") = "awgn", py::arg("sigma") = 0.1, py::arg("a") = 0.0,
        py::arg("b") = 0.0, py::arg("iso") = 0, py::arg("seed") = 1,
        "Add i.i.d. noise to a [T,H,W,C] clip; deterministic per seed.");

    m.def(
        "sample_recorruption",
        [](const std::vector<int>& hwc, const std::string& kind, double sigma, double a, double b,
           int iso, py::object ref, uint64_t seed) {
            if (hwc.size() != 3) throw InputError("shape must be (H, W, C)");
            const std::vector<int> shape{hwc[2], hwc[0], hwc[1]};
            Tensor ref_t;
            const Tensor* ref_p = nullptr;
            if (!ref.is_none()) {
                ref_t = to_tensor(ref.cast<Arr>());
                ref_p = &ref_t;
            }
            return from_tensor(
                sample_recorruption(shape, model_from(kind, sigma, a, b, iso), ref_p, seed));
        },
        py::arg("shape"), py::arg("kind") = "awgn", py::arg("sigma") = 0.1, py::arg("a") = 0.0,
        py::arg("b") = 0.0, py::arg("iso") = 0, py::arg("ref") = py::none(), py::arg("seed") = 1,
        "Zero-mean noise field of shape (H, W, C).");

    m.def(
        "psnr", [](const Arr& a, const Arr& b) { return psnr(to_tensor(a), to_tensor(b)); },
        py::arg("a"), py::arg("b"), "PSNR in dB, peak 1.0 (inf for identical inputs).");
    m.def(
        "ssim", [](const Arr& a, const Arr& b) { return ssim(to_tensor(a), to_tensor(b)); },
        py::arg("a"), py::arg("b"), "Windowed SSIM (11x11 Gaussian, sigma 1.5).");

    m.def(
        "backward_warp",
        [](const Arr& f, const Arr& flow) {
            return from_tensor(warp_image(to_tensor(f), flow_to_tensor(flow)));
        },
        py::arg("frame"), py::arg("flow"),
        "Bilinear backward warp: out(p) = frame(p + flow(p)), border-clamped.");

    m.def(
        "build_flow_pyramid",
        [](const Arr& flow, int levels) {
            const FlowPyramid pyr = build_flow_pyramid(flow_to_tensor(flow), levels);
            std::vector<py::array> out;
            for (const auto& l : pyr.levels) out.push_back(from_tensor(l));
            return out;
        },
        py::arg("flow"), py::arg("levels") = 4,
        "Per-level flow fields, 2x2 average-pooled with magnitude halved.");

    m.def(
        "pack_rgbg",
        [](const Arr& mosaic, const std::string& phase) {
            return from_tensor(pack_rgbg_frame(to_tensor(mosaic), phase));
        },
        py::arg("mosaic"), py::arg("cfa_phase") = "rggb",
        "Bayer mosaic [H,W] -> packed [H/2,W/2,4] in (R, G1, B, G2) order.");
    m.def(
        "unpack_rgbg",
        [](const Arr& packed, const std::string& phase) {
            return from_tensor(unpack_rgbg_frame(to_tensor(packed), phase));
        },
        py::arg("packed"), py::arg("cfa_phase") = "rggb");

    m.def(
        "window_positions",
        [](int length, int t, int T) {
            VideoSequence seq;
            for (int i = 0; i < length; ++i) seq.frames.push_back(Tensor({1, 8, 8}));
            seq.id = "probe";
            return extract_window(seq, t, T).source_positions;
        },
        py::arg("length"), py::arg("t"), py::arg("T"),
        "Temporal window source indices with reflection padding.");

    m.def(
        "gaussian_denoise",
        [](const Arr& frame, double sigma_k) {
            return from_tensor(GaussianSmoother(sigma_k).denoise(to_tensor(frame)));
        },
        py::arg("frame"), py::arg("sigma_k") = 1.2, "The classical frozen denoiser prior.");

    m.def(
        "joint_input",
        [](const Arr& frame, double sigma_k) {
            const GaussianSmoother d(sigma_k);
            const JointInput j = make_joint_input(to_tensor(frame), d);
            return py::make_tuple(from_tensor(j.baseline), from_tensor(j.residual));
        },
        py::arg("frame"), py::arg("sigma_k") = 1.2,
        "(baseline, residual) with baseline + residual == frame.");

    m.def(
        "estimate_flow",
        [](const Arr& src, const Arr& dst, int radius, int block) {
            const BlockMatchingFlow bm(radius, block);
            return from_tensor(estimate_flow(bm, to_tensor(src), to_tensor(dst)));
        },
        py::arg("src"), py::arg("dst"), py::arg("radius") = 8, py::arg("block") = 9,
        "Block-matching flow in backward-warp convention ([H,W,2]).");

    py::class_<SyntheticClip>(m, "SyntheticClip")
        .def_property_readonly("frames",
                               [](const SyntheticClip& c) { return from_frames(c.clean.frames); })
        .def("flow",
             [](const SyntheticClip& c, int src, int dst) { return from_tensor(c.flow->flow(src, dst)); },
             py::arg("src"), py::arg("dst"),
             "Exact dense flow src->dst in backward-warp convention.")
        .def("occlusion",
             [](const SyntheticClip& c, int src, int dst) {
                 return from_tensor(c.flow->occlusion(src, dst));
             },
             py::arg("src"), py::arg("dst"));

    m.def(
        "generate_synthetic",
        [](int height, int width, int length, int channels, int sprites, double vel_min,
           double vel_max, uint64_t seed) {
            SceneSpec spec;
            spec.height = height;
            spec.width = width;
            spec.length = length;
            spec.channels = channels;
            spec.sprites = sprites;
            spec.vel_min = vel_min;
            spec.vel_max = vel_max;
            return generate_synthetic(spec, seed);
        },
        py::arg("height") = 64, py::arg("width") = 64, py::arg("length") = 20,
        py::arg("channels") = 3, py::arg("sprites") = 3, py::arg("vel_min") = 0.4,
        py::arg("vel_max") = 1.6, py::arg("seed") = 1,
        "Textured translating-sprite clip with analytic ground-truth flow.");
}
