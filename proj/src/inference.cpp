#include "f2r/infer/inference.hpp"

#include <cmath>
#include <filesystem>

#include "f2r/core/image_io.hpp"

namespace fs = std::filesystem;

namespace f2r {

int alignment_receptive_radius(const ArchConfig& arch, int max_flow_px) {
    return (arch.dcn_k + 1) / 2 + 1 + max_flow_px;
}

ModelState load_refiner(const std::string& path) {
    ModelState st = load_model(path);
    if (st.mode != Mode::nonblind)
        throw ModeError("inference deploys only the trained Spatial Refiner; '" + path +
                        "' holds a blind Stage-1 state");
    return st;
}

namespace {

TrainConfig view_config(const ModelState& st, const InferenceConfig& cfg) {
    TrainConfig tc;
    tc.window = cfg.window;
    tc.arch = st.arch;
    tc.joint_inputs = true;
    tc.stacked = false;
    return tc;
}

int pad_to_multiple(int v, int m) { return (v % m == 0) ? 0 : m - v % m; }

Tensor reflect_pad(const Tensor& f, int py, int px) {
    if (py == 0 && px == 0) return f;
    const int c = f.dim(0), h = f.dim(1), w = f.dim(2);
    Tensor out({c, h + py, w + px});
    auto reflect = [](int i, int n) {
        const int p = 2 * n - 2;
        int m = ((i % p) + p) % p;
        return m < n ? m : p - m;
    };
    for (int ci = 0; ci < c; ++ci)
        for (int y = 0; y < h + py; ++y)
            for (int x = 0; x < w + px; ++x)
                out.at(ci, y, x) = f.at(ci, reflect(y, h), reflect(x, w));
    return out;
}

Tensor frame_window_estimate(const ModelState& st, const VideoSequence& noisy, int t,
                             const PriorSet& priors, const TrainConfig& tc) {
    return refine_estimate_frame(st, noisy, t, priors, tc);
}

}  // namespace

Tensor denoise_frame_at(const ModelState& refiner, const VideoSequence& noisy, int t,
                        const PriorSet& priors, const InferenceConfig& cfg) {
    if (refiner.mode != Mode::nonblind)
        throw ModeError("denoise_frame_at: state is not a spatial refiner");
    TrainConfig tc = view_config(refiner, cfg);
    if (cfg.window != refiner.arch.window)
        throw ConfigError("inference.window " + std::to_string(cfg.window) +
                          " does not match the checkpoint window " +
                          std::to_string(refiner.arch.window));

    const int mult = 1 << (refiner.arch.levels - 1);
    const int py = pad_to_multiple(noisy.height(), mult);
    const int px = pad_to_multiple(noisy.width(), mult);
    if (py == 0 && px == 0) return frame_window_estimate(refiner, noisy, t, priors, tc);

    if (priors.flow->describe() == "ground_truth")
        throw ConfigError("frames of " + std::to_string(noisy.height()) + "x" +
                          std::to_string(noisy.width()) + " need padding, which the ground_truth "
                          "flow prior cannot serve; use prior.flow = block_matching");
    VideoSequence padded = noisy;
    for (auto& f : padded.frames) f = reflect_pad(f, py, px);
    padded.gt_flow.reset();
    Tensor est = frame_window_estimate(refiner, padded, t, priors, tc);
    return slice_spatial(est, 0, 0, noisy.height(), noisy.width());
}

namespace {

Tensor denoise_frame_tiled(const ModelState& refiner, const VideoSequence& noisy, int t,
                           const PriorSet& priors, const InferenceConfig& cfg) {
    const int h = noisy.height(), w = noisy.width(), ch = noisy.channels();
    const int tile = cfg.tile, ov = cfg.tile_overlap;
    const int radius = alignment_receptive_radius(refiner.arch, cfg.max_flow_px);
    if (ov < radius)
        throw ConfigError("inference.tile_overlap " + std::to_string(ov) +
                          " is below the alignment receptive radius " + std::to_string(radius));
    if (tile <= ov) throw ConfigError("inference.tile must exceed the overlap");
    const int mult = 1 << (refiner.arch.levels - 1);
    if (tile % mult != 0)
        throw ConfigError("inference.tile must be a multiple of " + std::to_string(mult));

    TrainConfig tc = view_config(refiner, cfg);
    Tensor acc({ch, h, w});
    Tensor wsum({1, h, w});
    auto positions = [&](int n) {
        std::vector<int> p;
        for (int o = 0;; o += tile - ov) {
            if (o + tile >= n) {
                p.push_back(std::max(0, n - tile));
                break;
            }
            p.push_back(o);
        }
        return p;
    };
    auto ramp = [&](int i, int o, int n) {
        double wgt = 1.0;
        if (o > 0) wgt = std::min(wgt, (i + 1.0) / (ov + 1.0));
        if (o + tile < n) wgt = std::min(wgt, (tile - i) / (ov + 1.0));
        return wgt;
    };

    for (int oy : positions(h)) {
        for (int ox : positions(w)) {
            VideoSequence sub = noisy;
            for (auto& f : sub.frames) f = slice_spatial(f, oy, ox, std::min(tile, h), std::min(tile, w));
            // crop-aware flow lookups keep the ground-truth prior usable
            struct CropStore : GroundTruthFlow {
                std::shared_ptr<const GroundTruthFlow> base;
                int oy, ox, h, w;
                int frame_count() const override { return base->frame_count(); }
                int height() const override { return h; }
                int width() const override { return w; }
                Tensor flow(int s, int d) const override {
                    return slice_spatial(base->flow(s, d), oy, ox, h, w);
                }
                Tensor occlusion(int s, int d) const override {
                    return slice_spatial(base->occlusion(s, d), oy, ox, h, w);
                }
            };
            if (noisy.gt_flow) {
                auto cs = std::make_shared<CropStore>();
                cs->base = noisy.gt_flow;
                cs->oy = oy;
                cs->ox = ox;
                cs->h = std::min(tile, h);
                cs->w = std::min(tile, w);
                sub.gt_flow = cs;
            }
            Tensor est = frame_window_estimate(refiner, sub, t, priors, tc);
            for (int c = 0; c < ch; ++c)
                for (int y = 0; y < est.dim(1); ++y)
                    for (int x = 0; x < est.dim(2); ++x) {
                        const double wgt = ramp(y, oy, h) * ramp(x, ox, w);
                        acc.at(c, oy + y, ox + x) += static_cast<float>(wgt * est.at(c, y, x));
                        if (c == 0) wsum.at(0, oy + y, ox + x) += static_cast<float>(wgt);
                    }
        }
    }
    for (int c = 0; c < ch; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) acc.at(c, y, x) /= wsum.at(0, y, x);
    return acc;
}

}  // namespace

VideoSequence denoise_video(const ModelState& refiner, const VideoSequence& noisy,
                            const PriorSet& priors, const InferenceConfig& cfg) {
    noisy.validate();
    const uint64_t draws_before = rng_draw_counter().load();
    VideoSequence out = noisy;
    out.id = noisy.id;
    out.noise_meta.reset();
    for (int t = 0; t < noisy.length(); ++t) {
        out.frames[static_cast<std::size_t>(t)] =
            (cfg.tile > 0 && (noisy.height() > cfg.tile || noisy.width() > cfg.tile))
                ? denoise_frame_tiled(refiner, noisy, t, priors, cfg)
                : denoise_frame_at(refiner, noisy, t, priors, cfg);
    }
    if (rng_draw_counter().load() != draws_before)
        throw ModeError("inference sampled from an RNG; the deployment path must be draw-free");
    return out;
}

namespace {

Tensor demosaic_bilinear(const Tensor& mosaic, const std::string& cfa_phase) {
    // visualization-only nearest/bilinear fill of the Bayer grid
    const Tensor packed = pack_rgbg_frame(mosaic, cfa_phase);
    const int h = mosaic.dim(1), w = mosaic.dim(2);
    Tensor rgb({3, h, w});
    const int hh = h / 2, hw = w / 2;
    auto bil = [&](int ch, double y, double x) {
        y = std::min(std::max(y, 0.0), hh - 1.0);
        x = std::min(std::max(x, 0.0), hw - 1.0);
        const int y0 = static_cast<int>(y), x0 = static_cast<int>(x);
        const int y1 = std::min(y0 + 1, hh - 1), x1 = std::min(x0 + 1, hw - 1);
        const double fy = y - y0, fx = x - x0;
        return (1 - fy) * ((1 - fx) * packed.at(ch, y0, x0) + fx * packed.at(ch, y0, x1)) +
               (1 - fy) * 0.0 + fy * ((1 - fx) * packed.at(ch, y1, x0) + fx * packed.at(ch, y1, x1));
    };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double py = (y - 0.5) / 2.0, px = (x - 0.5) / 2.0;
            rgb.at(0, y, x) = static_cast<float>(bil(0, py, px));
            rgb.at(1, y, x) = static_cast<float>(0.5 * (bil(1, py, px) + bil(3, py, px)));
            rgb.at(2, y, x) = static_cast<float>(bil(2, py, px));
        }
    return rgb;
}

}  // namespace

void export_video(const std::string& dir, const VideoSequence& seq, int bit_depth,
                  const std::string& cfa_phase, bool demosaic_preview) {
    fs::create_directories(dir);
    for (int f = 0; f < seq.length(); ++f) {
        char name[32];
        std::snprintf(name, sizeof(name), "%05d.png", f);
        const Tensor& frame = seq.frames[static_cast<std::size_t>(f)];
        if (seq.layout == Layout::rgbg_packed) {
            const Tensor mosaic = unpack_rgbg_frame(frame, cfa_phase);
            write_image((fs::path(dir) / name).string(), mosaic, bit_depth);
            if (demosaic_preview) {
                char pname[40];
                std::snprintf(pname, sizeof(pname), "preview_%05d.png", f);
                write_image((fs::path(dir) / pname).string(), demosaic_bilinear(mosaic, cfa_phase), 8);
            }
        } else {
            write_image((fs::path(dir) / name).string(), frame, bit_depth);
        }
    }
}

void write_side_by_side(const std::string& path, const std::vector<Tensor>& frames,
                        int bit_depth) {
    if (frames.empty()) throw InputError("write_side_by_side: no frames");
    const int ch = frames[0].dim(0), h = frames[0].dim(1);
    const int gap = 2;
    int wtot = 0;
    for (const auto& f : frames) {
        if (f.dim(0) != ch || f.dim(1) != h)
            throw InputError("write_side_by_side: inconsistent frame shapes");
        wtot += f.dim(2) + gap;
    }
    wtot -= gap;
    Tensor grid({ch, h, wtot}, 1.0f);
    int off = 0;
    for (const auto& f : frames) {
        for (int c = 0; c < ch; ++c)
            for (int y = 0; y < h; ++y)
                std::copy(&f.at(c, y, 0), &f.at(c, y, 0) + f.dim(2), &grid.at(c, y, off));
        off += f.dim(2) + gap;
    }
    write_image(path, grid, bit_depth);
}

}  // namespace f2r
