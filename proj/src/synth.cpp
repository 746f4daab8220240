#include "f2r/data/synth.hpp"

#include <algorithm>
#include <cmath>

#include "f2r/core/errors.hpp"
#include "f2r/core/rng.hpp"

namespace f2r {

void SceneSpec::validate() const {
    if (height < 16 || width < 16) throw ConfigError("scene: resolution too small");
    if (length < 1) throw ConfigError("scene: length must be >= 1");
    if (channels < 1) throw ConfigError("scene: channels must be >= 1");
    if (sprites < 0) throw ConfigError("scene: sprite count must be >= 0");
    if (vel_min < 0.0 || vel_max < vel_min) throw ConfigError("scene: bad velocity range");
    if (sprite_max_size + 2.0 * margin >= std::min(height, width))
        throw ConfigError("scene: sprites do not fit inside the frame");
    if (check_window_T > 0 && check_patch > 0) {
        const double max_disp = vel_max * (check_window_T - 1) / 2.0;
        if (max_disp > check_patch / 2.0)
            throw ConfigError("scene: velocity " + std::to_string(vel_max) +
                              " px/frame exceeds half the patch per window (max displacement " +
                              std::to_string(max_disp) + " px, patch " + std::to_string(check_patch) +
                              ")");
    }
}

namespace {

// Continuous bilinear lookup into a [Ch, n, n] value grid; u,v are scaled
// to the grid before sampling. Border-clamped.
float grid_sample(const Tensor& grid, int ch, double gy, double gx) {
    const int n = grid.dim(1);
    gy = std::min(std::max(gy, 0.0), static_cast<double>(n - 1));
    gx = std::min(std::max(gx, 0.0), static_cast<double>(n - 1));
    const int y0 = static_cast<int>(gy), x0 = static_cast<int>(gx);
    const int y1 = std::min(y0 + 1, n - 1), x1 = std::min(x0 + 1, n - 1);
    const double fy = gy - y0, fx = gx - x0;
    return static_cast<float>((1.0 - fy) * ((1.0 - fx) * grid.at(ch, y0, x0) + fx * grid.at(ch, y0, x1)) +
                              fy * ((1.0 - fx) * grid.at(ch, y1, x0) + fx * grid.at(ch, y1, x1)));
}

Tensor random_grid(int channels, int cells, Rng& rng, double lo, double hi) {
    Tensor g({channels, cells + 1, cells + 1});
    for (auto& v : g.data) v = static_cast<float>(rng.uniform(lo, hi));
    return g;
}

struct SpriteRect {
    double ox, oy;  // offset at the queried frame
};

inline SpriteRect rect_at(const AnalyticSceneFlow::Sprite& s, int f) {
    return {s.x0 + s.vx * f, s.y0 + s.vy * f};
}

inline bool inside(const AnalyticSceneFlow::Sprite& s, const SpriteRect& r, double x, double y,
                   double expand = 0.0) {
    return x >= r.ox - expand && x <= r.ox + (s.w - 1) + expand && y >= r.oy - expand &&
           y <= r.oy + (s.h - 1) + expand;
}

}  // namespace

AnalyticSceneFlow::AnalyticSceneFlow(int frames, int height, int width,
                                     std::vector<Sprite> sprites, double edge_band)
    : frames_(frames), height_(height), width_(width), sprites_(std::move(sprites)),
      edge_band_(edge_band) {}

int AnalyticSceneFlow::sprite_at(double x, double y, int f) const {
    // Later sprites are drawn on top.
    for (int s = static_cast<int>(sprites_.size()) - 1; s >= 0; --s)
        if (inside(sprites_[static_cast<std::size_t>(s)], rect_at(sprites_[static_cast<std::size_t>(s)], f), x, y))
            return s;
    return -1;
}

Tensor AnalyticSceneFlow::flow(int src, int dst) const {
    if (src < 0 || src >= frames_ || dst < 0 || dst >= frames_)
        throw InputError("gt flow: frame index out of range");
    {
        std::lock_guard<std::mutex> lk(mu_);
        auto it = flow_cache_.find({src, dst});
        if (it != flow_cache_.end()) return it->second;
    }
    Tensor v({2, height_, width_});
    if (src != dst) {
        for (int y = 0; y < height_; ++y)
            for (int x = 0; x < width_; ++x) {
                const int s = sprite_at(x, y, dst);
                if (s >= 0) {
                    const auto& sp = sprites_[static_cast<std::size_t>(s)];
                    // Rigid translation: the texel seen at p in `dst` sits at
                    // p + u*(src-dst) in `src`, which is the backward-warp offset.
                    v.at(0, y, x) = static_cast<float>(sp.vx * (src - dst));
                    v.at(1, y, x) = static_cast<float>(sp.vy * (src - dst));
                }
            }
    }
    std::lock_guard<std::mutex> lk(mu_);
    return flow_cache_.emplace(std::make_pair(src, dst), std::move(v)).first->second;
}

Tensor AnalyticSceneFlow::occlusion(int src, int dst) const {
    if (src < 0 || src >= frames_ || dst < 0 || dst >= frames_)
        throw InputError("gt occlusion: frame index out of range");
    {
        std::lock_guard<std::mutex> lk(mu_);
        auto it = occ_cache_.find({src, dst});
        if (it != occ_cache_.end()) return it->second;
    }
    const Tensor v = flow(src, dst);
    Tensor occ({1, height_, width_});
    for (int y = 0; y < height_; ++y)
        for (int x = 0; x < width_; ++x) {
            const double qx = x + v.at(0, y, x);
            const double qy = y + v.at(1, y, x);
            bool bad = qx < 0.0 || qx > width_ - 1.0 || qy < 0.0 || qy > height_ - 1.0;
            const int content = sprite_at(x, y, dst);
            if (!bad && content >= 0) {
                const auto& sp = sprites_[static_cast<std::size_t>(content)];
                const auto r = rect_at(sp, dst);
                // Mixed pixels at the sprite edge are excluded.
                const double d = std::min(std::min(x - r.ox, r.ox + (sp.w - 1) - x),
                                          std::min(y - r.oy, r.oy + (sp.h - 1) - y));
                if (d < edge_band_) bad = true;
            }
            if (!bad) {
                // Anything drawn above the content at the source location
                // hides it (bilinear corners included via the band).
                for (int s = content + 1; s < static_cast<int>(sprites_.size()) && !bad; ++s)
                    if (inside(sprites_[static_cast<std::size_t>(s)],
                               rect_at(sprites_[static_cast<std::size_t>(s)], src), qx, qy, edge_band_))
                        bad = true;
            }
            occ.at(0, y, x) = bad ? 1.0f : 0.0f;
        }
    std::lock_guard<std::mutex> lk(mu_);
    return occ_cache_.emplace(std::make_pair(src, dst), std::move(occ)).first->second;
}

SyntheticClip generate_synthetic(const SceneSpec& spec, uint64_t seed) {
    spec.validate();
    Rng rng(hash_seed(seed, 0xa11ce));

    std::vector<AnalyticSceneFlow::Sprite> sprites;
    for (int s = 0; s < spec.sprites; ++s) {
        AnalyticSceneFlow::Sprite sp;
        sp.w = spec.sprite_min_size + rng.uniform_int(spec.sprite_max_size - spec.sprite_min_size + 1);
        sp.h = spec.sprite_min_size + rng.uniform_int(spec.sprite_max_size - spec.sprite_min_size + 1);
        const double speed = rng.uniform(spec.vel_min, spec.vel_max);
        const double ang = rng.uniform(0.0, 6.283185307179586);
        sp.vx = speed * std::cos(ang);
        sp.vy = speed * std::sin(ang);
        // Shrink velocity until the sprite stays inside the frame for the
        // whole clip, then place it uniformly in the feasible band.
        for (int attempt = 0;; ++attempt) {
            const double tx = sp.vx * (spec.length - 1), ty = sp.vy * (spec.length - 1);
            const double xlo = spec.margin + std::max(0.0, -tx);
            const double xhi = spec.width - 1.0 - sp.w - spec.margin - std::max(0.0, tx);
            const double ylo = spec.margin + std::max(0.0, -ty);
            const double yhi = spec.height - 1.0 - sp.h - spec.margin - std::max(0.0, ty);
            if (xlo <= xhi && ylo <= yhi) {
                sp.x0 = rng.uniform(xlo, xhi);
                sp.y0 = rng.uniform(ylo, yhi);
                break;
            }
            if (attempt > 16) {
                sp.vx = sp.vy = 0.0;
            } else {
                sp.vx *= 0.5;
                sp.vy *= 0.5;
            }
        }
        sp.texture = random_grid(spec.channels, spec.texture_cells, rng, 0.1, 0.9);
        sprites.push_back(std::move(sp));
    }

    const Tensor bg = random_grid(spec.channels, spec.bg_cells, rng, 0.15, 0.85);

    auto flow = std::make_shared<AnalyticSceneFlow>(spec.length, spec.height, spec.width, sprites);

    VideoSequence seq;
    seq.id = "synth-" + std::to_string(seed);
    seq.layout = Layout::srgb;
    seq.gt_flow = flow;
    const double bg_sy = static_cast<double>(spec.bg_cells) / (spec.height - 1);
    const double bg_sx = static_cast<double>(spec.bg_cells) / (spec.width - 1);
    for (int f = 0; f < spec.length; ++f) {
        Tensor frame({spec.channels, spec.height, spec.width});
        for (int y = 0; y < spec.height; ++y)
            for (int x = 0; x < spec.width; ++x) {
                const int s = flow->sprite_at(x, y, f);
                if (s < 0) {
                    for (int c = 0; c < spec.channels; ++c)
                        frame.at(c, y, x) = grid_sample(bg, c, y * bg_sy, x * bg_sx);
                } else {
                    const auto& sp = flow->sprites()[static_cast<std::size_t>(s)];
                    const auto r = rect_at(sp, f);
                    const double ly = (y - r.oy) * spec.texture_cells / (sp.h - 1);
                    const double lx = (x - r.ox) * spec.texture_cells / (sp.w - 1);
                    for (int c = 0; c < spec.channels; ++c)
                        frame.at(c, y, x) = grid_sample(sp.texture, c, ly, lx);
                }
            }
        seq.frames.push_back(std::move(frame));
    }
    return SyntheticClip{std::move(seq), flow};
}

}  // namespace f2r
