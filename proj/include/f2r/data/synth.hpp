#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <utility>

#include "f2r/data/video.hpp"

namespace f2r {

// Desk-scale scene description: band-limited textured sprites translating
// with constant subpixel velocity over a static textured background.
// Motion is rigid, so dense flow and occlusion are known analytically.
struct SceneSpec {
    int height = 64, width = 64;
    int length = 20;
    int channels = 3;
    int sprites = 3;
    double vel_min = 0.4, vel_max = 2.0;  // pixels/frame
    int texture_cells = 6;                // sprite texture grid resolution
    int bg_cells = 8;                     // background texture grid resolution
    int sprite_min_size = 14, sprite_max_size = 24;
    double margin = 2.0;
    // Optional flow-pyramid sanity check: the largest per-window
    // displacement must stay below half the training patch.
    int check_window_T = 0;
    int check_patch = 0;

    void validate() const;
};

class AnalyticSceneFlow : public GroundTruthFlow {
public:
    struct Sprite {
        double x0, y0;    // offset at frame 0
        double vx, vy;    // pixels/frame
        double w, h;      // rect extent in pixels
        Tensor texture;   // [Ch, cells+1, cells+1] grid, sampled bilinearly
    };

    AnalyticSceneFlow(int frames, int height, int width, std::vector<Sprite> sprites,
                      double edge_band = 1.5);

    int frame_count() const override { return frames_; }
    int height() const override { return height_; }
    int width() const override { return width_; }
    Tensor flow(int src, int dst) const override;
    Tensor occlusion(int src, int dst) const override;

    const std::vector<Sprite>& sprites() const { return sprites_; }
    // Index of the top sprite covering (x, y) at frame f, or -1.
    int sprite_at(double x, double y, int f) const;

private:
    int frames_, height_, width_;
    std::vector<Sprite> sprites_;
    double edge_band_;
    mutable std::mutex mu_;
    mutable std::map<std::pair<int, int>, Tensor> flow_cache_;
    mutable std::map<std::pair<int, int>, Tensor> occ_cache_;
};

struct SyntheticClip {
    VideoSequence clean;                           // gt_flow attached
    std::shared_ptr<const AnalyticSceneFlow> flow;
};

SyntheticClip generate_synthetic(const SceneSpec& spec, uint64_t seed);

}  // namespace f2r
