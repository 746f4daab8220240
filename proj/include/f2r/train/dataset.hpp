#pragma once

#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "f2r/data/synth.hpp"
#include "f2r/data/video.hpp"
#include "f2r/noise/noise_model.hpp"

namespace f2r {

// Desk-scale data settings. Generation is deterministic in gen_seed; the
// noisy stream is deterministic in noise_seed, so training never depends
// on sampling order.
struct DataConfig {
    int height = 64, width = 64;
    int clip_len = 20;
    int clips = 6;
    int val_clips = 2;
    int channels = 3;
    std::string layout = "srgb";  // srgb | rgbg
    std::string cfa_phase = "rggb";
    int sprites = 3;
    double vel_min = 0.4, vel_max = 1.6;
    int texture_cells = 6;
    int bg_cells = 8;
    uint64_t gen_seed = 11;
    uint64_t noise_seed = 77;
    int flow_radius = 4;  // furthest exported (i -> t) pair distance
    int window_T = 5;     // used for the velocity sanity check
    int patch = 32;

    SceneSpec scene_spec() const;
};

struct Dataset {
    std::vector<VideoSequence> train_noisy;
    std::vector<VideoSequence> train_clean;  // empty for external noisy footage
    std::vector<VideoSequence> val_noisy;
    std::vector<VideoSequence> val_clean;
    NoiseModel noise;
    bool has_clean = true;

    void validate() const;
};

// In-memory generation (analytic ground-truth flow attached).
Dataset build_synthetic_dataset(const DataConfig& cfg, const NoiseModel& noise);

// Disk round trip: gen-data writes clips/<id>/%05d.png plus flows/<id>/
// <i>_<j>.flo, occlusion masks and meta.json; training ingests the same
// layout. Ingested clean clips are corrupted on load with noise_seed.
void export_dataset(const DataConfig& cfg, const std::string& dir);
Dataset load_dataset(const std::string& dir, const NoiseModel& noise, uint64_t noise_seed);

// Ground-truth flow store backed by exported .flo files.
class FileFlowStore : public GroundTruthFlow {
public:
    FileFlowStore(std::string dir, int frames, int height, int width, int radius);
    int frame_count() const override { return frames_; }
    int height() const override { return height_; }
    int width() const override { return width_; }
    Tensor flow(int src, int dst) const override;
    Tensor occlusion(int src, int dst) const override;

private:
    std::string dir_;
    int frames_, height_, width_, radius_;
    mutable std::mutex mu_;
    mutable std::map<std::pair<int, int>, Tensor> cache_;
};

}  // namespace f2r
