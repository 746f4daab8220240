#pragma once

#include <string>

#include "f2r/train/trainer.hpp"

namespace f2r {

struct InferenceConfig {
    int window = 5;        // T; must match training unless overridden knowingly
    int tile = 0;          // 0 disables spatial tiling
    int tile_overlap = 16;
    int max_flow_px = 8;   // used for the overlap sanity check
    PriorConfig priors;
};

// Conservative reach of the alignment modules in input pixels: kernel tap
// radius plus the largest displacement the flow prior is expected to hand
// the sampler. Tile overlaps below this are rejected.
int alignment_receptive_radius(const ArchConfig& arch, int max_flow_px);

// Loads a checkpoint for deployment; blind (Stage-1) states are refused.
ModelState load_refiner(const std::string& path);

// Eq. 4 for one frame, on the original noisy inputs (no recorruption, no
// noise sampling). Frames whose sides are not multiples of 2^(levels-1)
// are reflection-padded for the forward pass and cropped back.
Tensor denoise_frame_at(const ModelState& refiner, const VideoSequence& noisy, int t,
                        const PriorSet& priors, const InferenceConfig& cfg);

// Per-frame sweep with optional overlap-blended spatial tiling. A draw
// guard verifies that no random sampling happens anywhere in the pass.
VideoSequence denoise_video(const ModelState& refiner, const VideoSequence& noisy,
                            const PriorSet& priors, const InferenceConfig& cfg);

// Frame-folder export mirroring the input layout; values are clipped to
// [0,1] here and nowhere earlier. Packed RGBG sequences are written as
// Bayer mosaics, optionally alongside a naive bilinear demosaic preview.
void export_video(const std::string& dir, const VideoSequence& seq, int bit_depth = 16,
                  const std::string& cfa_phase = "rggb", bool demosaic_preview = false);

// Horizontal side-by-side comparison image (inputs clipped on write).
void write_side_by_side(const std::string& path, const std::vector<Tensor>& frames,
                        int bit_depth = 8);

}  // namespace f2r
