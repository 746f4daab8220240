#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "f2r/core/tensor.hpp"
#include "f2r/noise/noise_model.hpp"

namespace f2r {

enum class Layout { srgb, rgbg_packed };

// Dense ground-truth displacement oracle for synthetic clips. flow(i, j)
// is defined on the frame-j grid in backward-warp convention:
// warp(frame_i, flow(i, j)) reproduces frame_j on non-occluded pixels.
// occlusion(i, j) is [1,H,W] with 1 where that correspondence is invalid.
class GroundTruthFlow {
public:
    virtual ~GroundTruthFlow() = default;
    virtual int frame_count() const = 0;
    virtual int height() const = 0;
    virtual int width() const = 0;
    virtual Tensor flow(int src, int dst) const = 0;
    virtual Tensor occlusion(int src, int dst) const = 0;
};

// Ordered frames of one clip. Frames are [Ch,H,W] in normalized
// intensities; rgbg_packed means Ch = 4 at half the Bayer resolution.
struct VideoSequence {
    std::vector<Tensor> frames;
    Layout layout = Layout::srgb;
    std::optional<NoiseModel> noise_meta;
    std::string id;
    std::shared_ptr<const GroundTruthFlow> gt_flow;

    int length() const { return static_cast<int>(frames.size()); }
    int channels() const { return frames.empty() ? 0 : frames[0].dim(0); }
    int height() const { return frames.empty() ? 0 : frames[0].dim(1); }
    int width() const { return frames.empty() ? 0 : frames[0].dim(2); }
    void validate() const;  // uniform shapes, layout constraints
};

// T consecutive frames centered at t, out-of-range indices filled via
// temporal reflection. Crop origin is carried so ground-truth flow can be
// sliced consistently with the pixels.
struct TemporalWindow {
    std::vector<Tensor> frames;
    int window_size = 0;             // T
    int center_pos = 0;              // (T-1)/2
    int center_source = 0;           // original t
    std::vector<int> source_positions;
    int crop_y = 0, crop_x = 0;
    std::string seq_id;
    std::shared_ptr<const GroundTruthFlow> gt_flow;

    const Tensor& center_frame() const { return frames[static_cast<std::size_t>(center_pos)]; }
    std::vector<int> neighbor_positions_in_window() const;
};

// Reflection rule for out-of-range frame indices: -1 -> 1, n -> n-2, with
// multi-bounce for windows longer than the clip.
int reflect_index(int i, int n);

TemporalWindow extract_window(const VideoSequence& seq, int t, int T);

TemporalWindow crop_patch(const TemporalWindow& window, int size, uint64_t seed);

// [C,H,W] spatial slice helper shared by crops and flow lookups.
Tensor slice_spatial(const Tensor& t, int y0, int x0, int h, int w);

// Bayer mosaic [1,H,W] (even dims) -> packed [4,H/2,W/2], channel order
// (R, G1, B, G2). The phase string gives the top-left 2x2 layout.
VideoSequence pack_rgbg(const VideoSequence& bayer, const std::string& cfa_phase = "rggb");
Tensor pack_rgbg_frame(const Tensor& mosaic, const std::string& cfa_phase = "rggb");
VideoSequence unpack_rgbg(const VideoSequence& packed, const std::string& cfa_phase = "rggb");
Tensor unpack_rgbg_frame(const Tensor& packed, const std::string& cfa_phase = "rggb");

}  // namespace f2r
