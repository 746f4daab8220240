#include "f2r/data/video.hpp"

#include <algorithm>

#include "f2r/core/errors.hpp"
#include "f2r/core/rng.hpp"

namespace f2r {

void VideoSequence::validate() const {
    if (frames.empty()) throw InputError("sequence '" + id + "' has no frames");
    const auto& s0 = frames[0].shape;
    if (frames[0].ndim() != 3) throw InputError("frames must be [Ch,H,W]");
    for (const auto& f : frames)
        if (f.shape != s0) throw InputError("sequence '" + id + "' has non-uniform frame shapes");
    if (layout == Layout::rgbg_packed && s0[0] != 4)
        throw InputError("rgbg_packed sequence must have 4 channels");
}

std::vector<int> TemporalWindow::neighbor_positions_in_window() const {
    std::vector<int> out;
    for (int i = 0; i < window_size; ++i)
        if (i != center_pos) out.push_back(i);
    return out;
}

int reflect_index(int i, int n) {
    if (n <= 0) throw InputError("reflect_index: empty range");
    if (n == 1) return 0;
    const int p = 2 * n - 2;
    int m = ((i % p) + p) % p;
    return m < n ? m : p - m;
}

TemporalWindow extract_window(const VideoSequence& seq, int t, int T) {
    seq.validate();
    if (T % 2 == 0) throw ConfigError("window size T must be odd, got " + std::to_string(T));
    if (T < 3) throw ConfigError("window size T must be >= 3");
    if (t < 0 || t >= seq.length())
        throw InputError("center index " + std::to_string(t) + " outside sequence of length " +
                         std::to_string(seq.length()));
    TemporalWindow w;
    w.window_size = T;
    w.center_pos = (T - 1) / 2;
    w.center_source = t;
    w.seq_id = seq.id;
    w.gt_flow = seq.gt_flow;
    const int half = (T - 1) / 2;
    for (int k = -half; k <= half; ++k) {
        const int src = reflect_index(t + k, seq.length());
        w.source_positions.push_back(src);
        w.frames.push_back(seq.frames[static_cast<std::size_t>(src)]);
    }
    return w;
}

Tensor slice_spatial(const Tensor& t, int y0, int x0, int h, int w) {
    if (t.ndim() != 3) throw InputError("slice_spatial: expects [C,H,W]");
    if (y0 < 0 || x0 < 0 || y0 + h > t.dim(1) || x0 + w > t.dim(2))
        throw InputError("slice_spatial: window out of range");
    Tensor out({t.dim(0), h, w});
    for (int c = 0; c < t.dim(0); ++c)
        for (int y = 0; y < h; ++y)
            std::copy(&t.at(c, y0 + y, x0), &t.at(c, y0 + y, x0) + w, &out.at(c, y, 0));
    return out;
}

TemporalWindow crop_patch(const TemporalWindow& window, int size, uint64_t seed) {
    if (window.frames.empty()) throw InputError("crop_patch: empty window");
    const int h = window.frames[0].dim(1), w = window.frames[0].dim(2);
    if (size > h || size > w)
        throw ConfigError("patch size " + std::to_string(size) + " exceeds frame " +
                          std::to_string(h) + "x" + std::to_string(w));
    Rng rng(seed);
    const int y0 = rng.uniform_int(h - size + 1);
    const int x0 = rng.uniform_int(w - size + 1);
    TemporalWindow out = window;
    out.crop_y = window.crop_y + y0;
    out.crop_x = window.crop_x + x0;
    for (auto& f : out.frames) f = slice_spatial(f, y0, x0, size, size);
    return out;
}

namespace {

// Offsets of (R, G1, B, G2) within the repeating 2x2 cell.
struct CfaOffsets {
    int ry, rx, g1y, g1x, by, bx, g2y, g2x;
};

CfaOffsets cfa_offsets(const std::string& phase) {
    // Phase names the 2x2 cell reading order: row 0 then row 1.
    if (phase == "rggb") return {0, 0, 0, 1, 1, 1, 1, 0};
    if (phase == "bggr") return {1, 1, 1, 0, 0, 0, 0, 1};
    if (phase == "grbg") return {0, 1, 0, 0, 1, 0, 1, 1};
    if (phase == "gbrg") return {1, 0, 1, 1, 0, 1, 0, 0};
    throw ConfigError("unknown CFA phase '" + phase + "'");
}

}  // namespace

Tensor pack_rgbg_frame(const Tensor& mosaic, const std::string& cfa_phase) {
    if (mosaic.ndim() != 3 || mosaic.dim(0) != 1)
        throw InputError("pack_rgbg: expects single-channel mosaic");
    const int h = mosaic.dim(1), w = mosaic.dim(2);
    if (h % 2 != 0 || w % 2 != 0) throw InputError("pack_rgbg: dimensions must be even");
    const auto o = cfa_offsets(cfa_phase);
    Tensor out({4, h / 2, w / 2});
    for (int y = 0; y < h / 2; ++y)
        for (int x = 0; x < w / 2; ++x) {
            out.at(0, y, x) = mosaic.at(0, 2 * y + o.ry, 2 * x + o.rx);
            out.at(1, y, x) = mosaic.at(0, 2 * y + o.g1y, 2 * x + o.g1x);
            out.at(2, y, x) = mosaic.at(0, 2 * y + o.by, 2 * x + o.bx);
            out.at(3, y, x) = mosaic.at(0, 2 * y + o.g2y, 2 * x + o.g2x);
        }
    return out;
}

Tensor unpack_rgbg_frame(const Tensor& packed, const std::string& cfa_phase) {
    if (packed.ndim() != 3 || packed.dim(0) != 4)
        throw InputError("unpack_rgbg: expects 4-channel packed frame");
    const auto o = cfa_offsets(cfa_phase);
    const int h = packed.dim(1) * 2, w = packed.dim(2) * 2;
    Tensor out({1, h, w});
    for (int y = 0; y < h / 2; ++y)
        for (int x = 0; x < w / 2; ++x) {
            out.at(0, 2 * y + o.ry, 2 * x + o.rx) = packed.at(0, y, x);
            out.at(0, 2 * y + o.g1y, 2 * x + o.g1x) = packed.at(1, y, x);
            out.at(0, 2 * y + o.by, 2 * x + o.bx) = packed.at(2, y, x);
            out.at(0, 2 * y + o.g2y, 2 * x + o.g2x) = packed.at(3, y, x);
        }
    return out;
}

VideoSequence pack_rgbg(const VideoSequence& bayer, const std::string& cfa_phase) {
    bayer.validate();
    VideoSequence out = bayer;
    out.layout = Layout::rgbg_packed;
    for (auto& f : out.frames) f = pack_rgbg_frame(f, cfa_phase);
    return out;
}

VideoSequence unpack_rgbg(const VideoSequence& packed, const std::string& cfa_phase) {
    packed.validate();
    VideoSequence out = packed;
    out.layout = Layout::srgb;
    for (auto& f : out.frames) f = unpack_rgbg_frame(f, cfa_phase);
    return out;
}

}  // namespace f2r
