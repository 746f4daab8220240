#pragma once

#include <string>

#include "f2r/core/tensor.hpp"

namespace f2r {

// Frame I/O. Tensors are [Ch,H,W] in [0,1]; files are 8- or 16-bit PNG
// (grayscale or RGB) or binary PGM/PPM. Values are clipped on export and
// normalized by the max code value on import.
Tensor read_image(const std::string& path);
void write_image(const std::string& path, const Tensor& frame, int bit_depth = 16);

// Middlebury-style .flo: float32 magic 202021.25, int32 width, height,
// then row-major interleaved (dx, dy) float32 pairs. The field is stored
// in backward-warp convention.
Tensor read_flo(const std::string& path);
void write_flo(const std::string& path, const Tensor& flow);

}  // namespace f2r
