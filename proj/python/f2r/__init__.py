"""F2R: two-stage self-supervised video denoising, core operations.

The heavy lifting lives in the C++ extension; this package re-exports it.
Training and the full pipeline are driven by the `f2r` CLI.
"""

from ._core import (
    SyntheticClip,
    backward_warp,
    build_flow_pyramid,
    corrupt,
    estimate_flow,
    gaussian_denoise,
    generate_synthetic,
    joint_input,
    pack_rgbg,
    psnr,
    sample_recorruption,
    ssim,
    unpack_rgbg,
    window_positions,
)

__all__ = [
    "SyntheticClip",
    "backward_warp",
    "build_flow_pyramid",
    "corrupt",
    "estimate_flow",
    "gaussian_denoise",
    "generate_synthetic",
    "joint_input",
    "pack_rgbg",
    "psnr",
    "sample_recorruption",
    "ssim",
    "unpack_rgbg",
    "window_positions",
]
