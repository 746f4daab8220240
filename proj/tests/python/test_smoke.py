"""Smoke tests for the f2r extension module."""

import math

import numpy as np
import pytest

import f2r


def test_corrupt_statistics_and_determinism():
    clean = np.full((4, 50, 50, 3), 0.5, dtype=np.float32)
    noisy1 = f2r.corrupt(clean, kind="awgn", sigma=0.1, seed=7)
    noisy2 = f2r.corrupt(clean, kind="awgn", sigma=0.1, seed=7)
    assert np.array_equal(noisy1, noisy2)
    residual = noisy1 - clean
    assert abs(float(residual.mean())) < 3 * 0.1 / math.sqrt(residual.size)
    assert abs(float(residual.std()) - 0.1) < 0.01 * 0.1 * 3
    # zero-sigma corruption is bitwise identity
    assert np.array_equal(f2r.corrupt(clean, sigma=0.0, seed=3), clean)


def test_psnr_and_ssim_reference_points():
    a = np.zeros((32, 32, 1), dtype=np.float32)
    b = a + 0.1
    # float32 0.1 is 0.100000001..., which shifts the true value by ~1.3e-7 dB
    assert f2r.psnr(a, b) == pytest.approx(20.0, abs=1e-6)
    assert f2r.psnr(a, a) == math.inf
    assert f2r.ssim(a, a) == pytest.approx(1.0)


def test_backward_warp_identity_and_shift():
    rng = np.random.default_rng(3)
    frame = rng.random((16, 16, 2), dtype=np.float32)
    zero = np.zeros((16, 16, 2), dtype=np.float32)
    assert np.allclose(f2r.backward_warp(frame, zero), frame, atol=1e-6)
    shift = zero.copy()
    shift[:, :, 0] = 2.0  # sample two pixels to the right
    warped = f2r.backward_warp(frame, shift)
    assert np.allclose(warped[:, :-2, :], frame[:, 2:, :], atol=1e-6)


def test_flow_pyramid_halves_magnitude():
    flow = np.zeros((32, 32, 2), dtype=np.float32)
    flow[:, :, 0] = 8.0
    levels = f2r.build_flow_pyramid(flow, levels=4)
    mags = [float(l[:, :, 0].mean()) for l in levels]
    assert mags == [8.0, 4.0, 2.0, 1.0]


def test_pack_rgbg_round_trip():
    rng = np.random.default_rng(5)
    mosaic = rng.random((8, 8), dtype=np.float32)
    packed = f2r.pack_rgbg(mosaic)
    assert packed.shape == (4, 4, 4)
    back = f2r.unpack_rgbg(packed)
    assert np.array_equal(back[:, :, 0], mosaic)


def test_window_positions_reflect():
    assert f2r.window_positions(10, 0, 5) == [2, 1, 0, 1, 2]
    assert f2r.window_positions(10, 9, 9) == [5, 6, 7, 8, 9, 8, 7, 6, 5]


def test_joint_input_reconstructs():
    rng = np.random.default_rng(11)
    frame = rng.random((24, 24, 3), dtype=np.float32)
    baseline, residual = f2r.joint_input(frame, sigma_k=1.2)
    assert np.allclose(baseline + residual, frame, atol=1e-6)


def test_generate_synthetic_flow_consistency():
    clip = f2r.generate_synthetic(height=48, width=48, length=6, sprites=2, seed=9)
    frames = clip.frames
    assert frames.shape == (6, 48, 48, 3)
    flow = clip.flow(0, 3)
    occ = clip.occlusion(0, 3)
    warped = f2r.backward_warp(frames[0], flow)
    valid = occ[:, :, 0] < 0.5
    assert valid.mean() > 0.5
    err = np.abs(warped - frames[3]).max(axis=2)
    assert float(err[valid].max()) < 0.08


def test_block_matching_recovers_translation():
    clip = f2r.generate_synthetic(height=48, width=48, length=2, sprites=0, seed=2)
    src = clip.frames[0]
    # shift content left by 3 px: the backward-warp field is +3 in x
    dst = np.roll(src, -3, axis=1)
    flow = f2r.estimate_flow(src, dst, radius=5, block=9)
    interior = flow[8:-8, 8:-8, :]
    assert np.mean(np.abs(interior[:, :, 0] - 3.0) < 0.5) > 0.95
    assert np.mean(np.abs(interior[:, :, 1]) < 0.5) > 0.95
