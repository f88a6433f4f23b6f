import numpy as np
import pytest

from egoact.dataio import FrameSequence
from egoact.descriptors import (
    HofParams,
    covariance_descriptor,
    hof_from_flows,
    hof_window_histogram,
    kinematic_features,
    logc_from_flows,
    logc_window_descriptor,
    regularize_covariance,
    vectorize_symmetric,
)
from egoact.errors import ValidationError
from egoact.flow import FlowField, flow_derivatives


def constant_flow(u, v, shape=(16, 16)):
    return FlowField(np.full(shape, float(u)), np.full(shape, float(v)))


def random_flows(rng, count=3, shape=(16, 16), scale=1.0):
    return [
        FlowField(scale * rng.normal(size=shape), scale * rng.normal(size=shape))
        for _ in range(count)
    ]


# ---------------------------------------------------------------------------
# HOF

def test_uniform_rightward_flow_lands_in_bin_zero():
    params = HofParams(grid_size=2, window_len=4, stride=4, min_magnitude=0.0)
    hist = hof_window_histogram([constant_flow(1.0, 0.0)] * 3, params)
    cells = hist.reshape(2, 2, 8)
    assert np.allclose(cells[:, :, 0], 0.25)
    assert np.abs(cells[:, :, 1:]).max() == 0.0
    assert hist.sum() == pytest.approx(1.0, abs=1e-12)


def rotate90(flow):
    return FlowField(-flow.v, flow.u)


@pytest.mark.parametrize("quarter_turns", [1, 2, 3])
def test_hof_cyclic_shift_under_rotation(quarter_turns):
    rng = np.random.default_rng(42)
    params = HofParams(grid_size=3, window_len=4, stride=4, min_magnitude=0.0)
    flows = random_flows(rng)
    rotated = flows
    for _ in range(quarter_turns):
        rotated = [rotate90(f) for f in rotated]
    # raw accumulations shift exactly; the normalized ones only differ by
    # the summation order inside the L1 total
    base = hof_window_histogram(flows, params, normalize=False).reshape(3, 3, 8)
    turned = hof_window_histogram(rotated, params, normalize=False).reshape(3, 3, 8)
    assert np.array_equal(turned, np.roll(base, 2 * quarter_turns, axis=2))
    base_n = hof_window_histogram(flows, params).reshape(3, 3, 8)
    turned_n = hof_window_histogram(rotated, params).reshape(3, 3, 8)
    assert np.allclose(turned_n, np.roll(base_n, 2 * quarter_turns, axis=2), rtol=1e-12)


def test_zero_motion_with_threshold_gives_zero_descriptor():
    params = HofParams(grid_size=2, window_len=4, stride=4, min_magnitude=0.05)
    hist = hof_window_histogram([constant_flow(0.0, 0.0)] * 3, params)
    assert np.abs(hist).max() == 0.0


def test_hof_descriptor_norm_is_zero_or_one():
    rng = np.random.default_rng(1)
    params = HofParams(grid_size=2, window_len=3, stride=1, min_magnitude=0.3)
    for scale in (0.01, 0.2, 1.0, 4.0):
        hist = hof_window_histogram(random_flows(rng, count=2, scale=scale), params)
        assert hist.min() >= 0.0
        total = hist.sum()
        assert abs(total) <= 1e-12 or abs(total - 1.0) <= 1e-12


def test_hof_window_layout():
    rng = np.random.default_rng(2)
    flows = random_flows(rng, count=23)  # a 24-frame video
    params = HofParams(grid_size=4, window_len=16, stride=8)
    dset = hof_from_flows(flows, params)
    assert dset.count == 2
    assert dset.dim == 4 * 4 * 8
    with pytest.raises(ValidationError):
        hof_from_flows(flows[:10], params)  # 11 frames < window_len


# ---------------------------------------------------------------------------
# kinematic features

def rotation_setup(omega=0.1, size=32):
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    center = (size - 1) / 2.0
    flow = FlowField(-omega * (ys - center), omega * (xs - center))
    zero = np.zeros((size, size))
    return flow, flow_derivatives(flow, zero, zero)


def test_kinematics_on_rotation_field():
    flow, deriv = rotation_setup(omega=0.1)
    feats = kinematic_features(deriv, flow)
    div, vort = feats[..., 7], feats[..., 8]
    grad_norm, strain_norm, shear = feats[..., 9], feats[..., 10], feats[..., 11]
    assert np.allclose(div, 0.0, atol=1e-13)
    assert np.allclose(vort, 0.2, atol=1e-13)
    assert np.allclose(shear, 0.0, atol=1e-13)
    assert np.allclose(strain_norm, 0.0, atol=1e-13)
    assert np.allclose(grad_norm, np.sqrt(2) * 0.1, atol=1e-13)


def test_kinematics_on_expansion_field():
    size = 16
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    center = (size - 1) / 2.0
    flow = FlowField(xs - center, ys - center)
    zero = np.zeros((size, size))
    feats = kinematic_features(flow_derivatives(flow, zero, zero), flow)
    assert np.allclose(feats[..., 7], 2.0, atol=1e-13)              # divergence
    assert np.allclose(feats[..., 8], 0.0, atol=1e-13)              # vorticity
    assert np.allclose(feats[..., 9], np.sqrt(2.0), atol=1e-13)     # gradient norm


def test_kinematics_zero_flow():
    flow = constant_flow(0.0, 0.0, shape=(8, 8))
    prev = np.zeros((8, 8))
    nxt = np.full((8, 8), 3.0)
    feats = kinematic_features(flow_derivatives(flow, prev, nxt), flow)
    assert np.abs(np.delete(feats, 2, axis=-1)).max() == 0.0
    assert np.array_equal(feats[..., 2], np.full((8, 8), 3.0))


def test_strain_vorticity_gradient_identity():
    rng = np.random.default_rng(5)
    for _ in range(10):
        u = rng.normal(size=(12, 12))
        v = rng.normal(size=(12, 12))
        flow = FlowField(u, v)
        zero = np.zeros((12, 12))
        feats = kinematic_features(flow_derivatives(flow, zero, zero), flow)
        grad_norm, strain_norm, vort = feats[..., 9], feats[..., 10], feats[..., 8]
        assert np.allclose(strain_norm**2 + vort**2 / 2.0, grad_norm**2, atol=1e-12)


# ---------------------------------------------------------------------------
# covariance and the log-Euclidean embedding

def test_covariance_of_identical_samples_is_zero():
    samples = np.tile(np.arange(12.0), (20, 1))
    assert np.abs(covariance_descriptor(samples)).max() == 0.0


def test_covariance_monte_carlo_identity():
    rng = np.random.default_rng(123)
    samples = rng.normal(size=(10_000, 12))
    cov = covariance_descriptor(samples)
    assert np.abs(cov - np.eye(12)).max() <= 0.1


def test_covariance_needs_enough_samples():
    rng = np.random.default_rng(0)
    with pytest.raises(ValidationError):
        covariance_descriptor(rng.normal(size=(2, 12)))
    with pytest.raises(ValidationError):
        covariance_descriptor(rng.normal(size=(12, 12)))
    covariance_descriptor(rng.normal(size=(13, 12)))  # boundary is fine


def test_covariance_is_positive_semidefinite():
    rng = np.random.default_rng(8)
    for _ in range(5):
        samples = rng.normal(size=(40, 12)) @ rng.normal(size=(12, 12))
        cov = covariance_descriptor(samples)
        min_eig = np.linalg.eigvalsh(cov)[0]
        assert min_eig >= -1e-10 * np.trace(cov)


def test_vectorize_preserves_frobenius_norm():
    rng = np.random.default_rng(3)
    for _ in range(10):
        sym = rng.normal(size=(12, 12))
        sym = (sym + sym.T) / 2.0
        vec = vectorize_symmetric(sym)
        assert vec.size == 78
        assert np.linalg.norm(vec) == pytest.approx(np.linalg.norm(sym), rel=1e-12)


def test_static_video_logc_descriptor():
    samples = np.zeros((200, 12))
    descriptor = logc_window_descriptor(samples)
    expected = vectorize_symmetric(np.log(1e-10) * np.eye(12))
    assert np.allclose(descriptor, expected, atol=1e-9)


def test_logc_identical_windows_match():
    rng = np.random.default_rng(9)
    block = rng.integers(0, 255, size=(8, 16, 16)).astype(np.uint8)
    frames = np.concatenate([block, block, block], axis=0)  # period = stride = 8
    seq = FrameSequence(frames)
    base = [
        FlowField(rng.normal(size=(16, 16)), rng.normal(size=(16, 16)))
        for _ in range(8)
    ]
    flows = (base * 3)[: seq.frame_count - 1]  # periodic like the frames
    dset = logc_from_flows(seq, flows, window_len=16, stride=8)
    assert dset.count == 2
    assert np.allclose(dset.vectors[0], dset.vectors[1], atol=1e-12)


def test_regularization_floor():
    reg = regularize_covariance(np.zeros((12, 12)))
    assert np.allclose(reg, 1e-10 * np.eye(12))
