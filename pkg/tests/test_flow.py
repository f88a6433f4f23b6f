import numpy as np
import pytest

from egoact.errors import ValidationError
from egoact.flow import FlowField, dense_flow, flow_derivatives, flow_energy, sequence_flows


def smooth_texture(height, width, seed=0, sigma=2.0):
    rng = np.random.default_rng(seed)
    noise = rng.normal(size=(height + 20, width + 20))
    radius = int(3 * sigma)
    taps = np.exp(-np.arange(-radius, radius + 1) ** 2 / (2 * sigma * sigma))
    taps /= taps.sum()
    for axis in (0, 1):
        noise = np.apply_along_axis(lambda m: np.convolve(m, taps, mode="same"), axis, noise)
    noise = noise[10 : 10 + height, 10 : 10 + width]
    noise = (noise - noise.min()) / (noise.max() - noise.min())
    return 40.0 + 170.0 * noise


def shifted_pair(shift=1, seed=3):
    tex = smooth_texture(40, 48, seed=seed)
    prev = tex[:, shift:-shift]
    nxt = np.roll(tex, shift, axis=1)[:, shift:-shift]
    return prev, nxt


def test_identical_frames_zero_flow():
    frame = smooth_texture(20, 20)
    flow = dense_flow(frame, frame)
    assert np.abs(flow.u).max() <= 1e-6
    assert np.abs(flow.v).max() <= 1e-6


def test_one_pixel_shift_recovered():
    prev, nxt = shifted_pair(1)
    flow = dense_flow(prev, nxt)
    interior = (slice(4, -4), slice(4, -4))
    assert 0.7 <= flow.u[interior].mean() <= 1.3
    assert np.abs(flow.v[interior]).mean() <= 0.3


def test_doubling_alpha_keeps_flow_sign():
    prev, nxt = shifted_pair(1)
    interior = (slice(4, -4), slice(4, -4))
    mean_base = dense_flow(prev, nxt, alpha=10.0).u[interior].mean()
    mean_double = dense_flow(prev, nxt, alpha=20.0).u[interior].mean()
    assert np.sign(mean_base) == np.sign(mean_double) == 1.0


def test_intensity_offset_invariance():
    prev, nxt = shifted_pair(1)
    base = dense_flow(prev, nxt, iterations=40)
    offset = dense_flow(prev + 30.0, nxt + 30.0, iterations=40)
    # identical up to rounding noise in the (value + offset) differences
    assert np.allclose(base.u, offset.u, atol=1e-9)
    assert np.allclose(base.v, offset.v, atol=1e-9)


def test_energy_non_increasing():
    prev, nxt = shifted_pair(1, seed=5)
    energies = [
        flow_energy(dense_flow(prev, nxt, alpha=8.0, iterations=k), prev, nxt, alpha=8.0)
        for k in range(1, 14)
    ]
    for before, after in zip(energies, energies[1:]):
        assert after <= before * (1 + 1e-12)


def test_mismatched_sizes_rejected():
    with pytest.raises(ValidationError):
        dense_flow(np.zeros((4, 4)), np.zeros((4, 5)))


def test_bad_params_rejected():
    frame = np.zeros((8, 8))
    with pytest.raises(ValidationError):
        dense_flow(frame, frame, alpha=0.0)
    with pytest.raises(ValidationError):
        dense_flow(frame, frame, iterations=0)


def rotation_flow(omega=0.1, size=32):
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    xc = yc = (size - 1) / 2.0
    return FlowField(-omega * (ys - yc), omega * (xs - xc))


def test_derivatives_of_constant_flow_are_zero():
    flow = FlowField(np.full((10, 12), 1.7), np.full((10, 12), -0.4))
    frame = np.zeros((10, 12))
    deriv = flow_derivatives(flow, frame, frame)
    for grid in (deriv.u_x, deriv.u_y, deriv.v_x, deriv.v_y):
        assert np.abs(grid).max() == 0.0


def test_rotation_field_derivatives_exact():
    omega = 0.1
    flow = rotation_flow(omega)
    frame = np.zeros(flow.shape)
    deriv = flow_derivatives(flow, frame, frame)
    # linear fields are exact under central and one-sided differences
    assert np.allclose(deriv.u_y, -omega, atol=1e-14)
    assert np.allclose(deriv.v_x, omega, atol=1e-14)
    assert np.allclose(deriv.u_x + deriv.v_y, 0.0, atol=1e-14)          # divergence
    assert np.allclose(deriv.v_x - deriv.u_y, 2 * omega, atol=1e-14)    # vorticity


def test_temporal_gradient_is_frame_difference():
    rng = np.random.default_rng(1)
    prev = rng.random((6, 7))
    nxt = rng.random((6, 7))
    flow = FlowField(np.zeros((6, 7)), np.zeros((6, 7)))
    deriv = flow_derivatives(flow, prev, nxt)
    assert np.array_equal(deriv.i_t, nxt - prev)
    assert np.abs(flow_derivatives(flow, prev, prev).i_t).max() == 0.0


def test_sequence_flows_counts():
    rng = np.random.default_rng(2)
    frames = rng.integers(0, 255, size=(5, 10, 10)).astype(np.float64)
    flows = sequence_flows(frames, iterations=5)
    assert len(flows) == 4
    with pytest.raises(ValidationError):
        sequence_flows(frames[:1])
