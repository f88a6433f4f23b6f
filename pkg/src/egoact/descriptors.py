"""Motion descriptors: orientation histograms, log-covariance, and cuboids.

All three extractors emit one descriptor per sliding temporal window (or
per detected interest point for cuboids), collected into a DescriptorSet
per video. Flow-based extractors can reuse precomputed per-pair flow
fields so a video's flow is only estimated once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataio import DescriptorSet, FrameSequence
from .errors import ValidationError
from .flow import (
    DEFAULT_ALPHA,
    DEFAULT_ITERATIONS,
    FlowDerivatives,
    FlowField,
    flow_derivatives,
    sequence_flows,
)
from .linalg import matrix_log

HOF_TYPE = "hof"
LOGC_TYPE = "logc"
CUBOID_TYPE = "cuboid"

ORIENTATION_BINS = 8
KINEMATIC_DIM = 12
LOGC_DIM = KINEMATIC_DIM * (KINEMATIC_DIM + 1) // 2  # 78


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def _window_starts(frame_count: int, window_len: int, stride: int):
    if window_len < 2:
        raise ValidationError("window_len must be at least 2")
    if stride < 1:
        raise ValidationError("stride must be at least 1")
    if frame_count < window_len:
        raise ValidationError(
            f"video has {frame_count} frames but the window needs {window_len}"
        )
    return range(0, frame_count - window_len + 1, stride)


# ---------------------------------------------------------------------------
# HOF: grid orientation histograms of optical flow

@dataclass(frozen=True)
class HofParams:
    grid_size: int = 4            # s cells per side
    window_len: int = 16          # frames per descriptor window
    stride: int = 8
    min_magnitude: float = 0.05   # px/frame; weaker vectors are ignored

    def __post_init__(self):
        if self.grid_size < 1:
            raise ValidationError("grid_size must be at least 1")
        if self.window_len < 2:
            raise ValidationError("window_len must be at least 2")
        if self.stride < 1:
            raise ValidationError("stride must be at least 1")
        if self.min_magnitude < 0:
            raise ValidationError("min_magnitude must be nonnegative")

    @property
    def dim(self) -> int:
        return self.grid_size * self.grid_size * ORIENTATION_BINS


def _orientation_bins(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    # bin j covers [j*45 - 22.5, j*45 + 22.5) degrees, angle = atan2(v, u)
    degrees = np.degrees(np.arctan2(v, u))
    return (np.floor((degrees + 22.5) / 45.0).astype(np.int64)) % ORIENTATION_BINS


def _cell_indices(length: int, cells: int) -> np.ndarray:
    idx = (np.arange(length) * cells) // length
    return np.minimum(idx, cells - 1)


def hof_window_histogram(flows, params: HofParams, normalize: bool = True) -> np.ndarray:
    """Accumulate one s*s*8 histogram from the flow fields of one window.

    Flow vectors with magnitude >= min_magnitude are added to their
    orientation bin weighted by magnitude; the full histogram is then
    L1-normalized (all-zero histograms stay zero).
    """
    s = params.grid_size
    hist = np.zeros((s, s, ORIENTATION_BINS))
    for flow in flows:
        h, w = flow.shape
        mag = np.hypot(flow.u, flow.v)
        weights = np.where(mag >= params.min_magnitude, mag, 0.0)
        bins = _orientation_bins(flow.u, flow.v)
        rows = np.broadcast_to(_cell_indices(h, s)[:, None], (h, w))
        cols = np.broadcast_to(_cell_indices(w, s)[None, :], (h, w))
        np.add.at(hist, (rows.ravel(), cols.ravel(), bins.ravel()), weights.ravel())
    flat = hist.ravel()
    total = flat.sum()
    if normalize and total > 0.0:
        flat = flat / total
    return flat


def hof_from_flows(flows, params: HofParams) -> DescriptorSet:
    """HOF descriptors over sliding windows of precomputed pairwise flows."""
    frame_count = len(flows) + 1
    vectors = [
        hof_window_histogram(flows[t0 : t0 + params.window_len - 1], params)
        for t0 in _window_starts(frame_count, params.window_len, params.stride)
    ]
    return DescriptorSet(HOF_TYPE, params.dim, np.asarray(vectors))


def hof_descriptors(seq: FrameSequence, params: HofParams,
                    flow_alpha: float = DEFAULT_ALPHA,
                    flow_iterations: int = DEFAULT_ITERATIONS) -> DescriptorSet:
    if seq.frame_count < params.window_len:
        raise ValidationError(
            f"video has {seq.frame_count} frames but the window needs {params.window_len}"
        )
    flows = sequence_flows(seq.frames, alpha=flow_alpha, iterations=flow_iterations)
    return hof_from_flows(flows, params)


# ---------------------------------------------------------------------------
# Log-covariance of per-pixel kinematic features

def kinematic_features(deriv: FlowDerivatives, flow: FlowField) -> np.ndarray:
    """Per-pixel 12-vector of flow kinematics, shape (h, w, 12).

    Component order: u, v, I_t, u_x, u_y, v_x, v_y, divergence, vorticity,
    Frobenius norm of the flow gradient, Frobenius norm of the strain-rate
    tensor (symmetric part of the gradient), and the shear term u_y + v_x.
    """
    if deriv.u_x.shape != flow.shape:
        raise ValidationError("derivatives and flow must share one shape")
    u_x, u_y, v_x, v_y = deriv.u_x, deriv.u_y, deriv.v_x, deriv.v_y
    div = u_x + v_y
    vort = v_x - u_y
    shear = u_y + v_x
    grad_norm = np.sqrt(u_x**2 + u_y**2 + v_x**2 + v_y**2)
    strain_norm = np.sqrt(u_x**2 + v_y**2 + 0.5 * shear**2)
    return np.stack(
        [flow.u, flow.v, deriv.i_t, u_x, u_y, v_x, v_y, div, vort, grad_norm, strain_norm, shear],
        axis=-1,
    )


def covariance_descriptor(samples: np.ndarray) -> np.ndarray:
    """Unbiased sample covariance of row-vector samples, exactly symmetric."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2:
        raise ValidationError("samples must be a (count, dim) array")
    count, dim = samples.shape
    if count < dim + 1:
        raise ValidationError(
            f"need at least {dim + 1} samples for a {dim}x{dim} covariance, got {count}"
        )
    centered = samples - samples.mean(axis=0)
    cov = centered.T @ centered / (count - 1)
    return (cov + cov.T) / 2.0


def regularize_covariance(cov: np.ndarray) -> np.ndarray:
    """Shift the spectrum up by eps = max(1e-10, 1e-6 * mean diagonal mass)."""
    dim = cov.shape[0]
    eps = max(1e-10, 1e-6 * float(np.trace(cov)) / dim)
    return cov + eps * np.eye(dim)


def vectorize_symmetric(m: np.ndarray) -> np.ndarray:
    """Upper triangle row-major with off-diagonals scaled by sqrt(2).

    The scaling makes the Euclidean norm of the vector equal the Frobenius
    norm of the matrix.
    """
    m = np.asarray(m, dtype=np.float64)
    rows, cols = np.triu_indices(m.shape[0])
    scale = np.where(rows == cols, 1.0, np.sqrt(2.0))
    return m[rows, cols] * scale


def logc_window_descriptor(samples: np.ndarray) -> np.ndarray:
    cov = regularize_covariance(covariance_descriptor(samples))
    return vectorize_symmetric(matrix_log(cov))


def logc_from_flows(seq: FrameSequence, flows, window_len: int = 16, stride: int = 8,
                    pixel_step: int = 2) -> DescriptorSet:
    """Log-covariance descriptors using precomputed pairwise flow fields."""
    if pixel_step < 1:
        raise ValidationError("pixel_step must be at least 1")
    frames = seq.frames.astype(np.float64)
    if len(flows) != seq.frame_count - 1:
        raise ValidationError("need one flow field per consecutive frame pair")

    per_pair = []
    for i, flow in enumerate(flows):
        deriv = flow_derivatives(flow, frames[i], frames[i + 1])
        feats = kinematic_features(deriv, flow).reshape(-1, KINEMATIC_DIM)
        per_pair.append(feats[::pixel_step])

    vectors = []
    for t0 in _window_starts(seq.frame_count, window_len, stride):
        pooled = np.concatenate(per_pair[t0 : t0 + window_len - 1], axis=0)
        vectors.append(logc_window_descriptor(pooled))
    return DescriptorSet(LOGC_TYPE, LOGC_DIM, np.asarray(vectors))


def logc_descriptors(seq: FrameSequence, window_len: int = 16, stride: int = 8,
                     pixel_step: int = 2,
                     flow_alpha: float = DEFAULT_ALPHA,
                     flow_iterations: int = DEFAULT_ITERATIONS) -> DescriptorSet:
    if seq.frame_count < window_len:
        raise ValidationError(
            f"video has {seq.frame_count} frames but the window needs {window_len}"
        )
    flows = sequence_flows(seq.frames, alpha=flow_alpha, iterations=flow_iterations)
    return logc_from_flows(seq, flows, window_len=window_len, stride=stride, pixel_step=pixel_step)


# ---------------------------------------------------------------------------
# Cuboids: quadrature temporal-filter detector and flattened-gradient patches

@dataclass(frozen=True)
class CuboidParams:
    sigma: float = 1.5            # spatial Gaussian scale, px
    tau: float = 2.5              # temporal scale, frames
    threshold: float = 15.0       # minimum response at a detection
    max_points: int = 12          # strongest detections kept per video

    def __post_init__(self):
        if self.sigma <= 0 or self.tau <= 0:
            raise ValidationError("sigma and tau must be positive")
        if self.threshold < 0:
            raise ValidationError("threshold must be nonnegative")
        if self.max_points < 1:
            raise ValidationError("max_points must be at least 1")

    @property
    def side_xy(self) -> int:
        return 2 * _round_half_up(3.0 * self.sigma) + 1

    @property
    def side_t(self) -> int:
        return 2 * _round_half_up(3.0 * self.tau) + 1

    @property
    def descriptor_dim(self) -> int:
        return self.side_xy * self.side_xy * self.side_t * 3


def _gaussian_kernel(sigma: float) -> np.ndarray:
    radius = max(1, _round_half_up(3.0 * sigma))
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(t * t) / (2.0 * sigma * sigma))
    return kernel / kernel.sum()


def temporal_quadrature_pair(tau: float):
    """Sampled even/odd temporal filters, mean-corrected to zero DC gain."""
    radius = max(1, _round_half_up(3.0 * tau))
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    envelope = np.exp(-(t * t) / (tau * tau))
    omega = 4.0 / tau
    even = -np.cos(2.0 * np.pi * t * omega) * envelope
    odd = -np.sin(2.0 * np.pi * t * omega) * envelope
    even -= even.mean()
    odd -= odd.mean()
    return even, odd


def _correlate_axis_reflect(volume: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    radius = kernel.size // 2
    pad = [(0, 0)] * volume.ndim
    pad[axis] = (radius, radius)
    padded = np.pad(volume, pad, mode="reflect")
    out = np.zeros_like(volume, dtype=np.float64)
    length = volume.shape[axis]
    index = [slice(None)] * volume.ndim
    for k, weight in enumerate(kernel):
        index[axis] = slice(k, k + length)
        out += weight * padded[tuple(index)]
    return out


def _correlate_time_valid(volume: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    radius = kernel.size // 2
    length = volume.shape[0] - 2 * radius
    out = np.zeros((length,) + volume.shape[1:], dtype=np.float64)
    for k, weight in enumerate(kernel):
        out += weight * volume[k : k + length]
    return out


def cuboid_response(seq: FrameSequence, params: CuboidParams):
    """Detector response volume and the frame offset of its first slice."""
    even, odd = temporal_quadrature_pair(params.tau)
    radius = even.size // 2
    if seq.frame_count < even.size:
        raise ValidationError(
            f"video has {seq.frame_count} frames but the temporal filter spans {even.size}"
        )
    volume = seq.frames.astype(np.float64)
    kernel = _gaussian_kernel(params.sigma)
    spatial_radius = kernel.size // 2
    if spatial_radius >= min(seq.height, seq.width):
        raise ValidationError(
            f"spatial filter radius {spatial_radius} exceeds the "
            f"{seq.width}x{seq.height} frame"
        )
    smoothed = _correlate_axis_reflect(volume, kernel, axis=1)
    smoothed = _correlate_axis_reflect(smoothed, kernel, axis=2)
    r_even = _correlate_time_valid(smoothed, even)
    r_odd = _correlate_time_valid(smoothed, odd)
    return r_even * r_even + r_odd * r_odd, radius


def _local_maxima_3d(resp: np.ndarray) -> np.ndarray:
    padded = np.pad(resp, 1, mode="constant", constant_values=-np.inf)
    window_max = np.full_like(resp, -np.inf)
    for dt in range(3):
        for dy in range(3):
            for dx in range(3):
                shifted = padded[
                    dt : dt + resp.shape[0],
                    dy : dy + resp.shape[1],
                    dx : dx + resp.shape[2],
                ]
                np.maximum(window_max, shifted, out=window_max)
    return resp >= window_max


def cuboid_detect(seq: FrameSequence, params: CuboidParams):
    """Interest points as (x, y, t, response), strongest first.

    A point is kept when its response exceeds the threshold and is a
    maximum over its 3x3x3 neighborhood; ties in response order by
    ascending (t, y, x).
    """
    resp, t_offset = cuboid_response(seq, params)
    is_max = _local_maxima_3d(resp) & (resp > params.threshold)
    ts, ys, xs = np.nonzero(is_max)
    if ts.size == 0:
        return []
    values = resp[ts, ys, xs]
    order = np.lexsort((xs, ys, ts, -values))[: params.max_points]
    return [
        (int(xs[i]), int(ys[i]), int(ts[i] + t_offset), float(values[i]))
        for i in order
    ]


def _intensity_gradients_3d(volume: np.ndarray):
    g_t, g_y, g_x = np.gradient(volume.astype(np.float64))
    return g_x, g_y, g_t


def cuboid_describe(seq: FrameSequence, point, params: CuboidParams,
                    normalize: bool = True, gradients=None) -> np.ndarray:
    """Flattened gradient vector of the cuboid around one interest point.

    Gradients use central differences (one-sided at volume borders); the
    spatio-temporal window is clamped by replication at the borders. The
    flattening runs over (t, y, x, component) with components (gx, gy, gt)
    and the result is L2-normalized unless told otherwise.
    """
    x, y, t = int(point[0]), int(point[1]), int(point[2])
    if gradients is None:
        gradients = _intensity_gradients_3d(seq.frames)
    g_x, g_y, g_t = gradients

    r_xy = (params.side_xy - 1) // 2
    r_t = (params.side_t - 1) // 2
    ts = np.clip(np.arange(t - r_t, t + r_t + 1), 0, seq.frame_count - 1)
    ys = np.clip(np.arange(y - r_xy, y + r_xy + 1), 0, seq.height - 1)
    xs = np.clip(np.arange(x - r_xy, x + r_xy + 1), 0, seq.width - 1)
    grid = np.ix_(ts, ys, xs)
    patch = np.stack([g_x[grid], g_y[grid], g_t[grid]], axis=-1)
    vec = patch.ravel()
    if normalize:
        norm = np.linalg.norm(vec)
        if norm > 0.0:
            vec = vec / norm
    return vec


def cuboid_descriptors(seq: FrameSequence, params: CuboidParams) -> DescriptorSet:
    points = cuboid_detect(seq, params)
    gradients = _intensity_gradients_3d(seq.frames)
    vectors = [cuboid_describe(seq, p, params, gradients=gradients) for p in points]
    data = np.asarray(vectors) if vectors else None
    return DescriptorSet(CUBOID_TYPE, params.descriptor_dim, data)
