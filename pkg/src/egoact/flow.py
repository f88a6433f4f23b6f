"""Dense optical flow between consecutive frames (Horn-Schunck style).

The estimator minimizes the classic quadratic energy

    E(u, v) = sum_p (Ix*u + Iy*v + It)^2
            + alpha^2 * sum_edges ((u_p - u_q)^2 + (v_p - v_q)^2)

by a fixed-point iteration that solves each pixel's coupled 2x2 system
exactly while holding its 4-neighborhood fixed (a block-Jacobi sweep).
For this energy the sweep decreases E monotonically, which the test
suite checks. There is no image pyramid, so displacements should stay
within a few pixels per frame.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError

DEFAULT_ALPHA = 10.0
DEFAULT_ITERATIONS = 100


class FlowField:
    """Per-pixel displacement in pixels/frame; u is +x (right), v is +y (down)."""

    __slots__ = ("u", "v")

    def __init__(self, u, v):
        u = np.asarray(u, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        if u.ndim != 2 or u.shape != v.shape:
            raise ValidationError(f"u and v must be matching 2-d grids, got {u.shape} and {v.shape}")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise ValidationError("flow values must be finite")
        self.u = u
        self.v = v

    @property
    def shape(self):
        return self.u.shape


class FlowDerivatives:
    """Spatial flow derivatives plus the temporal intensity gradient."""

    __slots__ = ("u_x", "u_y", "v_x", "v_y", "i_t")

    def __init__(self, u_x, u_y, v_x, v_y, i_t):
        arrays = [np.asarray(a, dtype=np.float64) for a in (u_x, u_y, v_x, v_y, i_t)]
        shape = arrays[0].shape
        for a in arrays:
            if a.shape != shape:
                raise ValidationError("derivative grids must share one shape")
            if not np.all(np.isfinite(a)):
                raise ValidationError("derivatives must be finite")
        self.u_x, self.u_y, self.v_x, self.v_y, self.i_t = arrays


def _as_float_frame(frame) -> np.ndarray:
    frame = np.asarray(frame)
    if frame.ndim != 2:
        raise ValidationError(f"expected a 2-d frame, got {frame.ndim}-d")
    return frame.astype(np.float64)


def _intensity_gradients(prev: np.ndarray, nxt: np.ndarray):
    mean = (prev + nxt) / 2.0
    iy, ix = np.gradient(mean)
    it = nxt - prev
    return ix, iy, it


def _neighbor_sums(field: np.ndarray) -> np.ndarray:
    out = np.zeros_like(field)
    out[:-1, :] += field[1:, :]
    out[1:, :] += field[:-1, :]
    out[:, :-1] += field[:, 1:]
    out[:, 1:] += field[:, :-1]
    return out


def _neighbor_counts(shape) -> np.ndarray:
    counts = np.full(shape, 4.0)
    counts[0, :] -= 1.0
    counts[-1, :] -= 1.0
    counts[:, 0] -= 1.0
    counts[:, -1] -= 1.0
    return counts


def dense_flow(prev, nxt, alpha: float = DEFAULT_ALPHA, iterations: int = DEFAULT_ITERATIONS) -> FlowField:
    """Estimate the dense flow carrying ``prev`` onto ``nxt``.

    alpha weights the smoothness term (larger is smoother), iterations is
    the fixed sweep count. Deterministic: same inputs give bit-identical
    output.
    """
    prev = _as_float_frame(prev)
    nxt = _as_float_frame(nxt)
    if prev.shape != nxt.shape:
        raise ValidationError(f"frame sizes differ: {prev.shape} vs {nxt.shape}")
    if alpha <= 0.0:
        raise ValidationError("alpha must be positive")
    if iterations < 1:
        raise ValidationError("iterations must be at least 1")

    ix, iy, it = _intensity_gradients(prev, nxt)
    a2 = alpha * alpha
    deg = _neighbor_counts(prev.shape)
    diag_u = ix * ix + a2 * deg
    diag_v = iy * iy + a2 * deg
    cross = ix * iy
    det = diag_u * diag_v - cross * cross

    u = np.zeros_like(prev)
    v = np.zeros_like(prev)
    for _ in range(iterations):
        rhs_u = a2 * _neighbor_sums(u) - ix * it
        rhs_v = a2 * _neighbor_sums(v) - iy * it
        u = (diag_v * rhs_u - cross * rhs_v) / det
        v = (diag_u * rhs_v - cross * rhs_u) / det
    return FlowField(u, v)


def flow_energy(flow: FlowField, prev, nxt, alpha: float = DEFAULT_ALPHA) -> float:
    """Value of the objective that dense_flow iterates down."""
    prev = _as_float_frame(prev)
    nxt = _as_float_frame(nxt)
    if prev.shape != flow.shape:
        raise ValidationError("flow and frames must share one shape")
    ix, iy, it = _intensity_gradients(prev, nxt)
    data = ix * flow.u + iy * flow.v + it
    smooth = 0.0
    for grid in (flow.u, flow.v):
        smooth += np.sum(np.diff(grid, axis=0) ** 2) + np.sum(np.diff(grid, axis=1) ** 2)
    return float(np.sum(data * data) + alpha * alpha * smooth)


def flow_derivatives(flow: FlowField, prev, nxt) -> FlowDerivatives:
    """Spatial derivatives of the flow plus I_t = next - prev.

    Central differences in the interior, one-sided at the borders; exact
    for fields that are linear in x and y.
    """
    prev = _as_float_frame(prev)
    nxt = _as_float_frame(nxt)
    if prev.shape != nxt.shape or prev.shape != flow.shape:
        raise ValidationError("flow and frames must share one shape")
    u_y, u_x = np.gradient(flow.u)
    v_y, v_x = np.gradient(flow.v)
    return FlowDerivatives(u_x, u_y, v_x, v_y, nxt - prev)


def sequence_flows(frames: np.ndarray, alpha: float = DEFAULT_ALPHA,
                   iterations: int = DEFAULT_ITERATIONS):
    """Flow fields between each consecutive frame pair of a video volume."""
    frames = np.asarray(frames)
    if frames.ndim != 3 or frames.shape[0] < 2:
        raise ValidationError("need a (t, y, x) volume with at least 2 frames")
    return [
        dense_flow(frames[i], frames[i + 1], alpha=alpha, iterations=iterations)
        for i in range(frames.shape[0] - 1)
    ]
