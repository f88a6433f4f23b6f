"""Kernel bank: Gaussian, histogram intersection, and the two
multi-channel intersection variants, plus Gram-matrix assembly and
convex kernel combination.

Channel-aware kinds treat a histogram as a sequence of per-descriptor-type
blocks. ``dc_int`` averages the per-block intersections; ``jpl_int`` takes
the product of per-block intersections, each raised to a positive exponent.
A spec may also restrict any kind to a single block via ``block`` so that
one kernel sees only one feature's histogram.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

GAUSSIAN = "gaussian"
H_INT = "h_int"
DC_INT = "dc_int"
JPL_INT = "jpl_int"

KERNEL_KINDS = (GAUSSIAN, H_INT, DC_INT, JPL_INT)
CHANNEL_KINDS = (DC_INT, JPL_INT)

JPL_DELTA = 1e-12


@dataclass(frozen=True)
class KernelSpec:
    kind: str
    sigma: float | None = None                       # gaussian width
    channels: tuple = ()                             # ((offset, length), ...) for dc/jpl
    exponents: tuple = ()                            # per-channel, jpl only; default 1/C
    block: tuple | None = None                       # (offset, length) feature restriction
    label: str = ""

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValidationError(f"unknown kernel kind {self.kind!r}")
        if self.kind == GAUSSIAN and self.sigma is not None and self.sigma <= 0:
            raise ValidationError("gaussian sigma must be positive")
        if self.kind in CHANNEL_KINDS and not self.channels:
            raise ValidationError(f"{self.kind} needs a channel layout")
        object.__setattr__(self, "channels", tuple((int(o), int(n)) for o, n in self.channels))
        if self.exponents:
            if self.kind != JPL_INT:
                raise ValidationError("exponents only apply to jpl_int")
            if len(self.exponents) != len(self.channels):
                raise ValidationError("need one exponent per channel")
            if any(b <= 0 for b in self.exponents):
                raise ValidationError("exponents must be positive")
            object.__setattr__(self, "exponents", tuple(float(b) for b in self.exponents))
        if self.block is not None:
            object.__setattr__(self, "block", (int(self.block[0]), int(self.block[1])))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "sigma": self.sigma,
            "channels": [list(c) for c in self.channels],
            "exponents": list(self.exponents),
            "block": list(self.block) if self.block else None,
            "label": self.label,
        }

    @staticmethod
    def from_dict(doc: dict) -> "KernelSpec":
        return KernelSpec(
            kind=doc["kind"],
            sigma=doc.get("sigma"),
            channels=tuple(tuple(c) for c in doc.get("channels") or ()),
            exponents=tuple(doc.get("exponents") or ()),
            block=tuple(doc["block"]) if doc.get("block") else None,
            label=doc.get("label", ""),
        )


def _check_channels(channels, dim: int):
    spans = sorted(channels)
    cursor = 0
    for offset, length in spans:
        if offset != cursor or length < 1:
            raise ValidationError(f"channels {channels} do not partition dimension {dim}")
        cursor += length
    if cursor != dim:
        raise ValidationError(f"channels {channels} do not partition dimension {dim}")


def _view(spec: KernelSpec, x: np.ndarray) -> np.ndarray:
    if spec.block is None:
        return x
    offset, length = spec.block
    if offset < 0 or offset + length > x.shape[-1]:
        raise ValidationError(f"block {spec.block} exceeds vector dimension {x.shape[-1]}")
    return x[..., offset : offset + length]


def kernel_eval(spec: KernelSpec, x, y) -> float:
    """Kernel value between two histogram vectors."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError(f"vector shapes differ: {x.shape} vs {y.shape}")
    x = _view(spec, x)
    y = _view(spec, y)

    if spec.kind == GAUSSIAN:
        if spec.sigma is None:
            raise ValidationError("gaussian spec has no sigma (materialize it first)")
        diff = x - y
        return float(np.exp(-np.dot(diff, diff) / (2.0 * spec.sigma * spec.sigma)))

    if x.size and (x.min() < 0.0 or y.min() < 0.0):
        raise ValidationError("intersection kernels need nonnegative entries")
    mins = np.minimum(x, y)
    if spec.kind == H_INT:
        return float(mins.sum())

    _check_channels(spec.channels, x.size)
    block_sums = np.array([mins[o : o + n].sum() for o, n in spec.channels])
    if spec.kind == DC_INT:
        return float(block_sums.mean())
    exponents = spec.exponents or (1.0 / len(spec.channels),) * len(spec.channels)
    return float(np.prod((block_sums + JPL_DELTA) ** np.asarray(exponents)))


class GramMatrix:
    """Symmetric kernel matrix over one dataset, tagged with a data fingerprint."""

    __slots__ = ("matrix", "spec", "fingerprint")

    def __init__(self, matrix, spec, fingerprint: str):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValidationError(f"Gram matrix must be square, got {matrix.shape}")
        if not np.all(np.isfinite(matrix)):
            raise ValidationError("Gram matrix entries must be finite")
        if np.abs(matrix - matrix.T).max(initial=0.0) > 1e-12:
            raise ValidationError("Gram matrix must be symmetric")
        self.matrix = matrix
        self.spec = spec
        self.fingerprint = fingerprint

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def data_fingerprint(vectors: np.ndarray) -> str:
    digest = hashlib.sha256()
    arr = np.ascontiguousarray(vectors, dtype=np.float64)
    digest.update(str(arr.shape).encode())
    digest.update(arr.tobytes())
    return digest.hexdigest()[:16]


def gram_matrix(vectors, spec: KernelSpec) -> GramMatrix:
    """Pairwise kernel matrix; only the upper triangle is computed, so
    symmetry is exact by construction."""
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[0] < 1:
        raise ValidationError("need a nonempty (count, dim) array of vectors")
    n = vectors.shape[0]
    matrix = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            value = kernel_eval(spec, vectors[i], vectors[j])
            matrix[i, j] = value
            matrix[j, i] = value
    return GramMatrix(matrix, spec, data_fingerprint(vectors))


def kernel_rows(spec: KernelSpec, queries, references) -> np.ndarray:
    """(n_queries, n_references) kernel values; used for test-time scoring."""
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    references = np.asarray(references, dtype=np.float64)
    out = np.empty((queries.shape[0], references.shape[0]))
    for i, q in enumerate(queries):
        for j, r in enumerate(references):
            out[i, j] = kernel_eval(spec, q, r)
    return out


class KernelBank:
    """An ordered list of (spec, gram) pairs over one dataset."""

    __slots__ = ("specs", "grams")

    def __init__(self, specs, grams):
        specs = list(specs)
        grams = list(grams)
        if not grams or len(specs) != len(grams):
            raise ValidationError("bank needs matching, nonempty spec and gram lists")
        size = grams[0].size
        fingerprint = grams[0].fingerprint
        for g in grams:
            if g.size != size:
                raise ValidationError("bank Gram matrices must share one size")
            if g.fingerprint != fingerprint:
                raise ValidationError("bank Gram matrices must come from the same data")
        self.specs = specs
        self.grams = grams

    def __len__(self):
        return len(self.grams)

    @property
    def size(self) -> int:
        return self.grams[0].size

    def matrices(self) -> np.ndarray:
        return np.stack([g.matrix for g in self.grams])


def check_simplex(weights, count: int, tol: float = 1e-9) -> np.ndarray:
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (count,):
        raise ValidationError(f"expected {count} weights, got shape {weights.shape}")
    if weights.min(initial=0.0) < -tol:
        raise ValidationError(f"kernel weights must be nonnegative, got min {weights.min()}")
    if abs(weights.sum() - 1.0) > tol:
        raise ValidationError(f"kernel weights must sum to 1, got {weights.sum()!r}")
    return weights


def combine(bank: KernelBank, weights) -> GramMatrix:
    """Entry-wise convex combination of the bank's Gram matrices."""
    weights = check_simplex(weights, len(bank))
    combined = np.zeros((bank.size, bank.size))
    for w, gram in zip(weights, bank.grams):
        combined += w * gram.matrix
    return GramMatrix(combined, None, bank.grams[0].fingerprint)


def combine_rows(rows: np.ndarray, weights) -> np.ndarray:
    """Convex combination of per-kernel row stacks, shape (M, ..., L)."""
    rows = np.asarray(rows, dtype=np.float64)
    weights = check_simplex(weights, rows.shape[0])
    return np.tensordot(weights, rows, axes=(0, 0))


def trace_normalize(gram: GramMatrix):
    """Scale a Gram matrix so its trace equals its size; returns (gram, scale).

    Applied before multi-kernel training so weights are comparable across
    kernel kinds; the same scale must be applied to test-time kernel rows.
    """
    trace = float(np.trace(gram.matrix))
    if trace <= 0.0:
        return gram, 1.0
    scale = gram.size / trace
    return GramMatrix(gram.matrix * scale, gram.spec, gram.fingerprint), scale


def median_heuristic_sigma(vectors, block=None) -> float:
    """Median pairwise Euclidean distance; 1.0 when degenerate."""
    vectors = np.asarray(vectors, dtype=np.float64)
    if block is not None:
        offset, length = block
        vectors = vectors[:, offset : offset + length]
    n = vectors.shape[0]
    if n < 2:
        return 1.0
    d2 = _pairwise_sq(vectors)
    dists = np.sqrt(d2[np.triu_indices(n, k=1)])
    median = float(np.median(dists))
    return median if median > 0.0 else 1.0


def _pairwise_sq(x: np.ndarray) -> np.ndarray:
    sq = np.sum(x * x, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * x @ x.T
    return np.maximum(d2, 0.0)
