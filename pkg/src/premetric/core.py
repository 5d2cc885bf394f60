"""Finite pre-metric spaces: validation, triangle-violation search, normalization."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (
    AllZero,
    AsymmetricInput,
    MalformedInput,
    NegativeEntry,
    NonzeroDiagonal,
)

ZERO_TOLERANCE = 1e-12


@dataclass(frozen=True)
class PreMetric:
    """A symmetric, reflexive dissimilarity on ``n`` labelled points.

    ``values`` is stored as a read-only float64 array. Construct through
    :func:`validate_premetric` unless the matrix is known to be clean.
    """

    values: np.ndarray
    labels: Optional[tuple] = None
    warnings: tuple = field(default=(), compare=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] < 1:
            raise MalformedInput(f"expected a non-empty square matrix, got shape {v.shape}")
        if not np.array_equal(v, v.T):
            raise AsymmetricInput("matrix is not exactly symmetric")
        if np.any(np.diag(v) != 0):
            raise NonzeroDiagonal("diagonal must be zero")
        off = v[~np.eye(len(v), dtype=bool)]
        if np.any(off <= 0):
            raise NegativeEntry("off-diagonal entries must be strictly positive")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            if len(labels) != len(v):
                raise MalformedInput(f"{len(labels)} labels for {len(v)} points")
            object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def __len__(self):
        return self.n

    @property
    def diameter(self) -> float:
        return float(self.values.max())

    def distinct_values(self) -> np.ndarray:
        """Sorted distinct entries, always starting with 0."""
        return np.unique(self.values)


@dataclass(frozen=True)
class TriangleViolation:
    i: int
    j: int
    k: int
    slack: float

    def to_dict(self):
        return {"i": self.i, "j": self.j, "k": self.k, "slack": self.slack}


def validate_premetric(matrix, zero_tolerance: float = ZERO_TOLERANCE,
                       labels: Optional[Sequence[str]] = None) -> PreMetric:
    """Check and clean a raw dissimilarity matrix.

    Entries below ``zero_tolerance`` in absolute value are snapped to zero.
    Off-diagonal zeros make two points indistinguishable; such points are
    merged into the class of the lowest index and a warning is recorded.
    """
    try:
        a = np.array(matrix, dtype=float)
    except (TypeError, ValueError) as exc:
        raise MalformedInput(f"matrix is not numeric: {exc}") from None
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise MalformedInput(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise MalformedInput("matrix has non-finite entries")
    if labels is not None and len(labels) != len(a):
        raise MalformedInput(f"{len(labels)} labels for {len(a)} points")

    a[np.abs(a) < zero_tolerance] = 0.0
    if np.any(a < 0):
        i, j = map(int, np.argwhere(a < 0)[0])
        raise NegativeEntry(f"negative entry {float(a[i, j])!r} at ({i}, {j})")
    diag = np.diag(a)
    if np.any(diag != 0):
        i = int(np.flatnonzero(diag)[0])
        raise NonzeroDiagonal(f"diagonal entry {float(diag[i])!r} at index {i}")
    gap = np.abs(a - a.T)
    if np.any(gap > zero_tolerance):
        i, j = map(int, np.unravel_index(np.argmax(gap), gap.shape))
        raise AsymmetricInput(
            f"entries ({i}, {j}) = {float(a[i, j])!r} and ({j}, {i}) = {float(a[j, i])!r} differ")
    if np.any(gap):
        a = (a + a.T) / 2

    n = len(a)
    rep = list(range(n))
    for i in range(n):
        if rep[i] != i:
            continue
        for j in range(i + 1, n):
            if rep[j] == j and a[i, j] == 0:
                rep[j] = i

    warnings = []
    keep = [i for i in range(n) if rep[i] == i]
    names = list(labels) if labels is not None else [str(i) for i in range(n)]
    for j in range(n):
        if rep[j] != j:
            warnings.append(f"points {names[rep[j]]} and {names[j]} are at distance 0; "
                            f"merged into {names[rep[j]]}")
    if len(keep) < n:
        a = a[np.ix_(keep, keep)]
        if labels is not None:
            labels = [labels[i] for i in keep]
    return PreMetric(a, tuple(labels) if labels is not None else None, tuple(warnings))


def triangle_violations(h: PreMetric, tolerance: float = 0.0) -> list[TriangleViolation]:
    """All triangle-inequality failures with slack above ``tolerance``.

    Slack is symmetric in the two endpoints, so each failure is reported once
    with ``i < k`` and ``j`` the intermediate point. Sorted by descending
    slack, ties broken by index.
    """
    return matrix_violations(h.values, tolerance)


def matrix_violations(values, tolerance: float = 0.0) -> list[TriangleViolation]:
    """:func:`triangle_violations` on a bare square matrix (zeros allowed off the diagonal)."""
    v = np.asarray(values, dtype=float)
    n = len(v)
    found = []
    idx = np.arange(n)
    for j in range(n):
        slack = v - (v[:, j][:, None] + v[j, :][None, :])
        slack[j, :] = -np.inf
        slack[:, j] = -np.inf
        slack[idx, idx] = -np.inf
        ii, kk = np.nonzero(np.triu(slack > tolerance, k=1))
        for i, k in zip(ii.tolist(), kk.tolist()):
            found.append(TriangleViolation(i, j, k, float(slack[i, k])))
    found.sort(key=lambda t: (-t.slack, t.i, t.j, t.k))
    return found


def is_metric(h: PreMetric, tolerance: float = 0.0) -> bool:
    return not triangle_violations(h, tolerance)


def normalize(h: PreMetric) -> tuple[PreMetric, float]:
    """Divide by the largest entry; returns the scaled space and the divisor."""
    scale = float(h.values.max())
    if scale <= 0:
        raise AllZero("a single-point space cannot be normalized")
    return PreMetric(h.values / scale, h.labels, h.warnings), scale
