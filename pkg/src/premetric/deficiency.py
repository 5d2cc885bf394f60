"""Triangle deficiency of a finite pre-metric and the continuity diagnostics around it.

The deficiency ``TD(a, b)`` is the largest third side ``h(x, z)`` over chains
with ``h(x, y) <= a`` and ``h(y, z) <= b``. On a finite space it is a step
function of both arguments, stored here as a table over the sorted distinct
values of ``h``. Everything is exact: no value in a table is interpolated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import PreMetric
from .errors import PointSetMismatch

# Largest tolerated excess of the finest-scale oscillation over the
# finest-scale distance, as a fraction of the diameter.
CONTINUITY_TOLERANCE = 0.25
# Largest tolerated cross-modulus at the finest scale, as a fraction of the
# other space's diameter.
EQUIVALENCE_TOLERANCE = 0.5
# Cap on the size of automatically chosen axiom-check grids.
MAX_GRID_POINTS = 201


def _as_floats(x):
    return [float(v) for v in np.asarray(x, dtype=float).ravel()]


@dataclass(frozen=True)
class EmpiricalTD:
    """Step-function evaluator of a triangle deficiency.

    ``table[p, q]`` is the value on ``[breakpoints[p], breakpoints[p+1])``
    times ``[breakpoints[q], breakpoints[q+1])``; the last cell extends to
    infinity. ``envelope`` marks a table produced by :func:`monotone_envelope`.
    """

    breakpoints: np.ndarray
    table: np.ndarray
    envelope: bool = False

    def __post_init__(self):
        bp = np.array(self.breakpoints, dtype=float)
        t = np.array(self.table, dtype=float)
        if bp.ndim != 1 or len(bp) == 0 or bp[0] != 0 or np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be strictly increasing and start at 0")
        if t.shape != (len(bp), len(bp)):
            raise ValueError(f"table shape {t.shape} does not match {len(bp)} breakpoints")
        bp.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "table", t)

    def index(self, a):
        """Cell index of each argument: the largest breakpoint not above it."""
        idx = np.searchsorted(self.breakpoints, a, side="right") - 1
        return np.maximum(idx, 0)

    def __call__(self, a, b):
        out = self.table[self.index(a), self.index(b)]
        return float(out) if np.ndim(out) == 0 else out

    @property
    def positive_breakpoints(self) -> np.ndarray:
        return self.breakpoints[1:]

    def to_dict(self):
        return {
            "envelope": self.envelope,
            "breakpoints": _as_floats(self.breakpoints),
            "table": [_as_floats(row) for row in self.table],
        }


def empirical_td(h: PreMetric) -> EmpiricalTD:
    """Exact triangle deficiency of ``h`` at every pair of its values.

    Triple maxima are scattered into an ``m x m`` grid over value ranks,
    then a two-dimensional running max turns cell maxima into sup over the
    closed lower-left quadrant.
    """
    v = h.values
    bp = h.distinct_values()
    m = len(bp)
    ranks = np.searchsorted(bp, v)
    cell = np.zeros((m, m))
    for y in range(h.n):
        r = ranks[y]
        # chain x - y - z: first side h(x, y) has rank r[x], second h(y, z) rank r[z]
        np.maximum.at(cell, (r[:, None], r[None, :]), v)
    np.maximum.accumulate(cell, axis=0, out=cell)
    np.maximum.accumulate(cell, axis=1, out=cell)
    return EmpiricalTD(bp, cell)


def naive_td(h: PreMetric, a: float, b: float) -> float:
    """Direct O(n^3) evaluation of the deficiency at one point; oracle for tests."""
    v = h.values
    best = 0.0
    for x in range(h.n):
        for y in range(h.n):
            if v[x, y] > a:
                continue
            for z in range(h.n):
                if v[y, z] <= b and v[x, z] > best:
                    best = float(v[x, z])
    return best


def monotone_envelope(td: EmpiricalTD) -> EmpiricalTD:
    """Upper regularization ``inf{g(x', y') : x' > x, y' > y}`` on the grid.

    Arguments just above a breakpoint stay in that breakpoint's cell, so the
    open cone over a cell is the closed block of cells up and to the right.
    The infimum is then a suffix minimum; for a nondecreasing table it is the
    table itself.
    """
    t = td.table[::-1, ::-1]
    t = np.minimum.accumulate(t, axis=0)
    t = np.minimum.accumulate(t, axis=1)
    return EmpiricalTD(td.breakpoints, t[::-1, ::-1].copy(), envelope=True)


@dataclass
class AxiomReport:
    symmetric: bool
    increasing: bool
    g0_le_y: bool
    condition1: bool
    grid: list
    witnesses: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    g0_failures: list = field(default_factory=list)

    @property
    def all_pass(self) -> bool:
        return self.symmetric and self.increasing and self.g0_le_y and self.condition1

    def to_dict(self):
        return {
            "symmetric": self.symmetric,
            "increasing": self.increasing,
            "g0_le_y": self.g0_le_y,
            "g0_failures": self.g0_failures,
            "condition1": {
                "pass": self.condition1,
                "witnesses": self.witnesses,
                "failures": self.failures,
            },
            "grid": self.grid,
        }


def check_td_axioms(td: EmpiricalTD, grid) -> AxiomReport:
    """Test the deficiency-function axioms on a finite grid.

    The gap condition (JSON key ``condition1``) is tested for every grid pair
    ``y < t``: it holds when some positive breakpoint ``delta`` gives
    ``g(delta, y + delta) < t``. Only
    breakpoints are tried, so the check works at the sample's resolution: a
    pass means "verified on this grid", never more.
    """
    grid = np.unique(np.asarray(grid, dtype=float))
    t = td.table
    symmetric = bool(np.array_equal(t, t.T))
    increasing = bool(np.all(np.diff(t, axis=0) >= 0) and np.all(np.diff(t, axis=1) >= 0))
    # the table checks cover every cell; grid values only land in cells
    g0 = td(np.zeros_like(grid), grid)
    g0_bad = grid[g0 > grid]
    g0_failures = [{"y": float(y), "g": float(td(0.0, y))} for y in g0_bad]

    deltas = td.positive_breakpoints
    if len(deltas) == 0:
        deltas = np.array([1.0])
    yi, ti = np.triu_indices(len(grid), k=1)
    ys, ts = grid[yi], grid[ti]
    witnesses, failures = [], []
    if len(ys):
        vals = td(deltas[None, :], ys[:, None] + deltas[None, :])
        ok = vals < ts[:, None]
        first = np.argmax(ok, axis=1)
        has = ok[np.arange(len(ys)), first]
        for p in range(len(ys)):
            y, tt = float(ys[p]), float(ts[p])
            if has[p]:
                k = int(first[p])
                witnesses.append({"y": y, "t": tt, "delta": float(deltas[k]),
                                  "g": float(vals[p, k])})
            else:
                k = int(np.argmin(vals[p]))
                failures.append({"y": y, "t": tt, "delta": float(deltas[k]),
                                 "g_min": float(vals[p, k])})
    return AxiomReport(
        symmetric=symmetric,
        increasing=increasing,
        g0_le_y=not g0_failures,
        condition1=not failures,
        grid=_as_floats(grid),
        witnesses=witnesses,
        failures=failures,
        g0_failures=g0_failures,
    )


@dataclass
class ModulusTable:
    """A modulus ``omega(delta)`` sampled on ``deltas``, plus its finest-scale verdict.

    ``resolution`` is the smallest positive value of the controlling
    distance; below it every modulus on a finite space is trivially zero, so
    the verdict looks at ``omega(resolution)`` instead. ``kind`` is
    ``"local"`` for the local-continuity modulus of one pre-metric, or
    ``"forward"``/``"backward"`` for the two cross-moduli of a pair.
    """

    kind: str
    deltas: np.ndarray
    omega: np.ndarray
    resolution: Optional[float]
    omega_at_resolution: float
    scale: float
    tolerance: float
    witness: Optional[tuple] = None

    @property
    def excess(self) -> float:
        """Finest-scale defect, as a fraction of ``scale``.

        For the local modulus this is how far ``omega`` overshoots the
        reverse-triangle bound ``omega(delta) <= delta``; for cross-moduli it
        is the modulus itself.
        """
        if self.resolution is None or self.scale <= 0:
            return 0.0
        if self.kind == "local":
            return (self.omega_at_resolution - self.resolution) / self.scale
        return self.omega_at_resolution / self.scale

    @property
    def passes(self) -> bool:
        if self.kind == "local":
            return self.excess < self.tolerance
        return self.excess <= self.tolerance

    @property
    def is_locally_continuous(self) -> bool:
        return self.passes

    @property
    def grid_spacing(self) -> float:
        """Gap ``t - y`` beyond which the gap condition is guaranteed on the grid.

        From ``TD(delta, y + delta) <= y + delta + omega(delta)`` at the
        finest scale.
        """
        if self.resolution is None:
            return 0.0
        return self.resolution + self.omega_at_resolution

    def __call__(self, delta):
        idx = np.searchsorted(self.deltas, delta, side="right") - 1
        return np.where(idx < 0, 0.0, self.omega[np.maximum(idx, 0)])

    def to_dict(self):
        return {
            "kind": self.kind,
            "deltas": _as_floats(self.deltas),
            "omega": _as_floats(self.omega),
            "resolution": self.resolution,
            "omega_at_resolution": self.omega_at_resolution,
            "excess": self.excess,
            "tolerance": self.tolerance,
            "pass": self.passes,
            "witness": list(self.witness) if self.witness is not None else None,
        }


def _sup_under(control: np.ndarray, target: np.ndarray):
    """Per-breakpoint running max of ``target`` over pairs with ``control <= bp``."""
    bp = np.unique(control)
    ranks = np.searchsorted(bp, control)
    best = np.zeros(len(bp))
    np.maximum.at(best, ranks.ravel(), target.ravel())
    return bp, np.maximum.accumulate(best)


def _sample(bp, cum, deltas):
    idx = np.searchsorted(bp, deltas, side="right") - 1
    return np.where(idx < 0, 0.0, cum[np.maximum(idx, 0)])


def row_oscillation(h: PreMetric) -> np.ndarray:
    """``W[x, y] = max_z |h(x, z) - h(z, y)|``, the sup-distance between rows."""
    v = h.values
    out = np.empty_like(v)
    for x in range(h.n):
        out[x] = np.abs(v[x][None, :] - v).max(axis=1)
    return out


def local_continuity_modulus(h: PreMetric, deltas=None,
                             tolerance: float = CONTINUITY_TOLERANCE) -> ModulusTable:
    """``omega(delta) = sup{|h(x,z) - h(z,y)| : h(x,y) <= delta}`` over all triples.

    The diagnostic passes when, at the smallest positive distance, the
    oscillation exceeds that distance by less than ``tolerance`` times the
    diameter. Metrics have zero excess by the reverse triangle inequality.
    """
    v = h.values
    w = row_oscillation(h)
    bp, cum = _sup_under(v, w)
    deltas = bp if deltas is None else np.asarray(deltas, dtype=float)
    omega = _sample(bp, cum, deltas)
    if len(bp) < 2:
        return ModulusTable("local", deltas, omega, None, 0.0, 0.0, tolerance)
    res = float(bp[1])
    at_res = float(cum[1])
    xs, ys = np.nonzero(v == res)
    best = int(np.argmax(w[xs, ys]))
    x, y = int(xs[best]), int(ys[best])
    z = int(np.argmax(np.abs(v[x] - v[y])))
    return ModulusTable("local", deltas, omega, res, at_res, float(bp[-1]), tolerance,
                        witness=(x, y, z))


def uniform_equivalence_moduli(h, d, tolerance: float = EQUIVALENCE_TOLERANCE):
    """Cross-moduli ``sup{h : d <= delta}`` (forward) and ``sup{d : h <= delta}`` (backward).

    Each table is sampled on the controlling space's own distinct values.
    Accepts :class:`PreMetric` objects or bare matrices (a corrected matrix
    may have collapsed pairs).
    """
    hl, dl = getattr(h, "labels", None), getattr(d, "labels", None)
    hv = np.asarray(getattr(h, "values", h), dtype=float)
    dv = np.asarray(getattr(d, "values", d), dtype=float)
    if hv.shape != dv.shape or (hl is not None and dl is not None and hl != dl):
        raise PointSetMismatch(f"point sets differ ({len(hv)} vs {len(dv)} points)")

    def table(kind, control, target):
        bp, cum = _sup_under(control, target)
        if len(bp) < 2:
            return ModulusTable(kind, bp, cum, None, 0.0, 0.0, tolerance)
        res = float(bp[1])
        xs, ys = np.nonzero(control == res)
        best = int(np.argmax(target[xs, ys]))
        return ModulusTable(kind, bp, cum, res, float(cum[1]), float(target.max()),
                            tolerance, witness=(int(xs[best]), int(ys[best])))

    return table("forward", dv, hv), table("backward", hv, dv)


def resolved_grid(modulus: ModulusTable, upper: float = 1.0,
                  max_points: int = MAX_GRID_POINTS) -> np.ndarray:
    """Uniform grid on ``[0, upper]`` coarse enough for the gap condition to be decidable.

    The spacing strictly exceeds :attr:`ModulusTable.grid_spacing`; a
    pre-metric that passes the local-continuity diagnostic satisfies
    the gap condition at every pair of this grid. At most ``max_points`` points
    (a coarser grid keeps the guarantee).
    """
    gap = modulus.grid_spacing
    if gap <= 0:
        return np.linspace(0.0, upper, 11)
    count = int(np.floor(upper / (gap * (1 + 1e-9)))) if gap < upper else 0
    if count < 1:
        return np.array([0.0])
    return np.linspace(0.0, upper, min(count, max_points - 1) + 1)


def default_grid(modulus: ModulusTable, upper: float = 1.0,
                 max_points: int = MAX_GRID_POINTS) -> np.ndarray:
    """Axiom-check grid: :func:`resolved_grid` when the diagnostic passes.

    Otherwise the resolved grid degenerates, so the grid steps by the
    finest positive value instead; that is the scale at which a jump shows
    up as a gap-condition failure.
    """
    if modulus.passes or not modulus.resolution:
        return resolved_grid(modulus, upper, max_points)
    count = int(round(upper / modulus.resolution))
    return np.linspace(0.0, upper, min(max(count, 1), max_points - 1) + 1)
