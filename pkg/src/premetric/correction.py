"""Dyadic correction functions and the corrected metric ``f o h``.

A correction function ``f`` for a deficiency profile ``g`` is increasing with
``f(0) = 0`` and ``f(g(a, b)) <= f(a) + f(b)``. It is read off a sequence
``r[q]`` indexed by dyadic rationals ``q = k / 2**depth`` that is strictly
increasing and satisfies ``g(r[q], r[q']) < r[q + q']``. The sequence is
built level by level, each new value being the midpoint between its left
neighbour and the tightest feasibility bound among a set of constraints.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Union

import numpy as np

from .core import PreMetric, matrix_violations, normalize, validate_premetric
from .deficiency import (
    CONTINUITY_TOLERANCE,
    EQUIVALENCE_TOLERANCE,
    EmpiricalTD,
    empirical_td,
    local_continuity_modulus,
    monotone_envelope,
    uniform_equivalence_moduli,
)
from .errors import NotATDFunction

DEFAULT_DEPTH = 10
S_TOLERANCE = 2.0 ** -40


class AnalyticTD:
    """Wrap a closed-form ``g(a, b)`` so it broadcasts over numpy arrays."""

    def __init__(self, func: Callable, name: str = "analytic"):
        self.func = func
        self.name = name

    def __call__(self, a, b):
        a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
        out = np.broadcast_to(np.asarray(self.func(a, b), dtype=float), a.shape)
        return float(out) if out.ndim == 0 else out

    def __repr__(self):
        return f"AnalyticTD({self.name})"


TDEvaluator = Union[EmpiricalTD, AnalyticTD]


def _label(k: int, depth: int) -> str:
    return f"{k}/2^{depth}"


def _frac(k: int, depth: int) -> str:
    return str(Fraction(k, 2 ** depth))


def _table_feasible(g: EmpiricalTD, c: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Exact ``sup{s in [0, 1] : g(s, c) < t}`` for a step table.

    ``g(., c)`` is constant on each cell, so the feasible set is
    ``[0, b)`` where ``b`` is the first breakpoint whose cell reaches ``t``.
    That breakpoint is returned: it is not itself feasible, but every value
    strictly below it is, and the construction only ever uses values strictly
    below ``s``. 1.0 is returned when the whole interval is feasible, 0.0
    when nothing is.
    """
    cols = g.index(c)
    out = np.empty(len(c))
    order = np.argsort(cols, kind="stable")
    cols_sorted = cols[order]
    starts = np.flatnonzero(np.r_[True, cols_sorted[1:] != cols_sorted[:-1]])
    ends = np.r_[starts[1:], len(cols_sorted)]
    m = len(g.breakpoints)
    for a, b in zip(starts, ends):
        sel = order[a:b]
        column = g.table[:, cols_sorted[a]]
        p = np.searchsorted(column, t[sel], side="left")
        # a non-monotone column would break the prefix argument; fall back to a scan
        if np.any(np.diff(column) < 0):
            p = np.array([int(np.argmax(column >= tt)) if np.any(column >= tt) else m
                          for tt in t[sel]])
        vals = np.where(p >= m, 1.0, g.breakpoints[np.minimum(p, m - 1)])
        vals = np.where(p == 0, 0.0, np.minimum(vals, 1.0))
        out[sel] = vals
    return out


def _bisect_feasible(g, c: np.ndarray, t: np.ndarray, s_tolerance: float) -> np.ndarray:
    """Largest ``s`` with ``g(s, c) < t`` to within ``s_tolerance``, from below."""
    one = np.ones_like(c)
    lo = np.zeros_like(c)
    hi = one.copy()
    full = g(one, c) < t
    none = ~(g(lo, c) < t)
    live = ~(full | none)
    while np.any(live & (hi - lo > s_tolerance)):
        mid = (lo + hi) / 2
        ok = g(mid, c) < t
        lo = np.where(live & ok, mid, lo)
        hi = np.where(live & ~ok, mid, hi)
    return np.where(full, 1.0, np.where(none, 0.0, lo))


def max_feasible_s(g: TDEvaluator, c, t, s_tolerance: float = S_TOLERANCE):
    """Largest ``s`` in ``[0, 1]`` with ``g(s, c) < t``; 0 when none is positive.

    Step tables are scanned exactly (see :func:`_table_feasible` for the
    half-open convention). Any other evaluator is bisected, returning a
    feasible point within ``s_tolerance`` of the supremum. Accepts scalars
    or equal-length arrays.
    """
    scalar = np.ndim(c) == 0 and np.ndim(t) == 0
    c = np.atleast_1d(np.asarray(c, dtype=float))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    c, t = np.broadcast_arrays(c, t)
    c, t = c.copy(), t.copy()
    if isinstance(g, EmpiricalTD):
        out = _table_feasible(g, c, t)
    else:
        out = _bisect_feasible(g, c, t, s_tolerance)
    return float(out[0]) if scalar else out


@dataclass
class DyadicCorrectionSequence:
    """Values ``r[k]`` at ``q = k / 2**depth`` for ``k = 0 .. 2**depth``.

    ``provenance[k]`` names the term that achieved the minimum bound ``s_q``
    when ``r[k]`` was set: ``"q"``, ``"r[q+]"``, ``"r[2q]"``, ``"s[q,0]"`` or
    ``"s[q,q']"`` with ``q'`` spelled out.
    """

    depth: int
    r: np.ndarray
    provenance: list
    g: Optional[TDEvaluator] = field(default=None, repr=False, compare=False)

    @property
    def size(self) -> int:
        return 2 ** self.depth

    def q(self, k: int) -> Fraction:
        return Fraction(k, self.size)

    def value(self, q) -> float:
        q = Fraction(q)
        k = q * self.size
        if k.denominator != 1:
            raise KeyError(f"{q} is not a level-{self.depth} dyadic")
        return float(self.r[int(k)])

    def to_dict(self):
        return {
            "depth": self.depth,
            "r": [{"q": _label(k, self.depth), "r": float(v)} for k, v in enumerate(self.r)],
        }


def _partial(r: np.ndarray, depth: int) -> dict:
    return {_label(k, depth): float(v) for k, v in enumerate(r) if not np.isnan(v)}


def build_dyadic_sequence(g: TDEvaluator, depth: int = DEFAULT_DEPTH,
                          s_tolerance: float = S_TOLERANCE) -> DyadicCorrectionSequence:
    """Build ``r`` level by level, then verify both defining conditions.

    At level ``L`` the new points are ``q = k / 2**L`` with ``k`` odd.
    For ``k >= 3`` the bound ``s_q`` is the minimum of ``q``, ``r[q+]`` and
    ``max{s : g(s, r[q']) < r[q- + q']}`` over level-``(L-1)`` points ``q'``
    with ``q' <= 1 - q-``; then ``r[q]`` is the midpoint of ``(r[q-], s_q)``.
    Those points only read the previous level, so they are done first. The
    point ``q = 1 / 2**L`` also constrains against level-``L`` points: its
    bound is the minimum of ``q``, ``r[2q]``, ``max{s : g(s, r[2q]/2) < r[2q]}``
    and ``max{s : g(s, r[q']) < r[q + q']}`` for level-``L`` points
    ``q'`` in ``[2q, 1 - q]``; ``r[q]`` is half of it.

    Raises
    ------
    NotATDFunction
        When some ``s_q`` leaves no room above ``r[q-]``, or when the
        finished sequence fails the increasing or subadditivity check.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    size = 2 ** depth
    r = np.full(size + 1, np.nan)
    r[0], r[size] = 0.0, 1.0
    prov = [""] * (size + 1)
    prov[0], prov[size] = "r0", "r1"

    for level in range(1, depth + 1):
        step = 2 ** (depth - level)
        n_prev = 2 ** (level - 1)

        # odd k >= 3: constraints against the previous level only
        ks, js = [], []
        for k in range(3, 2 ** level, 2):
            jmax = (2 ** level - k + 1) // 2
            ks.append(np.full(jmax, k))
            js.append(np.arange(1, jmax + 1))
        if ks:
            k_all = np.concatenate(ks)
            j_all = np.concatenate(js)
            c = r[2 * j_all * step]
            t = r[(k_all - 1 + 2 * j_all) * step]
            s_all = max_feasible_s(g, c, t, s_tolerance)
            bounds = np.split(s_all, np.cumsum([len(x) for x in js])[:-1])
            for k, jv, sv in zip(range(3, 2 ** level, 2), js, bounds):
                q = k / 2 ** level
                r_plus = r[(k + 1) * step]
                cands = [q, r_plus]
                names = ["q", "r[q+]"]
                i = int(np.argmin(sv))
                cands.append(float(sv[i]))
                names.append(f"s[q,{Fraction(int(jv[i]), n_prev)}]")
                w = int(np.argmin(cands))
                s_q = cands[w]
                r_minus = r[(k - 1) * step]
                if not s_q > r_minus:
                    raise NotATDFunction(
                        f"no room for r at q={Fraction(k, 2 ** level)}: "
                        f"s_q={s_q!r} <= r[q-]={r_minus!r}",
                        level=level,
                        witness={"q": str(Fraction(k, 2 ** level)), "s_q": s_q,
                                 "r_q_minus": float(r_minus), "bound": names[w]},
                        partial=_partial(r, depth))
                r[k * step] = (r_minus + s_q) / 2
                prov[k * step] = names[w]

        # k = 1
        q = 1 / 2 ** level
        r2q = r[2 * step]
        s_q0 = max_feasible_s(g, r2q / 2, r2q, s_tolerance)
        cands = [q, r2q, s_q0]
        names = ["q", "r[2q]", "s[q,0]"]
        jv = np.arange(2, 2 ** level)
        if len(jv):
            sv = max_feasible_s(g, r[jv * step], r[(jv + 1) * step], s_tolerance)
            i = int(np.argmin(sv))
            cands.append(float(sv[i]))
            names.append(f"s[q,{Fraction(int(jv[i]), 2 ** level)}]")
        w = int(np.argmin(cands))
        s_q = cands[w]
        if not s_q > 0:
            raise NotATDFunction(
                f"no room for r at q=1/{2 ** level}: s_q={s_q!r}",
                level=level,
                witness={"q": str(Fraction(1, 2 ** level)), "s_q": s_q,
                         "r_q_minus": 0.0, "bound": names[w]},
                partial=_partial(r, depth))
        r[step] = s_q / 2
        prov[step] = names[w]

    seq = DyadicCorrectionSequence(depth, r, prov, g)
    check = verify_sequence(seq, g)
    if not (check["c1"]["pass"] and check["c2"]["pass"]):
        failed = "c1" if not check["c1"]["pass"] else "c2"
        raise NotATDFunction(
            f"constructed sequence fails {failed.upper()}",
            level=depth, witness=check[failed], partial=_partial(r, depth))
    return seq


def verify_sequence(seq: DyadicCorrectionSequence, g: Optional[TDEvaluator] = None) -> dict:
    """Exhaustive check of strict monotonicity and strict ``g``-subadditivity.

    Subadditivity is checked for every pair of positive dyadics whose sum is
    at most 1.
    """
    g = seq.g if g is None else g
    r = seq.r
    size = seq.size
    d = np.diff(r)
    c1_bad = np.flatnonzero(~(d > 0))
    c1 = {"pass": len(c1_bad) == 0, "pairs": int(len(d)),
          "min_gap": float(d.min())}
    if len(c1_bad):
        k = int(c1_bad[0])
        c1["failure"] = {"q": _label(k, seq.depth), "q_next": _label(k + 1, seq.depth),
                         "r": float(r[k]), "r_next": float(r[k + 1])}

    k = np.arange(1, size)
    lhs = g(r[k][:, None], r[k][None, :])
    total = k[:, None] + k[None, :]
    mask = total <= size
    rhs = r[np.minimum(total, size)]
    margin = np.where(mask, rhs - lhs, np.inf)
    c2 = {"pass": bool(np.all(margin > 0)), "pairs": int(mask.sum()),
          "min_margin": float(margin.min()) if mask.any() else None}
    if not c2["pass"]:
        a, b = np.unravel_index(int(np.argmin(margin)), margin.shape)
        ka, kb = int(k[a]), int(k[b])
        c2["failure"] = {"q": _label(ka, seq.depth), "q_prime": _label(kb, seq.depth),
                         "g": float(lhs[a, b]), "r_sum": float(rhs[a, b])}
    return {"c1": c1, "c2": c2}


@dataclass
class CorrectionFunction:
    """``f(t) = sup{q : r[q] < t}`` over the sequence's dyadics, ``sup {} = 0``.

    ``f`` takes values in ``{0, 2**-depth, ..., 1}``; inputs at or below the
    finest value ``r[2**-depth]`` map to 0. ``scale`` is the normalization
    divisor of the pre-metric ``f`` was built for; ``f`` itself acts on
    normalized values.
    """

    sequence: DyadicCorrectionSequence
    scale: float = 1.0

    @property
    def depth(self) -> int:
        return self.sequence.depth

    @property
    def resolution(self) -> float:
        return 2.0 ** -self.depth

    @property
    def slack(self) -> float:
        return 2 * self.resolution

    def sup_form(self, t):
        """``sup{q in D : r[q] < t}`` with ``sup {} = 0``."""
        t = np.asarray(t, dtype=float)
        k = np.searchsorted(self.sequence.r, t, side="left") - 1
        out = np.maximum(k, 0) / self.sequence.size
        return float(out) if out.ndim == 0 else out

    def inf_form(self, t):
        """``inf{q in D : r[q] > t}`` with ``inf {} = 1``."""
        t = np.asarray(t, dtype=float)
        k = np.searchsorted(self.sequence.r, t, side="right")
        out = np.minimum(k, self.sequence.size) / self.sequence.size
        return float(out) if out.ndim == 0 else out

    __call__ = sup_form

    def to_dict(self):
        d = self.sequence.to_dict()
        d["scale"] = self.scale
        return d

    @classmethod
    def from_dict(cls, data) -> "CorrectionFunction":
        depth = int(data["depth"])
        r = np.array([float(e["r"]) for e in data["r"]])
        if len(r) != 2 ** depth + 1:
            raise ValueError(f"expected {2 ** depth + 1} values for depth {depth}")
        seq = DyadicCorrectionSequence(depth, r, [""] * len(r))
        return cls(seq, float(data.get("scale", 1.0)))


def correction_value(f: CorrectionFunction, t):
    return f(t)


def verify_correction(f: CorrectionFunction, g: TDEvaluator, grid) -> dict:
    """Check ``f(g(a, b)) <= f(a) + f(b) + slack`` at every grid pair.

    ``grid`` is an ``(k, 2)`` array of ``(a, b)`` pairs; ``slack`` is
    ``2 * 2**-depth``.
    """
    grid = np.asarray(grid, dtype=float).reshape(-1, 2)
    a, b = grid[:, 0], grid[:, 1]
    excess = f(g(a, b)) - (f(a) + f(b))
    worst = int(np.argmax(excess)) if len(excess) else 0
    over = excess > f.slack
    return {
        "pairs": int(len(excess)),
        "slack": f.slack,
        "worst_excess": float(excess[worst]) if len(excess) else 0.0,
        "worst_pair": [float(a[worst]), float(b[worst])] if len(excess) else None,
        "violations": int(over.sum()),
        "pass": not bool(over.any()),
    }


def dense_grid(count: int, upper: float = 1.0) -> np.ndarray:
    """All ``count x count`` pairs of a uniform grid on ``[0, upper]``."""
    x = np.linspace(0.0, upper, count)
    a, b = np.meshgrid(x, x, indexing="ij")
    return np.column_stack([a.ravel(), b.ravel()])


def _preflight(h: PreMetric, tolerance: float):
    """Refuse pre-metrics whose finest-scale oscillation is too large.

    Returns the modulus table on success; raises with a gap-condition
    witness built from the offending triple otherwise.
    """
    modulus = local_continuity_modulus(h, tolerance=tolerance)
    if modulus.passes:
        return modulus
    x, y, z = modulus.witness
    v = h.values
    if v[x, z] < v[y, z]:
        x, y = y, x
    short, long_ = float(v[y, z]), float(v[x, z])
    delta = modulus.resolution
    t = (short + long_) / 2
    td = empirical_td(h)
    osc = modulus.omega_at_resolution
    level = max(1, int(np.ceil(np.log2(1 / osc)))) if osc > 0 else 1
    raise NotATDFunction(
        f"not locally continuous at resolution {delta!r}: oscillation "
        f"{osc!r} exceeds it by more than {tolerance} of the diameter",
        level=level,
        witness={
            "triple": [x, y, z],
            "resolution": delta,
            "oscillation": osc,
            "excess": modulus.excess,
            "condition1": {"y": short, "t": t, "delta": delta,
                           "g": float(td(delta, short + delta))},
        })


@dataclass
class CorrectionResult:
    """``matrix`` is ``f(h / scale)`` on the original points.

    Pairs whose ``h`` falls at or below the finest dyadic value collapse to
    0; :attr:`metric` quotients them away, the report counts them.
    """

    matrix: np.ndarray
    function: CorrectionFunction
    report: dict
    labels: Optional[tuple] = None

    @property
    def metric(self) -> PreMetric:
        return validate_premetric(self.matrix, labels=self.labels)


def correct_premetric(h: PreMetric, depth: int = DEFAULT_DEPTH,
                      s_tolerance: float = S_TOLERANCE,
                      continuity_tolerance: float = CONTINUITY_TOLERANCE,
                      equivalence_tolerance: float = EQUIVALENCE_TOLERANCE) -> CorrectionResult:
    """Turn ``h`` into the metric ``f(h / scale)``.

    ``f`` is built against the monotone envelope of the exact deficiency of
    the normalized ``h``. Raises :class:`NotATDFunction` when ``h`` fails the
    local-continuity diagnostic or when the construction degenerates.
    """
    hn, scale = normalize(h)
    modulus = _preflight(hn, continuity_tolerance)
    g = monotone_envelope(empirical_td(hn))
    seq = build_dyadic_sequence(g, depth, s_tolerance)
    f = CorrectionFunction(seq, scale)
    m = f(hn.values)
    violations = matrix_violations(m, tolerance=0.0)
    beyond = [v for v in violations if v.slack > f.slack]
    forward, backward = uniform_equivalence_moduli(m, h, equivalence_tolerance)
    off = ~np.eye(h.n, dtype=bool)
    report = {
        "depth": depth,
        "scale": scale,
        "slack": f.slack,
        "sequence": verify_sequence(seq, g),
        "triangle": {
            "violations": len(violations),
            "beyond_slack": len(beyond),
            "worst_slack": violations[0].slack if violations else 0.0,
            "pass": not beyond,
        },
        "collapsed_pairs": int(np.count_nonzero((m == 0) & off)) // 2,
        "local_continuity": modulus.to_dict(),
        "equivalence": {"forward": forward.to_dict(), "backward": backward.to_dict()},
    }
    return CorrectionResult(m, f, report, h.labels)
