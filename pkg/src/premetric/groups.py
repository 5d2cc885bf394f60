"""Left-invariant metrics on finite groups from separating bump functions.

Pipeline: a metric ``d`` on the group gives a symmetric radius ``rho``;
radii ``r_0 = 1 > r_1 > ...`` with ``r_n <= 2**-n`` cut ``rho`` into bumps
``f_n`` (0 near the identity, 1 far from it); the series
``h(x, y) = sum_n 2**-(n+1) f_n(x^-1 y)`` is a left-invariant pre-metric,
and correcting it yields a left-invariant metric uniformly equivalent to
``d``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import PreMetric, normalize, triangle_violations, validate_premetric
from .correction import (
    DEFAULT_DEPTH,
    S_TOLERANCE,
    CorrectionFunction,
    correct_premetric,
)
from .deficiency import (
    CONTINUITY_TOLERANCE,
    EQUIVALENCE_TOLERANCE,
    uniform_equivalence_moduli,
)
from .errors import DegenerateMetric, InvalidGroup, MalformedInput

EXHAUSTIVE_ASSOCIATIVITY = 64
SAMPLED_TRIPLES = 100_000


@dataclass(frozen=True)
class FiniteGroup:
    """A group given by its multiplication table over indices ``0 .. m-1``.

    ``mult[a, b]`` is the index of ``a * b``. The constructor checks every
    axiom and raises :class:`InvalidGroup` with the failing indices.
    """

    mult: np.ndarray
    identity: int = 0
    labels: Optional[tuple] = None

    def __post_init__(self):
        try:
            t = np.array(self.mult, dtype=np.int64)
        except (TypeError, ValueError, OverflowError):
            raise InvalidGroup("multiplication table is not an integer matrix") from None
        if t.ndim != 2 or t.shape[0] != t.shape[1] or t.shape[0] < 1:
            raise InvalidGroup(f"multiplication table must be square, got shape {t.shape}")
        m = t.shape[0]
        if t.min() < 0 or t.max() >= m:
            raise InvalidGroup("table entries must be element indices 0..m-1")
        full = np.arange(m)
        for i in range(m):
            if not np.array_equal(np.sort(t[i]), full):
                raise InvalidGroup(f"row {i} is not a permutation (Latin square fails)",
                                   witness={"row": i})
            if not np.array_equal(np.sort(t[:, i]), full):
                raise InvalidGroup(f"column {i} is not a permutation (Latin square fails)",
                                   witness={"column": i})
        e = int(self.identity)
        if not 0 <= e < m:
            raise InvalidGroup(f"identity index {e} out of range")
        if not (np.array_equal(t[e], full) and np.array_equal(t[:, e], full)):
            raise InvalidGroup(f"element {e} is not a two-sided identity", witness={"identity": e})
        inv = np.argmax(t == e, axis=1)
        bad = np.flatnonzero(t[inv, full] != e)
        if len(bad):
            x = int(bad[0])
            raise InvalidGroup(f"element {x} has no two-sided inverse", witness={"element": x})
        _check_associative(t)
        t.setflags(write=False)
        inv.setflags(write=False)
        object.__setattr__(self, "mult", t)
        object.__setattr__(self, "identity", e)
        object.__setattr__(self, "_inv", inv)
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(str(s) for s in self.labels))

    @property
    def order(self) -> int:
        return self.mult.shape[0]

    @property
    def inv(self) -> np.ndarray:
        return self._inv

    def quotient_index(self) -> np.ndarray:
        """``Q[x, y]`` = index of ``x^-1 y``."""
        return self.mult[self.inv[:, None], np.arange(self.order)[None, :]]

    def to_dict(self):
        return {"order": self.order, "identity": self.identity,
                "mult": self.mult.tolist()}


def _check_associative(t: np.ndarray):
    m = len(t)
    if m <= EXHAUSTIVE_ASSOCIATIVITY:
        left = t[t[:, :, None], np.arange(m)[None, None, :]]   # (ab)c
        right = t[np.arange(m)[:, None, None], t[None, :, :]]  # a(bc)
        bad = np.argwhere(left != right)
        if len(bad):
            a, b, c = map(int, bad[0])
            raise InvalidGroup(f"associativity fails at ({a}, {b}, {c})",
                               witness={"triple": [a, b, c]})
        return
    rng = np.random.default_rng(0)
    a, b, c = rng.integers(0, m, size=(3, SAMPLED_TRIPLES))
    bad = np.flatnonzero(t[t[a, b], c] != t[a, t[b, c]])
    if len(bad):
        i = int(bad[0])
        raise InvalidGroup(f"associativity fails at ({a[i]}, {b[i]}, {c[i]})",
                           witness={"triple": [int(a[i]), int(b[i]), int(c[i])]})


def _compose(p, q):
    return tuple(p[i] for i in q)


def _invert(p):
    out = [0] * len(p)
    for i, v in enumerate(p):
        out[v] = i
    return tuple(out)


def cayley_group(generators: Sequence[Sequence[int]]):
    """Close permutation generators into a group and compute the word metric.

    Elements are numbered in breadth-first order from the identity, so the
    result is deterministic. The word metric counts generators and their
    inverses: ``d(x, y) = |x^-1 y|``, which is left-invariant.

    Returns ``(group, word_metric_matrix, elements)``.
    """
    gens = [tuple(int(v) for v in g) for g in generators]
    if not gens:
        raise MalformedInput("need at least one generator")
    k = len(gens[0])
    for g in gens:
        if len(g) != k or sorted(g) != list(range(k)):
            raise MalformedInput(f"generator {list(g)} is not a permutation of 0..{k - 1}")
    steps = gens + [_invert(g) for g in gens]
    ident = tuple(range(k))
    index = {ident: 0}
    elements = [ident]
    length = [0]
    queue = deque([ident])
    while queue:
        x = queue.popleft()
        for s in steps:
            y = _compose(x, s)
            if y not in index:
                index[y] = len(elements)
                elements.append(y)
                length.append(length[index[x]] + 1)
                queue.append(y)
    m = len(elements)
    mult = np.empty((m, m), dtype=np.int64)
    for i, x in enumerate(elements):
        for j, y in enumerate(elements):
            mult[i, j] = index[_compose(x, y)]
    group = FiniteGroup(mult, 0, tuple(" ".join(map(str, p)) for p in elements))
    word = np.asarray(length, dtype=float)[group.quotient_index()]
    return group, word, elements


def cyclic_group(n: int):
    return cayley_group([[(i + 1) % n for i in range(n)]])


def symmetric_group(k: int):
    gens = []
    for i in range(k - 1):
        p = list(range(k))
        p[i], p[i + 1] = p[i + 1], p[i]
        gens.append(p)
    return cayley_group(gens or [list(range(k))])


def dihedral_group(k: int):
    """Symmetries of the regular ``k``-gon (order ``2k``), generated by a rotation and a flip."""
    rot = [(i + 1) % k for i in range(k)]
    flip = [(-i) % k for i in range(k)]
    return cayley_group([rot, flip])


def group_from_json(data: dict):
    """Parse the group JSON format; returns ``(group, metric_matrix)``.

    Either ``{"order", "mult", "identity", "metric": [[...]]}`` or
    ``{"generators": [[perm], ...], "metric": "word" | [[...]]}``.
    """
    if not isinstance(data, dict):
        raise MalformedInput("group file must hold a JSON object")
    metric = data.get("metric")
    if "generators" in data:
        group, word, _ = cayley_group(data["generators"])
        if metric is None or metric == "word":
            return group, word
        return group, np.asarray(metric, dtype=float)
    if "mult" not in data:
        raise MalformedInput("group JSON needs either 'mult' or 'generators'")
    group = FiniteGroup(data["mult"], int(data.get("identity", 0)), data.get("labels"))
    if "order" in data and int(data["order"]) != group.order:
        raise InvalidGroup(f"declared order {data['order']} but table has {group.order} rows")
    if metric is None or isinstance(metric, str):
        raise MalformedInput("a table-defined group needs an explicit metric matrix")
    metric = np.asarray(metric, dtype=float)
    if metric.shape != (group.order, group.order):
        raise MalformedInput(f"metric shape {metric.shape} does not match order {group.order}")
    return group, metric


def symmetrized_radius(group: FiniteGroup, d: PreMetric) -> np.ndarray:
    """``rho(x) = max(d(e, x), d(e, x^-1))``."""
    row = d.values[group.identity]
    return np.maximum(row, row[group.inv])


@dataclass
class BumpFamily:
    """Radii ``r_0 .. r_N`` and bumps ``f_0 .. f_{N-1}`` (one row per bump).

    Every bump beyond ``N`` is the indicator of the non-identity elements;
    their total weight ``2**-N`` is the tail of the series.
    """

    radii: np.ndarray
    bumps: np.ndarray
    rho: np.ndarray

    @property
    def N(self) -> int:
        return len(self.bumps)

    def check(self) -> dict:
        """Exact check of the bump conditions on every element."""
        out = {"zero_inside": True, "one_outside": True, "radius_bound": True,
               "decreasing": bool(np.all(np.diff(self.radii) < 0))}
        for n in range(self.N):
            f = self.bumps[n]
            if np.any(f[self.rho < self.radii[n + 1]] != 0):
                out["zero_inside"] = False
            if np.any(f[self.rho >= self.radii[n]] != 1):
                out["one_outside"] = False
        out["radius_bound"] = bool(np.all(self.radii <= 2.0 ** -np.arange(len(self.radii))))
        out["pass"] = all(out.values())
        return out

    def to_dict(self):
        return {"N": self.N, "radii": [float(r) for r in self.radii],
                "bumps": [[float(v) for v in row] for row in self.bumps]}


def _next_radius(r: float, n: int, levels: np.ndarray) -> float:
    cap = min(r / 2, 2.0 ** -(n + 1))
    hit = np.flatnonzero(levels == cap)
    if len(hit):
        # the cap is itself a radius value: step strictly inside the gap below it
        return float((levels[hit[0] - 1] + cap) / 2)
    return cap


def build_bump_family(group: FiniteGroup, d: PreMetric, N: Optional[int] = None) -> BumpFamily:
    """Radii and piecewise-linear bumps for a metric of diameter at most 1.

    ``r_{n+1}`` is ``min(r_n / 2, 2**-(n+1))``, moved strictly between two
    consecutive radius values when it would land on one. With ``N=None``
    the family stops at the first ``N >= 1`` whose ball ``{rho < r_N}`` is
    just the identity.
    """
    if d.n != group.order:
        raise MalformedInput(f"metric has {d.n} points, group has order {group.order}")
    if d.diameter > 1:
        raise DegenerateMetric(f"metric diameter {d.diameter!r} exceeds 1; normalize first")
    rho = symmetrized_radius(group, d)
    levels = np.unique(rho)
    if group.order == 1:
        return BumpFamily(np.array([1.0]), np.zeros((0, 1)), rho)
    if len(levels) < 2:
        raise DegenerateMetric("all elements are at distance 0 from the identity")
    smallest = levels[1]
    radii = [1.0]
    n = 0
    while True:
        radii.append(_next_radius(radii[-1], n, levels))
        n += 1
        if N is None and radii[-1] <= smallest:
            break
        if N is not None and n >= N:
            break
    radii = np.array(radii)
    bumps = np.array([
        np.clip((rho - radii[k + 1]) / (radii[k] - radii[k + 1]), 0.0, 1.0)
        for k in range(len(radii) - 1)
    ])
    return BumpFamily(radii, bumps, rho)


def identity_profile(group: FiniteGroup, bumps: BumpFamily) -> np.ndarray:
    """``h(e, x)`` for every ``x``: the weighted bump sum plus the closed-form tail."""
    m = group.order
    total = np.zeros(m)
    for n in range(bumps.N):
        total = total + 2.0 ** -(n + 1) * bumps.bumps[n]
    tail = np.where(np.arange(m) == group.identity, 0.0, 2.0 ** -bumps.N)
    if m == 1:
        return total
    return total + tail


def left_invariant_premetric(group: FiniteGroup, bumps: BumpFamily) -> PreMetric:
    """``h(x, y) = profile(x^-1 y)``; left-invariant by construction."""
    profile = identity_profile(group, bumps)
    return PreMetric(profile[group.quotient_index()], group.labels)


def left_invariance_defects(group: FiniteGroup, values: np.ndarray) -> int:
    """Number of ``(g, x, y)`` with ``M[gx, gy] != M[x, y]`` (exact comparison)."""
    t = group.mult
    moved = values[t[:, :, None], t[:, None, :]]
    return int(np.count_nonzero(moved != values[None, :, :]))


def quantitative_bound(group: FiniteGroup, h: PreMetric, d: PreMetric, N: int) -> dict:
    """Check ``h(x, y) < 2**-m  =>  d(x, y) < 2**-(m-1)`` for ``m = 1 .. N``.

    Also checks the identity-row form ``d(e, x^-1 y)``, which is what the bump
    construction controls directly; the two agree when ``d`` is left-invariant.
    """
    q = group.quotient_index()
    d_quot = d.values[group.identity][q]
    rows = []
    total = 0
    total_quot = 0
    for m in range(1, N + 1):
        close = h.values < 2.0 ** -m
        far = d.values >= 2.0 ** -(m - 1)
        far_quot = d_quot >= 2.0 ** -(m - 1)
        bad = int(np.count_nonzero(close & far))
        bad_quot = int(np.count_nonzero(close & far_quot))
        total += bad
        total_quot += bad_quot
        rows.append({"m": m, "pairs": int(close.sum()), "exceptions": bad,
                     "exceptions_identity_row": bad_quot})
    return {"levels": rows, "exceptions": total,
            "exceptions_identity_row": total_quot, "pass": total == 0}


def separates_identity(group: FiniteGroup, d: PreMetric) -> bool:
    """``x -> d(e, x)`` is positive off the identity, hence separates ``e`` from closed sets."""
    row = d.values[group.identity]
    others = np.arange(group.order) != group.identity
    return bool(np.all(row[others] > 0))


@dataclass
class GroupMetricResult:
    """``matrix`` is the corrected metric on the group elements, in order."""

    matrix: np.ndarray
    premetric: PreMetric
    bumps: BumpFamily
    function: Optional[CorrectionFunction]
    report: dict


def build_invariant_metric(group: FiniteGroup, d, depth: int = DEFAULT_DEPTH,
                           s_tolerance: float = S_TOLERANCE,
                           continuity_tolerance: float = CONTINUITY_TOLERANCE,
                           equivalence_tolerance: float = EQUIVALENCE_TOLERANCE
                           ) -> GroupMetricResult:
    """Left-invariant metric uniformly equivalent to ``d`` on a finite group.

    ``d`` may be a matrix or a :class:`PreMetric`; it is normalized to
    diameter 1 first. The report records exact left-invariance of ``h`` and
    of the corrected metric, the triangle check, both equivalence moduli
    against ``d``, and the per-level bound check.
    """
    if not isinstance(d, PreMetric):
        d = validate_premetric(d, labels=group.labels)
    if d.n != group.order:
        raise MalformedInput(f"metric has {d.n} points, group has order {group.order}"
                             " (indistinguishable elements were merged?)")
    violations = triangle_violations(d)
    if group.order == 1:
        zero = PreMetric(np.zeros((1, 1)), group.labels)
        bumps = build_bump_family(group, zero)
        report = {"order": 1, "N": 0, "trivial": True,
                  "left_invariance": {"premetric_defects": 0, "metric_defects": 0, "pass": True}}
        return GroupMetricResult(zero.values.copy(), zero, bumps, None, report)
    dn, d_scale = normalize(d)
    bumps = build_bump_family(group, dn)
    h = left_invariant_premetric(group, bumps)
    corrected = correct_premetric(h, depth, s_tolerance, continuity_tolerance,
                                  equivalence_tolerance)
    m = corrected.matrix
    h_defects = left_invariance_defects(group, h.values)
    m_defects = left_invariance_defects(group, m)
    forward, backward = uniform_equivalence_moduli(m, dn, equivalence_tolerance)
    h_forward, h_backward = uniform_equivalence_moduli(h, dn, equivalence_tolerance)
    report = {
        "order": group.order,
        "input_metric": {"scale": d_scale, "triangle_violations": len(violations),
                         "left_invariance_defects": left_invariance_defects(group, dn.values)},
        "N": bumps.N,
        "radii": [float(r) for r in bumps.radii],
        "bumps": bumps.check(),
        "left_invariance": {"premetric_defects": h_defects, "metric_defects": m_defects,
                            "pass": h_defects == 0 and m_defects == 0},
        "bound": quantitative_bound(group, h, dn, bumps.N),
        "separates_identity": separates_identity(group, dn),
        "correction": corrected.report,
        "premetric_equivalence": {"forward": h_forward.to_dict(),
                                  "backward": h_backward.to_dict()},
        "equivalence": {"forward": forward.to_dict(), "backward": backward.to_dict()},
    }
    return GroupMetricResult(m, h, bumps, corrected.function, report)
