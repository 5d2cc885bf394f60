import itertools

import numpy as np
import pytest

from premetric.core import normalize, validate_premetric
from premetric.errors import DegenerateMetric, InvalidGroup, MalformedInput
from premetric.groups import (
    FiniteGroup,
    build_bump_family,
    build_invariant_metric,
    cayley_group,
    cyclic_group,
    dihedral_group,
    group_from_json,
    left_invariance_defects,
    left_invariant_premetric,
    quantitative_bound,
    separates_identity,
    symmetrized_radius,
    symmetric_group,
)

from conftest import worst_triangle

GROUPS = {
    "Z8": lambda: cyclic_group(8),
    "Z12": lambda: cyclic_group(12),
    "S3": lambda: symmetric_group(3),
    "D4": lambda: dihedral_group(4),
}


def brute_invariance(mult, values):
    m = len(mult)
    return all(values[mult[g, x], mult[g, y]] == values[x, y]
               for g, x, y in itertools.product(range(m), repeat=3))


def z_mod(n):
    return FiniteGroup((np.arange(n)[:, None] + np.arange(n)[None, :]) % n)


def test_group_axioms_checked():
    with pytest.raises(InvalidGroup) as info:
        FiniteGroup([[0, 1], [0, 1]])
    assert "column" in str(info.value) or "row" in str(info.value)
    with pytest.raises(InvalidGroup):
        FiniteGroup([[1, 0], [0, 1]])  # Latin, but 0 is not an identity
    # Latin square with identity 0 that is not associative
    bad = [[0, 1, 2, 3, 4], [1, 0, 3, 4, 2], [2, 4, 0, 1, 3], [3, 2, 4, 0, 1], [4, 3, 1, 2, 0]]
    with pytest.raises(InvalidGroup) as info:
        FiniteGroup(bad)
    assert info.value.witness


def test_cyclic_inverse_and_quotient():
    g = z_mod(5)
    assert g.inv.tolist() == [0, 4, 3, 2, 1]
    q = g.quotient_index()
    for x, y in itertools.product(range(5), repeat=2):
        assert q[x, y] == (y - x) % 5


@pytest.mark.parametrize("name, order", [("Z8", 8), ("Z12", 12), ("S3", 6), ("D4", 8)])
def test_cayley_groups(name, order):
    group, word, elements = GROUPS[name]()
    assert group.order == order and len(elements) == order
    assert word.shape == (order, order)
    assert np.array_equal(word, word.T)
    # word metric is left-invariant and a metric
    assert brute_invariance(group.mult, word)
    assert worst_triangle(word) == 0.0


def test_cayley_composition_matches_permutations():
    group, _, elements = symmetric_group(3)
    for a, b in itertools.product(range(6), repeat=2):
        p, q = elements[a], elements[b]
        assert elements[group.mult[a, b]] == tuple(p[i] for i in q)


def test_cayley_rejects_bad_generators():
    with pytest.raises((InvalidGroup, MalformedInput)):
        cayley_group([[0, 0, 1]])


def test_symmetrized_radius():
    g = z_mod(3)
    d = validate_premetric([[0, 0.2, 0.4], [0.2, 0, 0.3], [0.4, 0.3, 0]])
    rho = symmetrized_radius(g, d)
    assert rho.tolist() == [0.0, 0.4, 0.4]


def test_radius_abelian_invariant():
    group, word, _ = cyclic_group(8)
    d, _ = normalize(validate_premetric(word))
    np.testing.assert_array_equal(symmetrized_radius(group, d), d.values[0])


def test_trivial_group():
    res = build_invariant_metric(z_mod(1), [[0.0]])
    assert res.bumps.N == 0
    assert res.matrix.tolist() == [[0.0]]


def test_z2_family_and_series():
    g = z_mod(2)
    d = validate_premetric([[0, 1], [1, 0]])
    bumps = build_bump_family(g, d)
    assert bumps.N == 1
    assert bumps.bumps[0].tolist() == [0.0, 1.0]
    h = left_invariant_premetric(g, bumps)
    # 2^-1 * f_0 + tail 2^-1 * [x != e]
    assert h.values[0, 1] == 0.5 * 1 + 0.5


@pytest.mark.parametrize("name", sorted(GROUPS))
def test_bump_conditions(name):
    group, word, _ = GROUPS[name]()
    d, _ = normalize(validate_premetric(word))
    bumps = build_bump_family(group, d)
    rho = bumps.rho
    assert bumps.radii[0] == 1.0
    for n in range(bumps.N):
        f = bumps.bumps[n]
        assert np.all(f[rho < bumps.radii[n + 1]] == 0)
        assert np.all(f[rho >= bumps.radii[n]] == 1)
        assert np.array_equal(f, f[group.inv])
        assert f[group.identity] == 0
        assert bumps.radii[n + 1] <= 2.0 ** -(n + 1)
    # the last ball is the identity alone
    assert np.count_nonzero(rho < bumps.radii[-1]) == 1
    assert bumps.check()["pass"]


def test_diameter_above_one_refused():
    group, word, _ = cyclic_group(8)
    with pytest.raises(DegenerateMetric):
        build_bump_family(group, validate_premetric(word))


@pytest.mark.parametrize("name", sorted(GROUPS))
def test_series_premetric(name):
    group, word, _ = GROUPS[name]()
    d, _ = normalize(validate_premetric(word))
    bumps = build_bump_family(group, d)
    h = left_invariant_premetric(group, bumps)
    assert np.all(np.diag(h.values) == 0)
    assert brute_invariance(group.mult, h.values)
    # hand-expanded sum for h(e, x)
    for x in range(group.order):
        total = sum(2.0 ** -(n + 1) * bumps.bumps[n][x] for n in range(bumps.N))
        if x != group.identity:
            total += 2.0 ** -bumps.N
        assert h.values[group.identity, x] == pytest.approx(total, abs=1e-15)


@pytest.mark.parametrize("name", sorted(GROUPS))
def test_invariant_metric_pipeline(name):
    group, word, _ = GROUPS[name]()
    res = build_invariant_metric(group, word, depth=10)
    rep = res.report
    assert rep["left_invariance"]["pass"]
    assert brute_invariance(group.mult, res.matrix)
    assert worst_triangle(res.matrix) <= 2 * 2.0 ** -10
    assert rep["bound"]["pass"] and rep["bound"]["exceptions"] == 0
    assert rep["separates_identity"]


def test_bound_at_level_two():
    group, word, _ = cyclic_group(12)
    res = build_invariant_metric(group, word)
    d, _ = normalize(validate_premetric(word))
    h = res.premetric.values
    close = h < 0.25
    assert np.all(d.values[close] < 0.5)


def test_non_invariant_metric_gives_invariant_output():
    group, _, _ = symmetric_group(3)
    rng = np.random.default_rng(3)
    p = rng.random((6, 3))
    d = np.sqrt(((p[:, None] - p[None]) ** 2).sum(-1))
    assert left_invariance_defects(group, d) > 0
    res = build_invariant_metric(group, d)
    assert brute_invariance(group.mult, res.matrix)
    assert res.report["correction"]["triangle"]["pass"]
    fwd = res.report["equivalence"]["forward"]
    assert np.isfinite(fwd["omega_at_resolution"])


def test_quantitative_bound_reports_exceptions():
    group = z_mod(3)
    d = validate_premetric([[0, 1, 1], [1, 0, 1], [1, 1, 0]])
    h = validate_premetric([[0, 0.1, 0.1], [0.1, 0, 0.1], [0.1, 0.1, 0]])
    rep = quantitative_bound(group, h, d, 2)
    # 6 ordered pairs fail at each of the two levels
    assert not rep["pass"] and rep["exceptions"] == 12


def test_separation():
    group = z_mod(3)
    assert separates_identity(group, validate_premetric([[0, 1, 1], [1, 0, 1], [1, 1, 0]]))


def test_group_from_json_forms():
    g, m = group_from_json({"generators": [[1, 2, 3, 0]], "metric": "word"})
    assert g.order == 4 and m.max() == 2
    table = {"order": 2, "mult": [[0, 1], [1, 0]], "identity": 0,
             "metric": [[0, 1], [1, 0]]}
    g2, m2 = group_from_json(table)
    assert g2.order == 2 and m2.tolist() == [[0, 1], [1, 0]]
    with pytest.raises(MalformedInput):
        group_from_json({"order": 2, "mult": [[0, 1], [1, 0]], "identity": 0})
