import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from premetric.core import normalize, validate_premetric
from premetric.deficiency import (
    EmpiricalTD,
    check_td_axioms,
    default_grid,
    empirical_td,
    local_continuity_modulus,
    monotone_envelope,
    naive_td,
    resolved_grid,
    uniform_equivalence_moduli,
)
from premetric.errors import PointSetMismatch

from conftest import discrete, euclidean, oracle_omega, oracle_td, phi_instance, pinched_line


@st.composite
def premetrics(draw, max_n=8, levels=None):
    n = draw(st.integers(2, max_n))
    if levels:
        elems = st.sampled_from(levels)
    else:
        elems = st.floats(0.05, 1.0, allow_nan=False)
    m = np.zeros((n, n))
    for i, j in itertools.combinations(range(n), 2):
        m[i, j] = m[j, i] = draw(elems)
    return validate_premetric(m)


def test_discrete_metric_closed_form():
    td = empirical_td(discrete(4))
    np.testing.assert_array_equal(td.breakpoints, [0, 1])
    np.testing.assert_array_equal(td.table, [[0, 1], [1, 1]])
    for a, b in [(0, 0), (0.5, 0.99), (0.99, 0.99), (1, 0), (0, 1), (1, 1), (2, 0.3)]:
        expected = 0.0 if max(a, b) < 1 else 1.0
        assert td(a, b) == expected


def test_metric_td_below_sum(rng):
    h = validate_premetric(euclidean(12, rng))
    td = empirical_td(h)
    bp = td.breakpoints
    assert np.all(td.table <= bp[:, None] + bp[None, :] + 1e-15)


def test_three_point_td(three_point):
    td = empirical_td(three_point)
    assert td(1, 1) == 3.0
    assert oracle_td(three_point.values, 1, 1) == 3.0
    np.testing.assert_array_equal(td.table, [[0, 1, 3], [1, 3, 3], [3, 3, 3]])


def test_lower_step_evaluation(three_point):
    td = empirical_td(three_point)
    assert td(0.999, 0.5) == 0.0
    assert td(2.5, 0.0) == 1.0
    assert td(np.array([0.0, 1.0]), np.array([1.0, 1.0])).tolist() == [1.0, 3.0]


def test_bad_breakpoints_rejected():
    with pytest.raises(ValueError):
        EmpiricalTD(np.array([0.5, 1.0]), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        EmpiricalTD(np.array([0.0, 1.0]), np.zeros((3, 3)))


@settings(max_examples=40, deadline=None)
@given(premetrics(max_n=6))
def test_td_matches_oracle(h):
    td = empirical_td(h)
    bp = td.breakpoints
    for p, q in itertools.product(range(len(bp)), repeat=2):
        assert td.table[p, q] == oracle_td(h.values, bp[p], bp[q])


@settings(max_examples=60, deadline=None)
@given(premetrics(max_n=9))
def test_td_symmetric_and_monotone(h):
    t = empirical_td(h).table
    assert np.array_equal(t, t.T)
    assert np.all(np.diff(t, axis=0) >= 0) and np.all(np.diff(t, axis=1) >= 0)


def test_naive_td_agrees(rng):
    h = phi_instance(10, rng, "square")
    td = empirical_td(h)
    for a, b in rng.random((20, 2)):
        assert td(a, b) == naive_td(h, a, b)


def test_envelope_of_constant():
    td = EmpiricalTD(np.array([0.0, 0.5, 1.0]), np.full((3, 3), 0.7))
    np.testing.assert_array_equal(monotone_envelope(td).table, td.table)


def test_envelope_takes_post_jump_value():
    # a non-monotone table: the cell at breakpoint 0.5 dips, the envelope lifts it
    table = np.array([[0.0, 0.2, 0.9], [0.2, 0.1, 0.9], [0.9, 0.9, 1.0]])
    env = monotone_envelope(EmpiricalTD(np.array([0.0, 0.5, 1.0]), table))
    assert env.envelope
    assert env(0.5, 0.5) == 0.1
    assert env(0.0, 0.5) == 0.1
    # brute force the inf over the open cone on the grid
    bp = [0.0, 0.5, 1.0]
    for p, q in itertools.product(range(3), repeat=2):
        cone = [table[i, j] for i in range(3) for j in range(3) if i >= p and j >= q]
        assert env.table[p, q] == min(cone)


@settings(max_examples=40, deadline=None)
@given(premetrics(max_n=7))
def test_envelope_dominates_and_is_idempotent(h):
    td = empirical_td(h)
    env = monotone_envelope(td)
    assert np.all(env.table >= td.table)
    np.testing.assert_array_equal(monotone_envelope(env).table, env.table)


def test_metric_axioms_pass(rng):
    h, _ = normalize(validate_premetric(euclidean(15, rng)))
    report = check_td_axioms(empirical_td(h), np.linspace(0, 1, 21))
    assert report.all_pass
    d = report.to_dict()
    assert set(d) >= {"symmetric", "increasing", "g0_le_y", "condition1"}
    assert d["condition1"]["pass"] is True and d["condition1"]["witnesses"]


def test_three_point_condition1_fails(three_point):
    td = empirical_td(three_point)
    report = check_td_axioms(td, [1.0, 2.0])
    assert not report.condition1
    assert report.failures[0]["y"] == 1.0 and report.failures[0]["t"] == 2.0
    # every breakpoint delta gives g(delta, 1 + delta) >= 3
    for delta in td.positive_breakpoints:
        assert td(delta, 1 + delta) >= 3


def test_discrete_g0():
    td = empirical_td(discrete(5))
    report = check_td_axioms(td, np.linspace(0, 1, 11))
    assert report.g0_le_y
    assert all(td(0.0, y) == 0.0 for y in np.linspace(0, 0.9, 10))


def test_metric_modulus_below_delta(rng):
    h = validate_premetric(euclidean(12, rng))
    m = local_continuity_modulus(h)
    assert np.all(m.omega <= m.deltas + 1e-15)
    assert m.passes and m.excess <= 0


def test_three_point_modulus(three_point):
    m = local_continuity_modulus(three_point, [0.5, 1.0, 2.0, 2.9, 3.0])
    assert m.omega.tolist() == [0.0, 2.0, 2.0, 2.0, 3.0]
    for delta, om in zip(m.deltas, m.omega):
        assert om == oracle_omega(three_point.values, delta)
    assert not m.passes


def test_single_point_modulus():
    m = local_continuity_modulus(validate_premetric([[0.0]]), [0.0, 0.5, 1.0])
    assert m.omega.tolist() == [0.0, 0.0, 0.0]


@settings(max_examples=30, deadline=None)
@given(premetrics(max_n=6))
def test_modulus_matches_oracle_and_is_monotone(h):
    m = local_continuity_modulus(h)
    assert np.all(np.diff(m.omega) >= 0)
    for delta, om in zip(m.deltas, m.omega):
        assert om == oracle_omega(h.values, delta)


def test_modulus_serializes(rng):
    d = local_continuity_modulus(phi_instance(8, rng, "cube")).to_dict()
    assert len(d["deltas"]) == len(d["omega"])


def test_equivalence_identity(rng):
    h = validate_premetric(euclidean(10, rng))
    fwd, bwd = uniform_equivalence_moduli(h, h)
    np.testing.assert_array_equal(fwd.omega, fwd.deltas)
    np.testing.assert_array_equal(bwd.omega, bwd.deltas)


def test_equivalence_square(rng):
    d = validate_premetric(euclidean(12, rng))
    h = validate_premetric(d.values ** 2)
    fwd, bwd = uniform_equivalence_moduli(h, d)
    iu = np.triu_indices(12, 1)
    for delta, om in zip(fwd.deltas, fwd.omega):
        under = d.values[iu][d.values[iu] <= delta]
        assert om == (under.max() ** 2 if len(under) else 0.0)
    for delta, om in zip(bwd.deltas, bwd.omega):
        under = d.values[iu][h.values[iu] <= delta]
        assert om == (under.max() if len(under) else 0.0)
        assert om == pytest.approx(np.sqrt(delta), rel=1e-12) or om < np.sqrt(delta)
    assert fwd.passes and bwd.passes


def test_equivalence_discrete_vs_line():
    d = validate_premetric([[0, 0.5, 1], [0.5, 0, 0.5], [1, 0.5, 0]])
    h = discrete(3)
    fwd, bwd = uniform_equivalence_moduli(h, d)
    # backward modulus at the finest h-scale is the whole diameter of d
    assert bwd.omega_at_resolution == 1.0
    assert not bwd.passes


def test_equivalence_mismatch():
    with pytest.raises(PointSetMismatch):
        uniform_equivalence_moduli(discrete(3), discrete(4))


def test_diagnostic_rejects_jumps(three_point):
    assert not local_continuity_modulus(three_point).is_locally_continuous
    assert not local_continuity_modulus(pinched_line()).is_locally_continuous


@settings(max_examples=40, deadline=None)
@given(premetrics(max_n=7))
def test_continuous_premetrics_pass_axioms_on_resolved_grid(h):
    hn, _ = normalize(h)
    m = local_continuity_modulus(hn)
    if not m.is_locally_continuous:
        return
    report = check_td_axioms(empirical_td(hn), resolved_grid(m))
    assert report.all_pass, report.failures[:3]


def test_resolved_grid_spacing(rng):
    h, _ = normalize(phi_instance(12, rng, "square"))
    m = local_continuity_modulus(h)
    grid = resolved_grid(m)
    assert grid[0] == 0.0 and grid[-1] <= 1.0
    assert np.all(np.diff(grid) > m.grid_spacing)


def test_default_grid_exposes_jumps(three_point):
    hn, _ = normalize(three_point)
    m = local_continuity_modulus(hn)
    grid = default_grid(m)
    np.testing.assert_allclose(grid, [0, 1 / 3, 2 / 3, 1])
    assert not check_td_axioms(empirical_td(hn), grid).condition1


def test_default_grid_is_capped():
    m = local_continuity_modulus(normalize(pinched_line(40))[0])
    assert len(default_grid(m)) <= 201
