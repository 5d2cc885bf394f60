"""Turn pre-metrics into metrics by correcting their triangle deficiency.

A pre-metric is a symmetric, reflexive dissimilarity. When it is locally
continuous, composing it with a suitable increasing function ``f`` yields a
uniformly equivalent metric; :func:`correct_premetric` builds that ``f`` from
the pre-metric's own deficiency table. :func:`build_invariant_metric` applies
the same machinery to produce left-invariant metrics on finite groups.
"""

from .core import (
    PreMetric,
    TriangleViolation,
    is_metric,
    normalize,
    triangle_violations,
    validate_premetric,
)
from .correction import (
    AnalyticTD,
    CorrectionFunction,
    DyadicCorrectionSequence,
    build_dyadic_sequence,
    correct_premetric,
    correction_value,
    max_feasible_s,
    verify_correction,
)
from .deficiency import (
    EmpiricalTD,
    ModulusTable,
    check_td_axioms,
    empirical_td,
    local_continuity_modulus,
    monotone_envelope,
    uniform_equivalence_moduli,
)
from .errors import NotATDFunction, PreMetricError
from .groups import FiniteGroup, build_invariant_metric, cayley_group

__version__ = "0.1.0"
