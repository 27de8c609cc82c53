"""Numerical checks for common-fixed-point theorems of Gregus type on q-starshaped domains."""

from .approx import BestApproximantSet, best_approximants, check_lemma_3_1, invariant_approximation
from .commute import (
    CoincidenceReport,
    CoincidenceSet,
    check_cq_commuting,
    check_reciprocal_continuity,
    check_weak_compatibility,
    coincidence_set,
    commutator,
    cq_set,
)
from .fixedpoint import FixedPointTrace, inner_solve, solve_schedule, validate_common_fixed_point
from .geometry import (
    DomainSet,
    SampleSpec,
    Segment,
    is_convex,
    is_q_starshaped,
    point_segment_distance,
)
from .gregus import InequalityReport, evaluate_sides, sweep_verify
from .maps import PiecewiseMap, ScaledMap, check_affinity, image_check
from .problem import GregusConstants, Problem, Schedule
from .problemfile import ProblemError, load_example, parse_problem
from .verdict import Verdict

__version__ = "0.1.0"
