"""Formal invariant curves near the boundary of a convex billiard table.

The table is described by its support function ``q``; an invariant curve of
rotation ``theta`` by a parametrisation ``phi(z, zbar)``.  The package
builds both as truncated power series, by a quadratically convergent
iteration (:mod:`.driver`) and by a direct degree-by-degree solve
(:mod:`.oracle`).
"""
from .billiard import assemble_S, billiard_step, residual, seed_q2, seed_state
from .driver import IterationState, ScheduleParams, StepReport, iterate_once, kam_seed, run_schedule
from .errors import *  # noqa: F401,F403
from .numerics import Rotation, make_rotation, set_precision, zero_tolerance
from .oracle import normalize_gauge, solve_direct
from .series import BiSeries, UniSeries, compose_uni, invert_unit

__version__ = "0.1.0"
