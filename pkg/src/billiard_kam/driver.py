"""Iteration driver: schedules, step reports and state files.

Two schedules are provided.  ``doubling`` doubles ``M`` and ``N`` at each
step starting from the quadratic seed; ``kam`` follows the slower
parameter recursion used in the convergence proof and starts from a
higher-order seed built with :func:`kam_seed`.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import gmpy2
from gmpy2 import mpfr

from .billiard import PhiTables, assemble_S, check_seed, residual, seed_state
from .errors import ToleranceCollapse
from .inner import error_fields, inner_step
from .numerics import Rotation, make_rotation, zero_tolerance
from .operators import average
from .outer import build_P, neumann_ratio, solve_delta_q
from .series import BiSeries, UniSeries, invert_unit

log = logging.getLogger(__name__)

SCHEDULES = ("doubling", "kam")


@dataclass
class ScheduleParams:
    """Radii and contraction factors of the step ledger.

    ``gamma`` is used for all three of ``gamma_0, gamma_1, gamma_2`` and the
    radius shrinks by ``gamma**5`` per step.
    """

    rho0: float = 0.05
    gamma: float = 0.9
    collapse_factor: float = 1e3
    error_fields: bool = True

    @property
    def gamma_bar(self) -> float:
        return self.gamma ** 5


@dataclass
class StepReport:
    """Diagnostics of one step.

    ``orders`` holds the measured orders of ``Delta q``, ``Delta phi`` and the
    new residual plus the error fields; ``conditions`` the five booleans
    ``a``..``e`` and the measured constants behind them.
    """

    n: int
    M: int
    N: int
    rho: float
    eps: float
    residual_norm: float
    orders: dict
    conditions: dict
    norms: dict = field(default_factory=dict)
    avg_S_defect: float = 0.0

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class IterationState:
    q: UniSeries
    phi: BiSeries
    n: int
    M: int
    N: int
    rho: float
    eps: float
    schedule: str = "doubling"
    params: ScheduleParams = field(default_factory=ScheduleParams)
    history: list = field(default_factory=list)
    residual: BiSeries | None = None
    clipped: bool = False
    tables: PhiTables | None = field(default=None, repr=False, compare=False)

    @property
    def max_degree(self) -> int:
        return self.phi.max_degree


def _order_N(order: int) -> int:
    return max(0, (order - 1) // 2)


def initial_M(schedule: str, params: ScheduleParams) -> int:
    if schedule == "doubling":
        return 2
    return int(math.floor(math.log(1 / params.rho0) / math.log(1 / params.gamma))) + 1


def next_M_N(schedule: str, M: int, N: int) -> tuple[int, int]:
    if schedule == "doubling":
        return 2 * M, 2 * N
    return (3 * M) // 2 + 1, min(2 * N, M)


def start_state(q: UniSeries, phi: BiSeries, rot: Rotation, schedule: str = "doubling",
                params: ScheduleParams | None = None) -> IterationState:
    """Wrap a seed ``(q, phi)``; ``N`` is read off the measured residual order."""
    if schedule not in SCHEDULES:
        raise ValueError(f"unknown schedule {schedule!r}")
    params = params or ScheduleParams()
    if schedule == "kam" and not params.gamma_bar < (2 / 3) ** 1.25:
        raise ValueError("kam schedule needs gamma**5 < (2/3)**(5/4)")
    check_seed(phi)
    tables = PhiTables(phi, rot)
    E = residual(q, phi, rot, tables)
    N = _order_N(E.order())
    if schedule == "kam":
        N = min(N, 7)
    M = initial_M(schedule, params)
    eps = float(E.weighted_norm(params.rho0))
    return IterationState(q=q, phi=phi, n=0, M=M, N=N, rho=params.rho0, eps=eps,
                          schedule=schedule, params=params, residual=E, tables=tables)


def _conditions(state: IterationState, M: int, rot: Rotation, C1: float, s0: float,
                P: list | None) -> dict:
    g = state.params.gamma
    rho = state.rho
    eps = state.eps
    c = {
        "a": M ** 2.5 * rho ** 2 < 1,
        "b": g ** (2 * M) < eps if eps > 0 else False,
        "c": (1 + C1 * rho ** 2) ** (-M) > g,
        "d": float(rot.mu) * rho < g * abs(s0) and 1 + C1 * rho ** 2 < 1 / g,
        "e": eps < (1 - g) ** 3 * g ** 6 * rho ** 3,
        "C1": C1,
    }
    if P is not None:
        ratio = float(neumann_ratio(P, rho))
        c["a_measured"] = ratio < 0.5
        c["neumann_ratio"] = ratio
    return c


def iterate_once(state: IterationState, rot: Rotation,
                 M: int | None = None) -> tuple[IterationState, StepReport]:
    """One outer + inner step with truncation ``2M`` (``state.M`` by default).

    ``M`` is clipped to ``max_degree // 2``.  The input state is not
    modified, so a failed step leaves it intact.

    Raises
    ------
    ToleranceCollapse
        When the new residual has a coefficient above
        ``collapse_factor * zero_tolerance`` below its expected order.
    """
    D = state.max_degree
    if M is None:
        M = state.M
    if M < 2:
        raise ValueError("M must be at least 2")
    clipped = False
    if 2 * M > D:
        M = D // 2
        clipped = True
    q, phi = state.q, state.phi
    tables = state.tables if state.tables is not None and state.tables.phi is phi else PhiTables(phi, rot)
    dq, system = solve_delta_q(q, phi, rot, M, tables)
    q_star = q + dq
    pack = assemble_S(q_star, phi, rot, tables)
    sol = inner_step(q_star, phi, rot, pack)
    phi_new = phi + sol.delta_phi
    tables_new = PhiTables(phi_new, rot)
    E_new = residual(q_star, phi_new, rot, tables_new)

    expected = min(2 * M + 1, 4 * max(state.N, 1) + 1, D)
    zt = zero_tolerance()
    order = E_new.order()
    if order < expected and E_new.max_abs(expected - 1) > state.params.collapse_factor * zt:
        raise ToleranceCollapse(
            f"step {state.n + 1}: residual order {order} below expected {expected}")
    orders = {"delta_q": dq.order(), "delta_phi": sol.delta_phi.order(), "residual": order,
              "expected": expected, "vanishing_max": float(E_new.max_abs(expected - 1))}
    if state.params.error_fields:
        errs = error_fields(sol, pack, rot, E_new)
        for key in ("R1", "R2", "R5"):
            orders[key] = errs[key].order()
        decomp = errs["pi_psi_h"] - errs["R1"] - errs["R2"]
        orders["decomposition_defect"] = float(decomp.truncate(D - 2).max_abs())

    rho = state.rho
    aux = sol.aux
    C1 = float((aux.phi_z - 1).weighted_norm(rho) / mpfr(rho) ** 2)
    s0 = complex(pack.d12S.coeff(0, 0))
    r_q = float(rot.mu) * rho * (1 + C1 * rho ** 2)
    norms = {
        "q": float(q_star.weighted_norm(r_q, 3)),
        "phi": float(phi_new.weighted_norm(rho, 3)),
        "h": float(aux.h.weighted_norm(rho)),
        "h_inv": float(invert_unit(aux.h).weighted_norm(rho)),
        "kappa_osc": float((aux.kappa - average(aux.kappa)).weighted_norm(rho)),
    }
    report = StepReport(n=state.n + 1, M=M, N=state.N, rho=rho, eps=state.eps,
                        residual_norm=float(E_new.weighted_norm(rho)), orders=orders,
                        conditions=_conditions(state, M, rot, C1, s0, system.P), norms=norms,
                        avg_S_defect=float(system.defect))
    report.conditions["clipped"] = clipped
    M_next, N_next = next_M_N(state.schedule, state.M, state.N)
    new = replace(state, q=q_star, phi=phi_new, n=state.n + 1, M=M_next, N=N_next,
                  rho=rho * state.params.gamma_bar, eps=state.eps ** 1.5,
                  history=state.history + [report], residual=E_new,
                  clipped=state.clipped or clipped, tables=tables_new)
    log.info("step %d: M=%d N=%d order=%d |E|=%.3e", report.n, M, state.N, order,
             report.residual_norm)
    return new, report


def run_schedule(rot: Rotation, steps: int, schedule: str = "doubling", max_degree: int = 67,
                 params: ScheduleParams | None = None,
                 seed: IterationState | tuple | None = None) -> IterationState:
    """Run ``steps`` iterations from ``seed`` (the quadratic seed by default)."""
    if isinstance(seed, IterationState):
        state = seed
    else:
        if seed is None and schedule == "kam":
            state = kam_seed(rot, 15, max_degree, params)
        else:
            q, phi = seed_state(rot, max_degree) if seed is None else seed
            state = start_state(q, phi, rot, schedule, params)
    for _ in range(steps):
        state, _ = iterate_once(state, rot)
    return state


def kam_seed(rot: Rotation, target: int = 15, max_degree: int = 67,
             params: ScheduleParams | None = None) -> IterationState:
    """Seed for the ``kam`` schedule with residual order ``>= target``.

    Doubling steps are run until the residual order reaches ``target``;
    both series are then truncated to degree ``target - 1``.  ``target = 3``
    returns the quadratic seed itself.
    """
    if target < 3 or target % 2 == 0:
        raise ValueError("target must be odd and at least 3")
    D_work = max(target + 2, 5)
    q, phi = seed_state(rot, D_work)
    state = start_state(q, phi, rot, "doubling", ScheduleParams(error_fields=False))
    while state.residual.order() < target:
        state, _ = iterate_once(state, rot)
    q = state.q.truncate(target - 1).resize(max_degree + 1)
    phi = state.phi.truncate(target - 1).resize(max_degree)
    seed = start_state(q, phi, rot, "kam", params)
    if seed.residual.order() < target:
        raise ToleranceCollapse(f"seed residual order {seed.residual.order()} below {target}")
    return seed


# -- state files --------------------------------------------------------

def dump_state(state: IterationState, rot: Rotation, out_dir) -> Path:
    """Write ``q.csv``, ``phi.csv`` and ``ledger.json`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    state.q.dump_csv(out / "q.csv")
    state.phi.dump_csv(out / "phi.csv")
    ledger = {
        "theta": str(rot.theta),
        "precision_bits": rot.precision_bits,
        "schedule": state.schedule,
        "max_degree": state.max_degree,
        "c": float(rot.c),
        "tau": float(rot.tau),
        "cap": rot.cap,
        "params": asdict(state.params),
        "current": {"n": state.n, "M": state.M, "N": state.N, "rho": state.rho,
                    "eps": state.eps, "clipped": state.clipped},
        "steps": [r.to_json() for r in state.history],
    }
    (out / "ledger.json").write_text(json.dumps(ledger, indent=2))
    return out


def load_state(in_dir) -> tuple[IterationState, Rotation]:
    """Inverse of :func:`dump_state`; also rebuilds the rotation."""
    src = Path(in_dir)
    ledger = json.loads((src / "ledger.json").read_text())
    rot = make_rotation(ledger["theta"], c=ledger["c"], tau=ledger["tau"],
                        precision_bits=ledger["precision_bits"], cap=ledger["cap"])
    D = ledger["max_degree"]
    q = UniSeries.load_csv(src / "q.csv", D + 1)
    phi = BiSeries.load_csv(src / "phi.csv", D)
    params = ScheduleParams(**ledger.get("params", {}))
    cur = ledger["current"]
    history = [StepReport(**s) for s in ledger["steps"]]
    state = IterationState(q=q, phi=phi, n=cur["n"], M=cur["M"], N=cur["N"], rho=cur["rho"],
                           eps=cur["eps"], schedule=ledger["schedule"], params=params,
                           history=history, residual=residual(q, phi, rot),
                           clipped=cur.get("clipped", False))
    return state, rot


def read_ledger(in_dir) -> dict:
    return json.loads((Path(in_dir) / "ledger.json").read_text())
