"""Outer step: the correction ``Delta q`` that flattens the average ``[S]``.

``S`` is linear in ``q``, so with ``Delta q = sum_k eta_k t^(2k)``::

    [S_(q + Delta q)] = [S_q] + sum_k eta_k [xi^(2k) cos(zeta)]

and the ``(z zbar)^j`` coefficients give a lower-triangular system
``P eta = -[S_q]`` for ``j, k = 2..M``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import gmpy2
from gmpy2 import mpc, mpfr

from .billiard import PhiTables
from .errors import DegeneratePivot, DegreeMismatch, VerificationFailed
from .numerics import Rotation, zero_tolerance
from .series import BiSeries, UniSeries, compose_uni, diag_product


def average_S(q: UniSeries, phi: BiSeries, rot: Rotation,
              tables: PhiTables | None = None, nmax: int | None = None) -> list[mpc]:
    """Diagonal coefficients ``[S]_(n,n)`` of ``S(phi^-, phi)``, ``n = 0..nmax``."""
    if tables is None:
        tables = PhiTables(phi, rot)
    if nmax is None:
        nmax = phi.max_degree // 2
    q0 = compose_uni(q, tables.xi, tables.xi_powers)
    return diag_product(q0, tables.p0, nmax)


def pivot_closed_form(rot: Rotation, j: int) -> mpc:
    """``P_jj = 4^-j C(2j, j) (1/lambda + 1)^j (lambda + 1)^j``."""
    lam = rot.lam
    return mpfr(math.comb(2 * j, j)) / mpfr(4) ** j * ((1 / lam + 1) * (lam + 1)) ** j


def pivot_lower_bound(rot: Rotation, j: int) -> mpfr:
    """``mu^(2j) / sqrt(2 pi j)``."""
    return rot.mu ** (2 * j) / gmpy2.sqrt(2 * gmpy2.const_pi() * j)


@dataclass
class OuterSystem:
    """The triangular system of one outer step.

    ``P[a][b]`` holds ``P_(j,k)`` with ``j = a + 2``, ``k = b + 2``.
    """

    M: int
    P: list
    rhs: list
    eta: list | None = None
    defect: mpfr | None = None

    def delta_q(self, max_degree: int) -> UniSeries:
        return UniSeries.from_dict({2 * (b + 2): e for b, e in enumerate(self.eta)}, max_degree)


def build_P(phi: BiSeries, rot: Rotation, M: int, tables: PhiTables | None = None,
            check: bool = True) -> list:
    """Lower-triangular matrix ``P_(j,k)``, the ``(z zbar)^j`` coefficient of ``[xi^(2k) cos(zeta)]``."""
    if M < 2:
        raise ValueError("M must be at least 2")
    if phi.max_degree < 2 * M:
        raise DegreeMismatch(f"need max_degree >= {2 * M}, have {phi.max_degree}")
    if tables is None:
        tables = PhiTables(phi, rot)
    n = M - 1
    P = [[mpc(0)] * n for _ in range(n)]
    for k in range(2, M + 1):
        col = diag_product(tables.xi_powers[2 * k], tables.p0, M)
        for j in range(k, M + 1):
            P[j - 2][k - 2] = col[j]
    if check:
        tol = zero_tolerance() * 1024
        for j in range(2, M + 1):
            pj = P[j - 2][j - 2]
            exact = pivot_closed_form(rot, j)
            if abs(pj - exact) > tol * abs(exact):
                raise VerificationFailed(f"pivot P_{j}{j} disagrees with its closed form")
            if abs(pj) < pivot_lower_bound(rot, j) / 2:
                raise DegeneratePivot(f"|P_{j}{j}| below its lower bound")
    return P


def forward_substitute(P: list, rhs: list) -> list:
    n = len(rhs)
    x: list = [mpc(0)] * n
    for a in range(n):
        s = rhs[a]
        for b in range(a):
            s -= P[a][b] * x[b]
        x[a] = s / P[a][a]
    return x


def solve_delta_q(q: UniSeries, phi: BiSeries, rot: Rotation, M: int,
                  tables: PhiTables | None = None, verify: bool = True) -> tuple[UniSeries, OuterSystem]:
    """``Delta q`` of degree ``<= 2M`` with ``[S_(q + Delta q)] = 1 + O(2M + 2)``.

    Raises
    ------
    VerificationFailed
        When a fresh evaluation of ``[S]`` at ``q + Delta q`` leaves a
        coefficient of degree ``<= 2M`` above ``10 * zero_tolerance``.
    """
    if tables is None:
        tables = PhiTables(phi, rot)
    P = build_P(phi, rot, M, tables)
    avg = average_S(q, phi, rot, tables, M)
    rhs = [-avg[j] for j in range(2, M + 1)]
    eta = []
    for e in forward_substitute(P, rhs):
        if abs(e.imag) > zero_tolerance() * max(mpfr(1), abs(e)):
            raise VerificationFailed(f"Delta q coefficient {complex(e)} is not real")
        eta.append(mpc(e.real, 0))
    system = OuterSystem(M=M, P=P, rhs=rhs, eta=eta)
    dq = system.delta_q(q.max_degree)
    if verify:
        new = average_S(q + dq, phi, rot, tables, M)
        bad = max([abs(new[0] - 1)] + [abs(v) for v in new[1:]])
        system.defect = bad
        if bad > 10 * zero_tolerance():
            raise VerificationFailed(f"[S] - 1 = {float(bad):.3g} below degree {2 * M + 2}")
    return dq, system


def inverse_lower(P: list) -> list:
    n = len(P)
    cols = []
    for b in range(n):
        e = [mpc(0)] * n
        e[b] = mpc(1)
        cols.append(forward_substitute(P, e))
    return [[cols[b][a] for b in range(n)] for a in range(n)]


def conditioning_report(P: list, rho1, rho2) -> mpfr:
    """``|| Gamma_rho2 P^-1 Gamma_rho1^-1 ||_1`` with ``Gamma_r = diag(r^4, ..., r^(2M))``."""
    rho1, rho2 = mpfr(rho1), mpfr(rho2)
    T = inverse_lower(P)
    n = len(P)
    best = mpfr(0)
    for b in range(n):
        s = mpfr(0)
        for a in range(b, n):
            s += rho2 ** (2 * (a + 2)) * abs(T[a][b])
        best = max(best, s / rho1 ** (2 * (b + 2)))
    return best


def neumann_ratio(P: list, rho) -> mpfr:
    """``|| Gamma_rho diag(P)^-1 N Gamma_rho^-1 ||_1`` for the strictly lower part ``N``."""
    rho = mpfr(rho)
    n = len(P)
    best = mpfr(0)
    for b in range(n):
        s = mpfr(0)
        for a in range(b + 1, n):
            s += rho ** (2 * (a - b)) * abs(P[a][b] / P[a][a])
        best = max(best, s)
    return best
