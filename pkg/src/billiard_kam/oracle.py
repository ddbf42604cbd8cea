"""Direct degree-by-degree solver used to cross-check the iteration.

The formal solution is unique up to a radial reparametrisation
``G(z, zbar) = (z a(z zbar), zbar a(z zbar))``: at each odd degree ``2m+1``
the coefficient of ``z^(m+1) zbar^m`` is free.  The oracle fixes it to zero,
and :func:`normalize_gauge` moves any other solution into the same gauge.
``q`` does not depend on the gauge.
"""
from __future__ import annotations

from dataclasses import dataclass

from gmpy2 import mpc, mpfr

from .billiard import residual, seed_q2
from .errors import SingularDegree
from .numerics import Rotation, real_if_close, zero_tolerance
from .series import BiSeries, UniSeries


@dataclass
class OracleSolution:
    q: UniSeries
    phi: BiSeries
    max_odd_degree: int
    residuals: dict


def solve_linear(A: list, b: list, tol=None) -> list:
    """Gaussian elimination with partial pivoting on a small dense complex system."""
    n = len(b)
    if tol is None:
        tol = zero_tolerance()
    A = [list(row) for row in A]
    b = list(b)
    scale = max((abs(v) for row in A for v in row), default=mpfr(1))
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(A[r][col]))
        if abs(A[piv][col]) <= tol * max(scale, mpfr(1)):
            raise SingularDegree(f"pivot {col} vanishes")
        A[col], A[piv] = A[piv], A[col]
        b[col], b[piv] = b[piv], b[col]
        for r in range(col + 1, n):
            f = A[r][col] / A[col][col]
            if f != 0:
                for c in range(col, n):
                    A[r][c] -= f * A[col][c]
                b[r] -= f * b[col]
    x: list = [mpc(0)] * n
    for r in range(n - 1, -1, -1):
        s = b[r]
        for c in range(r + 1, n):
            s -= A[r][c] * x[c]
        x[r] = s / A[r][r]
    return x


def _top_equations(E: BiSeries, d: int) -> list:
    return [E.coeff(j, d - j) for j in range((d + 1) // 2, d + 1)]


def solve_direct(rot: Rotation, max_odd_degree: int) -> OracleSolution:
    """Solve ``E(q, phi) = 0`` degree by degree through ``max_odd_degree``.

    At odd degree ``d`` the unknowns are the symmetric pairs
    ``phi_(j, d-j) = phi_(d-j, j)`` with ``j > (d+1)/2`` together with
    ``q_(d+1)``; the equations are ``E_(j, d-j) = 0`` for ``j >= (d+1)/2``.
    Each degree is an affine square system, assembled by probing.
    """
    D = int(max_odd_degree)
    phi_c = {(1, 0): mpc(1), (0, 1): mpc(1)}
    q_c = {0: mpc(1), 2: seed_q2(rot)}
    res = {}
    tol = zero_tolerance()

    def evaluate(d, pc, qc):
        phi = BiSeries.from_dict(pc, d)
        q = UniSeries.from_dict(qc, d + 1)
        return _top_equations(residual(q, phi, rot), d)

    for d in range(3, D + 1, 2):
        half = (d + 1) // 2
        unknowns = [("phi", j) for j in range(half + 1, d + 1)] + [("q", d + 1)]
        base = evaluate(d, phi_c, q_c)
        cols = []
        for kind, idx in unknowns:
            pc, qc = dict(phi_c), dict(q_c)
            if kind == "phi":
                pc[(idx, d - idx)] = mpc(1)
                pc[(d - idx, idx)] = mpc(1)
            else:
                qc[idx] = mpc(1)
            probe = evaluate(d, pc, qc)
            cols.append([p - b for p, b in zip(probe, base)])
        A = [[cols[c][r] for c in range(len(unknowns))] for r in range(len(base))]
        try:
            x = solve_linear(A, [-v for v in base], tol)
        except SingularDegree as exc:
            raise SingularDegree(f"degree {d}: {exc}") from exc
        for (kind, idx), v in zip(unknowns, x):
            v = real_if_close(v)
            if kind == "phi":
                phi_c[(idx, d - idx)] = v
                phi_c[(d - idx, idx)] = v
            else:
                q_c[idx] = v
        check = evaluate(d, phi_c, q_c)
        res[d] = max(abs(v) for v in check)
    return OracleSolution(q=UniSeries.from_dict(q_c, D + 1), phi=BiSeries.from_dict(phi_c, D),
                          max_odd_degree=D, residuals=res)


def compose_radial(phi: BiSeries, a: UniSeries) -> BiSeries:
    """``phi(z a(z zbar), zbar a(z zbar)) = sum_n phi_n a(z zbar)^n`` for homogeneous parts ``phi_n``."""
    D = phi.max_degree
    A = BiSeries.radial(a, D)
    out = BiSeries(D)
    power = BiSeries.constant(1, D)
    for n in range(D + 1):
        if n > 0:
            power = power * A
        b = phi.blocks[n]
        if b is None:
            continue
        part = BiSeries(D)
        part.blocks[n] = b
        out = out + part * power
    return out


def normalize_gauge(phi: BiSeries) -> tuple[BiSeries, UniSeries]:
    """Compose with the radial map that zeroes every ``z^(m+1) zbar^m`` coefficient, ``m >= 1``.

    Returns the normalised series and the radial factor ``a``.
    """
    D = phi.max_degree
    a = UniSeries.from_dict({0: 1}, D // 2 + 1)
    for m in range(1, (D - 1) // 2 + 1):
        c = compose_radial(phi.truncate(2 * m + 1), a).coeff(m + 1, m)
        a.coeffs[m] = -c / phi.coeff(1, 0)
    return compose_radial(phi, a), a


def resonant_coefficients(phi: BiSeries) -> dict:
    """``{2m+1: phi_(m+1, m)}`` for ``m >= 1``."""
    return {2 * m + 1: phi.coeff(m + 1, m) for m in range(1, (phi.max_degree - 1) // 2 + 1)}


def _rel(a, b, tol) -> mpfr:
    m = max(abs(a), abs(b))
    if m <= tol:
        return mpfr(0)
    return abs(a - b) / m


def compare(oracle: OracleSolution, q: UniSeries, phi: BiSeries, through: int | None = None) -> dict:
    """Largest relative coefficient differences, with ``phi`` moved into the oracle gauge first."""
    if through is None:
        through = oracle.max_odd_degree
    tol = zero_tolerance()
    phi_n, _ = normalize_gauge(phi.truncate(through).resize(through))
    dq = max((_rel(oracle.q.coeff(k), q.coeff(k), tol) for k in range(through + 2)), default=mpfr(0))
    dphi = mpfr(0)
    for n in range(through + 1):
        for j in range(n + 1):
            dphi = max(dphi, _rel(oracle.phi.coeff(j, n - j), phi_n.coeff(j, n - j), tol))
    return {"q": dq, "phi": dphi, "through": through}
