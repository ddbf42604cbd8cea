"""Post-processing: coefficient growth fits, verification, boundary samples."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import gmpy2
from gmpy2 import mpc, mpfr

from .billiard import assemble_S, billiard_step, residual
from .errors import InsufficientData
from .numerics import Rotation, zero_tolerance
from .operators import average
from .oracle import OracleSolution, compare
from .series import BiSeries, UniSeries

DEFAULT_ALPHA_GRID = tuple(round(0.5 + 0.05 * i, 2) for i in range(51))


@dataclass
class GevreyFit:
    """Fit of ``log|c_k| ~ offset + logC * k + alpha * k log k`` over a degree window."""

    alpha: float
    logC: float
    window: tuple
    residuals: list
    satisfied_alpha: float | None
    offset: float = 0.0
    data: list = field(default_factory=list)

    def predict(self, k: int) -> float:
        return self.offset + self.logC * k + self.alpha * k * math.log(k)

    def rows(self) -> list[tuple]:
        """``(k, log|c_k|, fit)`` rows."""
        return [(k, y, self.predict(k)) for k, y in self.data]


def q_sequence(q: UniSeries, upto: int | None = None) -> dict:
    """``{2k: q_2k}`` for ``2 <= 2k <= upto``."""
    top = q.max_degree if upto is None else min(upto, q.max_degree)
    return {k: q.coeffs[k] for k in range(2, top + 1, 2)}


def phi_sequence(phi: BiSeries, upto: int | None = None) -> dict:
    """``{n: max_(j+k=n) |phi_jk|}`` over odd ``n >= 3``."""
    top = phi.max_degree if upto is None else min(upto, phi.max_degree)
    return {n: max(abs(v) for v in phi.block(n)) for n in range(3, top + 1, 2)}


def _log_data(coeffs) -> list[tuple[int, float]]:
    items = coeffs.items() if isinstance(coeffs, dict) else coeffs
    out = []
    for k, c in items:
        a = abs(c)
        if k >= 2 and a > 0:
            out.append((int(k), float(gmpy2.log(mpfr(a)))))
    return sorted(out)


def partial_sup_stable(data: list[tuple[int, float]], alpha: float) -> bool:
    """Whether the sup of ``(log|c_k| - alpha k log k)/k`` is already reached before the last third."""
    s = [(y - alpha * k * math.log(k)) / k for k, y in data]
    cut = max(1, (2 * len(s)) // 3)
    return max(s[cut:]) <= max(s[:cut]) + 1e-12


def gevrey_bound(coeffs, alpha: float) -> tuple[float, list[float]]:
    """Smallest ``logC`` with ``log|c_k| <= logC k + alpha k log k`` on the data, and the residuals."""
    data = _log_data(coeffs)
    if not data:
        raise InsufficientData("no nonzero coefficients")
    logC = max((y - alpha * k * math.log(k)) / k for k, y in data)
    res = [y - (logC * k + alpha * k * math.log(k)) for k, y in data]
    return logC, res


def gevrey_fit(coeffs, alpha_grid=DEFAULT_ALPHA_GRID, window: tuple | None = None) -> GevreyFit:
    """Least-squares fit of ``log|c_k|`` against ``(k, k log k)`` plus a constant.

    Parameters
    ----------
    coeffs : dict or iterable of (k, c_k)
        Zero coefficients and ``k < 2`` are ignored.
    alpha_grid : iterable of float
        Exponents scanned for ``satisfied_alpha``, the smallest one whose
        partial sups have stabilised on the window.
    window : (k_min, k_max), optional

    Raises
    ------
    InsufficientData
        With fewer than six usable coefficients.
    """
    data = _log_data(coeffs)
    if window is not None:
        data = [(k, y) for k, y in data if window[0] <= k <= window[1]]
    if len(data) < 6:
        raise InsufficientData(f"need at least 6 nonzero coefficients, got {len(data)}")
    ks = np.array([k for k, _ in data], dtype=float)
    ys = np.array([y for _, y in data])
    X = np.column_stack([np.ones_like(ks), ks, ks * np.log(ks)])
    coef, *_ = np.linalg.lstsq(X, ys, rcond=None)
    offset, logC, alpha = coef
    res = list(ys - X @ coef)
    sat = None
    for a in sorted(alpha_grid):
        if partial_sup_stable(data, a):
            sat = float(a)
            break
    return GevreyFit(alpha=float(alpha), logC=float(logC), window=(data[0][0], data[-1][0]),
                     residuals=[float(r) for r in res], satisfied_alpha=sat,
                     offset=float(offset), data=data)


# -- conjugacy and geometry ---------------------------------------------

def conjugacy_defect(q: UniSeries, phi: BiSeries, rot: Rotation, r, n_points: int = 64) -> mpfr:
    """``max |T(phi^-, phi) - (phi, phi^+)|`` over ``n_points`` points of the circle ``|z| = r``."""
    r = mpfr(r)
    two_pi = 2 * gmpy2.const_pi()
    worst = mpfr(0)
    lam = rot.lam
    for i in range(n_points):
        z = r * gmpy2.exp(mpc(0, two_pi * i / n_points))
        zb = z.conjugate()
        t1 = phi(z / lam, zb * lam).real
        t2 = phi(z, zb).real
        t3_exact = phi(z * lam, zb / lam).real
        t3 = billiard_step(q, t1, t2)
        worst = max(worst, abs(t3 - t3_exact))
    return worst


def decay_exponent(q: UniSeries, phi: BiSeries, rot: Rotation, r, n_points: int = 64) -> float:
    """``log2(defect(r) / defect(r/2))``."""
    a = conjugacy_defect(q, phi, rot, r, n_points)
    b = conjugacy_defect(q, phi, rot, mpfr(r) / 2, n_points)
    return float(gmpy2.log2(a / b))


def _reduce_angle(psi: mpfr) -> mpfr:
    # q has period pi, so evaluate on (-pi/2, pi/2]
    pi = gmpy2.const_pi()
    k = gmpy2.floor(psi / pi + mpfr("0.5"))
    return psi - k * pi


def support_function(q: UniSeries, psi) -> tuple[mpfr, mpfr, mpfr]:
    """``q, q', q''`` at ``psi`` using the period-``pi`` symmetry."""
    t = _reduce_angle(mpfr(psi))
    dq = q.derivative()
    return q(t), dq(t), dq.derivative()(t)


def radius_of_curvature(q: UniSeries, psi) -> mpfr:
    """``q + q''``."""
    a, _, c = support_function(q, psi)
    return a + c


def boundary_point(q: UniSeries, psi) -> tuple[mpfr, mpfr]:
    """``q(psi) e^(i psi) + i q'(psi) e^(i psi)`` as ``(x, y)``."""
    psi = mpfr(psi)
    a, b, _ = support_function(q, psi)
    c, s = gmpy2.cos(psi), gmpy2.sin(psi)
    return a * c - b * s, a * s + b * c


def boundary_points(q: UniSeries, count: int) -> list[tuple[float, float, float]]:
    """``count`` samples ``(psi, x, y)`` with ``psi`` uniform on ``[0, 2 pi)``."""
    two_pi = 2 * gmpy2.const_pi()
    out = []
    for i in range(count):
        psi = two_pi * i / count
        x, y = boundary_point(q, psi)
        out.append((float(psi), float(x), float(y)))
    return out


# -- verification ---------------------------------------------------------

def _check(name: str, value, tol, passed=None) -> dict:
    value = float(value)
    tol = float(tol)
    return {"name": name, "value": value, "tolerance": tol,
            "passed": bool(value <= tol) if passed is None else bool(passed)}


def verify_suite(q: UniSeries, phi: BiSeries, rot: Rotation, claimed_order: int | None = None,
                 oracle: OracleSolution | None = None, oracle_tol: float = 1e-20) -> dict:
    """Run the structural checks on a computed pair ``(q, phi)``.

    Returns a JSON-ready report with one entry per check and an overall
    ``passed`` flag.
    """
    zt = zero_tolerance()
    tol = 10 * zt
    scale = max(mpfr(1), phi.max_abs())
    checks = []
    checks.append(_check("phi_symmetric", (phi - phi.involution()).max_abs() / scale, tol))
    even = max([mpfr(0)] + [abs(v) for n in range(0, phi.max_degree + 1, 2)
                            for v in phi.block(n)])
    checks.append(_check("phi_odd", even, tol))
    lin = max(abs(phi.coeff(1, 0) - 1), abs(phi.coeff(0, 1) - 1))
    checks.append(_check("phi_linear_part", lin, tol))
    imag = max([mpfr(0)] + [abs(v.imag) for _, _, v in phi.items()])
    checks.append(_check("phi_real", imag / scale, tol))
    qscale = max(mpfr(1), q.max_abs())
    odd = max([mpfr(0)] + [abs(q.coeffs[k]) for k in range(1, q.max_degree + 1, 2)])
    checks.append(_check("q_even", odd / qscale, tol))
    checks.append(_check("q_normalised", abs(q.coeffs[0] - 1), tol))

    E = residual(q, phi, rot)
    escale = max(mpfr(1), E.max_abs())
    checks.append(_check("residual_symmetric", (E - E.involution()).max_abs() / escale, tol * 1e3))
    order = E.order()
    if claimed_order is not None:
        below = E.max_abs(claimed_order - 1) if claimed_order > 0 else mpfr(0)
        checks.append(_check("residual_order", below, 1e3 * zt))
        checks[-1]["order"] = order
        checks[-1]["claimed"] = claimed_order
        S = assemble_S(q, phi, rot).S
        avg = average(S)
        top = (claimed_order - 1) // 2
        flat = max([mpfr(0)] + [abs(avg.coeff(n, n)) for n in range(1, top + 1)]
                   + [abs(avg.coeff(0, 0) - 1)])
        checks.append(_check("average_flat", flat, 1e3 * zt))
    if oracle is not None:
        cmp = compare(oracle, q, phi, min(oracle.max_odd_degree, phi.max_degree))
        checks.append(_check("oracle_q", cmp["q"], oracle_tol))
        checks.append(_check("oracle_phi", cmp["phi"], oracle_tol))
    return {"passed": all(c["passed"] for c in checks), "residual_order": order,
            "checks": checks}
