"""Multiprecision scalars and the rotation object.

All arithmetic uses gmpy2 ``mpc``/``mpfr`` at a working precision held in the
global gmpy2 context.  :func:`make_rotation` sets that precision, so every
series built afterwards shares it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import gmpy2
from gmpy2 import mpc, mpfr

from .errors import ResonantRotation

DEFAULT_PRECISION = 256

Scalar = type(mpc(0))


def set_precision(bits: int) -> None:
    """Set the working precision (in bits) of the global gmpy2 context."""
    if bits < 53:
        raise ValueError("precision must be at least 53 bits")
    ctx = gmpy2.get_context()
    ctx.precision = int(bits)
    ctx.real_prec = int(bits)
    ctx.imag_prec = int(bits)


def get_precision() -> int:
    return gmpy2.get_context().precision


def zero_tolerance(bits: int | None = None) -> mpfr:
    """Magnitude below which a coefficient counts as zero: ``2**(-bits/2)``."""
    if bits is None:
        bits = get_precision()
    return mpfr(2) ** (-(mpfr(bits) / 2))


def to_mpfr(x) -> mpfr:
    """Convert floats, ints, decimal strings or mpfr to the working precision.

    The strings ``"pi"`` and ``"golden"`` are accepted as shorthands.
    """
    if isinstance(x, str):
        key = x.strip().lower()
        if key == "pi":
            return gmpy2.const_pi()
        if key in ("golden", "golden_angle"):
            return golden_angle()
        return mpfr(key)
    return mpfr(x)


def to_mpc(x) -> mpc:
    return mpc(x)


def golden_angle() -> mpfr:
    """``2*pi*(sqrt(5)-1)/2`` at working precision."""
    return gmpy2.const_pi() * (gmpy2.sqrt(mpfr(5)) - 1)


def ulp(x) -> mpfr:
    """Unit in the last place of ``|x|`` at working precision."""
    a = abs(x)
    if a == 0:
        return mpfr(2) ** (-get_precision())
    e, _ = gmpy2.frexp(mpfr(a))
    return mpfr(2) ** (e - get_precision())


def real_if_close(x: mpc, tol=None) -> mpc:
    """Drop an imaginary part that is below ``tol`` relative to ``max(1, |x|)``."""
    if tol is None:
        tol = zero_tolerance()
    if abs(x.imag) <= tol * max(mpfr(1), abs(x)):
        return mpc(x.real, 0)
    return x


def diophantine_scan(theta, tau, k_max: int) -> tuple[mpfr, int]:
    """``min |lambda^k - 1| k^tau`` over ``1 <= k <= k_max`` and its argmin.

    Uses ``|lambda^k - 1| = 2|sin(k theta / 2)|``; negative ``k`` give the
    same values.
    """
    theta = to_mpfr(theta)
    tau = mpfr(tau)
    half = theta / 2
    best, arg = None, 0
    for k in range(1, int(k_max) + 1):
        v = 2 * abs(gmpy2.sin(k * half)) * mpfr(k) ** tau
        if best is None or v < best:
            best, arg = v, k
    return best, arg


def diophantine_margin(rot: "Rotation", k_max: int) -> mpfr:
    """Empirical Diophantine constant of ``rot`` up to ``k_max``; ``rot.c`` is valid iff this is ``>= rot.c``."""
    return diophantine_scan(rot.theta, rot.tau, k_max)[0]


@dataclass(frozen=True)
class Rotation:
    """A Diophantine rotation ``lambda = exp(i theta)`` with cached powers.

    Attributes
    ----------
    theta : mpfr
    lam : mpc
    c, tau : Diophantine constants, ``|lambda^k - 1| >= c |k|^-tau``
    mu : ``|lambda + 1|``
    precision_bits : working precision
    cap : largest ``|k|`` held in the power cache

    The constants ``c`` and ``tau`` are not checked here; see
    :func:`diophantine_margin`.
    """

    theta: mpfr
    lam: mpc
    c: mpfr
    tau: mpfr
    mu: mpfr
    precision_bits: int
    cap: int
    _powers: tuple = field(repr=False, compare=False)

    def pow(self, k: int) -> mpc:
        """``lambda**k`` from the cache."""
        if abs(k) > self.cap:
            raise IndexError(f"power {k} outside cache of size {self.cap}")
        return self._powers[k + self.cap]

    @property
    def zero_tol(self) -> mpfr:
        return zero_tolerance(self.precision_bits)


def make_rotation(theta=None, c=0.5, tau=1.2, precision_bits: int = DEFAULT_PRECISION,
                  cap: int | None = None, max_degree: int = 67) -> Rotation:
    """Build a :class:`Rotation` and set the working precision.

    Parameters
    ----------
    theta : float, str or mpfr, optional
        Rotation angle; the golden angle by default.
    c, tau : float
        Diophantine constants ``|lambda^k - 1| >= c |k|^-tau``.
    precision_bits : int
    cap : int, optional
        Size of the power cache and range of the resonance scan,
        ``4*max_degree + 4`` by default.

    Raises
    ------
    ResonantRotation
        If some ``|lambda^k - 1|`` with ``1 <= k <= cap`` is below the zero
        tolerance.
    """
    set_precision(precision_bits)
    th = golden_angle() if theta is None else to_mpfr(theta)
    if not 0 < c < 1 or tau <= 0:
        raise ValueError("need 0 < c < 1 and tau > 0")
    if cap is None:
        cap = 4 * max_degree + 4
    tol = zero_tolerance(precision_bits)
    half = th / 2
    for k in range(1, cap + 1):
        if 2 * abs(gmpy2.sin(k * half)) < tol:
            raise ResonantRotation(f"lambda^{k} = 1 to working precision")
    powers = tuple(gmpy2.exp(mpc(0, k * th)) for k in range(-cap, cap + 1))
    lam = powers[cap + 1]
    return Rotation(theta=th, lam=lam, c=mpfr(c), tau=mpfr(tau), mu=abs(lam + 1),
                    precision_bits=int(precision_bits), cap=int(cap), _powers=powers)


def log2_abs(x) -> float:
    """``log2|x|`` as a float, ``-inf`` for zero."""
    a = abs(x)
    if a == 0:
        return -math.inf
    return float(gmpy2.log2(mpfr(a)))
