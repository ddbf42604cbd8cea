"""Generating function of the billiard map and the invariant-curve residual.

In the support-function coordinates the billiard map is generated by
``S(t1, t2) = q((t1 + t2)/2) cos((t1 - t2)/2)``.  A parametrisation ``phi``
of an invariant curve with rotation ``lambda`` solves
``E = d2S(phi^-, phi) + d1S(phi, phi^+) = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import gmpy2
from gmpy2 import mpc, mpfr

from .errors import BadSeed, NoRoot
from .numerics import Rotation, real_if_close, zero_tolerance
from .series import BiSeries, PowerTable, UniSeries, compose_uni, invert_unit

HALF = mpfr("0.5")
QUARTER = mpfr("0.25")
P2 = mpfr("-0.5")


def check_seed(phi: BiSeries, tol=None) -> None:
    """Raise :class:`BadSeed` unless ``phi = z + zbar + O(3)`` with no constant."""
    if tol is None:
        tol = zero_tolerance() * 1024
    if (abs(phi.coeff(0, 0)) > tol or abs(phi.coeff(1, 0) - 1) > tol
            or abs(phi.coeff(0, 1) - 1) > tol):
        raise BadSeed("phi must start with z + zbar")
    if phi.blocks[2] is not None and phi.max_degree >= 2 and any(abs(v) > tol for v in phi.blocks[2]):
        raise BadSeed("phi has a quadratic part")


def seed_q2(rot: Rotation) -> mpc:
    """``q_2 = p_2 (lambda - 1)^2 / (lambda + 1)^2`` with ``p_2 = -1/2``.

    For real ``theta`` this equals ``tan(theta/2)^2 / 2``.
    """
    lam = rot.lam
    return real_if_close(P2 * (lam - 1) ** 2 / (lam + 1) ** 2)


def chi(q2, x) -> mpc:
    """``(q2 - p2)/x + 2(q2 + p2) + (q2 - p2) x``; the seed residual is ``chi(1/lambda) z/2 + chi(lambda) zbar/2 + O(3)``."""
    return (q2 - P2) / x + 2 * (q2 + P2) + (q2 - P2) * x


def seed_state(rot: Rotation, max_degree: int) -> tuple[UniSeries, BiSeries]:
    """The quadratic seed ``q = 1 + q_2 t^2``, ``phi = z + zbar``."""
    q = UniSeries.from_dict({0: 1, 2: seed_q2(rot)}, max_degree + 1)
    return q, BiSeries.seed(max_degree)


class PhiTables:
    """Everything in ``S(phi^-, phi)`` that depends on ``phi`` only.

    ``S`` is linear in ``q``, so the powers of ``xi`` and the compositions
    ``cos(zeta)``, ``-sin(zeta)`` are shared by every ``q``.
    """

    def __init__(self, phi: BiSeries, rot: Rotation):
        self.phi = phi
        self.rot = rot
        D = phi.max_degree
        phi_m = phi.minus(rot)
        self.xi = (phi_m + phi) * HALF
        self.zeta = (phi_m - phi) * HALF
        self.xi_powers = PowerTable(self.xi)
        zt = PowerTable(self.zeta)
        cos = UniSeries.cos(D)
        self.p0 = compose_uni(cos, self.zeta, zt)
        self.p1 = compose_uni(_neg_sin(D), self.zeta, zt)

    def compose_q(self, q: UniSeries) -> tuple[BiSeries, BiSeries, BiSeries]:
        """``q(xi), q'(xi), q''(xi)``."""
        dq = q.derivative()
        ddq = dq.derivative()
        return tuple(compose_uni(u, self.xi, self.xi_powers) for u in (q, dq, ddq))


def _neg_sin(D: int) -> UniSeries:
    u = UniSeries(D)
    f = mpfr(1)
    for k in range(1, D + 1):
        f = f / k
        if k % 2 == 1:
            u.coeffs[k] = mpc(-f if k % 4 == 1 else f)
    return u


class SPack:
    """``S`` and its partials at the pair ``(phi^-, phi)``, built lazily.

    With ``p = cos`` and ``p'' = -p``::

        d1S  = (q' p + q p') / 2        d2S  = (q' p - q p') / 2
        d11S = (q'' p + 2 q' p' - q p) / 4
        d22S = (q'' p - 2 q' p' - q p) / 4
        d12S = (q'' p + q p) / 4

    The values at ``(phi, phi^+)`` are the plus shifts of these.
    """

    def __init__(self, q: UniSeries, tables: PhiTables):
        self.q = q
        self.tables = tables
        self.rot = tables.rot
        self.q0, self.q1, self.q2 = tables.compose_q(q)

    @cached_property
    def S(self) -> BiSeries:
        return self.q0 * self.tables.p0

    @cached_property
    def _a(self) -> BiSeries:
        return self.q1 * self.tables.p0

    @cached_property
    def _b(self) -> BiSeries:
        return self.q0 * self.tables.p1

    @cached_property
    def _c(self) -> BiSeries:
        return self.q2 * self.tables.p0

    @cached_property
    def _d(self) -> BiSeries:
        return self.q1 * self.tables.p1

    @cached_property
    def d1S(self) -> BiSeries:
        return (self._a + self._b) * HALF

    @cached_property
    def d2S(self) -> BiSeries:
        return (self._a - self._b) * HALF

    @cached_property
    def d11S(self) -> BiSeries:
        return (self._c + self._d * 2 - self.S) * QUARTER

    @cached_property
    def d22S(self) -> BiSeries:
        return (self._c - self._d * 2 - self.S) * QUARTER

    @cached_property
    def d12S(self) -> BiSeries:
        return (self._c + self.S) * QUARTER

    @cached_property
    def E(self) -> BiSeries:
        return self.d2S + self.d1S.plus(self.rot)


def assemble_S(q: UniSeries, phi: BiSeries, rot: Rotation, tables: PhiTables | None = None) -> SPack:
    """Generating function and partials at ``(phi^-, phi)``; the plus pair is ``.plus(rot)``."""
    if tables is None:
        tables = PhiTables(phi, rot)
    return SPack(q, tables)


def residual(q: UniSeries, phi: BiSeries, rot: Rotation, tables: PhiTables | None = None,
             check: bool = False) -> BiSeries:
    """``E(q, phi)``, truncated at ``phi.max_degree``.

    With ``check=True`` the symmetry ``E(zbar, z) = E(z, zbar)`` is asserted.
    """
    E = assemble_S(q, phi, rot, tables).E
    if check:
        scale = max(mpfr(1), E.max_abs())
        if (E - E.involution()).max_abs() > zero_tolerance() * 1024 * scale:
            raise AssertionError("residual is not involution symmetric")
    return E


@dataclass
class AuxFields:
    """The fields built from ``phi_z`` used by the inner step (all at ``max_degree - 1``)."""

    phi_z: BiSeries
    phi_zbar: BiSeries
    h: BiSeries
    g: BiSeries
    kappa: BiSeries
    d12S: BiSeries


def aux_fields(q: UniSeries, phi: BiSeries, rot: Rotation, pack: SPack | None = None) -> AuxFields:
    """``h = d12S phi_z phi_z^-``, ``g = phi_zbar/phi_z`` and
    ``kappa = d12S (phi_z^- phi_zbar / lambda - lambda phi_zbar^- phi_z)``."""
    if pack is None:
        pack = assemble_S(q, phi, rot)
    D = phi.max_degree - 1
    pz = phi.dz()
    pzb = phi.dzbar()
    pz_m = pz.minus(rot)
    pzb_m = pzb.minus(rot)
    d12 = pack.d12S.resize(D)
    h = d12 * pz * pz_m
    g = pzb * invert_unit(pz)
    kappa = d12 * (pz_m * pzb * rot.pow(-1) - pzb_m * pz * rot.lam)
    return AuxFields(phi_z=pz, phi_zbar=pzb, h=h, g=g, kappa=kappa, d12S=d12)


# -- the map itself -----------------------------------------------------

def _uni_real(q: UniSeries, t: mpfr) -> tuple[mpfr, mpfr, mpfr]:
    """``q, q', q''`` at real ``t``."""
    a = b = c = mpfr(0)
    for k in range(q.max_degree, -1, -1):
        ck = q.coeffs[k].real
        c = c * t + 2 * b
        b = b * t + a
        a = a * t + ck
    return a, b, c


def d1S_real(q: UniSeries, t1, t2) -> mpfr:
    m, d = (t1 + t2) / 2, (t1 - t2) / 2
    v, dv, _ = _uni_real(q, m)
    return (dv * gmpy2.cos(d) - v * gmpy2.sin(d)) / 2


def d2S_real(q: UniSeries, t1, t2) -> mpfr:
    m, d = (t1 + t2) / 2, (t1 - t2) / 2
    v, dv, _ = _uni_real(q, m)
    return (dv * gmpy2.cos(d) + v * gmpy2.sin(d)) / 2


def d12S_real(q: UniSeries, t1, t2) -> mpfr:
    m, d = (t1 + t2) / 2, (t1 - t2) / 2
    v, _, ddv = _uni_real(q, m)
    return gmpy2.cos(d) * (v + ddv) / 4


def billiard_step(q: UniSeries, t1, t2, max_iter: int = 64, tol=None) -> mpfr:
    """Solve ``d2S(t1, t2) + d1S(t2, t3) = 0`` for ``t3``.

    Newton's method started from the linearised map, with a bisection
    fallback when Newton leaves its bracket or stalls.
    """
    t1, t2 = mpfr(t1), mpfr(t2)
    if tol is None:
        tol = zero_tolerance() * 16
    a = d2S_real(q, t1, t2)

    def F(t3):
        return a + d1S_real(q, t2, t3)

    q2 = q.coeffs[2].real
    den = q2 - P2
    t = -((q2 - P2) * t1 + 2 * (q2 + P2) * t2) / den if den != 0 else t2
    for _ in range(max_iter):
        f = F(t)
        if abs(f) <= tol:
            return t
        df = d12S_real(q, t2, t)
        if df == 0:
            break
        step = f / df
        t = t - step
        if abs(step) <= tol * max(mpfr(1), abs(t)):
            if abs(F(t)) <= tol * 1024:
                return t
            break
    # bracket around the linear guess and bisect
    lo, hi = t2 - 1, t2 + 1
    flo, fhi = F(lo), F(hi)
    width = mpfr(1)
    while flo * fhi > 0 and width < 4:
        width *= 2
        lo, hi = t2 - width, t2 + width
        flo, fhi = F(lo), F(hi)
    if flo * fhi > 0:
        raise NoRoot(f"no sign change of the step equation near t2={float(t2):.3g}")
    for _ in range(4 * gmpy2.get_context().precision):
        mid = (lo + hi) / 2
        fm = F(mid)
        if abs(fm) <= tol or hi - lo <= tol:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    raise NoRoot("bisection did not converge")
