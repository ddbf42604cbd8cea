"""Inner step: the correction ``Delta phi`` for a fixed ``q``.

Given ``q*`` (after the outer step) and ``phi`` the step solves two
difference equations::

    nabla_plus psi       = -(E phi_z - Pi_plus(E phi_z))
    nabla (w / phi_z)    = psi/h - Pi(psi/h)

and symmetrises ``w``.  The error fields ``R1..R5`` account for every
term the step leaves behind.
"""
from __future__ import annotations

from dataclasses import dataclass

from gmpy2 import mpfr

from .billiard import AuxFields, PhiTables, SPack, assemble_S, aux_fields, residual
from .numerics import Rotation
from .operators import (average, inv_nabla, inv_nabla_plus, nabla_plus, proj_pi,
                        proj_pi_plus)
from .series import BiSeries, UniSeries, invert_unit

HALF = mpfr("0.5")


@dataclass
class InnerSolution:
    psi: BiSeries
    w: BiSeries
    delta_phi: BiSeries
    aux: AuxFields
    E: BiSeries
    errors: dict | None = None


def solve_psi(E: BiSeries, phi_z: BiSeries, rot: Rotation) -> BiSeries:
    """``psi = -inv_nabla_plus(E phi_z - Pi_plus(E phi_z))``."""
    Ez = E.resize(phi_z.max_degree) * phi_z
    return -inv_nabla_plus(Ez - proj_pi_plus(Ez), rot)


def solve_w(psi: BiSeries, h: BiSeries, phi_z: BiSeries, rot: Rotation) -> BiSeries:
    """``w = phi_z * inv_nabla(psi/h - Pi(psi/h))``."""
    u = psi * invert_unit(h)
    return phi_z * inv_nabla(u - proj_pi(u), rot)


def symmetrize(w: BiSeries) -> BiSeries:
    """``(w + w o I) / 2``."""
    return (w + w.involution()) * HALF


def inner_step(q_star: UniSeries, phi: BiSeries, rot: Rotation,
               pack: SPack | None = None) -> InnerSolution:
    """One inner correction; ``delta_phi`` is padded back to ``phi.max_degree``."""
    if pack is None:
        pack = assemble_S(q_star, phi, rot)
    aux = aux_fields(q_star, phi, rot, pack)
    E = pack.E
    psi = solve_psi(E, aux.phi_z, rot)
    w = solve_w(psi, aux.h, aux.phi_z, rot)
    dphi = symmetrize(w).resize(phi.max_degree)
    return InnerSolution(psi=psi, w=w, delta_phi=dphi, aux=aux, E=E)


def error_fields(sol: InnerSolution, pack: SPack, rot: Rotation,
                 E_new: BiSeries | None = None) -> dict:
    """The error fields of one inner step.

    ``R1`` and ``R2`` split ``Pi(psi/h)``; ``R3`` is what the step leaves
    in ``(E + dE.w) phi_z``; ``R4 = E + dE.w`` written through ``R3``; and
    ``R5 = E_new - (R4 + R4 o I)/2`` collects the quadratic part.  ``R5``
    is only returned when the new residual ``E_new`` is supplied.
    """
    aux = sol.aux
    Dm = aux.phi_z.max_degree
    S = pack.S
    lam = rot.lam
    zS = average(S.dz().mul_z())            # [z dS/dz], degree <= D - 1
    zbS = average(S.dzbar().mul_zbar())
    zS_over_z = zS.div_z()
    kap = aux.kappa
    kap_avg = average(kap)
    inv_kap_avg = invert_unit(kap_avg)
    g = aux.g
    g_m = g.minus(rot)

    num1 = -zbS + average((g * zS_over_z).mul_zbar())
    R1 = num1.div_zbar() * inv_kap_avg * (1 / lam)

    t = sol.psi * (g * (1 / lam) - g_m * lam) * (kap_avg - kap) * invert_unit(kap * kap_avg)
    R2 = average(t.mul_zbar()).div_zbar()

    u = sol.psi * invert_unit(aux.h)
    pi_u = proj_pi(u)
    R3 = zS_over_z - nabla_plus(aux.h * pi_u, rot)

    inv_pz = invert_unit(aux.phi_z)
    R4 = pack.E.dz() * (sol.w * inv_pz) + R3 * inv_pz
    out = {"R1": R1, "R2": R2, "R3": R3, "R4": R4, "pi_psi_h": pi_u}
    if E_new is not None:
        out["R5"] = E_new.resize(Dm) - symmetrize(R4)
    return out
