import pytest
from gmpy2 import mpfr

from billiard_kam.billiard import assemble_S, aux_fields, residual, seed_state
from billiard_kam.driver import iterate_once, start_state
from billiard_kam.inner import error_fields, inner_step, solve_psi, solve_w, symmetrize
from billiard_kam.numerics import make_rotation, zero_tolerance
from billiard_kam.operators import average, nabla, nabla_plus, proj_pi, proj_pi_plus
from billiard_kam.outer import solve_delta_q
from billiard_kam.series import BiSeries, invert_unit

from conftest import max_diff, rand_bi, rand_phi, rand_q

TOL = zero_tolerance(256)
D = 19


def _dphiE(pack, w, rot, Dm):
    r = lambda f: f.resize(Dm)
    return (r(pack.d12S) * w.minus(rot) + r(pack.d22S) * w + r(pack.d11S.plus(rot)) * w
            + r(pack.d12S.plus(rot)) * w.plus(rot))


@pytest.fixture(scope="module")
def step():
    """One doubling step in (residual order 5, N = 2), then an outer + inner step with M = 4."""
    rot = make_rotation()
    q, phi = seed_state(rot, D)
    state, _ = iterate_once(start_state(q, phi, rot), rot)
    q, phi = state.q, state.phi
    M, N = 4, 2
    dq, _ = solve_delta_q(q, phi, rot, M)
    q_star = q + dq
    pack = assemble_S(q_star, phi, rot)
    sol = inner_step(q_star, phi, rot, pack)
    E_new = residual(q_star, phi + sol.delta_phi, rot)
    errs = error_fields(sol, pack, rot, E_new)
    return dict(rot=rot, q=q, phi=phi, M=M, N=N, dq=dq, q_star=q_star, pack=pack, sol=sol,
                E_new=E_new, errs=errs)


def test_zero_residual_gives_zero(rot, rng):
    phi = rand_phi(rng, 9)
    pz = phi.dz()
    psi = solve_psi(BiSeries.zeros(9), pz, rot)
    assert psi.max_abs() == 0
    h = rand_bi(rng, 8) + 2
    assert solve_w(psi, h, pz, rot).max_abs() == 0


def test_psi_round_trip(step):
    rot, sol = step["rot"], step["sol"]
    Ez = sol.E.resize(sol.aux.phi_z.max_degree) * sol.aux.phi_z
    assert max_diff(nabla_plus(sol.psi, rot), -(Ez - proj_pi_plus(Ez))) <= 1e3 * TOL
    assert sol.psi.order() >= sol.E.order()


def test_w_equation(step):
    rot, sol = step["rot"], step["sol"]
    h = sol.aux.h
    u = sol.psi * invert_unit(h)
    lhs = h * nabla(sol.w * invert_unit(sol.aux.phi_z), rot)
    assert max_diff(lhs, sol.psi - h * proj_pi(u)) <= 1e3 * TOL


def test_w_linear(step, rng):
    rot, sol = step["rot"], step["sol"]
    c = mpfr("0.37")
    a = solve_w(sol.psi * c, sol.aux.h, sol.aux.phi_z, rot)
    assert max_diff(a, sol.w * c) <= 1e3 * TOL


def test_symmetrize_examples(rng):
    z = BiSeries.monomial(1, 0, 5)
    assert symmetrize(z).to_dict() == {(1, 0): mpfr("0.5"), (0, 1): mpfr("0.5")}
    s = rand_phi(rng, 7)
    assert max_diff(symmetrize(s), s) == 0


def test_delta_phi_shape(step):
    dphi = step["sol"].delta_phi
    assert max_diff(dphi, dphi.involution()) == 0
    assert all(abs(v) <= TOL for j, k, v in dphi.items() if (j + k) % 2 == 0)


def test_orders(step):
    M, N = step["M"], step["N"]
    K = min(M, 2 * N)
    errs = step["errs"]
    assert step["dq"].order() >= 2 * N + 2
    assert step["sol"].delta_phi.order() >= 2 * N + 1
    assert step["E_new"].order() >= 2 * K + 1
    assert errs["R1"].order() >= 2 * M + 1
    assert errs["R2"].order() >= 4 * N + 1
    assert errs["R5"].order() >= 4 * N + 2


def test_decomposition(step):
    errs = step["errs"]
    decomp = errs["pi_psi_h"] - errs["R1"] - errs["R2"]
    assert decomp.max_abs(D - 3) <= 1e3 * TOL


def test_cohomology_defect(step):
    rot, sol, pack = step["rot"], step["sol"], step["pack"]
    Dm = D - 1
    # L_z(w) = nabla_plus(h nabla(w / phi_z)), the Levi-Moser form minus dE/dz w
    Lz = nabla_plus(sol.aux.h * nabla(sol.w * invert_unit(sol.aux.phi_z), rot), rot)
    lhs = Lz + sol.E.resize(Dm) * sol.aux.phi_z
    assert max_diff(lhs, step["errs"]["R3"], upto=Dm - 2) <= 1e3 * TOL


def test_R4_symmetrised(step):
    rot, sol, pack = step["rot"], step["sol"], step["pack"]
    Dm = D - 1
    lhs = sol.E.resize(Dm) + _dphiE(pack, sol.delta_phi.resize(Dm), rot, Dm)
    assert max_diff(lhs, symmetrize(step["errs"]["R4"]), upto=Dm - 2) <= 1e3 * TOL


def test_L_intertwining(rot, rng):
    n = 11
    Dm = n - 1
    phi = rand_phi(rng, n)
    q = rand_q(rng, n + 1, mpfr("0.2"))
    pack = assemble_S(q, phi, rot)
    ax = aux_fields(q, phi, rot, pack)
    w = rand_bi(rng, Dm)
    lhs = _dphiE(pack, w.involution(), rot, Dm) * ax.phi_z
    rhs = (_dphiE(pack, w, rot, Dm) * ax.phi_zbar).involution()
    assert max_diff(lhs, rhs) <= 1e3 * TOL


def test_all_fields_vanish_on_solution(rot):
    # phi = z + zbar and the seed q solve E = 0 through degree 2, so at D = 2
    # every field is zero
    q, phi = seed_state(rot, 2)
    pack = assemble_S(q, phi, rot)
    sol = inner_step(q, phi, rot, pack)
    errs = error_fields(sol, pack, rot, residual(q, phi + sol.delta_phi, rot))
    for key in ("R1", "R2", "R3", "R4", "R5"):
        assert errs[key].max_abs() <= TOL, key
