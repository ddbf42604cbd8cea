import pytest
from gmpy2 import mpfr

from billiard_kam.billiard import residual, seed_state
from billiard_kam.driver import (ScheduleParams, dump_state, initial_M, iterate_once, kam_seed,
                                 load_state, next_M_N, read_ledger, run_schedule, start_state)
from billiard_kam.errors import ToleranceCollapse
from billiard_kam.numerics import make_rotation, set_precision, zero_tolerance
from billiard_kam.oracle import solve_direct

from conftest import max_diff

TOL = zero_tolerance(256)


def test_first_step_order(rot):
    q, phi = seed_state(rot, 11)
    state = start_state(q, phi, rot)
    assert state.N == 1 and state.M == 2
    new, report = iterate_once(state, rot)
    assert report.orders["residual"] >= 5
    assert new.residual.order() >= 5
    # the input state is untouched
    assert state.n == 0 and state.phi is phi


def test_rejects_small_M(rot):
    q, phi = seed_state(rot, 9)
    state = start_state(q, phi, rot)
    for M in (0, 1):
        with pytest.raises(ValueError):
            iterate_once(state, rot, M)


def test_two_steps_match_oracle_order(rot):
    state = run_schedule(rot, 2, max_degree=19)
    assert state.residual.order() >= 9
    oracle = solve_direct(rot, 7)
    # solved through degree 7, so padded to degree 9 the residual starts at 9
    assert residual(oracle.q.resize(10), oracle.phi.resize(9), rot).order() == 9


def test_schedule_rules():
    p = ScheduleParams(rho0=0.05, gamma=0.9)
    assert initial_M("doubling", p) == 2
    assert initial_M("kam", p) == 29
    assert next_M_N("doubling", 4, 2) == (8, 4)
    assert next_M_N("kam", 29, 7) == (44, 14)
    assert next_M_N("kam", 5, 7) == (8, 5)
    with pytest.raises(ValueError):
        rot = make_rotation(max_degree=9)
        start_state(*seed_state(rot, 9), rot, "kam", ScheduleParams(gamma=0.95))


@pytest.mark.slow
def test_doubling_orders(doubling_run):
    _, states = doubling_run
    assert [s.residual.order() for s in states[1:]] == [5, 9, 17, 33, 65]
    assert states[4].residual.order() >= 33


@pytest.mark.slow
def test_order_ratchet(doubling_run):
    _, states = doubling_run
    orders = [s.residual.order() for s in states]
    assert all(b > a for a, b in zip(orders, orders[1:]))


@pytest.mark.slow
def test_stabilisation(doubling_run):
    _, states = doubling_run
    q4 = [s.q.coeffs[4] for s in states[2:]]
    assert all(abs(v - q4[0]) <= TOL for v in q4)
    # coefficients of degree <= 2 N_n never move afterwards
    for n in range(1, 5):
        N = states[n].N
        later = states[-1]
        assert max_diff(states[n].phi, later.phi, upto=2 * N) <= TOL
        assert max(abs(states[n].q.coeffs[k] - later.q.coeffs[k]) for k in range(2 * N + 1)) <= TOL


@pytest.mark.slow
def test_ledger_recursion(doubling_run):
    _, states = doubling_run
    seed = states[0]
    g = seed.params.gamma_bar
    for n, s in enumerate(states):
        assert s.rho == pytest.approx(seed.rho * g ** n, rel=1e-12)
        assert s.eps == pytest.approx(seed.eps ** (1.5 ** n), rel=1e-9)
    # eps0 is the measured residual norm at rho0
    assert seed.eps == pytest.approx(float(seed.residual.weighted_norm(seed.params.rho0)))


def test_kam_seed(rot):
    s3 = kam_seed(rot, 3, max_degree=9)
    q, phi = seed_state(rot, 9)
    assert max_diff(s3.phi, phi) == 0
    assert all(a == b for a, b in zip(s3.q.coeffs, q.coeffs))
    s15 = kam_seed(rot, 15, max_degree=31)
    assert s15.N == 7 and s15.schedule == "kam"
    assert residual(s15.q, s15.phi, rot).order() >= 15
    assert s15.M == initial_M("kam", s15.params)
    with pytest.raises(ValueError):
        kam_seed(rot, 4)


def test_kam_step(rot):
    seed = kam_seed(rot, 15, max_degree=31)
    new, report = iterate_once(seed, rot)
    # M = 29 is clipped to 15 by the truncation; order >= 2 min(M, 2N) + 1
    assert report.M == 15 and report.conditions["clipped"]
    assert new.residual.order() >= 29
    assert (new.M, new.N) == (44, 14)
    assert new.rho == pytest.approx(seed.rho * seed.params.gamma_bar)


def test_dump_load_rerun(rot, tmp_path):
    state = run_schedule(rot, 2, max_degree=19)
    dump_state(state, rot, tmp_path)
    loaded, rot2 = load_state(tmp_path)
    assert rot2.theta == rot.theta
    a, _ = iterate_once(state, rot)
    b, _ = iterate_once(loaded, rot2)
    assert max_diff(a.phi, b.phi) == 0
    assert all(x == y for x, y in zip(a.q.coeffs, b.q.coeffs))
    led = read_ledger(tmp_path)
    assert [s["n"] for s in led["steps"]] == [1, 2]
    assert set(led) >= {"theta", "precision_bits", "schedule", "steps"}


def test_tolerance_collapse():
    set_precision(53)
    rot = make_rotation(precision_bits=53, max_degree=35)
    params = ScheduleParams(collapse_factor=1.0)
    with pytest.raises(ToleranceCollapse):
        run_schedule(rot, 4, max_degree=35, params=params)


def test_cross_precision(rot):
    a = run_schedule(rot, 3, max_degree=19)
    set_precision(512)
    rot512 = make_rotation(precision_bits=512)
    b = run_schedule(rot512, 3, max_degree=19)
    for j, k, v in b.phi.items():
        assert abs(v - a.phi.coeff(j, k)) <= mpfr(2) ** -200 * max(1, abs(v))
