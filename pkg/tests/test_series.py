import math

import pytest
from gmpy2 import mpc, mpfr
from hypothesis import given, settings, strategies as st

from billiard_kam.errors import DegreeMismatch, NonUnit, NonzeroConstantTerm
from billiard_kam.numerics import set_precision, zero_tolerance
from billiard_kam.operators import average
from billiard_kam.series import (BiSeries, PowerTable, UniSeries, compose_uni, diag_product,
                                 invert_unit)

from conftest import max_diff, rand_bi, rand_uni

TOL = zero_tolerance(256)
Z = lambda D: BiSeries.monomial(1, 0, D)
ZB = lambda D: BiSeries.monomial(0, 1, D)

floats = st.floats(min_value=-2, max_value=2, allow_nan=False, allow_infinity=False)


def bi_strategy(D):
    n = (D + 1) * (D + 2) // 2
    return st.lists(floats, min_size=n, max_size=n).map(lambda xs: _bi_from_list(xs, D))


def _bi_from_list(xs, D):
    set_precision(256)
    it = iter(xs)
    return BiSeries.from_dict({(j, n - j): next(it) for n in range(D + 1) for j in range(n + 1)}, D)


def test_square_of_seed():
    D = 4
    s = Z(D) + ZB(D)
    assert (s * s).to_dict() == {(2, 0): 1, (1, 1): 2, (0, 2): 1}


def test_multiply_by_zero(rng):
    a = rand_bi(rng, 6)
    assert (a * BiSeries.zeros(6)).max_abs() == 0
    assert (a * 0).max_abs() == 0


def test_degree_mismatch():
    with pytest.raises(DegreeMismatch):
        BiSeries.seed(3) + BiSeries.seed(4)
    with pytest.raises(DegreeMismatch):
        BiSeries.seed(3) * BiSeries.seed(4)
    # explicit re-truncation is the way out
    assert (BiSeries.seed(3) + BiSeries.seed(4).resize(3)).coeff(1, 0) == 2


def test_product_truncates():
    D = 5
    p = BiSeries.monomial(3, 0, D) * BiSeries.monomial(0, 3, D)
    assert p.max_abs() == 0


def test_product_matches_naive(rng):
    D = 7
    a, b = rand_bi(rng, D), rand_bi(rng, D)
    expect = {}
    for j1, k1, v1 in a.items():
        for j2, k2, v2 in b.items():
            if j1 + k1 + j2 + k2 <= D:
                key = (j1 + j2, k1 + k2)
                expect[key] = expect.get(key, mpc(0)) + v1 * v2
    assert max_diff(a * b, BiSeries.from_dict(expect, D)) <= TOL


@settings(max_examples=25, deadline=None)
@given(bi_strategy(5), bi_strategy(5), st.sampled_from([0.1, 0.5, 1.0]))
def test_submultiplicative(a, b, rho):
    assert (a * b).weighted_norm(rho) <= a.weighted_norm(rho) * b.weighted_norm(rho) * (1 + TOL)


def test_invert_one():
    assert max_diff(invert_unit(BiSeries.constant(1, 6)), BiSeries.constant(1, 6)) == 0


def test_invert_geometric():
    D = 9
    f = BiSeries.constant(1, D) + BiSeries.monomial(1, 1, D)
    expect = BiSeries.from_dict({(n, n): (-1) ** n for n in range(D // 2 + 1)}, D)
    assert max_diff(invert_unit(f), expect) <= TOL


def test_invert_random_unit(rng):
    D = 10
    f = rand_bi(rng, D) + 3
    prod = f * invert_unit(f)
    assert max_diff(prod, BiSeries.constant(1, D)) <= TOL


def test_invert_nonunit():
    with pytest.raises(NonUnit):
        invert_unit(BiSeries.seed(4))


def test_compose_cos_at_zero():
    out = compose_uni(UniSeries.cos(6), BiSeries.zeros(6))
    assert max_diff(out, BiSeries.constant(1, 6)) == 0


def test_compose_square():
    D = 4
    out = compose_uni(UniSeries.from_dict({2: 1}, 4), Z(D) + ZB(D))
    assert out.to_dict() == {(2, 0): 1, (1, 1): 2, (0, 2): 1}


def test_compose_cos_difference():
    D = 8
    out = compose_uni(UniSeries.cos(8), Z(D) - ZB(D))
    # -(z - zbar)^2 / 2 contributes +1 to z zbar
    assert abs(out.coeff(1, 1) - 1) <= TOL
    assert abs(out.coeff(2, 0) + mpfr("0.5")) <= TOL


def test_compose_rejects_constant():
    with pytest.raises(NonzeroConstantTerm):
        compose_uni(UniSeries.cos(4), BiSeries.seed(4) + 1)


def test_compose_shared_table(rng):
    D = 9
    s = rand_bi(rng, D, min_degree=1)
    table = PowerTable(s)
    f, g = rand_uni(rng, D), rand_uni(rng, D)
    assert max_diff(compose_uni(f, s, table), compose_uni(f, s)) <= TOL
    # Horner evaluation as an independent route
    acc = BiSeries.constant(g.coeffs[D], D)
    for k in range(D - 1, -1, -1):
        acc = acc * s + g.coeffs[k]
    assert max_diff(compose_uni(g, s, table), acc) <= 16 * TOL


def test_shift_examples(rot):
    D = 4
    assert max_diff(Z(D).plus(rot), Z(D) * rot.lam) <= TOL
    zz = BiSeries.monomial(1, 1, D)
    assert max_diff(zz.plus(rot), zz) <= TOL


def test_shift_inverse_and_norm(rot, rng):
    s = rand_bi(rng, 8)
    assert max_diff(s.plus(rot).minus(rot), s) <= TOL
    for rho in (0.1, 0.5, 1.0):
        n = s.weighted_norm(rho)
        assert abs(s.plus(rot).weighted_norm(rho) - n) <= TOL * n
        assert abs(s.minus(rot).weighted_norm(rho) - n) <= TOL * n


def test_involution(rot, rng):
    D = 6
    assert Z(D).involution().to_dict() == {(0, 1): 1}
    s = rand_bi(rng, D)
    assert not s.is_symmetric()
    assert (s + s.involution()).is_symmetric()
    # (phi^-) o I = (phi o I)^+
    assert max_diff(s.minus(rot).involution(), s.involution().plus(rot)) <= TOL


def test_partials(rot, rng):
    D = 7
    d = (Z(D) + ZB(D)).dz()
    assert d.max_degree == D - 1 and max_diff(d, BiSeries.constant(1, D - 1)) == 0
    s = rand_bi(rng, D)
    assert max_diff(s.minus(rot).dz(), s.dz().minus(rot) * rot.pow(-1)) <= TOL
    assert max_diff(s.involution().dzbar(), s.dz().involution()) <= TOL


def test_truncate_and_order(rng):
    D = 6
    f = Z(D) + BiSeries.monomial(3, 0, D)
    assert f.truncate(2).to_dict() == {(1, 0): 1}
    s = rand_bi(rng, D)
    assert max_diff(s.truncate(D), s) == 0
    assert BiSeries.zeros(D).order() == D + 1
    assert BiSeries.monomial(2, 1, D).order() == 3


@pytest.mark.parametrize("gamma", [0.5, 0.8, 0.95])
def test_tail_bound(rng, gamma):
    D, M = 10, 5
    f = rand_bi(rng, D, min_degree=M)
    for rho in (0.1, 0.5, 1.0):
        assert f.weighted_norm(gamma * rho) <= mpfr(gamma) ** M * f.weighted_norm(rho) * (1 + TOL)


def test_norm_examples(rng):
    D = 6
    for rho in (0.1, 0.5, 1.0):
        assert abs((Z(D) + ZB(D)).weighted_norm(rho) - 2 * mpfr(rho)) <= TOL
        g = rand_bi(rng, D).truncate(D - 1)
        assert abs(g.mul_z().weighted_norm(rho) - rho * g.weighted_norm(rho)) <= TOL * 10
        f = rand_bi(rng, D)
        n = f.weighted_norm(rho)
        for j, k, v in f.items():
            assert abs(v) <= mpfr(rho) ** (-(j + k)) * n * (1 + TOL)


def test_norm_with_derivatives():
    D = 4
    f = BiSeries.monomial(3, 0, D)
    # partials: z^3, 3z^2, 6z, 6
    assert f.weighted_norm(1, 3) == 6
    assert f.weighted_norm(1, 0) == 1


@settings(max_examples=20, deadline=None)
@given(bi_strategy(4), st.sampled_from([0.1, 0.5, 1.0]))
def test_composition_norm_bound(f, rho1):
    D = 4
    f = f - f.coeff(0, 0)
    rho2 = f.weighted_norm(rho1)
    q = UniSeries(D, [mpc(1), mpc(-0.5), mpc(0.25), mpc(2), mpc(-1)])
    assert compose_uni(q, f).weighted_norm(rho1) <= q.weighted_norm(rho2) * (1 + TOL) + TOL


@pytest.mark.parametrize("gamma", [0.5, 0.8, 0.95])
def test_cauchy_bound(rng, gamma):
    """Each ``j^(a) gamma^(j-a)`` is at most ``a! (1-gamma)^-a`` (a binomial probability is <= 1)."""
    D = 12
    f = rand_bi(rng, D)
    for rho in (0.1, 0.5, 1.0):
        base = f.weighted_norm(rho)
        for a in range(3):
            for b in range(3 - a):
                g = f
                for _ in range(a):
                    g = g.dz()
                for _ in range(b):
                    g = g.dzbar()
                C = math.factorial(a) * math.factorial(b)
                bound = C * mpfr(rho) ** -(a + b) * (1 - mpfr(gamma)) ** -(a + b) * base
                assert g.weighted_norm(gamma * rho) <= bound * (1 + TOL)
    u = rand_uni(rng, D)
    for rho in (0.1, 0.5, 1.0):
        assert (u.derivative().weighted_norm(gamma * rho)
                <= u.weighted_norm(rho) / (rho * (1 - mpfr(gamma))) * (1 + TOL))


def test_diag_product(rng):
    D = 10
    a, b = rand_bi(rng, D), rand_bi(rng, D)
    avg = average(a * b)
    diag = diag_product(a, b, D // 2)
    assert max(abs(diag[n] - avg.coeff(n, n)) for n in range(D // 2 + 1)) <= TOL


def test_mul_div_z(rng):
    g = rand_bi(rng, 6).truncate(5)
    assert max_diff(g.mul_z().div_z(), g) == 0
    assert max_diff(g.mul_zbar().div_zbar(), g) == 0
    with pytest.raises(ValueError):
        BiSeries.monomial(2, 0, 4).div_zbar()


def test_evaluate(rng):
    f = rand_bi(rng, 5)
    z, zb = mpc(mpfr("0.3"), mpfr("0.1")), mpc(mpfr("-0.2"), mpfr("0.4"))
    expect = sum((v * z ** j * zb ** k for j, k, v in f.items()), mpc(0))
    assert abs(f(z, zb) - expect) <= TOL


def test_csv_round_trip(tmp_path, rng):
    f = rand_bi(rng, 8) * (mpfr(1) / 3)
    f.dump_csv(tmp_path / "f.csv")
    g = BiSeries.load_csv(tmp_path / "f.csv", 8)
    assert max_diff(f, g) == 0
    u = UniSeries(6, [mpfr(k) / 7 for k in range(7)])
    u.dump_csv(tmp_path / "u.csv")
    v = UniSeries.load_csv(tmp_path / "u.csv", 6)
    assert all(a == b for a, b in zip(u.coeffs, v.coeffs))


def test_uni_ops(rng):
    u = UniSeries.from_dict({0: 1, 2: 3}, 6)
    assert u(mpfr(2)) == 13
    assert u.derivative().coeff(1) == 6
    assert (u * u).coeff(4) == 9
    c = UniSeries.cos(6)
    assert abs(c.coeff(4) - mpfr(1) / 24) <= TOL
    with pytest.raises(DegreeMismatch):
        u + UniSeries(5)
