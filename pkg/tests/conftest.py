import random

import pytest
from gmpy2 import mpc

from billiard_kam.numerics import make_rotation, set_precision
from billiard_kam.series import BiSeries, UniSeries


@pytest.fixture(autouse=True)
def _working_precision():
    set_precision(256)
    yield
    set_precision(256)


@pytest.fixture
def rot():
    return make_rotation()


@pytest.fixture
def rng():
    return random.Random(20240607)


def rand_coeff(rng, scale=1.0, real=False):
    if real:
        return mpc(rng.uniform(-scale, scale))
    return mpc(rng.uniform(-scale, scale), rng.uniform(-scale, scale))


def rand_bi(rng, D, scale=1.0, real=False, min_degree=0):
    return BiSeries.from_dict({(j, n - j): rand_coeff(rng, scale, real)
                               for n in range(min_degree, D + 1) for j in range(n + 1)}, D)


def rand_phi(rng, D, scale=0.3):
    """Random symmetric odd series with linear part ``z + zbar``."""
    d = {(1, 0): 1, (0, 1): 1}
    for n in range(3, D + 1, 2):
        for j in range((n + 1) // 2, n + 1):
            v = rng.uniform(-scale, scale)
            d[(j, n - j)] = v
            d[(n - j, j)] = v
    return BiSeries.from_dict(d, D)


def rand_q(rng, D, q2, scale=0.3):
    """Random even ``q = 1 + q2 t^2 + ...``."""
    d = {0: 1, 2: q2}
    for k in range(4, D + 1, 2):
        d[k] = rng.uniform(-scale, scale)
    return UniSeries.from_dict(d, D)


def rand_uni(rng, D, scale=1.0):
    return UniSeries(D, [rand_coeff(rng, scale) for _ in range(D + 1)])


def max_diff(a, b, upto=None):
    return (a - b).max_abs(upto)


@pytest.fixture(scope="session")
def doubling_run():
    """Five doubling steps from the quadratic seed at degree 67, golden angle.

    Returns the list of states ``[seed, step1, ..., step5]`` and the rotation.
    Shared by the driver and acceptance tests; takes a couple of minutes.
    """
    from billiard_kam.billiard import seed_state
    from billiard_kam.driver import iterate_once, start_state

    set_precision(256)
    rot = make_rotation()
    q, phi = seed_state(rot, 67)
    states = [start_state(q, phi, rot)]
    for _ in range(5):
        states.append(iterate_once(states[-1], rot)[0])
    return rot, states
