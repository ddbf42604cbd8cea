"""Difference operators, their inverses and the diagonal projections.

Every operator acts diagonally on monomials ``z^j zbar^k``:

===========  ============================  ==========================
operator     factor on ``z^j zbar^k``      kernel
===========  ============================  ==========================
nabla_plus   ``1 - lambda^(j-k+1)``        ``k = j + 1``
nabla        ``lambda^(k-j) - 1/lambda``   ``j = k + 1``
nabla_tilde  ``1 - lambda^(j-k)``          ``j = k``
===========  ============================  ==========================

The inverses divide off the kernel.  A kernel coefficient of the input below
the zero tolerance is dropped; a larger one raises :class:`ResonantInput`.
"""
from __future__ import annotations

import numpy as np
from gmpy2 import mpc, mpfr

from .errors import NonDiagonalInput, ResonantInput
from .numerics import Rotation, zero_tolerance
from .series import ZERO, BiSeries, rotation_cache


def _factor(rot: Rotation, kind: str, j: int, k: int):
    if kind == "plus":
        return 1 - rot.pow(j - k + 1)
    if kind == "minus":
        return rot.pow(k - j) - rot.pow(-1)
    return 1 - rot.pow(j - k)


def _resonant(kind: str, j: int, k: int) -> bool:
    if kind == "plus":
        return k == j + 1
    if kind == "minus":
        return j == k + 1
    return j == k


def _vectors(rot: Rotation, kind: str, n: int):
    cache = rotation_cache(rot)
    key = ("op", kind, n)
    v = cache.get(key)
    if v is None:
        fwd = np.array([_factor(rot, kind, j, n - j) for j in range(n + 1)], dtype=object)
        inv = np.array([ZERO if _resonant(kind, j, n - j) else 1 / fwd[j]
                        for j in range(n + 1)], dtype=object)
        v = (fwd, inv)
        cache[key] = v
    return v


def _apply(f: BiSeries, rot: Rotation, kind: str) -> BiSeries:
    return BiSeries(f.max_degree, [None if b is None else b * _vectors(rot, kind, n)[0]
                                   for n, b in enumerate(f.blocks)])


def _invert(f: BiSeries, rot: Rotation, kind: str, tol=None) -> BiSeries:
    if tol is None:
        tol = zero_tolerance()
    blocks = []
    for n, b in enumerate(f.blocks):
        if b is None:
            blocks.append(None)
            continue
        for j in range(n + 1):
            if _resonant(kind, j, n - j) and abs(b[j]) > tol:
                raise ResonantInput(
                    f"coefficient ({j},{n - j}) = {float(abs(b[j])):.3g} lies in the kernel")
        blocks.append(b * _vectors(rot, kind, n)[1])
    return BiSeries(f.max_degree, blocks)


def nabla_plus(f: BiSeries, rot: Rotation) -> BiSeries:
    """``f - lambda f^+``."""
    return _apply(f, rot, "plus")


def nabla(f: BiSeries, rot: Rotation) -> BiSeries:
    """``f^- - f/lambda``."""
    return _apply(f, rot, "minus")


def nabla_tilde(f: BiSeries, rot: Rotation) -> BiSeries:
    """``f - f^+``."""
    return _apply(f, rot, "tilde")


def inv_nabla_plus(f: BiSeries, rot: Rotation, tol=None) -> BiSeries:
    """Inverse of :func:`nabla_plus` on the complement of ``z^j zbar^(j+1)``."""
    return _invert(f, rot, "plus", tol)


def inv_nabla(f: BiSeries, rot: Rotation, tol=None) -> BiSeries:
    """Inverse of :func:`nabla` on the complement of ``z^(k+1) zbar^k``."""
    return _invert(f, rot, "minus", tol)


def inv_nabla_tilde(f: BiSeries, rot: Rotation, tol=None) -> BiSeries:
    """Inverse of :func:`nabla_tilde` off the diagonal."""
    return _invert(f, rot, "tilde", tol)


def _keep(f: BiSeries, pred) -> BiSeries:
    blocks = []
    for n, b in enumerate(f.blocks):
        if b is None:
            blocks.append(None)
            continue
        idx = [j for j in range(n + 1) if pred(j, n - j)]
        if not idx:
            blocks.append(None)
            continue
        nb = np.full(n + 1, ZERO, dtype=object)
        for j in idx:
            nb[j] = b[j]
        blocks.append(nb)
    return BiSeries(f.max_degree, blocks)


def proj_pi(f: BiSeries) -> BiSeries:
    """Keep the ``z^(k+1) zbar^k`` terms."""
    return _keep(f, lambda j, k: j == k + 1)


def proj_pi_plus(f: BiSeries) -> BiSeries:
    """Keep the ``z^j zbar^(j+1)`` terms."""
    return _keep(f, lambda j, k: k == j + 1)


def average(f: BiSeries) -> BiSeries:
    """Diagonal part ``[f]``: the terms ``(z zbar)^n``."""
    return _keep(f, lambda j, k: j == k)


def _check_diagonal(f: BiSeries, tol) -> None:
    if tol is None:
        tol = zero_tolerance()
    if (f - average(f)).max_abs() > tol:
        raise NonDiagonalInput("series has off-diagonal terms")


def radial_derivative(f: BiSeries, tol=None) -> BiSeries:
    """``D``: multiplies the ``(z zbar)^n`` coefficient by ``n``."""
    _check_diagonal(f, tol)
    blocks: list = [None] * (f.max_degree + 1)
    for m in range(1, f.max_degree // 2 + 1):
        b = f.blocks[2 * m]
        if b is not None:
            nb = np.full(2 * m + 1, ZERO, dtype=object)
            nb[m] = b[m] * m
            blocks[2 * m] = nb
    return BiSeries(f.max_degree, blocks)


def radial_antiderivative(f: BiSeries, tol=None) -> BiSeries:
    """``Dbar``: divides the ``(z zbar)^n`` coefficient by ``n`` and drops the constant."""
    _check_diagonal(f, tol)
    blocks: list = [None] * (f.max_degree + 1)
    for m in range(1, f.max_degree // 2 + 1):
        b = f.blocks[2 * m]
        if b is not None:
            nb = np.full(2 * m + 1, ZERO, dtype=object)
            nb[m] = b[m] / mpfr(m)
            blocks[2 * m] = nb
    return BiSeries(f.max_degree, blocks)


def diagonal_coefficients(f: BiSeries, nmax: int | None = None) -> list[mpc]:
    """``[f_00, f_11, f_22, ...]`` up to ``nmax``."""
    if nmax is None:
        nmax = f.max_degree // 2
    return [f.coeff(n, n) for n in range(nmax + 1)]
