"""Truncated power series in one variable and in the pair (z, zbar).

A :class:`BiSeries` is stored by homogeneous degree.  Block ``n`` is a numpy
object array of length ``n + 1`` whose entry ``j`` is the coefficient of
``z**j * zbar**(n - j)``; a block that is identically zero is stored as
``None`` and skipped by every operation.  Products are truncated at the
common ``max_degree``.
"""
from __future__ import annotations

import csv
import numbers
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np
import gmpy2
from gmpy2 import mpc, mpfr

from .errors import DegreeMismatch, NonUnit, NonzeroConstantTerm
from .numerics import Rotation, zero_tolerance

ZERO = mpc(0)
ONE = mpc(1)

_SCALAR_TYPES = (numbers.Number, type(mpc(0)), type(mpfr(0)))


def _is_scalar(x) -> bool:
    return isinstance(x, _SCALAR_TYPES)


def _zeros(n: int) -> np.ndarray:
    return np.full(n + 1, ZERO, dtype=object)


def _as_block(values: Iterable) -> np.ndarray:
    return np.array([mpc(v) for v in values], dtype=object)


def _mul_blocks(a: list, b: list, D: int) -> list:
    out: list = [None] * (D + 1)
    for da, A in enumerate(a):
        if A is None:
            continue
        for db in range(0, D + 1 - da):
            B = b[db]
            if B is None:
                continue
            c = np.convolve(A, B)
            n = da + db
            out[n] = c if out[n] is None else out[n] + c
    return out


class BiSeries:
    """Truncated series ``sum f_jk z^j zbar^k`` with ``j + k <= max_degree``."""

    __slots__ = ("max_degree", "blocks")

    def __init__(self, max_degree: int, blocks: list | None = None):
        self.max_degree = int(max_degree)
        if blocks is None:
            blocks = [None] * (self.max_degree + 1)
        elif len(blocks) != self.max_degree + 1:
            raise ValueError("block list does not match max_degree")
        self.blocks = blocks

    # -- construction -------------------------------------------------
    @classmethod
    def zeros(cls, max_degree: int) -> "BiSeries":
        return cls(max_degree)

    @classmethod
    def constant(cls, value, max_degree: int) -> "BiSeries":
        f = cls(max_degree)
        f.blocks[0] = _as_block([value])
        return f

    @classmethod
    def monomial(cls, j: int, k: int, max_degree: int, coeff=1) -> "BiSeries":
        return cls.from_dict({(j, k): coeff}, max_degree)

    @classmethod
    def from_dict(cls, coeffs: dict, max_degree: int) -> "BiSeries":
        f = cls(max_degree)
        for (j, k), v in coeffs.items():
            n = j + k
            if j < 0 or k < 0:
                raise ValueError("negative exponent")
            if n > max_degree:
                continue
            if f.blocks[n] is None:
                f.blocks[n] = _zeros(n)
            f.blocks[n][j] = f.blocks[n][j] + mpc(v)
        return f

    @classmethod
    def seed(cls, max_degree: int) -> "BiSeries":
        """The linear map ``z + zbar``."""
        return cls.from_dict({(1, 0): 1, (0, 1): 1}, max_degree)

    @classmethod
    def radial(cls, u: "UniSeries", max_degree: int) -> "BiSeries":
        """``u(z zbar)`` as a bivariate series."""
        f = cls(max_degree)
        for m in range(0, min(u.max_degree, max_degree // 2) + 1):
            if u.coeffs[m] != 0:
                b = _zeros(2 * m)
                b[m] = mpc(u.coeffs[m])
                f.blocks[2 * m] = b
        return f

    def copy(self) -> "BiSeries":
        return BiSeries(self.max_degree, [None if b is None else b.copy() for b in self.blocks])

    # -- access ------------------------------------------------------
    def coeff(self, j: int, k: int) -> mpc:
        n = j + k
        if j < 0 or k < 0 or n > self.max_degree or self.blocks[n] is None:
            return ZERO
        return self.blocks[n][j]

    def __getitem__(self, jk) -> mpc:
        return self.coeff(*jk)

    def items(self, include_zero: bool = False) -> Iterator[tuple[int, int, mpc]]:
        for n, b in enumerate(self.blocks):
            if b is None:
                continue
            for j in range(n + 1):
                v = b[j]
                if include_zero or v != 0:
                    yield j, n - j, v

    def to_dict(self) -> dict:
        return {(j, k): v for j, k, v in self.items()}

    def block(self, n: int) -> np.ndarray:
        b = self.blocks[n]
        return _zeros(n) if b is None else b

    # -- degree management -------------------------------------------
    def truncate(self, m: int) -> "BiSeries":
        """Drop all terms of degree above ``m`` (``max_degree`` is kept)."""
        blocks = [b if n <= m else None for n, b in enumerate(self.blocks)]
        return BiSeries(self.max_degree, blocks)

    def resize(self, max_degree: int) -> "BiSeries":
        """Explicit re-truncation to a new ``max_degree`` (zero padding when larger)."""
        if max_degree <= self.max_degree:
            return BiSeries(max_degree, list(self.blocks[: max_degree + 1]))
        return BiSeries(max_degree, list(self.blocks) + [None] * (max_degree - self.max_degree))

    def _check(self, other: "BiSeries") -> None:
        if self.max_degree != other.max_degree:
            raise DegreeMismatch(f"max_degree {self.max_degree} != {other.max_degree}")

    def order(self, tol=None) -> int:
        """Smallest degree carrying a coefficient above ``tol``; ``max_degree + 1`` if none."""
        if tol is None:
            tol = zero_tolerance()
        for n, b in enumerate(self.blocks):
            if b is not None and any(abs(v) > tol for v in b):
                return n
        return self.max_degree + 1

    def max_abs(self, upto: int | None = None) -> mpfr:
        """Largest coefficient modulus among degrees ``<= upto``."""
        m = mpfr(0)
        top = self.max_degree if upto is None else min(upto, self.max_degree)
        for n in range(top + 1):
            b = self.blocks[n]
            if b is not None:
                for v in b:
                    a = abs(v)
                    if a > m:
                        m = a
        return m

    def degrees(self) -> list[int]:
        return [n for n, b in enumerate(self.blocks) if b is not None]

    # -- ring operations ---------------------------------------------
    def __neg__(self) -> "BiSeries":
        return BiSeries(self.max_degree, [None if b is None else -b for b in self.blocks])

    def __add__(self, other) -> "BiSeries":
        if _is_scalar(other):
            return self + BiSeries.constant(other, self.max_degree)
        self._check(other)
        blocks = []
        for a, b in zip(self.blocks, other.blocks):
            if a is None:
                blocks.append(None if b is None else b.copy())
            elif b is None:
                blocks.append(a.copy())
            else:
                blocks.append(a + b)
        return BiSeries(self.max_degree, blocks)

    __radd__ = __add__

    def __sub__(self, other) -> "BiSeries":
        return self + (-other)

    def __rsub__(self, other) -> "BiSeries":
        return (-self) + other

    def __mul__(self, other) -> "BiSeries":
        if _is_scalar(other):
            if other == 0:
                return BiSeries(self.max_degree)
            s = mpc(other)
            return BiSeries(self.max_degree, [None if b is None else b * s for b in self.blocks])
        self._check(other)
        return BiSeries(self.max_degree, _mul_blocks(self.blocks, other.blocks, self.max_degree))

    __rmul__ = __mul__

    def __truediv__(self, other) -> "BiSeries":
        if _is_scalar(other):
            return self * (ONE / mpc(other))
        return self * invert_unit(other)

    def __pow__(self, n: int) -> "BiSeries":
        out = BiSeries.constant(1, self.max_degree)
        for _ in range(n):
            out = out * self
        return out

    # -- structural maps ---------------------------------------------
    def shift(self, rot: Rotation, sign: int) -> "BiSeries":
        """Plus shift (``sign=+1``) ``f(lambda z, zbar/lambda)`` or minus shift (``sign=-1``)."""
        blocks = []
        for n, b in enumerate(self.blocks):
            blocks.append(None if b is None else b * shift_vector(rot, n, sign))
        return BiSeries(self.max_degree, blocks)

    def plus(self, rot: Rotation) -> "BiSeries":
        return self.shift(rot, 1)

    def minus(self, rot: Rotation) -> "BiSeries":
        return self.shift(rot, -1)

    def involution(self) -> "BiSeries":
        """``f(zbar, z)``: swaps the exponents."""
        return BiSeries(self.max_degree, [None if b is None else b[::-1].copy() for b in self.blocks])

    def dz(self) -> "BiSeries":
        """``d/dz``; the result has ``max_degree - 1``."""
        D = self.max_degree - 1
        blocks: list = [None] * (D + 1)
        for n in range(1, self.max_degree + 1):
            b = self.blocks[n]
            if b is not None:
                blocks[n - 1] = b[1:] * _arange(1, n + 1)
        return BiSeries(D, blocks)

    def dzbar(self) -> "BiSeries":
        D = self.max_degree - 1
        blocks: list = [None] * (D + 1)
        for n in range(1, self.max_degree + 1):
            b = self.blocks[n]
            if b is not None:
                blocks[n - 1] = b[:-1] * _arange(n, 0, -1)
        return BiSeries(D, blocks)

    def mul_z(self) -> "BiSeries":
        """Multiply by ``z``, dropping what overflows ``max_degree``."""
        blocks: list = [None] * (self.max_degree + 1)
        for n in range(self.max_degree):
            b = self.blocks[n]
            if b is not None:
                blocks[n + 1] = np.concatenate(([ZERO], b))
        return BiSeries(self.max_degree, blocks)

    def mul_zbar(self) -> "BiSeries":
        blocks: list = [None] * (self.max_degree + 1)
        for n in range(self.max_degree):
            b = self.blocks[n]
            if b is not None:
                blocks[n + 1] = np.concatenate((b, [ZERO]))
        return BiSeries(self.max_degree, blocks)

    def div_z(self, tol=None) -> "BiSeries":
        """Divide by ``z``; terms free of ``z`` must vanish to ``tol``."""
        return self.involution().div_zbar(tol).involution()

    def div_zbar(self, tol=None) -> "BiSeries":
        if tol is None:
            tol = zero_tolerance()
        blocks: list = [None] * (self.max_degree + 1)
        for n in range(0, self.max_degree + 1):
            b = self.blocks[n]
            if b is None:
                continue
            if abs(b[-1]) > tol * 1024:
                raise ValueError(f"term z^{n} is not divisible by zbar")
            if n >= 1:
                blocks[n - 1] = b[:-1].copy()
        return BiSeries(self.max_degree, blocks)

    # -- evaluation and norms ----------------------------------------
    def __call__(self, z, zbar) -> mpc:
        z, zbar = mpc(z), mpc(zbar)
        total = ZERO
        for n, b in enumerate(self.blocks):
            if b is None:
                continue
            # Horner in the ratio z/zbar would fail at zbar = 0, so use powers.
            zp = [ONE]
            for _ in range(n):
                zp.append(zp[-1] * z)
            s = ZERO
            wp = ONE
            for j in range(n, -1, -1):
                s += b[j] * zp[j] * wp
                wp *= zbar
            total += s
        return total

    def weighted_norm(self, rho, derivatives: int = 0) -> mpfr:
        """``sum |f_jk| rho^(j+k)``, or the max over partials of order ``<= derivatives``."""
        rho = mpfr(rho)
        if derivatives == 0:
            total = mpfr(0)
            r = mpfr(1)
            for n, b in enumerate(self.blocks):
                if b is not None:
                    total += sum((abs(v) for v in b), mpfr(0)) * r
                r *= rho
            return total
        best = mpfr(0)
        for a in range(derivatives + 1):
            g = self
            for _ in range(a):
                g = g.dz()
            for b in range(derivatives + 1 - a):
                best = max(best, g.weighted_norm(rho))
                g = g.dzbar()
        return best

    def is_symmetric(self, tol=None) -> bool:
        if tol is None:
            tol = zero_tolerance()
        return (self - self.involution()).max_abs() <= tol

    def __repr__(self) -> str:
        return f"BiSeries(max_degree={self.max_degree}, degrees={self.degrees()})"

    # -- file format -------------------------------------------------
    def dump_csv(self, path) -> None:
        """Write ``j,k,re,im`` rows with exactly round-tripping decimals."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["j", "k", "re", "im"])
            for j, k, v in self.items():
                w.writerow([j, k, str(v.real), str(v.imag)])

    @classmethod
    def load_csv(cls, path, max_degree: int | None = None) -> "BiSeries":
        rows = _read_rows(path)
        coeffs = {(int(r["j"]), int(r["k"])): mpc(mpfr(r["re"]), mpfr(r["im"])) for r in rows}
        if max_degree is None:
            max_degree = max((j + k for j, k in coeffs), default=0)
        return cls.from_dict(coeffs, max_degree)


def _read_rows(path) -> list[dict]:
    with open(Path(path), newline="") as fh:
        return list(csv.DictReader(fh))


_ARANGE_CACHE: dict = {}


def _arange(start: int, stop: int, step: int = 1) -> np.ndarray:
    key = (start, stop, step)
    a = _ARANGE_CACHE.get(key)
    if a is None:
        a = np.array([mpfr(i) for i in range(start, stop, step)], dtype=object)
        _ARANGE_CACHE[key] = a
    return a


def _rot_cache(rot: Rotation) -> dict:
    # Rotation is frozen; the cache lives in a side table keyed by identity.
    c = _ROT_CACHES.get(id(rot))
    if c is None or c[0] is not rot:
        c = (rot, {})
        _ROT_CACHES[id(rot)] = c
    return c[1]


_ROT_CACHES: dict = {}


def shift_vector(rot: Rotation, n: int, sign: int) -> np.ndarray:
    """Vector ``lambda^(sign*(j-k))`` over block ``n``."""
    cache = _rot_cache(rot)
    key = ("shift", n, sign)
    v = cache.get(key)
    if v is None:
        v = np.array([rot.pow(sign * (2 * j - n)) for j in range(n + 1)], dtype=object)
        cache[key] = v
    return v


def rotation_cache(rot: Rotation) -> dict:
    """Per-rotation memo used by the difference operators."""
    return _rot_cache(rot)


def invert_unit(f: BiSeries) -> BiSeries:
    """``1/f`` by degree recursion; requires a nonzero constant term."""
    f0 = f.coeff(0, 0)
    if abs(f0) <= zero_tolerance():
        raise NonUnit("constant term vanishes")
    D = f.max_degree
    inv0 = ONE / f0
    g: list = [None] * (D + 1)
    g[0] = _as_block([inv0])
    for n in range(1, D + 1):
        acc = None
        for m in range(1, n + 1):
            A = f.blocks[m]
            B = g[n - m]
            if A is None or B is None:
                continue
            c = np.convolve(A, B)
            acc = c if acc is None else acc + c
        g[n] = None if acc is None else acc * (-inv0)
    return BiSeries(D, g)


def diag_product(a: BiSeries, b: BiSeries, nmax: int) -> list:
    """Diagonal coefficients ``[a*b]_(n,n)`` for ``0 <= n <= nmax`` without forming ``a*b``."""
    out = [ZERO] * (nmax + 1)
    for n in range(nmax + 1):
        d = 2 * n
        if d > a.max_degree or d > b.max_degree:
            break
        s = ZERO
        for da in range(d + 1):
            A = a.blocks[da]
            B = b.blocks[d - da]
            if A is None or B is None:
                continue
            # A[i] * B[n - i] with 0 <= i <= da, 0 <= n - i <= d - da
            lo = max(0, n - (d - da))
            hi = min(da, n)
            if lo > hi:
                continue
            s += np.dot(A[lo:hi + 1], B[n - hi:n - lo + 1][::-1])
        out[n] = s
    return out


class UniSeries:
    """Truncated series ``sum c_k t^k`` with ``k <= max_degree``."""

    __slots__ = ("max_degree", "coeffs")

    def __init__(self, max_degree: int, coeffs=None):
        self.max_degree = int(max_degree)
        c = _zeros(self.max_degree)
        if coeffs is not None:
            for i, v in enumerate(coeffs):
                if i > self.max_degree:
                    break
                c[i] = mpc(v)
        self.coeffs = c

    @classmethod
    def from_dict(cls, coeffs: dict, max_degree: int) -> "UniSeries":
        u = cls(max_degree)
        for k, v in coeffs.items():
            if k <= max_degree:
                u.coeffs[k] = mpc(v)
        return u

    @classmethod
    def cos(cls, max_degree: int) -> "UniSeries":
        u = cls(max_degree)
        f = mpfr(1)
        for k in range(0, max_degree + 1):
            if k > 0:
                f = f / k
            if k % 2 == 0:
                u.coeffs[k] = mpc(f if k % 4 == 0 else -f)
        return u

    def coeff(self, k: int) -> mpc:
        return self.coeffs[k] if 0 <= k <= self.max_degree else ZERO

    def copy(self) -> "UniSeries":
        return UniSeries(self.max_degree, self.coeffs)

    def resize(self, max_degree: int) -> "UniSeries":
        return UniSeries(max_degree, self.coeffs)

    def truncate(self, m: int) -> "UniSeries":
        u = self.copy()
        for k in range(m + 1, self.max_degree + 1):
            u.coeffs[k] = ZERO
        return u

    def _check(self, other: "UniSeries") -> None:
        if self.max_degree != other.max_degree:
            raise DegreeMismatch(f"max_degree {self.max_degree} != {other.max_degree}")

    def __add__(self, other) -> "UniSeries":
        if _is_scalar(other):
            u = self.copy()
            u.coeffs[0] = u.coeffs[0] + mpc(other)
            return u
        self._check(other)
        u = UniSeries(self.max_degree)
        u.coeffs = self.coeffs + other.coeffs
        return u

    __radd__ = __add__

    def __neg__(self) -> "UniSeries":
        u = UniSeries(self.max_degree)
        u.coeffs = -self.coeffs
        return u

    def __sub__(self, other) -> "UniSeries":
        return self + (-other)

    def __mul__(self, other) -> "UniSeries":
        u = UniSeries(self.max_degree)
        if _is_scalar(other):
            u.coeffs = self.coeffs * mpc(other)
            return u
        self._check(other)
        u.coeffs = np.convolve(self.coeffs, other.coeffs)[: self.max_degree + 1]
        return u

    __rmul__ = __mul__

    def derivative(self) -> "UniSeries":
        """Derivative; the result keeps ``max_degree`` with a zero top coefficient."""
        u = UniSeries(self.max_degree)
        for k in range(1, self.max_degree + 1):
            u.coeffs[k - 1] = self.coeffs[k] * k
        return u

    def __call__(self, t):
        acc = ZERO if isinstance(t, type(mpc(0))) else mpfr(0)
        real = not isinstance(t, type(mpc(0)))
        for k in range(self.max_degree, -1, -1):
            c = self.coeffs[k]
            acc = acc * t + (c.real if real else c)
        return acc

    def order(self, tol=None) -> int:
        if tol is None:
            tol = zero_tolerance()
        for k, v in enumerate(self.coeffs):
            if abs(v) > tol:
                return k
        return self.max_degree + 1

    def max_abs(self) -> mpfr:
        return max((abs(v) for v in self.coeffs), default=mpfr(0))

    def weighted_norm(self, rho, derivatives: int = 0) -> mpfr:
        rho = mpfr(rho)
        best = mpfr(0)
        u = self
        for _ in range(derivatives + 1):
            s = mpfr(0)
            r = mpfr(1)
            for v in u.coeffs:
                s += abs(v) * r
                r *= rho
            best = max(best, s)
            u = u.derivative()
        return best

    def __repr__(self) -> str:
        nz = [k for k, v in enumerate(self.coeffs) if v != 0]
        return f"UniSeries(max_degree={self.max_degree}, nonzero={nz})"

    def dump_csv(self, path) -> None:
        """Write ``k,re`` rows (real parts; the imaginary parts must vanish)."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "re"])
            for k, v in enumerate(self.coeffs):
                if v != 0:
                    w.writerow([k, str(v.real)])

    @classmethod
    def load_csv(cls, path, max_degree: int | None = None) -> "UniSeries":
        rows = _read_rows(path)
        coeffs = {int(r["k"]): mpc(mpfr(r["re"])) for r in rows}
        if max_degree is None:
            max_degree = max(coeffs, default=0)
        return cls.from_dict(coeffs, max_degree)


class PowerTable:
    """Lazily grown powers ``s**n`` of a series with zero constant term."""

    def __init__(self, s: BiSeries):
        if abs(s.coeff(0, 0)) > zero_tolerance():
            raise NonzeroConstantTerm("composition needs a zero constant term")
        self.base = s
        self.powers = [BiSeries.constant(1, s.max_degree), s]

    def __getitem__(self, n: int) -> BiSeries:
        while len(self.powers) <= n:
            self.powers.append(self.powers[-1] * self.base)
        return self.powers[n]


def compose_uni(f: UniSeries, s: BiSeries, table: PowerTable | None = None) -> BiSeries:
    """``f(s)`` truncated at ``s.max_degree``; powers of ``s`` come from ``table``."""
    if table is None:
        table = PowerTable(s)
    elif table.base is not s and table.base.max_degree != s.max_degree:
        raise DegreeMismatch("power table built for another series")
    D = s.max_degree
    out: list = [None] * (D + 1)
    # s**n has order >= n (once the order of s is >= 1), so powers above D vanish
    for n in range(0, min(f.max_degree, D) + 1):
        c = f.coeffs[n]
        if c == 0:
            continue
        p = table[n]
        for d, b in enumerate(p.blocks):
            if b is None:
                continue
            t = b * c
            out[d] = t if out[d] is None else out[d] + t
    return BiSeries(D, out)
