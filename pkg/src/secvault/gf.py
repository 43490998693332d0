"""Arithmetic over GF(2^w).

Elements are plain integers in ``[0, 2**w)`` whose bits are the
coefficients of a polynomial over GF(2).  A :class:`GF` instance owns the
reduction polynomial and the lookup tables; all of its methods accept
scalars or numpy integer arrays and broadcast like ufuncs.

>>> F = GF(4)
>>> F.mul(2, 3)
6
>>> F.mul(3, F.inv(3))
1
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConstructionError, FieldMismatchError

MAX_WIDTH = 16
TABLE_MAX_WIDTH = 12
DEFAULT_WIDTH = 8


def clmul(a: int, b: int) -> int:
    """Carry-less product of two bit polynomials."""
    out = 0
    while b:
        if b & 1:
            out ^= a
        a <<= 1
        b >>= 1
    return out


def poly_mod(a: int, m: int) -> int:
    """Remainder of bit polynomial ``a`` divided by ``m``."""
    dm = m.bit_length()
    while a.bit_length() >= dm:
        a ^= m << (a.bit_length() - dm)
    return a


def is_irreducible(poly: int, degree: int) -> bool:
    """Brute-force irreducibility test for a degree-``degree`` polynomial.

    Trial-divides by every polynomial of degree 1 .. degree // 2.
    """
    if poly.bit_length() != degree + 1:
        return False
    for d in range(1 << 1, 1 << (degree // 2 + 1)):
        if poly_mod(poly, d) == 0:
            return False
    return True


@lru_cache(maxsize=None)
def default_poly(width: int) -> int:
    """Smallest irreducible polynomial of the given degree (as a bitmask)."""
    for poly in range((1 << width) | 1, 1 << (width + 1), 2):
        if is_irreducible(poly, width):
            return poly
    raise ConstructionError(f"no irreducible polynomial of degree {width}")  # pragma: no cover


class GF:
    """The finite field GF(2^width) modulo ``poly``.

    Instances are immutable; use :func:`field` to get a shared cached one.
    For ``width <= 12`` multiplication goes through log/antilog tables,
    above that through a vectorised shift-and-reduce loop.
    """

    def __init__(self, width: int = DEFAULT_WIDTH, poly: int | None = None):
        if not 1 <= width <= MAX_WIDTH:
            raise ConstructionError(f"width must be in [1, {MAX_WIDTH}], got {width}")
        if poly is None:
            poly = default_poly(width)
        if not is_irreducible(poly, width):
            raise ConstructionError(f"polynomial {poly:#x} is not irreducible of degree {width}")
        self.width = width
        self.poly = poly
        self.order = 1 << width
        self._exp = self._log = None
        if width <= TABLE_MAX_WIDTH:
            self._build_tables()

    @property
    def q(self) -> int:
        return self.order

    def __repr__(self):
        return f"GF(2^{self.width}, poly={self.poly:#x})"

    def __eq__(self, other):
        return isinstance(other, GF) and (self.width, self.poly) == (other.width, other.poly)

    def __hash__(self):
        return hash((self.width, self.poly))

    def _generator_powers(self):
        # the default polynomials are irreducible but not always primitive,
        # so search for an element of full multiplicative order
        q = self.order
        for g in range(2, q) if q > 2 else (1,):
            powers = [1]
            v = g
            while v != 1:
                powers.append(v)
                v = poly_mod(clmul(v, g), self.poly)
            if len(powers) == q - 1:
                return powers
        raise ConstructionError("no multiplicative generator found")  # pragma: no cover

    def _build_tables(self):
        q = self.order
        powers = np.array(self._generator_powers(), dtype=np.int64)
        exp = np.zeros(4 * q + 1, dtype=np.int64)
        exp[:q - 1] = powers
        exp[q - 1:2 * (q - 1)] = powers
        log = np.zeros(q, dtype=np.int64)
        log[powers] = np.arange(q - 1)
        # log(0) points into the zero tail of exp so products with 0 vanish
        log[0] = 2 * q
        self._exp = exp
        self._log = log

    # -- scalar / array arithmetic -------------------------------------

    def _check(self, a):
        arr = np.asarray(a)
        if arr.dtype.kind not in "iu":
            raise TypeError(f"field elements must be integers, got {arr.dtype}")
        if arr.size and (arr.min() < 0 or arr.max() >= self.order):
            raise ValueError(f"value out of range for {self!r}")
        return arr

    @staticmethod
    def _out(x):
        x = np.asarray(x)
        return int(x) if x.ndim == 0 else x

    def add(self, a, b):
        out = np.bitwise_xor(self._check(a).astype(np.int64), self._check(b).astype(np.int64))
        return self._out(out)

    sub = add

    def mul(self, a, b):
        a = self._check(a).astype(np.int64)
        b = self._check(b).astype(np.int64)
        return self._out(self._mul(a, b))

    def _mul(self, a, b):
        # unchecked product of int64 arrays, for inner loops
        if self._exp is not None:
            return self._exp[self._log[a] + self._log[b]]
        return self._clmul_reduce(a, b)

    def mul_slow(self, a: int, b: int) -> int:
        """Reference product: carry-less multiply then long division."""
        return poly_mod(clmul(int(a), int(b)), self.poly)

    def _clmul_reduce(self, a, b):
        a, b = np.broadcast_arrays(a, b)
        a = a.copy()
        out = np.zeros_like(a)
        top = 1 << self.width
        for bit in range(self.width):
            out ^= np.where((b >> bit) & 1, a, 0)
            a <<= 1
            a = np.where(a & top, a ^ self.poly, a)
        return out

    def inv(self, a):
        a = self._check(a).astype(np.int64)
        if np.any(a == 0):
            raise ZeroDivisionError("0 has no multiplicative inverse")
        if self._exp is not None:
            out = self._exp[(self.order - 1) - self._log[a]]
        else:
            out = self.pow(a, self.order - 2)
        return self._out(out)

    def div(self, a, b):
        return self.mul(a, self.inv(b))

    def pow(self, a, e: int):
        a = self._check(a).astype(np.int64)
        result = np.ones_like(a)
        base = a
        while e:
            if e & 1:
                result = np.asarray(self.mul(result, base))
            base = np.asarray(self.mul(base, base))
            e >>= 1
        return self._out(result)

    def element(self, value: int) -> "FieldElement":
        return FieldElement(int(value), self)

    def random(self, shape=None, rng=None, nonzero=False):
        rng = np.random.default_rng(rng)
        low = 1 if nonzero else 0
        return rng.integers(low, self.order, size=shape, dtype=np.int64)


@lru_cache(maxsize=None)
def field(width: int = DEFAULT_WIDTH, poly: int | None = None) -> GF:
    """Shared :class:`GF` instance for ``(width, poly)``."""
    return GF(width, poly)


@dataclass(frozen=True)
class FieldElement:
    """A single field value tagged with its field.

    Mixing elements of different fields raises :class:`FieldMismatchError`.
    """

    value: int
    field: GF

    def __post_init__(self):
        if not 0 <= self.value < self.field.order:
            raise ValueError(f"{self.value} is not an element of {self.field!r}")

    def _same(self, other):
        if not isinstance(other, FieldElement):
            return NotImplemented
        if other.field != self.field:
            raise FieldMismatchError(f"{self.field!r} vs {other.field!r}")
        return other

    def __add__(self, other):
        other = self._same(other)
        if other is NotImplemented:
            return other
        return FieldElement(self.value ^ other.value, self.field)

    __sub__ = __add__

    def __mul__(self, other):
        other = self._same(other)
        if other is NotImplemented:
            return other
        return FieldElement(self.field.mul(self.value, other.value), self.field)

    def __truediv__(self, other):
        other = self._same(other)
        if other is NotImplemented:
            return other
        return self * other.inverse()

    def inverse(self) -> "FieldElement":
        return FieldElement(self.field.inv(self.value), self.field)

    def __int__(self):
        return self.value

    def __bool__(self):
        return self.value != 0


def add(a: FieldElement, b: FieldElement) -> FieldElement:
    return a + b


def mul(a: FieldElement, b: FieldElement) -> FieldElement:
    return a * b


def inv(a: FieldElement) -> FieldElement:
    return a.inverse()
