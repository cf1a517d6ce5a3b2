"""Vectorized double-double arithmetic on numpy arrays.

A value is carried as an unevaluated sum ``hi + lo`` with ``|lo| <= ulp(hi)/2``,
giving roughly 32 significant decimal digits.  The error-free transformations
follow Dekker and Knuth; ``exp``/``log`` follow the usual QD-library recipes
(argument reduction, short Taylor series, one Newton step for the logarithm).

Only what the rest of the package needs is implemented.
"""

from __future__ import annotations

import numpy as np

_SPLITTER = 134217729.0  # 2**27 + 1

# ln 2 split into hi + lo.
_LN2_HI = 0.6931471805599453
_LN2_LO = 2.3190468138462996e-17

_EXP_SQUARINGS = 10
_EXP_TAYLOR_TERMS = 10


def two_sum(a, b):
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


def quick_two_sum(a, b):
    """Requires |a| >= |b|."""
    s = a + b
    return s, b - (s - a)


def _split(a):
    t = _SPLITTER * a
    hi = t - (t - a)
    return hi, a - hi


def two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    err = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, err


class DD:
    """Array (or scalar) of double-double numbers."""

    __slots__ = ("hi", "lo")

    def __init__(self, hi, lo=None):
        self.hi = np.asarray(hi, dtype=np.float64)
        if lo is None:
            self.lo = np.zeros_like(self.hi)
        else:
            self.lo = np.asarray(lo, dtype=np.float64)

    @classmethod
    def from_int(cls, n) -> "DD":
        """Exact conversion of integers up to 2**106."""
        n = np.asarray(n, dtype=np.int64)
        hi = n.astype(np.float64)
        lo = (n - hi.astype(np.int64)).astype(np.float64)
        return cls(*quick_two_sum(hi, lo))

    def __repr__(self) -> str:
        return f"DD(hi={self.hi!r}, lo={self.lo!r})"

    def __getitem__(self, idx) -> "DD":
        return DD(self.hi[idx], self.lo[idx])

    def __len__(self) -> int:
        return len(self.hi)

    @property
    def shape(self):
        return self.hi.shape

    def to_float(self) -> np.ndarray:
        return self.hi + self.lo

    # arithmetic -----------------------------------------------------------

    def __neg__(self) -> "DD":
        return DD(-self.hi, -self.lo)

    def __add__(self, other) -> "DD":
        if isinstance(other, DD):
            s, e = two_sum(self.hi, other.hi)
            t, f = two_sum(self.lo, other.lo)
            e = e + t
            s, e = quick_two_sum(s, e)
            e = e + f
            return DD(*quick_two_sum(s, e))
        s, e = two_sum(self.hi, np.asarray(other, dtype=np.float64))
        e = e + self.lo
        return DD(*quick_two_sum(s, e))

    __radd__ = __add__

    def __sub__(self, other) -> "DD":
        return self + (-other)

    def __rsub__(self, other) -> "DD":
        return (-self) + other

    def __mul__(self, other) -> "DD":
        if isinstance(other, DD):
            p, e = two_prod(self.hi, other.hi)
            e = e + (self.hi * other.lo + self.lo * other.hi)
            return DD(*quick_two_sum(p, e))
        b = np.asarray(other, dtype=np.float64)
        p, e = two_prod(self.hi, b)
        e = e + self.lo * b
        return DD(*quick_two_sum(p, e))

    __rmul__ = __mul__

    def __truediv__(self, other) -> "DD":
        if not isinstance(other, DD):
            other = DD(other)
        q1 = self.hi / other.hi
        r = self - other * q1
        q2 = r.hi / other.hi
        r = r - other * q2
        q3 = r.hi / other.hi
        return DD(*quick_two_sum(q1, q2)) + q3

    def ldexp(self, k) -> "DD":
        return DD(np.ldexp(self.hi, k), np.ldexp(self.lo, k))

    def sqr(self) -> "DD":
        return self * self

    # rounding -------------------------------------------------------------

    def floor(self) -> "DD":
        fh = np.floor(self.hi)
        fl = np.where(fh == self.hi, np.floor(self.lo), 0.0)
        return DD(*quick_two_sum(fh, fl))

    def frac(self) -> np.ndarray:
        """Fractional part in [0, 1) as a float."""
        r = (self.hi - np.floor(self.hi)) + self.lo
        r = r - np.floor(r)
        return np.where(r >= 1.0, 0.0, r)

    def centered_frac(self) -> np.ndarray:
        """Representative of the value mod 1 in [-1/2, 1/2], as a float."""
        r = (self.hi - np.rint(self.hi)) + self.lo
        return r - np.rint(r)


def dd_exp(a: DD) -> DD:
    k = np.rint(a.hi / _LN2_HI)
    r = (a - DD(_LN2_HI, _LN2_LO) * k).ldexp(-_EXP_SQUARINGS)
    # expm1(r) by Taylor series, Horner form in double-double.
    s = DD(np.full_like(r.hi, _INV_FACT[_EXP_TAYLOR_TERMS].hi))
    for j in range(_EXP_TAYLOR_TERMS - 1, 0, -1):
        s = s * r + _INV_FACT[j]
    s = s * r
    # expm1(2r) = expm1(r) * (expm1(r) + 2)
    for _ in range(_EXP_SQUARINGS):
        s = s * (s + 2.0)
    return (s + 1.0).ldexp(k.astype(np.int64))


def dd_log(a: DD) -> DD:
    """Natural log of a positive double-double (one Newton step on exp)."""
    x = DD(np.log(a.hi))
    return x + a * dd_exp(-x) - 1.0


def _factorial(n: int) -> float:
    out = 1.0
    for j in range(2, n + 1):
        out *= j
    return out


_INV_FACT = [DD(1.0) / DD(_factorial(j)) for j in range(_EXP_TAYLOR_TERMS + 1)]
