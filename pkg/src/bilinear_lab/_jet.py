"""Truncated Taylor arithmetic used to differentiate the builtin families.

``Jet(c)`` holds normalized Taylor coefficients ``c[k] = f^(k)(t) / k!`` for
``k <= ORDER``; coefficient arrays broadcast over numpy evaluation points.
"""

from __future__ import annotations

import math

import numpy as np

ORDER = 4


class Jet:
    __slots__ = ("c",)

    def __init__(self, coeffs):
        self.c = [np.asarray(v, dtype=np.float64) for v in coeffs]

    @classmethod
    def variable(cls, t) -> "Jet":
        t = np.asarray(t, dtype=np.float64)
        one = np.ones_like(t)
        zero = np.zeros_like(t)
        return cls([t, one] + [zero] * (ORDER - 1))

    @classmethod
    def constant(cls, value, like) -> "Jet":
        zero = np.zeros_like(np.asarray(like, dtype=np.float64))
        return cls([zero + value] + [zero] * ORDER)

    def derivative(self, k: int) -> np.ndarray:
        return self.c[k] * math.factorial(k)

    def __add__(self, other) -> "Jet":
        if isinstance(other, Jet):
            return Jet([a + b for a, b in zip(self.c, other.c)])
        return Jet([self.c[0] + other] + self.c[1:])

    __radd__ = __add__

    def __neg__(self) -> "Jet":
        return Jet([-a for a in self.c])

    def __sub__(self, other) -> "Jet":
        return self + (-other)

    def __mul__(self, other) -> "Jet":
        if isinstance(other, Jet):
            out = []
            for k in range(ORDER + 1):
                out.append(sum(self.c[i] * other.c[k - i] for i in range(k + 1)))
            return Jet(out)
        return Jet([a * other for a in self.c])

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Jet":
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return Jet([a / other for a in self.c])

    def reciprocal(self) -> "Jet":
        a = self.c
        b = [1.0 / a[0]]
        for k in range(1, ORDER + 1):
            b.append(-sum(a[j] * b[k - j] for j in range(1, k + 1)) / a[0])
        return Jet(b)

    def exp(self) -> "Jet":
        a = self.c
        b = [np.exp(a[0])]
        for k in range(1, ORDER + 1):
            b.append(sum(j * a[j] * b[k - j] for j in range(1, k + 1)) / k)
        return Jet(b)

    def log(self) -> "Jet":
        a = self.c
        b = [np.log(a[0])]
        for k in range(1, ORDER + 1):
            acc = a[k] - sum(j * b[j] * a[k - j] for j in range(1, k)) / k
            b.append(acc / a[0])
        return Jet(b)

    def __pow__(self, p: float) -> "Jet":
        return (self.log() * p).exp()
