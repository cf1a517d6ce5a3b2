"""Exponential sums sum e(m phi(n) + n xi) with careful phase reduction."""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .ddmath import DD
from .regvar import InverseFunction, SigmaFunction, phi_dd_array, sigma_for

PLAIN64_WARN_LIMIT = 10**9


class Precision(enum.Enum):
    PLAIN64 = "plain64"
    DOUBLE_DOUBLE = "doubledouble"


@dataclass
class PhaseReducer:
    """Evaluates m phi(n) + n xi modulo 1.

    With ``DOUBLE_DOUBLE`` the inverse is carried to ~32 digits and the
    integer part is removed from the high word first, so the fractional part
    keeps ~1e-16 absolute accuracy however large phi(n) is.
    """

    inv: InverseFunction
    precision: Precision = Precision.DOUBLE_DOUBLE
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def phi(self, P: int, P2: int):
        key = (P, P2)
        if key not in self._cache:
            n = np.arange(P, P2 + 1)
            if self.precision is Precision.DOUBLE_DOUBLE:
                val = phi_dd_array(self.inv, n)
            else:
                val = np.atleast_1d(self.inv(n.astype(np.float64)))
            self._cache.clear()
            self._cache[key] = val
        return self._cache[key]

    def phases(self, m: int, xi: float, P: int, P2: int) -> np.ndarray:
        """(m phi(n) + n xi) mod 1 in [-1/2, 1/2] for n = P..P2."""
        if P2 >= PLAIN64_WARN_LIMIT and self.precision is Precision.PLAIN64:
            warnings.warn("Plain64 phase reduction is unreliable for n >= 1e9")
        n = np.arange(P, P2 + 1)
        phi = self.phi(P, P2)
        if self.precision is Precision.DOUBLE_DOUBLE:
            t = (phi * float(m)).centered_frac()
            if xi != 0.0:
                t = t + (DD.from_int(n) * float(xi)).centered_frac()
            return t - np.rint(t)
        t = m * phi + n * xi
        return t - np.rint(t)


def e(t) -> np.ndarray:
    """e(t) = exp(2 pi i t)."""
    return np.exp(2j * math.pi * np.asarray(t, dtype=np.float64))


def compensated_sum(z: np.ndarray) -> complex:
    """Correctly rounded sum of real and imaginary parts (order independent)."""
    z = np.asarray(z)
    return complex(math.fsum(z.real.tolist()), math.fsum(np.imag(z).tolist()))


def exp_sum(reducer: PhaseReducer, m: int, xi: float, n_range: tuple[int, int]) -> complex:
    """sum_{n=P}^{P'} e(m phi(n) + n xi)."""
    P, P2 = n_range
    if P > P2:
        raise ValueError("empty range")
    if m == 0 and xi == 0.0:
        return complex(P2 - P + 1, 0.0)
    return compensated_sum(e(reducer.phases(m, xi, P, P2)))


def vdc_ratio(reducer: PhaseReducer, sigma: SigmaFunction, m: int, N: int) -> float:
    """|sum_{n<=N} e(m phi(n))| / (log N |m|^{1/2} N (phi(N) sigma(N))^{-1/2})."""
    if m == 0:
        raise ValueError("m must be nonzero")
    s = abs(exp_sum(reducer, m, 0.0, (1, N)))
    phiN = float(reducer.inv(float(N)))
    bound = math.log(N) * math.sqrt(abs(m)) * N / math.sqrt(phiN * float(sigma(N)))
    return s / bound


@dataclass(frozen=True)
class MinKernelSum:
    lhs: float
    rhs: float

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs


def min_kernel_sum(
    reducer: PhaseReducer, M: int, N: int, q: int = 0, sigma: Optional[SigmaFunction] = None
) -> MinKernelSum:
    """sum_{n in [N]} min{1, 1/(M ||phi(n+q)||)} against N log M/M + N M^{1/2} log N/(phi(N) sigma(N))^{1/2}."""
    if M < 2 or N < 2:
        raise ValueError("need M, N >= 2")
    if q not in (0, 1):
        raise ValueError("q must be 0 or 1")
    sigma = sigma or sigma_for(reducer.inv.source)
    d = np.abs(reducer.phases(1, 0.0, 1 + q, N + q))
    with np.errstate(divide="ignore"):
        terms = np.where(M * d <= 1.0, 1.0, 1.0 / (M * d))
    lhs = math.fsum(terms.tolist())
    phiN = float(reducer.inv(float(N)))
    rhs = N * math.log(M) / M + N * math.sqrt(M) * math.log(N) / math.sqrt(phiN * float(sigma(N)))
    return MinKernelSum(lhs, rhs)
