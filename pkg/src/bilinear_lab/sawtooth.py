"""Sawtooth {x} - 1/2, its truncated Fourier series and the tail kernel."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate


@dataclass(frozen=True)
class SawtoothExpansion:
    M: int

    def __post_init__(self):
        if self.M < 2:
            raise ValueError("truncation level M must be >= 2")


def phi_sawtooth(x):
    x = np.asarray(x, dtype=np.float64)
    return x - np.floor(x) - 0.5


def partial_sum(x, M: int):
    """sum_{0<|m|<=M} e(-m x)/(2 pi i m) = -sum_{m=1}^M sin(2 pi m x)/(pi m).

    Accepts any M >= 0 (M = 0 gives 0); the argument is reduced mod 1 first.
    """
    x = np.asarray(x, dtype=np.float64)
    t = x - np.floor(x)
    out = np.zeros_like(t)
    # ascending m so the result does not depend on chunking
    for m in range(1, M + 1):
        out -= np.sin(2.0 * math.pi * m * t) / (math.pi * m)
    return out


def truncated_series(exp: SawtoothExpansion, x):
    return partial_sum(x, exp.M)


def tail_from_frac(t, M: int):
    """g_M at points given by their fractional parts t in [0, 1)."""
    return (t - 0.5) - partial_sum(t, M)


def tail_value(exp: SawtoothExpansion, x):
    """g_M(x) = Phi(x) - sum_{0<|m|<=M} e(-m x)/(2 pi i m)."""
    return phi_sawtooth(x) - partial_sum(x, exp.M)


def dist_to_int(x):
    x = np.asarray(x, dtype=np.float64)
    return np.abs(x - np.rint(x))


def tail_kernel(M: int, x):
    """min{1, 1/(M ||x||)}, equal to 1 at integers."""
    if M < 2:
        raise ValueError("M must be >= 2")
    d = M * dist_to_int(x)
    with np.errstate(divide="ignore"):
        return np.where(d <= 1.0, 1.0, 1.0 / np.where(d == 0, 1.0, d))


def verification_grid(M: int, n_uniform: int = 100_000, n_cluster: int = 1_000) -> np.ndarray:
    """Midpoint grid on [0, 1) plus points clustered within 1/M of the integers."""
    uniform = (np.arange(n_uniform) + 0.5) / n_uniform
    half = n_cluster // 2
    near = np.linspace(0.0, 1.0 / M, half + 1)[1:]
    cluster = np.concatenate([near, 1.0 - near])
    return np.sort(np.concatenate([uniform, cluster]))


def tail_bound_ratio(M: int, x) -> np.ndarray:
    """|g_M(x)| * max{1, M ||x||}; bounded uniformly iff g_M = O(min{1, 1/(M||x||)})."""
    g = tail_value(SawtoothExpansion(M), x)
    return np.abs(g) * np.maximum(1.0, M * dist_to_int(x))


@dataclass
class KernelCoefficients:
    M: int
    m: np.ndarray
    b: np.ndarray
    abserr: np.ndarray
    failed: np.ndarray

    @property
    def envelope(self) -> np.ndarray:
        """min{log M / M, 1/|m|, M/|m|^2}, with the m = 0 entry log M / M."""
        M = self.M
        am = np.abs(self.m).astype(float)
        with np.errstate(divide="ignore"):
            env = np.minimum(math.log(M) / M, np.minimum(1.0 / am, M / am**2))
        return np.where(am == 0, math.log(M) / M, env)

    @property
    def ratio(self) -> np.ndarray:
        return np.abs(self.b) / self.envelope


def b0_closed_form(M: int) -> float:
    """int_0^1 min{1, 1/(M||x||)} dx = (2/M)(1 + log(M/2))."""
    return 2.0 / M * (1.0 + math.log(M / 2.0))


def tail_kernel_coeffs(M: int, m_max: int, abs_tol: float = 1e-10) -> KernelCoefficients:
    """Fourier coefficients b_m, |m| <= m_max, by adaptive quadrature.

    The kernel is even, so b_m = 2 int_0^{1/2} K(x) cos(2 pi m x) dx; the
    integral is split at 1/M where K has a corner.  Oscillatory pieces use
    QUADPACK's Fourier-weighted rule.
    """
    if M < 2:
        raise ValueError("M must be >= 2")
    ms = np.arange(0, m_max + 1)
    vals = np.empty(ms.size)
    errs = np.empty(ms.size)
    failed = np.zeros(ms.size, dtype=bool)
    inner = lambda x: 1.0 / (M * x)
    for i, m in enumerate(ms):
        kw = {} if m == 0 else {"weight": "cos", "wvar": 2.0 * math.pi * m}
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", integrate.IntegrationWarning)
            a, ea = integrate.quad(lambda x: 1.0, 0.0, 1.0 / M, epsabs=abs_tol / 4, epsrel=0, **kw)
            b, eb = integrate.quad(inner, 1.0 / M, 0.5, epsabs=abs_tol / 4, epsrel=0,
                                      limit=200, **kw)
        vals[i] = 2.0 * (a + b)
        errs[i] = 2.0 * (ea + eb)
        failed[i] = errs[i] > abs_tol or bool(caught)
    # b_{-m} = b_m for the even kernel
    m_full = np.concatenate([-ms[:0:-1], ms])
    return KernelCoefficients(
        M=M,
        m=m_full,
        b=np.concatenate([vals[:0:-1], vals]),
        abserr=np.concatenate([errs[:0:-1], errs]),
        failed=np.concatenate([failed[:0:-1], failed]),
    )
