"""The truncated-series kernel K_N, the phases psi_m and dyadic slices L_{N,l}."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .ddmath import DD
from .expsum import e
from .regvar import InverseFunction, orbit_counts, phi_dd_array, sigma_for

C_MAX = 23.0 / 22.0


@dataclass(frozen=True)
class ParamBlock:
    c: float
    eps0: float
    sigma0: float
    kappa: float
    sigma0_override: Optional[float] = None

    @property
    def exploratory(self) -> bool:
        return self.sigma0_override is not None

    def M_of_N(self, N: int) -> int:
        return int(math.floor(N**self.sigma0))

    @property
    def admissible_window(self) -> tuple[float, float]:
        return 1.0 - 1.0 / self.c, 3.0 / self.c - 2.0


def param_block(c: float, sigma0_override: Optional[float] = None) -> ParamBlock:
    """eps0 = (23-22c)/(40c), sigma0 = 1 - 1/c + eps0, kappa = (9c-6)/5.

    Without an override c must lie in [1, 23/22).  The override admits any
    sigma0 in (0, 1) and clamps kappa into (0, 1].
    """
    eps0 = (23.0 - 22.0 * c) / (40.0 * c)
    kappa = (9.0 * c - 6.0) / 5.0
    if sigma0_override is None:
        if not 1.0 <= c < C_MAX:
            raise ValueError(f"c = {c} outside [1, 23/22); pass sigma0_override to explore")
        sigma0 = 1.0 - 1.0 / c + eps0
        lo, hi = 1.0 - 1.0 / c, 3.0 / c - 2.0
        assert eps0 > 0 and lo < sigma0 < hi and 0 < kappa <= 1
        return ParamBlock(c, eps0, sigma0, kappa)
    if not 0.0 < sigma0_override < 1.0:
        raise ValueError("sigma0 override must lie in (0, 1)")
    return ParamBlock(c, eps0, float(sigma0_override), min(max(kappa, 1e-12), 1.0),
                      float(sigma0_override))


def psi(inv: InverseFunction, m: int, n) -> np.ndarray:
    """psi_m(n) = e(m (phi(n+1) - phi(n))) - 1, the difference taken in double-double."""
    n = np.atleast_1d(np.asarray(n, dtype=np.int64))
    if np.any(n < 1) or m == 0:
        raise ValueError("need n >= 1 and m != 0")
    d = phi_dd_array(inv, n + 1) - phi_dd_array(inv, n)
    return e((d * float(m)).centered_frac()) - 1.0


def _series_terms(phi: DD, M: int) -> np.ndarray:
    """sum_{0<|m|<=M} e(m phi)/(2 pi i m), summed over m pairs as complex numbers."""
    out = np.zeros(phi.shape, dtype=np.complex128)
    for m in range(1, M + 1):
        t = (phi * float(m)).centered_frac()
        out += e(t) / (2j * math.pi * m) + e(-t) / (-2j * math.pi * m)
    return out


@dataclass
class KernelSeries:
    N: int
    params: ParamBlock
    M: int
    values: np.ndarray  # K_N(n), n = 1..N
    count: int  # |N_h cap [N]|
    floor_phi_N: int
    phi_end: tuple  # (phi(1), phi(N+1)) as floats, for the telescoping identity

    @property
    def L(self) -> np.ndarray:
        """floor(phi(N)) K_N(n), the bounded unnormalized kernel."""
        return self.values * self.floor_phi_N

    @property
    def imag_residue(self) -> float:
        return float(np.max(np.abs(self.values.imag))) if self.N else 0.0

    def as_real(self) -> np.ndarray:
        return self.values.real.copy()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "re", "im"])
            for n, v in enumerate(self.values, start=1):
                w.writerow([n, repr(float(v.real)), repr(float(v.imag))])


def build_kernel(
    inv: InverseFunction,
    params: ParamBlock,
    N: int,
    count: Optional[int] = None,
    M: Optional[int] = None,
) -> KernelSeries:
    """K_N(n) = 1_[N](n)/|N_h cap [N]| sum_{0<|m|<=M} (e(m phi(n+1)) - e(m phi(n)))/(2 pi i m)."""
    if N < 2:
        raise ValueError("N must be >= 2")
    M = params.M_of_N(N) if M is None else M
    phi = phi_dd_array(inv, np.arange(1, N + 2))
    s = _series_terms(phi, M)
    L = s[1:] - s[:-1]
    if count is None:
        count = int(orbit_counts(inv.source, N)[N])
    fl = int(inv.dd(N).floor().to_float()) if N >= inv.y0 else int(math.floor(inv(float(N))))
    return KernelSeries(
        N=N, params=params, M=M, values=L / count, count=count, floor_phi_N=fl,
        phi_end=(float(phi[0].to_float()), float(phi[N].to_float())),
    )


def telescoped_sum(ks: KernelSeries, inv: InverseFunction) -> complex:
    """sum_{0<|m|<=M} (e(m phi(N+1)) - e(m phi(1)))/(2 pi i m), computed independently of the array."""
    ends = phi_dd_array(inv, np.array([1, ks.N + 1]))
    s = _series_terms(ends, ks.M)
    return complex(s[1] - s[0])


@dataclass(frozen=True)
class DyadicSlice:
    l: int
    start: int  # first n of the support
    stop: int  # one past the last n
    K: np.ndarray  # K_{N,l}(n) on [1, N]
    L: np.ndarray  # L_{N,l}(n) on [1, N]

    @property
    def support_size(self) -> int:
        return max(self.stop - self.start, 0)


def max_level(N: int) -> int:
    return int(math.floor(math.log2(N + 1)))


def dyadic_slice(ks: KernelSeries, l: int) -> DyadicSlice:
    """K_{N,l} = 1_{[2^l, min(2^{l+1}, N+1))} K_N and L_{N,l} = floor(phi(N)) K_{N,l}."""
    if not 0 <= l <= max_level(ks.N):
        raise ValueError(f"level l = {l} outside [0, log2(N+1)]")
    start, stop = 2**l, min(2 ** (l + 1), ks.N + 1)
    mask = np.zeros(ks.N, dtype=bool)
    mask[start - 1 : stop - 1] = True
    K = np.where(mask, ks.values, 0.0)
    return DyadicSlice(l=l, start=start, stop=stop, K=K, L=K * ks.floor_phi_N)


def e2_bound_terms(inv: InverseFunction, params: ParamBlock, N: int, sigma=None) -> tuple[float, float]:
    """log(M) N/(M phi(N)) and log(N) N M^{1/2}/(phi(N)^{3/2} sigma(N)^{1/2})."""
    sigma = sigma or sigma_for(inv.source)
    M = params.M_of_N(N)
    phiN = float(inv(float(N)))
    t1 = math.log(M) * N / (M * phiN) if M >= 1 else math.inf
    t2 = math.log(N) * N * math.sqrt(M) / (phiN**1.5 * math.sqrt(float(sigma(N))))
    return t1, t2


def export_kernel_csv(ks: KernelSeries, path: Path) -> Path:
    path = Path(path)
    ks.write_csv(path)
    return path
