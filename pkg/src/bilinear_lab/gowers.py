"""Difference functions, U^2/U^3 norms, the 3-AP form and modulation search."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .kernel import KernelSeries, dyadic_slice

U3_MAX_LEN = 2**16
_BATCH_ELEMS = 2**22  # complex entries per FFT batch
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class FiniteSequence:
    """f: Z -> C supported on [offset, offset + len(values))."""

    offset: int
    values: np.ndarray
    one_bounded: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.complex128)
        object.__setattr__(self, "values", v)
        if self.one_bounded and v.size and np.max(np.abs(v)) > 1.0 + 1e-12:
            raise ValueError("sequence declared 1-bounded has |f| > 1")

    def __len__(self) -> int:
        return self.values.size

    @property
    def stop(self) -> int:
        return self.offset + self.values.size

    def at(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.int64)
        i = x - self.offset
        ok = (i >= 0) & (i < self.values.size)
        out = np.zeros(x.shape, dtype=np.complex128)
        out[ok] = self.values[i[ok]]
        return out

    def modulate(self, theta: float) -> "FiniteSequence":
        x = np.arange(self.offset, self.stop)
        return FiniteSequence(self.offset, self.values * np.exp(2j * math.pi * theta * x), self.one_bounded)

    @classmethod
    def from_kernel(cls, values, offset: int = 1) -> "FiniteSequence":
        return cls(offset, np.asarray(values, dtype=np.complex128))

    @classmethod
    def indicator(cls, N: int, start: int = 1) -> "FiniteSequence":
        return cls(start, np.ones(N), True)


@dataclass(frozen=True)
class TriangleWeight:
    """mu_N(n) = (N - |n|)/N^2 for |n| < N."""

    N: int

    def __call__(self, n) -> np.ndarray:
        n = np.abs(np.asarray(n, dtype=np.int64))
        return np.where(n < self.N, (self.N - n) / float(self.N) ** 2, 0.0)


def _fft_size(length: int) -> int:
    """Power of two >= 2 * length."""
    return 1 << max(int(2 * length - 1).bit_length(), 1)


def difference(f: FiniteSequence, h: int) -> FiniteSequence:
    """Delta_h f(x) = f(x) conj f(x + h)."""
    L = len(f)
    if abs(h) >= L:
        return FiniteSequence(f.offset, np.zeros(0))
    v = f.values
    if h >= 0:
        return FiniteSequence(f.offset, v[: L - h] * np.conj(v[h:]))
    return FiniteSequence(f.offset - h, v[-h:] * np.conj(v[: L + h]))


def autocorrelation(f: FiniteSequence) -> np.ndarray:
    """r(h) = sum_x f(x) conj f(x+h) for h = -(L-1)..L-1."""
    L = len(f)
    if L == 0:
        return np.zeros(0, dtype=np.complex128)
    P = _fft_size(L)
    F = np.fft.fft(f.values, P)
    r = np.fft.ifft(np.conj(F) * F)  # conj r(h) at index h mod P
    r = np.conj(r)
    return np.concatenate([r[P - L + 1 :], r[:L]])


def u2_fourth(f: FiniteSequence) -> float:
    """||f||_{U^2}^4 = sum_h |r_f(h)|^2."""
    r = autocorrelation(f)
    return math.fsum((r.real**2 + r.imag**2).tolist())


def _u2_batch(rows: np.ndarray, P: int) -> np.ndarray:
    """u2_fourth of each row (zero padded), via Parseval: sum_k |F_k|^4 / P."""
    F = np.fft.fft(rows, P, axis=1)
    a = F.real**2 + F.imag**2
    return np.sum(a * a, axis=1) / P


def _delta_rows(v: np.ndarray, hs: np.ndarray) -> np.ndarray:
    """Rows Delta_h f for h >= 0, left aligned and zero padded to len(v)."""
    L = v.size
    out = np.zeros((hs.size, L), dtype=np.complex128)
    for i, h in enumerate(hs):
        out[i, : L - h] = v[: L - h] * np.conj(v[h:])
    return out


def per_h3_u2(f: FiniteSequence, h3: Optional[np.ndarray] = None) -> tuple[np.ndarray, np.ndarray]:
    """(h3 values, u2_fourth(Delta_{h3} f)); negative h3 mirror positive ones."""
    L = len(f)
    if L > U3_MAX_LEN:
        raise ValueError(f"length {L} exceeds U3 limit {U3_MAX_LEN}")
    if h3 is None:
        h3 = np.arange(-(L - 1), L) if L else np.zeros(0, dtype=np.int64)
    h3 = np.asarray(h3, dtype=np.int64)
    if L == 0:
        return h3, np.zeros(h3.size)
    hs = np.unique(np.abs(h3[np.abs(h3) < L]))
    P = _fft_size(L)
    batch = max(1, _BATCH_ELEMS // P)
    vals = {}
    for s in range(0, hs.size, batch):
        chunk = hs[s : s + batch]
        res = _u2_batch(_delta_rows(f.values, chunk), P)
        vals.update(zip(chunk.tolist(), res.tolist()))
    out = np.array([vals.get(abs(int(h)), 0.0) for h in h3])
    return h3, out


def u3_eighth(f: FiniteSequence) -> float:
    """||f||_{U^3}^8 = sum_{h3} u2_fourth(Delta_{h3} f)."""
    _, vals = per_h3_u2(f)
    return math.fsum(vals.tolist())


def weighted_triple_sum(f: FiniteSequence, N: int) -> float:
    """sum_{h3} mu_N(h3) u2_fourth(Delta_{h3} f), for f supported in [1, N+1]."""
    if len(f) and (f.offset < 1 or f.stop - 1 > N + 1):
        raise ValueError("support must lie in [1, N+1]")
    h3 = np.arange(-(N - 1), N)
    _, vals = per_h3_u2(f, h3)
    return math.fsum((TriangleWeight(N)(h3) * vals).tolist())


def restricted_triple_sum(f: FiniteSequence, N: int) -> float:
    """sum_{h3} mu_N(h3) sum_{h1,h2 in [-N,N]} sum_n Delta_{h1,h2,h3} f(n), any support."""
    mu = TriangleWeight(N)
    total = []
    for h3 in range(-(N - 1), N):
        g = difference(f, h3)
        if len(g) == 0:
            continue
        acc = 0.0
        for h1 in range(-N, N + 1):
            d = difference(g, h1)
            if len(d) == 0:
                continue
            r = autocorrelation(d)
            Ld = len(d)
            lo, hi = max(-N, -(Ld - 1)), min(N, Ld - 1)
            acc += float(np.sum(r[lo + Ld - 1 : hi + Ld]).real)
        total.append(float(mu(h3)) * acc)
    return math.fsum(total)


def triple_form(f0: FiniteSequence, f1: FiniteSequence, f2: FiniteSequence, K: FiniteSequence) -> complex:
    """sum_n K(n) sum_x f0(x) f1(x-n) f2(x+n)."""
    v0, v1, v2 = f0.values, f1.values, f2.values
    a0, a1, a2 = f0.offset, f1.offset, f2.offset
    terms = []
    for j in np.flatnonzero(K.values):
        n = K.offset + int(j)
        lo = max(a0, a1 + n, a2 - n)
        hi = min(f0.stop, f1.stop + n, f2.stop - n)
        if hi <= lo:
            continue
        c = np.dot(v0[lo - a0 : hi - a0] * v1[lo - n - a1 : hi - n - a1], v2[lo + n - a2 : hi + n - a2])
        terms.append(K.values[j] * c)
    if not terms:
        return 0j
    t = np.asarray(terms)
    return complex(math.fsum(t.real.tolist()), math.fsum(t.imag.tolist()))


@dataclass(frozen=True)
class U3ControlReport:
    N: int
    lhs8: float
    rhs: float

    @property
    def ratio(self) -> float:
        return self.lhs8 / self.rhs if self.rhs > 0 else math.inf


def _check_support(fs: Sequence[FiniteSequence], N: int, S: float) -> None:
    for f in fs:
        if len(f) and (f.offset < -S * N or f.stop - 1 > S * N):
            raise ValueError(f"support outside [-{S}N, {S}N]")


def u3control_check(f0, f1, f2, f3: FiniteSequence, N: int, S: float = 1.0) -> U3ControlReport:
    """|triple_form(f0, f1, f2, f3)|^8 against N^13 times the weighted triple sum of f3."""
    _check_support([f0, f1, f2, f3], N, S)
    lhs = abs(triple_form(f0, f1, f2, f3)) ** 8
    inside = len(f3) == 0 or (f3.offset >= 1 and f3.stop - 1 <= N + 1)
    w = weighted_triple_sum(f3, N) if inside else restricted_triple_sum(f3, N)
    return U3ControlReport(N, lhs, float(N) ** 13 * w)


def fourier_at(f: FiniteSequence, xi: float) -> complex:
    """sum_x f(x) e(x xi)."""
    x = np.arange(f.offset, f.stop, dtype=np.float64)
    ph = (x * xi) % 1.0
    return complex(np.sum(f.values * np.exp(2j * math.pi * ph)))


def modulation_max(f: FiniteSequence, oversample: int = 8, tol: float = 1e-10) -> tuple[float, float]:
    """max_xi |sum_x f(x) e(x xi)| by an oversampled FFT grid and golden-section refinement."""
    if oversample < 4:
        raise ValueError("oversample must be >= 4")
    L = len(f)
    if L == 0:
        return 0.0, 0.0
    P = 1 << max(int(oversample * L - 1).bit_length(), 2)
    # |sum_j f_j e(j k/P)| = P |ifft(f)_k|; the offset only contributes a phase
    grid = np.abs(np.fft.ifft(f.values, P)) * P
    k = int(np.argmax(grid))
    best_xi, best = k / P, float(grid[k])
    g = lambda t: abs(fourier_at(f, t))
    a, b = best_xi - 1.0 / P, best_xi + 1.0 / P
    c, d = b - _INVPHI * (b - a), a + _INVPHI * (b - a)
    gc, gd = g(c), g(d)
    while b - a > tol:
        if gc >= gd:
            b, d, gd = d, c, gc
            c = b - _INVPHI * (b - a)
            gc = g(c)
        else:
            a, c, gc = c, d, gd
            d = a + _INVPHI * (b - a)
            gd = g(d)
    xi = 0.5 * (a + b)
    val = g(xi)
    if val > best * (1.0 + 1e-12):
        best_xi, best = xi % 1.0, val
    return best_xi, best


@dataclass
class GowersProfile:
    u2_fourth: float
    u3_eighth: float
    per_h3: list = field(default_factory=list)  # (h3, xi_star, value)

    def to_json(self) -> str:
        rows = [{"h3": int(h), "xi_star": float(x), "value": float(v)} for h, x, v in self.per_h3]
        return json.dumps({"u2_fourth": self.u2_fourth, "u3_eighth": self.u3_eighth, "per_h3": rows},
                          indent=2, sort_keys=True)


def gowers_profile(f: FiniteSequence, h3_values=None, oversample: int = 8) -> GowersProfile:
    L = len(f)
    if h3_values is None:
        h3_values = range(-(L - 1), L)
    per = []
    for h in h3_values:
        d = difference(f, int(h))
        xi, v = modulation_max(d, oversample) if len(d) else (0.0, 0.0)
        per.append((int(h), xi, v))
    return GowersProfile(u2_fourth(f), u3_eighth(f), per)


@dataclass(frozen=True)
class SmallGainReport:
    N: int
    l: int
    lhs: float
    rhs: float

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs


def _phi_float(inv, y: float) -> float:
    return float(inv(float(y)))


def smallgain_check(ks: KernelSeries, l: int, kappa: float, inv) -> SmallGainReport:
    """weighted_triple_sum(K_{N,l}, N) against
    N^2 phi(N)^{-8+kappa} + N phi(N)^{-8} 2^{-4l/3} phi(2^l)^{(10-2kappa)/3} M^{16/3}  (sigma = 1)."""
    if inv.source.c <= 1.0:
        raise ValueError("smallgain_check assumes c > 1")
    sl = dyadic_slice(ks, l)
    f = FiniteSequence(sl.start, sl.K[sl.start - 1 : sl.stop - 1])
    lhs = weighted_triple_sum(f, ks.N)
    N, M = ks.N, max(ks.M, 1)
    pN, pl = _phi_float(inv, N), _phi_float(inv, 2.0**l)
    rhs = N**2 * pN ** (-8 + kappa) + N * pN**-8 * 2.0 ** (-4 * l / 3) * pl ** ((10 - 2 * kappa) / 3) * M ** (16 / 3)
    return SmallGainReport(N, l, lhs, rhs)


@dataclass(frozen=True)
class Wt11Report:
    N: int
    l: int
    h3_checked: int
    max_value: float
    bound: float
    worst_h3: int

    @property
    def ratio(self) -> float:
        return self.max_value / self.bound if self.bound > 0 else 0.0


def wt11_search(ks: KernelSeries, l: int, kappa: float, inv, oversample: int = 8,
                h3_stride: int = 1) -> Wt11Report:
    """sup_xi |sum_x Delta_{h3} L_{N,l}(x) e(x xi)| over |h3| >= phi(2^l)^kappa, against
    2^{-2l/3} phi(2^l)^{(5-kappa)/3} M^{8/3}."""
    sl = dyadic_slice(ks, l)
    f = FiniteSequence(sl.start, sl.L[sl.start - 1 : sl.stop - 1])
    pl = _phi_float(inv, 2.0**l)
    h_min = max(1, math.ceil(pl**kappa))
    best, worst, checked = 0.0, 0, 0
    for h in range(h_min, len(f), h3_stride):
        # Delta_{-h} is a shifted conjugate of Delta_h, so |h| suffices
        _, v = modulation_max(difference(f, h), oversample)
        checked += 1
        if v > best:
            best, worst = v, h
    M = max(ks.M, 1)
    bound = 2.0 ** (-2 * l / 3) * pl ** ((5 - kappa) / 3) * M ** (8 / 3)
    return Wt11Report(ks.N, l, checked, best, bound, worst)
