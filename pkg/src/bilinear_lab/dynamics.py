"""Bilinear ergodic averages along N_h for rotations and shifts."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .ddmath import DD
from .gowers import FiniteSequence, triple_form
from .kernel import KernelSeries, ParamBlock
from .regvar import (
    InverseFunction,
    enumerate_membership,
    find_threshold,
    membership_formula,
    phi_dd_array,
)
from .sawtooth import partial_sum

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
START_BATTERY = (0.0, GOLDEN, 0.3)


# systems ---------------------------------------------------------------

@dataclass(frozen=True)
class CircleRotation:
    """x -> x + alpha mod 1."""

    alpha: float

    def points(self, x: float, n: np.ndarray) -> np.ndarray:
        # n alpha in double-double, reduced once; no accumulated drift
        return ((DD.from_int(np.asarray(n, dtype=np.int64)) * self.alpha) + float(x)).frac()

    def angle(self, state) -> np.ndarray:
        return np.asarray(state, dtype=np.float64)

    def rotation_phase(self, d: int, n: np.ndarray) -> np.ndarray:
        """d n alpha mod 1."""
        return (DD.from_int(np.asarray(n, dtype=np.int64)) * self.alpha * float(d)).centered_frac()


@dataclass(frozen=True)
class CyclicShift:
    """r -> r + 1 mod p on Z_p."""

    p: int

    def points(self, r: int, n: np.ndarray) -> np.ndarray:
        return np.mod(int(r) + np.asarray(n, dtype=np.int64), self.p)

    def angle(self, state) -> np.ndarray:
        return np.asarray(state, dtype=np.float64) / self.p

    def rotation_phase(self, d: int, n: np.ndarray) -> np.ndarray:
        return np.mod(d * np.asarray(n, dtype=np.int64), self.p) / self.p


@dataclass(frozen=True)
class IntegerShift:
    """m -> m + 1 on Z, observed through a window of arrays."""

    window: int

    def points(self, m: int, n: np.ndarray) -> np.ndarray:
        return int(m) + np.asarray(n, dtype=np.int64)


DynamicalSystem = Union[CircleRotation, CyclicShift, IntegerShift]


# observables -----------------------------------------------------------

@dataclass(frozen=True)
class TrigPolynomial:
    """sum_j a_j e(k_j t) of the angle t of a state."""

    freqs: tuple
    coeffs: tuple

    def __post_init__(self):
        if sum(abs(a) for a in self.coeffs) > 1.0 + 1e-12:
            raise ValueError("coefficients must have l1 norm <= 1 for a 1-bounded observable")

    @classmethod
    def character(cls, k: int) -> "TrigPolynomial":
        return cls((k,), (1.0,))

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        out = np.zeros(t.shape, dtype=np.complex128)
        for k, a in zip(self.freqs, self.coeffs):
            out += a * np.exp(2j * math.pi * ((k * t) % 1.0))
        return out


@dataclass(frozen=True)
class ObservablePair:
    f: Callable
    g: Callable
    name: str = ""

    def check_bounded(self, samples: np.ndarray) -> bool:
        return bool(np.all(np.abs(self.f(samples)) <= 1 + 1e-12) and np.all(np.abs(self.g(samples)) <= 1 + 1e-12))


def constant_pair() -> ObservablePair:
    one = TrigPolynomial((0,), (1.0,))
    return ObservablePair(one, one, "ones")


def resonant_pair() -> ObservablePair:
    """f = g = e(.): f(T^n x) g(T^-n x) = e(2x)."""
    ch = TrigPolynomial.character(1)
    return ObservablePair(ch, ch, "resonant")


def decaying_pair() -> ObservablePair:
    """f = e(.), g = e(-.): product e(2 n alpha)."""
    return ObservablePair(TrigPolynomial.character(1), TrigPolynomial.character(-1), "decaying")


def random_trig_pair(rng: np.random.Generator, degree: int = 5) -> ObservablePair:
    def poly():
        k = tuple(int(v) for v in rng.integers(-degree, degree + 1, size=3))
        a = rng.normal(size=3) + 1j * rng.normal(size=3)
        a = a / np.sum(np.abs(a))
        return TrigPolynomial(k, tuple(complex(v) for v in a))
    return ObservablePair(poly(), poly(), "randomtrig")


def _product_series(sys, obs: ObservablePair, x, n: np.ndarray) -> np.ndarray:
    """F(n) = f(T^n x) g(T^-n x) for n in the array."""
    if isinstance(obs.f, TrigPolynomial) and isinstance(obs.g, TrigPolynomial) and hasattr(sys, "rotation_phase"):
        theta = float(sys.angle(x))
        out = np.zeros(n.shape, dtype=np.complex128)
        for d, coef in _spectral_groups(obs, theta):
            out += coef * (1.0 if d == 0 else np.exp(2j * math.pi * sys.rotation_phase(d, n)))
        return out
    fwd, bwd = sys.points(x, n), sys.points(x, -n)
    if hasattr(sys, "angle"):
        fwd, bwd = sys.angle(fwd), sys.angle(bwd)
    return obs.f(fwd) * obs.g(bwd)


def _spectral_groups(obs: ObservablePair, theta: float) -> list[tuple[int, complex]]:
    """Coefficients of e(d n rho) in F(n), grouped by d = k - l, sorted by d."""
    groups: dict[int, complex] = {}
    for k, a in zip(obs.f.freqs, obs.f.coeffs):
        for l, b in zip(obs.g.freqs, obs.g.coeffs):
            ph = ((k + l) * theta) % 1.0
            groups[k - l] = groups.get(k - l, 0j) + a * b * complex(np.exp(2j * math.pi * ph))
    return sorted(groups.items())


# weights ---------------------------------------------------------------

@dataclass
class OrbitWeights:
    """All weight sequences on n = 1..n_max for one h."""

    inv: InverseFunction
    n_max: int
    threshold: Optional[int] = None
    member: np.ndarray = field(init=False, repr=False)
    counts: np.ndarray = field(init=False, repr=False)
    dphi: np.ndarray = field(init=False, repr=False)
    frac_neg: np.ndarray = field(init=False, repr=False)
    phi_hi: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        f = self.inv.source
        if self.threshold is None:
            self.threshold = find_threshold(f)
        n = np.arange(1, self.n_max + 1)
        enum = enumerate_membership(f, self.n_max)[1:]
        member = enum.astype(np.int64)
        hi = n >= self.threshold
        if np.any(hi):
            member[hi] = membership_formula(self.inv, n[hi])
        self.member = member
        self.counts = np.concatenate([[0], np.cumsum(member)])
        phi = phi_dd_array(self.inv, np.arange(1, self.n_max + 2))
        self.dphi = (phi[1:] - phi[:-1]).to_float()
        self.frac_neg = (-phi).frac()
        self.phi_hi = phi.to_float()

    def count(self, N: int) -> int:
        c = int(self.counts[N])
        if c == 0:
            raise ValueError(f"N_h cap [{N}] is empty")
        return c

    def sawtooth_diff(self) -> np.ndarray:
        """Phi(-phi(n+1)) - Phi(-phi(n))."""
        s = self.frac_neg - 0.5
        return s[1:] - s[:-1]

    def series_diff(self, M: int) -> np.ndarray:
        s = partial_sum(self.frac_neg, M)
        return s[1:] - s[:-1]

    def tail_diff(self, M: int) -> np.ndarray:
        t = self.frac_neg
        g = (t - 0.5) - partial_sum(t, M)
        return g[1:] - g[:-1]


def _wsum(w: np.ndarray, F: np.ndarray) -> complex:
    z = w * F
    return complex(math.fsum(z.real.tolist()), math.fsum(z.imag.tolist()))


def orbit_average_A(sys, obs: ObservablePair, x, N: int) -> complex:
    """(1/N) sum_{n<=N} f(T^n x) g(T^-n x)."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return _spectral_average(sys, obs, x, N, np.ones(N), float(N))


def _spectral_average(sys, obs, x, N: int, w: np.ndarray, norm: float) -> complex:
    n = np.arange(1, N + 1)
    if isinstance(obs.f, TrigPolynomial) and isinstance(obs.g, TrigPolynomial) and hasattr(sys, "rotation_phase"):
        theta = float(sys.angle(x))
        total = 0j
        for d, coef in _spectral_groups(obs, theta):
            if d == 0:
                s = math.fsum(w.tolist()) / norm
            else:
                s = _wsum(w, np.exp(2j * math.pi * sys.rotation_phase(d, n))) / norm
            total += coef * s
        return total
    return _wsum(w, _product_series(sys, obs, x, n)) / norm


def orbit_average_B(sys, obs, x, inv: InverseFunction, N: int, weights: Optional[OrbitWeights] = None) -> complex:
    ow = weights or OrbitWeights(inv, N)
    return _spectral_average(sys, obs, x, N, ow.member[:N].astype(float), float(ow.count(N)))


@dataclass(frozen=True)
class MEResult:
    M: complex
    E: complex
    B: complex

    @property
    def residual(self) -> float:
        return abs(self.B - self.M - self.E)


def orbit_average_M_and_E(sys, obs, x, inv, N: int, weights: Optional[OrbitWeights] = None) -> MEResult:
    ow = weights or OrbitWeights(inv, N)
    c = float(ow.count(N))
    m = _spectral_average(sys, obs, x, N, ow.dphi[:N], c)
    e = _spectral_average(sys, obs, x, N, ow.sawtooth_diff()[:N], c)
    b = _spectral_average(sys, obs, x, N, ow.member[:N].astype(float), c)
    return MEResult(m, e, b)


def orbit_average_E1_E2(sys, obs, x, inv, params: ParamBlock, N: int,
                        weights: Optional[OrbitWeights] = None) -> tuple[complex, complex]:
    ow = weights or OrbitWeights(inv, N)
    c = float(ow.count(N))
    M = params.M_of_N(N)
    e1 = _spectral_average(sys, obs, x, N, ow.series_diff(M)[:N], c)
    e2 = _spectral_average(sys, obs, x, N, ow.tail_diff(M)[:N], c)
    return e1, e2


# trajectories ----------------------------------------------------------

NAMES = ("a", "b", "m", "e", "e1", "e2")


@dataclass
class AverageTrajectory:
    times: np.ndarray
    a_vals: np.ndarray
    b_vals: np.ndarray
    m_vals: np.ndarray
    e_vals: np.ndarray
    e1_vals: np.ndarray
    e2_vals: np.ndarray
    lam: Optional[float] = None

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    @property
    def gap(self) -> np.ndarray:
        return np.abs(self.b_vals - self.a_vals)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            head = ["k", "N"]
            for nm in NAMES:
                head += [f"{nm}_re", f"{nm}_im"]
            w.writerow(head + ["abs_b_minus_a"])
            for k, N in enumerate(self.times):
                row = [k, int(N)]
                for nm in NAMES:
                    v = getattr(self, f"{nm}_vals")[k]
                    row += [repr(float(v.real)), repr(float(v.imag))]
                w.writerow(row + [repr(float(self.gap[k]))])


def lacunary_times(lam: float, k_max: int) -> np.ndarray:
    if not 1.0 < lam <= 2.0:
        raise ValueError("lambda must lie in (1, 2]")
    t = np.floor(lam ** np.arange(k_max + 1)).astype(np.int64)
    return np.unique(t[t >= 1])


def trajectory(sys, obs, x, inv, params: ParamBlock, times: Sequence[int],
               lam: Optional[float] = None, weights: Optional[OrbitWeights] = None) -> AverageTrajectory:
    """All six averages at the given times from one pass of prefix sums."""
    times = np.asarray(times, dtype=np.int64)
    if times.size == 0 or times[0] < 1 or np.any(np.diff(times) <= 0):
        raise ValueError("times must be positive and strictly increasing")
    N_max = int(times[-1])
    ow = weights or OrbitWeights(inv, N_max)
    n = np.arange(1, N_max + 1)
    F = _product_series(sys, obs, x, n)
    ones = np.ones(N_max)
    base = {
        "a": np.cumsum(ones * F),
        "b": np.cumsum(ow.member[:N_max] * F),
        "m": np.cumsum(ow.dphi[:N_max] * F),
        "e": np.cumsum(ow.sawtooth_diff()[:N_max] * F),
    }
    out = {k: np.empty(times.size, dtype=np.complex128) for k in NAMES}
    Ms = np.array([params.M_of_N(int(N)) for N in times])
    split = {}
    for M in np.unique(Ms):
        split[int(M)] = (np.cumsum(ow.series_diff(int(M))[:N_max] * F),
                         np.cumsum(ow.tail_diff(int(M))[:N_max] * F))
    for i, N in enumerate(times):
        N = int(N)
        c = float(ow.count(N))
        out["a"][i] = base["a"][N - 1] / N
        for k in ("b", "m", "e"):
            out[k][i] = base[k][N - 1] / c
        s1, s2 = split[int(Ms[i])]
        out["e1"][i] = s1[N - 1] / c
        out["e2"][i] = s2[N - 1] / c
    return AverageTrajectory(times, *(out[k] for k in NAMES), lam=lam)


def lacunary_trajectory(sys, obs, x, inv, params: ParamBlock, lam: float, k_max: int,
                        weights: Optional[OrbitWeights] = None) -> AverageTrajectory:
    times = lacunary_times(lam, k_max)
    ow = weights or OrbitWeights(inv, int(times[-1]))
    times = times[ow.counts[times] > 0]
    tr = trajectory(sys, obs, x, inv, params, times, lam=lam, weights=ow)
    # a and b from the spectral path, so resonant observables stay exact
    for i, N in enumerate(times):
        tr.a_vals[i] = orbit_average_A(sys, obs, x, int(N))
        tr.b_vals[i] = orbit_average_B(sys, obs, x, inv, int(N), weights=ow)
    return tr


# transference ----------------------------------------------------------

def transference_form(l_arr: FiniteSequence, f_arr: FiniteSequence, g_arr: FiniteSequence,
                      ks: KernelSeries) -> float:
    """(1/N) |sum_m sum_n l(m) 1_[N](m) f(m+n) g(m-n) K_N(n)|."""
    N = ks.N
    for a in (l_arr, f_arr, g_arr):
        if len(a) and (a.offset < -2 * N or a.stop - 1 > 2 * N):
            raise ValueError("arrays must be supported in [-2N, 2N]")
    lo, hi = max(1, l_arr.offset), min(N + 1, l_arr.stop)
    l_cut = FiniteSequence(lo, l_arr.values[lo - l_arr.offset : hi - l_arr.offset]) if hi > lo else FiniteSequence(1, [])
    K = FiniteSequence(1, ks.values)
    return abs(triple_form(l_cut, g_arr, f_arr, K)) / N
