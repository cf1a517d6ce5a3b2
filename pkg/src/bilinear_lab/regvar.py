"""c-regularly varying functions, their inverses, orbits and Toeplitz weights.

A function in the class has the shape ``h(x) = C x^c exp(J(x))`` with
``J(x) = int_{x0}^x theta(t)/t dt``.  The builtin families are

=====================  ==========================  =====================
family string          h(x)                        x0
=====================  ==========================  =====================
``power:c``            ``x^c``                     1
``powerlog:c:a``       ``x^c (log x)^a``           e^2
``powerexplog:c:a:b``  ``x^c exp(a (log x)^b)``    e
``poweriterlog:c:k``   ``x^c log...log x`` (k)     exp^(k)(1)
=====================  ==========================  =====================

with the integration constant absorbed into ``bigC``.  Below ``x0`` the
function is continued linearly so that orbit generation never faults.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
from scipy import integrate

from ._jet import Jet
from .ddmath import DD, dd_exp, dd_log


class DomainError(ValueError):
    """Argument outside the domain of h or its inverse."""


class ConvergenceError(RuntimeError):
    """Root finding did not converge."""


class FamilyTag(enum.Enum):
    PURE_POWER = "power"
    POWER_LOG = "powerlog"
    POWER_EXP_LOG = "powerexplog"
    POWER_ITER_LOG = "poweriterlog"
    CUSTOM = "custom"


MAX_NEWTON_ITER = 200


@dataclass(frozen=True)
class RegVarFunction:
    """A concrete ``h`` with exponent ``c`` in [1, 2).

    ``log_shape`` returns ``log(h(x) / x^c)`` as a :class:`Jet` of the
    evaluation points; ``log_shape_dd`` the same quantity in double-double
    (custom families fall back to float accuracy there).
    """

    c: float
    bigC: float
    x0: float
    family_tag: FamilyTag
    params: tuple = ()
    log_shape: Callable[[Jet], Jet] = field(repr=False, compare=False, default=None)
    log_shape_dd: Optional[Callable[[DD], DD]] = field(repr=False, compare=False, default=None)
    shape_value: Optional[Callable[[np.ndarray], np.ndarray]] = field(repr=False, compare=False, default=None)
    name: str = ""

    def __post_init__(self):
        if not 1.0 <= self.c < 2.0:
            raise DomainError(f"exponent c={self.c} outside [1, 2)")
        if self.bigC <= 0:
            raise DomainError("bigC must be positive")
        if self.x0 < 1:
            raise DomainError("x0 must be >= 1")

    # core evaluation ------------------------------------------------------

    def _jet(self, x) -> Jet:
        t = Jet.variable(x)
        u = t.log() * self.c + self.log_shape(t)
        return u.exp()

    def _h_core(self, x: np.ndarray) -> np.ndarray:
        if self.shape_value is not None:
            return x**self.c * self.shape_value(x)
        return x**self.c * np.exp(self.log_shape(Jet.variable(x)).c[0])

    def derivatives(self, x, order: int = 3) -> list[np.ndarray]:
        """[h, h', ..., h^(order)] at x >= x0 (no extension)."""
        jet = self._jet(np.asarray(x, dtype=np.float64))
        return [jet.derivative(k) for k in range(order + 1)]

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        below = x < self.x0
        xs = np.where(below, self.x0, x)
        val = self._h_core(xs)
        if np.any(below):
            h0, d0 = self._anchor
            val = np.where(below, h0 + d0 * (x - self.x0), val)
        return val if val.ndim else float(val)

    @property
    def _anchor(self) -> tuple[float, float]:
        h0, d0 = self.derivatives(self.x0, order=1)
        return float(self._h_core(np.asarray(self.x0))), float(d0)

    def h_dd(self, x: DD) -> DD:
        """h on x >= x0 in double-double."""
        lx = dd_log(x)
        if self.log_shape_dd is None:
            shape = DD(self.log_shape(Jet.variable(x.to_float())).c[0])
        else:
            shape = self.log_shape_dd(x)
        return dd_exp(lx * self.c + shape)

    def theta(self, t, order: int = 0) -> np.ndarray:
        """theta^(order)(t) for order in 0..3, from theta(t) = t J'(t)."""
        jet = self.log_shape(Jet.variable(t))
        d = [jet.derivative(k) for k in range(1, 5)]
        t = np.asarray(t, dtype=np.float64)
        # theta^(j) = j J^(j) + t J^(j+1)
        return j_theta(order, t, d)

    def J(self, x) -> np.ndarray:
        """Perturbation integral int_{x0}^x theta(t)/t dt."""
        return self.log_shape(Jet.variable(x)).c[0] - math.log(self.bigC)

    def check_invariants(self, x_max: float = 1e8, n_grid: int = 2000) -> list[str]:
        """Sampled checks of monotonicity, convexity and theta behavior."""
        grid = np.geomspace(max(self.x0, 1.0) * (1 + 1e-9), max(x_max, 10 * self.x0), n_grid)
        problems = []
        h, d1, d2 = self.derivatives(grid, order=2)
        if not np.all(d1 > 0):
            problems.append("h' not positive")
        if not np.all(d2 > 0):
            problems.append("h'' not positive")
        if self.family_tag is not FamilyTag.CUSTOM:
            th = np.abs(self.theta(grid))
            if np.any(np.diff(th) > 1e-15 * np.maximum(th[:-1], 1.0)):
                problems.append("|theta| not monotonically decreasing")
        if self.c == 1.0:
            th = self.theta(grid)
            if not np.all(th > 0):
                problems.append("c = 1 requires theta > 0")
            if np.any(np.diff(th) > 0):
                problems.append("c = 1 requires theta decreasing")
        return problems


def j_theta(order: int, t: np.ndarray, dJ: Sequence[np.ndarray]) -> np.ndarray:
    if not 0 <= order <= 3:
        raise ValueError("theta derivatives available up to order 3")
    if order == 0:
        return t * dJ[0]
    return order * dJ[order - 1] + t * dJ[order]


# builtin families -------------------------------------------------------------


def pure_power(c: float, bigC: float = 1.0, validate: bool = True) -> RegVarFunction:
    """h(x) = bigC x^c; ``validate=False`` admits degenerate stubs such as h(x) = x."""
    logC = math.log(bigC)
    return _build(
        c, bigC, 1.0, FamilyTag.PURE_POWER, (), lambda t: Jet.constant(logC, t.c[0]),
        lambda x: DD(np.full_like(x.hi, logC)), f"power:{c!r}",
        value=lambda x: bigC, validate=validate,
    )


def power_log(c: float, a: float) -> RegVarFunction:
    """h(x) = x^c (log x)^a, x0 = e^2, theta(t) = a / log t."""
    return _build(
        c, 2.0**a, math.exp(2.0), FamilyTag.POWER_LOG, (a,),
        lambda t: t.log().log() * a,
        lambda x: dd_log(dd_log(x)) * a,
        f"powerlog:{c!r}:{a!r}",
        value=lambda x: np.log(x) ** a,
    )


def power_exp_log(c: float, a: float, b: float) -> RegVarFunction:
    """h(x) = x^c exp(a (log x)^b), x0 = e, theta(t) = a b (log t)^(b-1)."""
    if not 0 < b < 1:
        raise DomainError("powerexplog needs b in (0, 1)")
    return _build(
        c, math.exp(a), math.e, FamilyTag.POWER_EXP_LOG, (a, b),
        lambda t: (t.log() ** b) * a,
        lambda x: dd_exp(dd_log(dd_log(x)) * b) * a,
        f"powerexplog:{c!r}:{a!r}:{b!r}",
        value=lambda x: np.exp(a * np.log(x) ** b),
    )


def power_iter_log(c: float, k: int) -> RegVarFunction:
    """h(x) = x^c L_k(x) with L_k the k-fold logarithm, x0 = exp^(k)(1)."""
    if k < 1:
        raise DomainError("poweriterlog needs k >= 1")
    x0 = 1.0
    for _ in range(k):
        x0 = math.exp(x0)

    def shape(t: Jet) -> Jet:
        for _ in range(k):
            t = t.log()
        return t.log()

    def shape_dd(x: DD) -> DD:
        for _ in range(k):
            x = dd_log(x)
        return dd_log(x)

    def value(x):
        for _ in range(k):
            x = np.log(x)
        return x

    return _build(c, 1.0, x0, FamilyTag.POWER_ITER_LOG, (k,), shape, shape_dd,
                  f"poweriterlog:{c!r}:{k}", value=value)


def custom(
    c: float,
    bigC: float,
    x0: float,
    theta: Callable[[np.ndarray], np.ndarray],
    integral: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    name: str = "custom",
) -> RegVarFunction:
    """User-supplied perturbation.

    Derivatives of h are taken from a jet of ``log_shape``; a custom theta
    only provides values, so ``integral`` (the map x -> J(x)) should accept
    and return :class:`Jet` objects when derivatives are needed.  Without it
    J is computed by adaptive quadrature and only h itself is available.
    """
    logC = math.log(bigC)
    if integral is None:
        def _quad(x):
            xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
            out = [integrate.quad(lambda t: theta(t) / t, x0, xi, epsrel=1e-12, epsabs=0)[0]
                   for xi in xs]
            return np.asarray(out).reshape(np.shape(x))

        def shape(t: Jet) -> Jet:
            return Jet([_quad(t.c[0]) + logC] + [np.full_like(t.c[0], np.nan)] * 4)
    else:
        def shape(t: Jet) -> Jet:
            return integral(t) + logC
    return _build(c, bigC, x0, FamilyTag.CUSTOM, (), shape, None, name)


def _build(c, bigC, x0, tag, params, shape, shape_dd, name, value=None,
           validate=True) -> RegVarFunction:
    f = RegVarFunction(c=float(c), bigC=float(bigC), x0=float(x0), family_tag=tag,
                       params=tuple(params), log_shape=shape, log_shape_dd=shape_dd,
                       shape_value=value, name=name)
    if not validate:
        return f
    if tag is not FamilyTag.CUSTOM:
        problems = f.check_invariants()
        if problems:
            raise DomainError(f"{name}: " + "; ".join(problems))
    if f.c == 1.0:
        r6, r12 = 1e6 / float(f(1e6)), 1e12 / float(f(1e12))
        if not r12 < r6:
            warnings.warn(f"{name}: x/h(x) not decreasing between 1e6 and 1e12")
    return f


def parse_family(spec: str) -> RegVarFunction:
    """Build a family from strings like ``power:1.5`` or ``powerlog:1.02:1``."""
    parts = spec.strip().split(":")
    kind, args = parts[0].lower(), parts[1:]
    try:
        if kind == "power" and len(args) in (1, 2):
            return pure_power(*map(float, args))
        if kind == "powerlog" and len(args) == 2:
            return power_log(float(args[0]), float(args[1]))
        if kind == "powerexplog" and len(args) == 3:
            return power_exp_log(*map(float, args))
        if kind == "poweriterlog" and len(args) == 2:
            return power_iter_log(float(args[0]), int(args[1]))
    except ValueError as exc:
        if isinstance(exc, DomainError):
            raise
        raise DomainError(f"bad family string {spec!r}: {exc}") from exc
    raise DomainError(f"unknown family string {spec!r}")


# inverse ----------------------------------------------------------------------


@dataclass(frozen=True)
class InverseFunction:
    """Compositional inverse phi of h, with gamma = 1/c."""

    source: RegVarFunction
    tol_rel: float = 1e-13

    @property
    def gamma(self) -> float:
        return 1.0 / self.source.c

    @property
    def y0(self) -> float:
        return float(self.source(self.source.x0))

    def __call__(self, y):
        y = np.asarray(y, dtype=np.float64)
        x = self._solve(y)
        return x if x.ndim else float(x)

    def _solve(self, y: np.ndarray) -> np.ndarray:
        f = self.source
        h0, d0 = f._anchor
        below = y < h0
        yy = np.where(below, h0, y)
        x = self._newton(np.atleast_1d(yy)).reshape(yy.shape)
        if np.any(below):
            x = np.where(below, f.x0 + (y - h0) / d0, x)
        return x

    def _newton(self, y: np.ndarray) -> np.ndarray:
        f = self.source
        lo = np.full_like(y, f.x0)
        x = np.maximum((y / f.bigC) ** (1.0 / f.c), f.x0)
        hi = np.maximum(2.0 * x, f.x0 + 1.0)
        for _ in range(2048):
            short = f._h_core(hi) < y
            if not short.any():
                break
            lo = np.where(short, hi, lo)
            hi = np.where(short, 2.0 * hi, hi)
        x = np.clip(x, lo, hi)
        active = np.ones(y.shape, dtype=bool)
        for _ in range(MAX_NEWTON_ITER):
            idx = np.flatnonzero(active)
            if idx.size == 0:
                break
            xa, ya = x[idx], y[idx]
            d1 = f.derivatives(xa, order=1)[1]
            h = f._h_core(xa)
            r = h - ya
            la = np.where(r < 0, xa, lo[idx])
            ha = np.where(r > 0, xa, hi[idx])
            step = r / d1
            xn = xa - step
            bad = ~((xn > la) & (xn < ha))
            xn = np.where(bad, 0.5 * (la + ha), xn)
            done = (np.abs(r) <= self.tol_rel * ya) & ~bad
            done |= (ha - la) <= 4 * np.spacing(ha)
            x[idx], lo[idx], hi[idx] = xn, la, ha
            active[idx[done]] = False
        else:
            raise ConvergenceError(f"inverse of {f.name} did not converge in {MAX_NEWTON_ITER} iterations")
        return x

    def dd(self, y) -> DD:
        """phi(y) in double-double for y >= h(x0)."""
        y = np.asarray(y)
        if np.issubdtype(y.dtype, np.integer):
            ydd = DD.from_int(y)
        else:
            ydd = DD(y)
        x = DD(self._solve(ydd.to_float()))
        f = self.source
        above = ydd.hi >= f._anchor[0]
        if not np.all(above):
            raise DomainError("double-double inverse only on y >= h(x0)")
        # the float root is accurate to ~1 ulp, so one Newton step reaches ~1e-32
        r = ydd - f.h_dd(x)
        d1 = f.derivatives(x.hi, order=1)[1]
        return x + r.to_float() / d1

    def derivative(self, y, order: int = 1):
        """phi', phi'' or phi''' via inverse-function differentiation."""
        x = self._solve(np.asarray(y, dtype=np.float64))
        _, d1, d2, d3 = self.source.derivatives(x, order=3)
        if order == 1:
            out = 1.0 / d1
        elif order == 2:
            out = -d2 / d1**3
        elif order == 3:
            out = (3.0 * d2**2 - d1 * d3) / d1**5
        else:
            raise ValueError("order must be 1, 2 or 3")
        return out if np.ndim(out) else float(out)

    def ceil(self, y) -> np.ndarray:
        """min{k >= 1 : h(k) >= y}, i.e. the ceiling of phi(y) snapped to h."""
        y = np.asarray(y, dtype=np.float64)
        f = self.source
        k = np.maximum(np.ceil(self._solve(y)), 1.0)
        for _ in range(64):
            down = (k > 1) & (f(np.maximum(k - 1, 1.0)) >= y)
            up = f(k) < y
            if not (down.any() or up.any()):
                break
            k = k - down + up
        return k.astype(np.int64)


def eval_h(f: RegVarFunction, x):
    if np.any(np.asarray(x) < f.x0):
        raise DomainError(f"x below x0 = {f.x0}")
    return f(x)


def eval_phi(inv: InverseFunction, y):
    if np.any(np.asarray(y, dtype=np.float64) < inv.y0):
        raise DomainError(f"y below h(x0) = {inv.y0}")
    return inv(y)


def phi_derivatives(inv: InverseFunction, y, order: int):
    if np.any(np.asarray(y, dtype=np.float64) < inv.y0):
        raise DomainError(f"y below h(x0) = {inv.y0}")
    return inv.derivative(y, order)


# sigma ------------------------------------------------------------------------


class SigmaKind(enum.Enum):
    CONST_ONE = "const_one"
    USER_SUPPLIED = "user_supplied"


@dataclass(frozen=True)
class SigmaFunction:
    kind: SigmaKind
    eval: Callable[[np.ndarray], np.ndarray]

    def __call__(self, x):
        return self.eval(x)


def sigma_for(f: RegVarFunction, user: Optional[Callable] = None) -> SigmaFunction:
    """sigma = 1 for c > 1; for c = 1 it must be supplied by the caller."""
    if f.c > 1.0:
        return SigmaFunction(SigmaKind.CONST_ONE, lambda x: np.ones_like(np.asarray(x, dtype=float)))
    if user is None:
        raise DomainError("c = 1 needs a user-supplied sigma")
    return SigmaFunction(SigmaKind.USER_SUPPLIED, user)


# orbits and membership ----------------------------------------------------------


def orbit(f: RegVarFunction, n_max: int) -> np.ndarray:
    """(floor h(n))_{n <= n_max}."""
    if n_max < 1:
        raise DomainError("n_max must be >= 1")
    return np.floor(f(np.arange(1, n_max + 1, dtype=np.float64))).astype(np.int64)


def enumerate_membership(f: RegVarFunction, n_max: int) -> np.ndarray:
    """Boolean array m with m[n] = [n in N_h] for 0 <= n <= n_max."""
    inv = InverseFunction(f)
    k_max = int(inv.ceil(n_max + 1)) + 1
    vals = orbit(f, k_max)
    vals = vals[(vals >= 1) & (vals <= n_max)]
    out = np.zeros(n_max + 1, dtype=bool)
    out[vals] = True
    return out


def orbit_counts(f: RegVarFunction, n_max: int) -> np.ndarray:
    """counts[N] = |N_h cap [N]| for 0 <= N <= n_max."""
    return np.cumsum(enumerate_membership(f, n_max)).astype(np.int64)


def membership_formula(inv: InverseFunction, n) -> np.ndarray:
    """floor(-phi(n)) - floor(-phi(n+1)) with floors resolved against h."""
    n = np.asarray(n, dtype=np.float64)
    return inv.ceil(n + 1.0) - inv.ceil(n)


def find_threshold(f: RegVarFunction, n_scan: int = 10_000) -> int:
    """Smallest n0 such that the floor identity matches enumeration on [n0, n_scan]."""
    inv = InverseFunction(f)
    n = np.arange(1, n_scan + 1)
    bad = np.flatnonzero(membership_formula(inv, n) != enumerate_membership(f, n_scan)[1:])
    return 1 if bad.size == 0 else int(n[bad[-1]]) + 1


class Membership(NamedTuple):
    value: int
    by_enumeration: bool


def membership_indicator(inv: InverseFunction, n: int, threshold: int) -> Membership:
    """1_{N_h}(n); below ``threshold`` the value comes from enumeration and is flagged."""
    if n < threshold:
        return Membership(int(enumerate_membership(inv.source, max(n, 1))[n]) if n >= 1 else 0, True)
    return Membership(int(membership_formula(inv, n)), False)


# Toeplitz weights -------------------------------------------------------------


@dataclass(frozen=True)
class ToeplitzWeights:
    N: int
    weights: np.ndarray  # weights[n-1] = c~_{N,n}, n in [N-1]
    floor_phi_N: int

    @property
    def row_sum(self) -> float:
        return float(np.sum(self.weights))

    @property
    def nonneg_threshold(self) -> int:
        """Smallest n0 with c~_{N,n} >= 0 for all n >= n0."""
        neg = np.flatnonzero(self.weights < 0)
        return 1 if neg.size == 0 else int(neg[-1]) + 2


def phi_dd_array(inv: InverseFunction, n) -> DD:
    """phi at integer points, double-double where y >= h(x0), float below."""
    n = np.asarray(n, dtype=np.int64)
    ok = n >= inv.y0
    if ok.all():
        return inv.dd(n)
    hi = np.empty(n.shape)
    lo = np.zeros(n.shape)
    if ok.any():
        p = inv.dd(n[ok])
        hi[ok], lo[ok] = p.hi, p.lo
    hi[~ok] = inv(n[~ok].astype(np.float64))
    return DD(hi, lo)


def _phi_first_differences(inv: InverseFunction, n_max: int) -> np.ndarray:
    """s[n] = phi(n+1) - phi(n) for n = 1..n_max (index 0 unused), via double-double."""
    phi = phi_dd_array(inv, np.arange(1, n_max + 2))
    s = (phi[1:] - phi[:-1]).to_float()
    return np.concatenate([[np.nan], s])


def toeplitz_weights(inv: InverseFunction, N: int) -> ToeplitzWeights:
    if N < 3:
        raise DomainError("N must be >= 3")
    s = _phi_first_differences(inv, N + 1)
    n = np.arange(1, N)
    fl = int(inv.dd(N).floor().to_float())
    w = n * (s[1:N] - s[2 : N + 1]) / fl
    return ToeplitzWeights(N=N, weights=w, floor_phi_N=fl)


def toeplitz_row_sums(inv: InverseFunction, Ns: Sequence[int]) -> np.ndarray:
    """sum_n c~_{N,n} for each N, sharing one pass over phi."""
    Ns = np.asarray(Ns, dtype=np.int64)
    s = _phi_first_differences(inv, int(Ns.max()) + 1)
    n = np.arange(1, Ns.max())
    terms = n * (s[1 : Ns.max()] - s[2 : Ns.max() + 1])
    prefix = np.concatenate([[0.0], np.cumsum(terms)])
    floors = inv.dd(Ns).floor().to_float()
    return prefix[Ns - 1] / floors


def phi_ratio(inv: InverseFunction, N: int) -> float:
    """N (phi(N+1) - phi(N)) / floor(phi(N)), which tends to 1/c."""
    p = inv.dd(np.array([N, N + 1]))
    return float(N * (p[1] - p[0]).to_float() / p[0].floor().to_float())


@dataclass
class ToeplitzReport:
    conditions: dict
    trajectory: np.ndarray
    Ns: np.ndarray
    limit: complex
    final_gap: float
    passed: bool

    @property
    def failed(self) -> list[str]:
        return [k for k, v in self.conditions.items() if not v]


def toeplitz_check(
    rows: dict,
    sequence,
    limit: complex,
    probe_k: int = 10,
    tol: float = 0.01,
    abs_bound: float = 10.0,
) -> ToeplitzReport:
    """Numerical check of the three Toeplitz conditions on a grid of N.

    ``rows`` maps N to the array (c_{N,k})_{k=1..N}; ``sequence`` holds
    a_1, a_2, ... (at least max N entries).
    """
    Ns = np.array(sorted(rows))
    a = np.asarray(sequence)
    first, last = rows[Ns[0]], rows[Ns[-1]]
    kk = min(probe_k, len(first), len(last))
    decay = np.abs(last[:kk]) <= np.maximum(tol, 0.5 * np.abs(first[:kk]))
    row_sums = np.array([np.sum(rows[N]) for N in Ns])
    abs_sums = np.array([np.sum(np.abs(rows[N])) for N in Ns])
    cond = {
        "i_pointwise_decay": bool(np.all(decay) and np.max(np.abs(last[:kk])) <= tol),
        "ii_row_sums_to_one": bool(abs(row_sums[-1] - 1.0) <= tol),
        "iii_bounded_abs_sums": bool(np.max(abs_sums) <= abs_bound),
    }
    traj = np.array([np.dot(rows[N], a[: len(rows[N])]) for N in Ns])
    gap = float(abs(traj[-1] - limit))
    return ToeplitzReport(cond, traj, Ns, limit, gap, all(cond.values()) and gap <= tol)
