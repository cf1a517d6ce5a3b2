import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bilinear_lab.regvar import (
    DomainError,
    InverseFunction,
    enumerate_membership,
    find_threshold,
    membership_formula,
    orbit,
    orbit_counts,
    parse_family,
    phi_ratio,
    power_log,
    pure_power,
    toeplitz_check,
    toeplitz_row_sums,
    toeplitz_weights,
)
from oracles import phi_mp

FAMILIES = ["power:1.02", "power:1.5", "powerlog:1.02:1", "powerexplog:1.1:1:0.5", "poweriterlog:1.2:2"]


@pytest.mark.parametrize("spec", FAMILIES)
def test_round_trip_and_monotone(spec):
    f = parse_family(spec)
    inv = InverseFunction(f)
    y = np.geomspace(max(inv.y0, 2.0), 1e12, 200)
    x = inv(y)
    assert np.all(np.diff(x) > 0)
    assert np.allclose(f(x), y, rtol=1e-12, atol=0)
    assert np.all(np.diff(f(np.geomspace(f.x0, 1e9, 200))) > 0)


@pytest.mark.parametrize("spec", FAMILIES)
def test_invariants_hold_on_grid(spec):
    assert parse_family(spec).check_invariants(x_max=1e7, n_grid=300) == []


@given(st.integers(min_value=2, max_value=10**15))
def test_pure_power_dd_inverse_matches_mpmath(n):
    inv = InverseFunction(pure_power(1.02))
    got = inv.dd(np.array([n]))
    with mp.workdps(40):
        err = abs(mp.mpf(float(got.hi[0])) + mp.mpf(float(got.lo[0])) - phi_mp(1.02, n))
        assert err <= mp.mpf(1e-25) * phi_mp(1.02, n)


def test_bad_inputs():
    with pytest.raises(DomainError):
        pure_power(2.5)
    with pytest.raises(DomainError):
        parse_family("cubic:3")
    with pytest.raises(DomainError):
        orbit(pure_power(1.5), 0)


def test_orbit_of_pure_power():
    pts = orbit(pure_power(1.5), 10)
    assert pts.tolist() == [math.floor(k**1.5) for k in range(1, 11)]


@pytest.mark.parametrize("spec", ["power:1.02", "power:1.5", "powerlog:1.02:1"])
def test_membership_formula_matches_enumeration(spec):
    f = parse_family(spec)
    inv = InverseFunction(f)
    thr = find_threshold(f, 2000)
    n = np.arange(max(thr, 1), 20001)
    assert np.array_equal(membership_formula(inv, n), enumerate_membership(f, 20000)[n].astype(np.int64))


def test_counts_are_cumulative_membership():
    f = pure_power(1.5)
    m = enumerate_membership(f, 1000)
    assert np.array_equal(orbit_counts(f, 1000), np.cumsum(m))
    # floor(k^1.5) <= 1000 iff k <= 100, all distinct
    assert orbit_counts(f, 1000)[1000] == 100


def test_toeplitz_row_sum_limit_c15():
    inv = InverseFunction(pure_power(1.5))
    Ns = [2**k for k in range(10, 16)]
    gaps = np.abs(toeplitz_row_sums(inv, Ns) - 1.0 / 3.0)
    assert np.all(np.diff(gaps) < 0)
    w = toeplitz_weights(inv, 2**12)
    assert math.isclose(w.row_sum, toeplitz_row_sums(inv, [2**12])[0], rel_tol=1e-12)
    assert abs(phi_ratio(inv, 10**5) - 1 / 1.5) < 0.01


def test_toeplitz_check_on_cesaro_means():
    rows = {N: np.full(N, 1.0 / N) for N in (10, 100, 1000)}
    a = (-1.0) ** np.arange(1, 1001)
    rep = toeplitz_check(rows, a, 0.0)
    assert rep.passed and rep.failed == []
    bad = {N: np.eye(1, N, 0).ravel() for N in (10, 100)}
    assert "i_pointwise_decay" in toeplitz_check(bad, np.ones(100), 1.0).failed


def test_power_log_shape():
    f = power_log(1.02, 1.0)
    x = np.array([10.0, 1e4, 1e8])
    assert np.allclose(f(x), x**1.02 * np.log(x), rtol=1e-12)
