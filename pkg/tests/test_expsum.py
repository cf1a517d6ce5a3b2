import math
import warnings

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bilinear_lab.expsum import (
    PhaseReducer,
    Precision,
    compensated_sum,
    e,
    exp_sum,
    min_kernel_sum,
    vdc_ratio,
)
from bilinear_lab.regvar import InverseFunction, pure_power, sigma_for
from oracles import phi_mp


def mp_exp_sum(c, m, xi, P, P2):
    with mp.workdps(40):
        s = mp.mpc(0)
        for n in range(P, P2 + 1):
            s += mp.expjpi(2 * (m * phi_mp(c, n) + n * mp.mpf(xi)))
        return complex(s)


@pytest.fixture(scope="module")
def red15():
    return PhaseReducer(InverseFunction(pure_power(1.5)))


@pytest.mark.parametrize("m,xi", [(1, 0.0), (3, 0.0), (-2, 0.25), (1, 0.1)])
def test_against_mpmath(red15, m, xi):
    got = exp_sum(red15, m, xi, (1, 400))
    assert abs(got - mp_exp_sum(1.5, m, xi, 1, 400)) < 1e-10


def test_large_n_window_against_mpmath():
    red = PhaseReducer(InverseFunction(pure_power(1.02)))
    P = 10**12
    got = exp_sum(red, 5, 0.0, (P, P + 200))
    assert abs(got - mp_exp_sum(1.02, 5, 0.0, P, P + 200)) < 1e-9


def test_trivial_sums(red15):
    assert exp_sum(red15, 0, 0.0, (3, 12)) == 10
    # m = 0 reduces to a geometric series in xi
    xi = 0.3
    geo = sum(np.exp(2j * np.pi * n * xi) for n in range(1, 51))
    assert abs(exp_sum(red15, 0, xi, (1, 50)) - geo) < 1e-12
    with pytest.raises(ValueError):
        exp_sum(red15, 1, 0.0, (5, 4))


@given(st.integers(min_value=1, max_value=6), st.floats(min_value=0, max_value=1))
@settings(max_examples=20)
def test_conjugation_symmetry(m, xi):
    red = PhaseReducer(InverseFunction(pure_power(1.5)))
    a = exp_sum(red, m, xi, (1, 300))
    b = exp_sum(red, -m, -xi, (1, 300))
    assert abs(a - np.conj(b)) < 1e-9


def test_precisions_agree_at_moderate_n():
    inv = InverseFunction(pure_power(1.5))
    a = exp_sum(PhaseReducer(inv, Precision.PLAIN64), 2, 0.0, (1, 10**4))
    b = exp_sum(PhaseReducer(inv, Precision.DOUBLE_DOUBLE), 2, 0.0, (1, 10**4))
    assert abs(a - b) < 1e-6


def test_plain64_warns_at_large_n():
    red = PhaseReducer(InverseFunction(pure_power(1.5)), Precision.PLAIN64)
    with pytest.warns(UserWarning):
        red.phases(1, 0.0, 10**9, 10**9 + 5)


def test_compensated_sum_order_independent():
    rng = np.random.default_rng(1)
    z = e(rng.random(5000)) * 10.0 ** rng.integers(-8, 8, 5000)
    assert compensated_sum(z) == compensated_sum(z[::-1])


def test_vdc_and_min_kernel_ratios_are_moderate():
    inv = InverseFunction(pure_power(1.5))
    red = PhaseReducer(inv)
    r = vdc_ratio(red, sigma_for(inv.source), 1, 2**12)
    assert 0 < r < 1
    mk = min_kernel_sum(red, 8, 2**12)
    assert 0 < mk.lhs <= 2**12 and 0 < mk.ratio < 10
    with pytest.raises(ValueError):
        vdc_ratio(red, sigma_for(inv.source), 0, 100)
    with pytest.raises(ValueError):
        min_kernel_sum(red, 1, 100)
