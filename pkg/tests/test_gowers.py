import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bilinear_lab.gowers import (
    FiniteSequence,
    TriangleWeight,
    autocorrelation,
    difference,
    fourier_at,
    gowers_profile,
    modulation_max,
    per_h3_u2,
    restricted_triple_sum,
    smallgain_check,
    triple_form,
    u2_fourth,
    u3_eighth,
    u3control_check,
    weighted_triple_sum,
    wt11_search,
)
from bilinear_lab.kernel import build_kernel, param_block
from bilinear_lab.regvar import InverseFunction, pure_power
from oracles import restricted_direct, triple_direct, u2_direct, u3_direct

phases = st.lists(st.floats(min_value=0, max_value=1), min_size=1, max_size=12)


def unit(ph):
    return np.exp(2j * np.pi * np.asarray(ph))


@given(phases, st.integers(min_value=-20, max_value=20))
def test_u2_matches_definition(ph, offset):
    v = unit(ph)
    assert math.isclose(u2_fourth(FiniteSequence(offset, v)), u2_direct(offset, v).real, rel_tol=1e-9)


@given(st.lists(st.floats(min_value=0, max_value=1), min_size=1, max_size=8))
@settings(max_examples=25)
def test_u3_matches_definition(ph):
    v = unit(ph)
    assert math.isclose(u3_eighth(FiniteSequence(0, v)), u3_direct(v).real, rel_tol=1e-9)


@pytest.mark.parametrize("N", [1, 2, 5, 17, 64])
def test_indicator_u2_closed_form(N):
    f = FiniteSequence.indicator(N)
    assert math.isclose(u2_fourth(f), N**2 + (N - 1) * N * (2 * N - 1) / 3, rel_tol=1e-12)


def test_two_point_indicator():
    f = FiniteSequence.indicator(2)
    assert math.isclose(u2_fourth(f), 6)
    assert math.isclose(u3_eighth(f), 8)


@given(phases, st.floats(min_value=0, max_value=1), st.floats(min_value=0, max_value=1))
@settings(max_examples=30)
def test_modulation_invariance(ph, a, b):
    f = FiniteSequence(3, unit(ph))
    assert math.isclose(u2_fourth(f.modulate(a)), u2_fourth(f), rel_tol=1e-9)
    x = np.arange(f.offset, f.stop)
    quad = FiniteSequence(f.offset, f.values * np.exp(2j * np.pi * (a * x + b * x**2)))
    assert math.isclose(u3_eighth(quad), u3_eighth(f), rel_tol=1e-9)


def test_difference_and_autocorrelation():
    v = unit([0.1, 0.4, 0.7, 0.2])
    f = FiniteSequence(5, v)
    d = difference(f, 2)
    assert d.offset == 5 and np.allclose(d.values, v[:2] * np.conj(v[2:]))
    dm = difference(f, -1)
    assert dm.offset == 6 and np.allclose(dm.values, v[1:] * np.conj(v[:3]))
    r = autocorrelation(f)
    for h in range(-3, 4):
        want = sum(f.at(x) * np.conj(f.at(x + h)) for x in range(5, 9))
        assert abs(r[h + 3] - want) < 1e-12


def test_per_h3_symmetry():
    rng = np.random.default_rng(3)
    f = FiniteSequence(0, rng.choice([-1.0, 1.0], 30))
    h, vals = per_h3_u2(f)
    assert np.allclose(vals, vals[::-1])
    assert math.isclose(vals[h == 0][0], u2_fourth(difference(f, 0)))
    assert math.isclose(vals[h == 7][0], u2_fourth(difference(f, 7)))


def test_triangle_weight_sums_to_one():
    mu = TriangleWeight(9)
    assert math.isclose(mu(np.arange(-20, 21)).sum(), 1.0)


def test_weighted_and_restricted_agree_inside_support():
    rng = np.random.default_rng(5)
    for N in (3, 6):
        f = FiniteSequence(1, rng.choice([-1.0, 1.0], N + 1))
        w = weighted_triple_sum(f, N)
        assert math.isclose(w, restricted_triple_sum(f, N), rel_tol=1e-10)
        assert math.isclose(w, restricted_direct(1, f.values, N), rel_tol=1e-10)
    with pytest.raises(ValueError):
        weighted_triple_sum(FiniteSequence(-2, np.ones(3)), 4)


def test_restricted_matches_definition_wide_support():
    rng = np.random.default_rng(6)
    v = rng.choice([-1.0, 1.0], 9)
    assert math.isclose(restricted_triple_sum(FiniteSequence(-4, v), 3), restricted_direct(-4, v, 3), rel_tol=1e-10)


def test_triple_form_against_direct():
    rng = np.random.default_rng(7)
    fs = [FiniteSequence(int(rng.integers(-5, 5)), unit(rng.random(int(rng.integers(3, 15))))) for _ in range(3)]
    K = FiniteSequence(1, rng.normal(size=8) + 1j * rng.normal(size=8))
    assert abs(triple_form(*fs, K) - triple_direct(*fs, K)) < 1e-10
    I = FiniteSequence.indicator(4)
    assert triple_form(I, I, I, FiniteSequence(0, [1.0])) == 4


@given(st.floats(min_value=0, max_value=1))
@settings(max_examples=20)
def test_triple_form_modulation_invariance(theta):
    rng = np.random.default_rng(8)
    f0, f1, f2 = (FiniteSequence(0, rng.choice([-1.0, 1.0], 20)) for _ in range(3))
    K = FiniteSequence(1, rng.normal(size=6))
    base = triple_form(f0, f1, f2, K)
    mod = triple_form(f0.modulate(-2 * theta), f1.modulate(theta), f2.modulate(theta), K)
    assert abs(base - mod) < 1e-9


def test_modulation_max_cases():
    N = 32
    x = np.arange(N)
    xi, v = modulation_max(FiniteSequence(0, np.exp(2j * np.pi * 0.3 * x)))
    assert abs(xi - 0.7) < 1e-8 and abs(v - 32) < 1e-9
    xi, v = modulation_max(FiniteSequence(4, [1.0]))
    assert v == 1.0
    with pytest.raises(ValueError):
        modulation_max(FiniteSequence(0, [1.0]), oversample=2)


@given(st.integers(min_value=0, max_value=2**32))
@settings(max_examples=20)
def test_modulation_max_dominates_probes(seed):
    rng = np.random.default_rng(seed)
    f = FiniteSequence(int(rng.integers(-10, 10)), rng.choice([-1.0, 1.0], int(rng.integers(2, 40))))
    _, best = modulation_max(f)
    probes = max(abs(fourier_at(f, t)) for t in rng.random(200))
    assert best >= probes - 1e-9


def test_u3control_ratio_small():
    rng = np.random.default_rng(9)
    N = 16
    fs = [FiniteSequence(1, rng.choice([-1.0, 1.0], N)) for _ in range(4)]
    rep = u3control_check(*fs, N)
    assert 0 < rep.ratio < 1
    wide = FiniteSequence(-N, rng.choice([-1.0, 1.0], 2 * N))
    assert u3control_check(fs[0], fs[1], fs[2], wide, N).rhs > 0
    with pytest.raises(ValueError):
        u3control_check(*fs[:3], FiniteSequence(-3 * N, np.ones(2)), N)


def test_profile_json_and_kernel_estimates():
    inv = InverseFunction(pure_power(1.02))
    p = param_block(1.02, sigma0_override=0.2)
    ks = build_kernel(inv, p, 2**9)
    prof = gowers_profile(FiniteSequence(1, ks.values), range(0, 4))
    data = json.loads(prof.to_json())
    assert [r["h3"] for r in data["per_h3"]] == [0, 1, 2, 3]
    sg = smallgain_check(ks, 5, p.kappa, inv)
    assert sg.lhs > 0 and sg.rhs > 0
    w = wt11_search(ks, 6, p.kappa, inv)
    assert w.h3_checked > 0 and w.max_value > 0
