import math

import mpmath as mp
import numpy as np
import pytest

from bilinear_lab.dynamics import (
    GOLDEN,
    START_BATTERY,
    CircleRotation,
    CyclicShift,
    ObservablePair,
    OrbitWeights,
    TrigPolynomial,
    constant_pair,
    decaying_pair,
    lacunary_times,
    lacunary_trajectory,
    orbit_average_A,
    orbit_average_B,
    orbit_average_E1_E2,
    orbit_average_M_and_E,
    random_trig_pair,
    resonant_pair,
    trajectory,
    transference_form,
)
from bilinear_lab.gowers import FiniteSequence
from bilinear_lab.kernel import build_kernel, param_block, telescoped_sum
from bilinear_lab.regvar import InverseFunction, orbit, pure_power


@pytest.fixture(scope="module")
def setup():
    inv = InverseFunction(pure_power(1.02))
    return inv, OrbitWeights(inv, 20000), CircleRotation(GOLDEN)


def geometric(alpha, N):
    with mp.workdps(30):
        z = mp.expjpi(4 * mp.mpf(alpha))
        return complex(z * (1 - z**N) / (1 - z) / N)


def test_resonant_pair_is_exact(setup):
    inv, ow, rot = setup
    for x in START_BATTERY:
        for N in (1, 2, 17, 1000, 20000):
            a = orbit_average_A(rot, resonant_pair(), x, N)
            b = orbit_average_B(rot, resonant_pair(), x, inv, N, weights=ow)
            assert a == b
            assert abs(a - np.exp(2j * np.pi * 2 * x)) < 1e-14


def test_decaying_pair_geometric_oracle(setup):
    inv, ow, rot = setup
    for N in (10, 999, 20000):
        a = orbit_average_A(rot, decaying_pair(), 0.3, N)
        assert abs(a - geometric(GOLDEN, N)) < 1e-13
        d2 = abs(2 * GOLDEN - round(2 * GOLDEN))
        assert abs(a) <= 1 / (2 * N * d2)


def test_b_is_average_over_orbit_points(setup):
    inv, ow, rot = setup
    N = 5000
    pts = orbit(inv.source, N)
    pts = pts[pts <= N]
    F = lambda n: np.exp(2j * np.pi * 2 * n * GOLDEN)
    want = np.mean(F(np.unique(pts)))
    assert abs(orbit_average_B(rot, decaying_pair(), 0.0, inv, N, weights=ow) - want) < 1e-12


def test_cyclic_shift_closed_form():
    p = 7
    sys = CyclicShift(p)
    for N in (7, 14, 30):
        a = orbit_average_A(sys, decaying_pair(), 3, N)
        z = np.exp(4j * np.pi / p)
        assert abs(a - z * (1 - z**N) / (1 - z) / N) < 1e-12
    assert orbit_average_A(sys, resonant_pair(), 3, 11) == pytest.approx(np.exp(4j * np.pi * 3 / 7))


def test_generic_path_matches_spectral_path(setup):
    inv, ow, rot = setup
    obs = random_trig_pair(np.random.default_rng(2))
    plain = ObservablePair(lambda t: obs.f(t), lambda t: obs.g(t))
    for N in (50, 3000):
        a = orbit_average_A(rot, obs, 0.3, N)
        assert abs(a - orbit_average_A(rot, plain, 0.3, N)) < 1e-10


def test_decomposition_identities(setup):
    inv, ow, rot = setup
    p = param_block(1.02, sigma0_override=0.2)
    obs = random_trig_pair(np.random.default_rng(4))
    for N in (100, 4096, 20000):
        me = orbit_average_M_and_E(rot, obs, GOLDEN, inv, N, weights=ow)
        assert me.residual < 1e-12
        e1, e2 = orbit_average_E1_E2(rot, obs, GOLDEN, inv, p, N, weights=ow)
        assert abs(e1 + e2 - me.E) < 1e-12


def test_constant_pair_main_term(setup):
    inv, ow, rot = setup
    N = 20000
    me = orbit_average_M_and_E(rot, constant_pair(), 0.0, inv, N, weights=ow)
    assert me.B == 1.0
    # M telescopes to (phi(N+1) - phi(1))/|N_h cap [N]|
    assert abs(me.M - (ow.phi_hi[N] - ow.phi_hi[0]) / ow.count(N)) < 1e-12


def test_trajectory_matches_pointwise(setup, tmp_path):
    inv, ow, rot = setup
    p = param_block(1.02, sigma0_override=0.2)
    obs = decaying_pair()
    tr = lacunary_trajectory(rot, obs, 0.3, inv, p, 1.5, 24, weights=ow)
    assert np.array_equal(tr.times, lacunary_times(1.5, 24))
    for i, N in enumerate(tr.times):
        assert abs(tr.a_vals[i] - orbit_average_A(rot, obs, 0.3, int(N))) < 1e-12
        assert abs(tr.e1_vals[i] + tr.e2_vals[i] - tr.e_vals[i]) < 1e-12
    tr.write_csv(tmp_path / "t.csv")
    head = (tmp_path / "t.csv").read_text().splitlines()[0]
    assert head.startswith("k,N,a_re,a_im") and head.endswith("abs_b_minus_a")
    with pytest.raises(ValueError):
        trajectory(rot, obs, 0.3, inv, p, [10, 5], weights=ow)


def test_lacunary_times_and_guards():
    assert lacunary_times(2.0, 4).tolist() == [1, 2, 4, 8, 16]
    assert lacunary_times(1.5, 5).tolist() == [1, 2, 3, 5, 7]
    with pytest.raises(ValueError):
        lacunary_times(2.5, 3)
    with pytest.raises(ValueError):
        TrigPolynomial((1, 2), (0.8, 0.8))


def test_transference_all_ones_equals_telescoping():
    inv = InverseFunction(pure_power(1.02))
    N = 512
    ks = build_kernel(inv, param_block(1.02, sigma0_override=0.2), N)
    ones = FiniteSequence(-2 * N, np.ones(4 * N + 1))
    v = transference_form(ones, ones, ones, ks)
    assert math.isclose(v, abs(telescoped_sum(ks, inv)) / ks.count, rel_tol=1e-9)
    with pytest.raises(ValueError):
        transference_form(FiniteSequence(-3 * N, np.ones(2)), ones, ones, ks)
