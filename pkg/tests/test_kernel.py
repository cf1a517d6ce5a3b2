import csv
import math

import mpmath as mp
import numpy as np
import pytest

from bilinear_lab.dynamics import OrbitWeights
from bilinear_lab.kernel import (
    build_kernel,
    dyadic_slice,
    e2_bound_terms,
    max_level,
    param_block,
    psi,
    telescoped_sum,
)
from bilinear_lab.regvar import InverseFunction, orbit_counts, pure_power
from oracles import phi_mp


def test_param_block_exact_values():
    p = param_block(1.02)
    assert math.isclose(p.eps0, (23 - 22.44) / 40.8)
    assert math.isclose(p.sigma0, 1 - 1 / 1.02 + p.eps0)
    assert math.isclose(p.kappa, (9.18 - 6) / 5)
    lo, hi = p.admissible_window
    assert lo < p.sigma0 < hi
    assert not p.exploratory
    # the exact truncation collapses to M = 1 at desk scale
    assert p.M_of_N(2**20) == 1


def test_param_block_guards():
    with pytest.raises(ValueError):
        param_block(1.5)
    with pytest.raises(ValueError):
        param_block(1.02, sigma0_override=1.2)
    p = param_block(1.5, sigma0_override=0.2)
    assert p.exploratory and 0 < p.kappa <= 1 and p.M_of_N(2**10) == 4


def test_kernel_against_mpmath():
    inv = InverseFunction(pure_power(1.5))
    p = param_block(1.5, sigma0_override=0.5)
    N = 40
    ks = build_kernel(inv, p, N)
    assert ks.M == 6 and ks.count == int(orbit_counts(inv.source, N)[N])
    with mp.workdps(40):
        for n in (1, 7, 23, 40):
            s = mp.mpc(0)
            for m in range(1, ks.M + 1):
                for sgn in (1, -1):
                    mm = sgn * m
                    s += (mp.expjpi(2 * mm * phi_mp(1.5, n + 1)) - mp.expjpi(2 * mm * phi_mp(1.5, n))) / (2j * mp.pi * mm)
            assert abs(ks.values[n - 1] - complex(s) / ks.count) < 1e-13


def test_kernel_real_and_matches_sawtooth_series():
    inv = InverseFunction(pure_power(1.02))
    p = param_block(1.02, sigma0_override=0.2)
    N = 2**12
    ks = build_kernel(inv, p, N)
    assert ks.imag_residue < 1e-15
    ow = OrbitWeights(inv, N)
    assert np.allclose(ks.values.real * ks.count, ow.series_diff(ks.M)[:N], atol=1e-13)
    assert ks.floor_phi_N == math.floor(N ** (1 / 1.02))
    assert np.allclose(ks.L, ks.values * ks.floor_phi_N)


def test_telescoping_and_dyadic_partition():
    inv = InverseFunction(pure_power(1.02))
    ks = build_kernel(inv, param_block(1.02, sigma0_override=0.2), 3000)
    direct = complex(math.fsum(ks.values.real.tolist()), math.fsum(ks.values.imag.tolist()))
    assert abs(direct * ks.count - telescoped_sum(ks, inv)) < 1e-12
    total = sum(dyadic_slice(ks, l).K for l in range(max_level(ks.N) + 1))
    assert np.array_equal(total, ks.values)
    assert dyadic_slice(ks, 11).stop == 3001
    with pytest.raises(ValueError):
        dyadic_slice(ks, max_level(ks.N) + 1)


def test_psi_values():
    inv = InverseFunction(pure_power(1.5))
    n = np.arange(1, 20)
    d = n + 1.0
    want = np.exp(2j * np.pi * 2 * (d ** (2 / 3) - n ** (2 / 3))) - 1
    assert np.allclose(psi(inv, 2, n), want, atol=1e-13)
    with pytest.raises(ValueError):
        psi(inv, 0, n)


def test_e2_terms_decrease():
    inv = InverseFunction(pure_power(1.02))
    p = param_block(1.02)
    t = np.array([e2_bound_terms(inv, p, 2**k) for k in (10, 15, 20)])
    assert np.all(t[:, 0] == 0)  # log M = 0 at M = 1
    assert np.all(np.diff(t[:, 1]) < 0)


def test_csv_export(tmp_path):
    inv = InverseFunction(pure_power(1.5))
    ks = build_kernel(inv, param_block(1.5, sigma0_override=0.3), 50)
    ks.write_csv(tmp_path / "k.csv")
    rows = list(csv.reader(open(tmp_path / "k.csv")))
    assert rows[0] == ["n", "re", "im"] and len(rows) == 51
    assert float(rows[7][1]) == ks.values[6].real
