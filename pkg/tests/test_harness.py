import json

import numpy as np
import pytest

from bilinear_lab.constants import SLACK, ConstantsTable, default_path
from bilinear_lab.harness import (
    CONSTANT_IDS,
    LEMMA_IDS,
    ConfigError,
    ExperimentConfig,
    LemmaReport,
    calibrate,
    fit_slope,
    load_config,
    parse_config_text,
    run_decay,
    run_verify,
    triple_battery,
)


def test_config_parsing(tmp_path):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("family = power:1.5  # comment\nn-max = 5000\nlambda = 1.25\nseed = 7\n")
    cfg = load_config(cfg_file, seed=11)
    assert cfg.family == "power:1.5" and cfg.n_max == 5000 and cfg.lam == 1.25 and cfg.seed == 11
    assert parse_config_text("") == {}
    for bad in ("colour = red", "n_max = lots", "no equals sign"):
        with pytest.raises(ConfigError):
            parse_config_text(bad)


@pytest.mark.parametrize("kw", [{"lam": 2.5}, {"sigma0": 1.0}, {"n_max": 1}, {"format": "xml"},
                                {"family": "cubic:2"}])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        ExperimentConfig(**kw)


def test_family_or():
    assert ExperimentConfig().family_or("power:1.02") == "power:1.02"
    assert ExperimentConfig(c=1.5).family_or("x") == "power:1.5"


def test_constants_round_trip(tmp_path):
    t = ConstantsTable()
    t.set("A", 0.1 + 0.2, "sum")
    t.set("C_threshold[power:1.5]", 3, "scan")
    p = t.save(tmp_path / "c.txt")
    back = ConstantsTable.load(p)
    assert back == t and back.get("A") == 0.1 + 0.2 and isinstance(back.get("C_threshold[power:1.5]"), int)
    with pytest.raises(KeyError):
        back.get("missing")


def test_packaged_constants_present():
    t = ConstantsTable.load(default_path())
    for k in CONSTANT_IDS:
        if k != "C_threshold":
            assert k in t
    assert SLACK == 1.05


def test_fit_slope():
    Ns = np.array([2.0**k for k in range(8, 15)])
    s, r, vac = fit_slope(Ns, 3.0 * Ns**-0.5)
    assert abs(s + 0.5) < 1e-12 and r < 1e-12 and not vac
    assert fit_slope(Ns, np.zeros(7))[2]


def test_report_serialisation(tmp_path):
    rep = LemmaReport("demo")
    rep.check("a", True, np.float64(1.5), 2.0)
    rep.table.append({"N": np.int64(4), "v": 0.25})
    d = json.loads(rep.to_json())
    assert d["schema_version"] == "1.0" and d["status"] == "pass"
    paths = rep.write(tmp_path)
    assert [p.name for p in paths] == ["demo.json", "demo.csv"]
    assert LemmaReport("empty").status == "fail"


def test_unknown_ids():
    with pytest.raises(ConfigError):
        run_verify("nope")
    with pytest.raises(ConfigError):
        run_decay("nope")
    with pytest.raises(ConfigError):
        calibrate("nope")
    assert "wt11est-search" in LEMMA_IDS


def test_battery_deterministic():
    a, b = triple_battery(3, 64), triple_battery(3, 64)
    for k in a:
        for fa, fb in zip(a[k], b[k]):
            assert np.array_equal(fa.values, fb.values)


def test_membership_verify_and_determinism(tmp_path):
    cfg1 = ExperimentConfig(n_max=3000, out=tmp_path / "a")
    cfg2 = ExperimentConfig(n_max=3000, out=tmp_path / "b")
    r1 = run_verify("membership", cfg1)
    run_verify("membership", cfg2)
    assert r1.passed
    for name in ("membership.json", "membership.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_missing_constant_fails(tmp_path):
    rep = run_verify("limitidentity", ExperimentConfig(n_max=5000), ConstantsTable())
    assert not rep.passed
    assert any("T_lim" in f for f in rep.flags)


def test_calibrate_writes_table(tmp_path):
    path = tmp_path / "consts.txt"
    cfg = ExperimentConfig(n_max=5000, constants=path)
    vals = calibrate("T_lim", cfg, date="2024-01-01")
    t = ConstantsTable.load(path)
    assert t.get("T_lim") == vals["T_lim"]
    assert "date=2024-01-01" in t.entries["T_lim"].provenance
    assert run_verify("limitidentity", cfg).passed
