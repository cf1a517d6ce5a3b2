"""Command line entry point: ``bilinear-lab <subcommand> [options]``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .constants import ConstantsTable
from .harness import (
    CONSTANT_IDS,
    DECAY_TARGETS,
    LEMMA_IDS,
    ConfigError,
    ExperimentConfig,
    calibrate,
    load_config,
    run_decay,
    run_verify,
)

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="flat key = value file; flags override it")
    p.add_argument("--family", help="power:c | powerlog:c:a | powerexplog:c:a:b | poweriterlog:c:k")
    p.add_argument("--c", type=float)
    p.add_argument("--sigma0", type=float, help="exploratory sigma0 override")
    p.add_argument("--n-max", type=int, dest="n_max")
    p.add_argument("--lambda", type=float, dest="lam")
    p.add_argument("--k-max", type=int, dest="k_max")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path)
    p.add_argument("--format", choices=["csv", "json"])
    p.add_argument("--constants", type=Path, help="constants table (default: packaged)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bilinear-lab", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)
    for name, helptext in [
        ("orbit", "orbit points floor(h(k)) up to --n-max"),
        ("kernel", "kernel K_N at N = --n-max"),
        ("gowers", "U2/U3 profile of the kernel at N = --n-max"),
        ("expsum", "sum_{n<=N} e(phi(n)) and its van der Corput ratio"),
        ("averages", "lacunary trajectory of the six averages"),
    ]:
        _common(sub.add_parser(name, help=helptext))
    v = sub.add_parser("verify", help="run a registered lemma check")
    v.add_argument("lemma", choices=LEMMA_IDS + ("all",))
    _common(v)
    d = sub.add_parser("decay", help="fit a decay slope")
    d.add_argument("target", choices=DECAY_TARGETS)
    _common(d)
    c = sub.add_parser("calibrate", help="measure and record a constant")
    c.add_argument("constant", choices=CONSTANT_IDS + ("all",))
    _common(c)
    return ap


def _config(args) -> ExperimentConfig:
    keys = ("family", "c", "sigma0", "n_max", "lam", "k_max", "seed", "out", "format", "constants")
    return load_config(args.config, **{k: getattr(args, k) for k in keys})


def _emit(cfg: ExperimentConfig, name: str, payload: dict, rows=None, header=None) -> None:
    if cfg.out is None:
        print(json.dumps(payload, indent=2, sort_keys=True))
        return
    cfg.out.mkdir(parents=True, exist_ok=True)
    if cfg.format == "csv" and rows is not None:
        import csv
        with open(cfg.out / f"{name}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
    else:
        (cfg.out / f"{name}.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _explore(cmd: str, cfg: ExperimentConfig) -> int:
    from .dynamics import CircleRotation, decaying_pair, lacunary_trajectory
    from .expsum import PhaseReducer, exp_sum, vdc_ratio
    from .gowers import FiniteSequence, gowers_profile
    from .kernel import build_kernel, param_block
    from .regvar import InverseFunction, orbit, parse_family, sigma_for

    f = parse_family(cfg.family_or("power:1.02"))
    inv = InverseFunction(f)
    N = cfg.n_max or 2**10
    if cmd == "orbit":
        pts = orbit(f, N)
        _emit(cfg, "orbit", {"family": f.name, "n_max": N, "points": pts.tolist()},
              [[int(p)] for p in pts], ["n"])
    elif cmd == "kernel":
        ks = build_kernel(inv, param_block(f.c, cfg.sigma0), N)
        if cfg.out is not None and cfg.format == "csv":
            cfg.out.mkdir(parents=True, exist_ok=True)
            ks.write_csv(cfg.out / "kernel.csv")
        else:
            _emit(cfg, "kernel", {"N": N, "M": ks.M, "count": ks.count, "floor_phi_N": ks.floor_phi_N,
                                  "imag_residue": ks.imag_residue,
                                  "re": ks.values.real.tolist(), "im": ks.values.imag.tolist()})
    elif cmd == "gowers":
        ks = build_kernel(inv, param_block(f.c, cfg.sigma0), N)
        prof = gowers_profile(FiniteSequence(1, ks.values), range(0, min(N, 64)))
        if cfg.out is None:
            print(prof.to_json())
        else:
            cfg.out.mkdir(parents=True, exist_ok=True)
            (cfg.out / "gowers.json").write_text(prof.to_json() + "\n")
    elif cmd == "expsum":
        red = PhaseReducer(inv)
        s = exp_sum(red, 1, 0.0, (1, N))
        payload = {"N": N, "re": s.real, "im": s.imag}
        if f.c > 1:
            payload["vdc_ratio"] = vdc_ratio(red, sigma_for(f), 1, N)
        _emit(cfg, "expsum", payload)
    elif cmd == "averages":
        p = param_block(f.c, cfg.sigma0)
        k_max = cfg.k_max or 20
        tr = lacunary_trajectory(CircleRotation(cfg.alpha), decaying_pair(), 0.0, inv, p, cfg.lam, k_max)
        if cfg.out is None:
            print(json.dumps({"times": tr.times.tolist(), "abs_b_minus_a": tr.gap.tolist()}, indent=2))
        else:
            cfg.out.mkdir(parents=True, exist_ok=True)
            tr.write_csv(cfg.out / "averages.csv")
    return EXIT_PASS


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = _config(args)
        if args.cmd == "verify":
            ids = LEMMA_IDS if args.lemma == "all" else (args.lemma,)
            table = ConstantsTable.load(cfg.constants)
            ok = True
            for lemma in ids:
                rep = run_verify(lemma, cfg, table)
                print(f"{lemma}: {rep.status}")
                for c in rep.checks:
                    if not c.passed:
                        print(f"  FAIL {c.name}: {c.value!r} vs {c.threshold!r} {c.note}")
                ok &= rep.passed
            return EXIT_PASS if ok else EXIT_FAIL
        if args.cmd == "decay":
            rep = run_decay(args.target, cfg)
            for c in rep.checks:
                print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.value!r} (threshold {c.threshold!r})")
            return EXIT_PASS if rep.passed else EXIT_FAIL
        if args.cmd == "calibrate":
            ids = [k for k in CONSTANT_IDS if k != "ME_cal"] if args.constant == "all" else [args.constant]
            for k in ids:
                for name, v in calibrate(k, cfg).items():
                    print(f"{name} = {v!r}")
            return EXIT_PASS
        return _explore(args.cmd, cfg)
    except (ConfigError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
