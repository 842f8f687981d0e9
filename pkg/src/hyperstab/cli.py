"""Command-line entry point: ``hyperstab <subcommand>``."""
from __future__ import annotations

import argparse
import csv
import sys
import warnings
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, load_toml
from .controller import ControllerSpec, synthesize, validate_gains
from .errors import GainConditionError, StiffnessError
from .gain import GainSchedule
from .sigma import build_sigma_system


def _out(args, default: str) -> Path:
    return Path(args.out if args.out else default)


def _spec_from_args(args) -> tuple[ControllerSpec, bool]:
    if args.config:
        cfg = ExperimentConfig.load(args.config)
        return cfg.spec, cfg.force or args.force
    if args.n is None or args.lam is None:
        raise ConfigError("either --config or both --n and --lambda are required")
    return ControllerSpec(args.n, tuple(args.lam), args.m, GainSchedule()), args.force


def cmd_run(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    from .experiment import run

    result = run(cfg, _out(args, cfg.out), force=args.force)
    for k, v in result.diagnostics.items():
        print(f"{k} = {v}")
    print(f"wrote {result.paths['trajectory'].parent}")
    return 0


def cmd_sweep(args) -> int:
    from .experiment import sweep

    data = load_toml(args.config)
    if "base" not in data or "axes" not in data.get("sweep", {}):
        raise ConfigError(f"{args.config}: sweep files need [base] and [sweep.axes] tables")
    base = data["base"]
    if args.seed is not None:
        base.setdefault("disturbance", {})["seed"] = args.seed
    if args.force:
        base["force"] = True
    out = _out(args, data["sweep"].get("out", "runs/sweep"))
    rows = sweep(base, data["sweep"]["axes"], out, workers=args.workers)
    failed = [r for r in rows if r["status"] != "ok"]
    for r in rows:
        print(f"cell {r['cell']}: {r['status']} gains_ok={r.get('gains_ok', '-')}")
    print(f"wrote {out / 'summary.csv'}")
    return 1 if failed else 0


def _write_rows(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def cmd_verify(args) -> int:
    from . import experiment as ex

    out = Path(args.out) if args.out else None
    if args.target == "lemma1":
        rep = ex.verify_lemma1(ex.lemma1_pairs(seed=args.seed if args.seed is not None else 0))
        for a, alpha, r, worst in rep["rows"]:
            print(f"a={a:.6g} alpha={alpha:.6g} r={r:.10g} max_violation={worst:.3e}")
        if out:
            _write_rows(out / "lemma1.csv", ["a", "alpha", "r", "max_violation"], rep["rows"])
    elif args.target == "bounds":
        rep = ex.verify_bounds(seed=args.seed if args.seed is not None else 7)
        rows = []
        for r in rep["rows"]:
            state = "skipped (inadmissible r)" if r["skipped"] else (
                "dominated" if r["dominated"] else "VIOLATED")
            print(f"x0={np.round(r['x0'], 4).tolist()} d={np.round(r['d_norms'], 4).tolist()} "
                  f"margin_x1={r['margin_x1']:.3e} margin_x2={r['margin_x2']:.3e} {state}")
            rows.append([*r["x0"], *r["d_norms"], r["margin_x1"], r["margin_x2"],
                         int(r["skipped"])])
        print(f"checked={rep['checked']} skipped={rep['skipped']}")
        if out:
            _write_rows(out / "bounds.csv",
                        ["x1_0", "x2_0", "x3_0", "d1", "d2", "d3", "margin_x1", "margin_x2",
                         "skipped"], rows)
    elif args.target == "residuals":
        rep = ex.verify_residuals(seed=args.seed if args.seed is not None else 42)
        for w, r in zip(rep["windows"], rep["residuals"]):
            print(f"window {w}: " + " ".join(f"{v:.6g}" for v in r))
        print("tolerance: " + " ".join(f"{v:.6g}" for v in rep["tolerance"]))
        print(f"monotone={rep['monotone']} within_tolerance={rep['within_tolerance']}")
        if out:
            _write_rows(out / "residuals.csv", ["t_a", "t_b", "x1", "x2_plus_d1", "x3_target"],
                        [[*w, *r] for w, r in zip(rep["windows"], rep["residuals"])])
    else:
        rep = ex.verify_limits(t_probe=args.t_probe)
        blocks = []
        for r in rep["reports"]:
            print(f"n={r.n} h={r.h:g} t={r.t_probe:g} dev_SZS={r.deviation_SZS:.3e} "
                  f"dev_SZL={r.deviation_SZL:.3e}")
            for name, M in (("S_inv_Z_S", r.SZS), ("S_inv_Z_L", r.SZL), ("limit", r.expected)):
                blocks.append(f"# {name} n={r.n} h={r.h:g}")
                blocks.extend(",".join(f"{v:.17g}" for v in row) for row in M)
        text = "\n".join(blocks) + "\n"
        if out:
            out.mkdir(parents=True, exist_ok=True)
            (out / "limits.csv").write_text(text)
        else:
            print(text, end="")
    status = "PASS" if rep["ok"] else "FAIL"
    print(f"verify {args.target}: {status}")
    return 0 if rep["ok"] else 1


def cmd_reproduce(args) -> int:
    from .experiment import reproduce_figures

    res = reproduce_figures(_out(args, "figures"),
                            seed=args.seed if args.seed is not None else 42)
    for p in res["paths"].values():
        print(f"wrote {p}")
    return 0


def cmd_dump_controller(args) -> int:
    spec, force = _spec_from_args(args)
    for line in validate_gains(spec).lines():
        print(f"# {line}")
    print(synthesize(spec, force=force).describe())
    return 0


def cmd_dump_sigma(args) -> int:
    spec, force = _spec_from_args(args)
    print(build_sigma_system(spec, synthesize(spec, force=force)).describe())
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML configuration file")
    common.add_argument("--seed", type=int, help="override the disturbance seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--force", action="store_true",
                        help="proceed despite gain-condition failures")
    common.add_argument("--workers", type=int, default=1, help="parallel sweep workers")

    p = argparse.ArgumentParser(prog="hyperstab", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="simulate one configuration").set_defaults(
        func=cmd_run, needs_config=True)
    sub.add_parser("sweep", parents=[common], help="run a parameter grid").set_defaults(
        func=cmd_sweep, needs_config=True)
    v = sub.add_parser("verify", parents=[common], help="run a verification check")
    v.add_argument("target", choices=["lemma1", "bounds", "residuals", "limits"])
    v.add_argument("--t-probe", type=float, default=1e4, help="probe time for limits")
    v.set_defaults(func=cmd_verify)
    sub.add_parser("reproduce-figs", parents=[common],
                   help="write figure data for the third-order example").set_defaults(
        func=cmd_reproduce)
    for name, func in (("dump-controller", cmd_dump_controller),
                       ("dump-sigma-system", cmd_dump_sigma)):
        d = sub.add_parser(name, parents=[common], help="print symbolic objects")
        d.add_argument("--n", type=int)
        d.add_argument("--lambda", dest="lam", type=float, nargs="+")
        d.add_argument("--m", type=int)
        d.set_defaults(func=func)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "needs_config", False) and not args.config:
        print(f"error: {args.command} requires --config", file=sys.stderr)
        return 2
    try:
        with warnings.catch_warnings():
            if args.force:
                warnings.simplefilter("ignore", UserWarning)
            return args.func(args)
    except (ConfigError, GainConditionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except StiffnessError as exc:
        print(f"simulation aborted: {exc}", file=sys.stderr)
        return 3
