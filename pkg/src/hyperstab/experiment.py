"""Batch runs, figure data, parameter sweeps and the verification routines
behind the command-line ``verify`` family."""
from __future__ import annotations

import csv
import itertools
import json
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    lemma1_check,
    lemma1_r,
    steady_state_residuals,
    theorem2_bounds,
)
from .config import ExperimentConfig, third_order_config
from .controller import ControllerSpec, synthesize, validate_gains
from .ct_sim import Trajectory, simulate_ct
from .disturbance import ChannelSignal, DisturbanceSpec, disturbance_eval
from .dt_sim import limit_matrices, make_dt_system, simulate_dt
from .errors import GainConditionError
from . import golden

FIG1_HEADER = ["t", "xi1", "xi2", "target2", "xi3", "target3"]
FIG2_HEADER = ["t", "log10_abs_xi1", "log10_abs_xi2_plus_d1", "log10_abs_xi3_plus_d2_plus_dd1"]
LOG_FLOOR = -16.0


@dataclass
class RunResult:
    trajectory: Trajectory
    diagnostics: dict
    paths: dict = field(default_factory=dict)


def simulate(cfg: ExperimentConfig, force: bool = False) -> Trajectory:
    """Run the configured loop; an explicit ``force`` silences gain warnings."""
    force = force or cfg.force
    with warnings.catch_warnings():
        if force:
            warnings.simplefilter("ignore", UserWarning)
        if cfg.mode == "ct":
            return simulate_ct(cfg.spec, cfg.disturbance, cfg.x0, cfg.t_final,
                               cfg.record_dt, force=force)
        return simulate_dt(cfg.spec, cfg.disturbance, cfg.x0, cfg.t_final, cfg.h,
                           scheme=cfg.scheme, force=force)


def diagnostics(cfg: ExperimentConfig, traj: Trajectory) -> dict:
    """Scalar summaries: gain report, sup norms and tail residuals."""
    report = validate_gains(cfg.spec)
    t_end = float(traj.times[-1])
    tail = (0.8 * t_end, t_end)
    res = steady_state_residuals(traj, cfg.disturbance, tail)
    out = {
        "gains_ok": int(report.ok),
        "sup_norm_x": float(np.max(np.linalg.norm(traj.states, axis=1))),
        "sup_abs_u": float(np.max(np.abs(traj.controls))),
        "final_norm_x": float(np.linalg.norm(traj.states[-1])),
        "tail_t_a": tail[0],
        "tail_t_b": tail[1],
    }
    names = ["tail_abs_x1", "tail_abs_x2_plus_d1", "tail_abs_x3_plus_d2_plus_dd1"]
    for name, v in zip(names, res):
        out[name] = float(v)
    if cfg.mode == "dt":
        out["ct_ref_max_error"] = ct_reference_error(cfg, traj)
    return out


def ct_reference_error(cfg: ExperimentConfig, traj: Trajectory, t_ref: float = 2.0) -> float:
    """Max state gap on ``[0, min(t_ref, t_final)]`` to a fine-step RK4 run."""
    t_end = min(t_ref, float(traj.times[-1]))
    k = int(round(t_end / cfg.h))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        ref = simulate_ct(cfg.spec, cfg.disturbance, cfg.x0, k * cfg.h, cfg.h,
                          h_max=min(1e-4, cfg.h / 10), force=True)
    return float(np.max(np.abs(traj.states[: k + 1] - ref.states)))


def _write_kv_csv(path: Path, data: dict) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["metric", "value"])
        for k, v in data.items():
            w.writerow([k, repr(v) if isinstance(v, float) else v])


def run(cfg: ExperimentConfig, out_dir=None, *, force: bool = False) -> RunResult:
    """Simulate and write ``trajectory.csv``, ``manifest.json``, ``diagnostics.csv``."""
    report = validate_gains(cfg.spec)
    if not report.ok and not (force or cfg.force):
        raise GainConditionError("; ".join(report.errors + report.flags))
    out = Path(out_dir if out_dir is not None else cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    traj = simulate(cfg, force=True)
    diag = diagnostics(cfg, traj)
    paths = {
        "trajectory": out / "trajectory.csv",
        "manifest": out / "manifest.json",
        "diagnostics": out / "diagnostics.csv",
    }
    traj.to_csv(paths["trajectory"])
    _write_kv_csv(paths["diagnostics"], diag)
    manifest = {
        "version": __version__,
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "gain_report": report.lines(),
        "trajectory_meta": traj.meta,
        "files": sorted(p.name for p in paths.values()),
    }
    with open(paths["manifest"], "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return RunResult(traj, diag, paths)


def figure_data(traj: Trajectory, dist: DisturbanceSpec) -> tuple[np.ndarray, np.ndarray]:
    """Rows for the trajectory overlay and the log-residual plot."""
    t = traj.times
    x = traj.states
    d, dd = disturbance_eval(dist, t)
    target2 = -d[:, 0]
    target3 = -d[:, 1] - dd[:, 0]
    fig1 = np.column_stack([t, x[:, 0], x[:, 1], target2, x[:, 2], target3])
    with np.errstate(divide="ignore"):
        logs = np.log10(np.abs(np.column_stack(
            [x[:, 0], x[:, 1] - target2, x[:, 2] - target3])))
    fig2 = np.column_stack([t, np.maximum(logs, LOG_FLOOR)])
    return fig1, fig2


def reproduce_figures(out_dir="figures", *, seed: int = 42, h: float = 1e-3,
                      t_final: float = 10.0, scheme: str = "literal") -> dict:
    """Write ``fig1.csv`` and ``fig2.csv`` for the third-order example."""
    cfg = third_order_config(seed=seed, h=h, t_final=t_final, scheme=scheme)
    traj = simulate(cfg, force=True)
    fig1, fig2 = figure_data(traj, cfg.disturbance)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"fig1": out / "fig1.csv", "fig2": out / "fig2.csv"}
    np.savetxt(paths["fig1"], fig1, delimiter=",", header=",".join(FIG1_HEADER),
               comments="", fmt="%.17g")
    np.savetxt(paths["fig2"], fig2, delimiter=",", header=",".join(FIG2_HEADER),
               comments="", fmt="%.17g")
    return {"paths": paths, "trajectory": traj, "config": cfg}


def third_order_residuals(seed: int = 42, h: float = 1e-3, t_final: float = 10.0,
                       windows=((8.0, 10.0),), scheme: str = "literal") -> np.ndarray:
    """Residual sups of the third-order example, one row per window."""
    cfg = third_order_config(seed=seed, h=h, t_final=t_final, scheme=scheme)
    traj = simulate(cfg, force=True)
    return np.array([steady_state_residuals(traj, cfg.disturbance, w) for w in windows])


def verify_residuals(seed: int = 42) -> dict:
    """Tail residuals of the example against the frozen tolerances."""
    windows = ((4.0, 6.0), (6.0, 8.0), (8.0, 10.0))
    res = third_order_residuals(seed=seed, windows=windows)
    tol = np.array(golden.THIRD_ORDER_TAIL_TOL)
    tail = res[-1]
    monotone = bool(np.all(np.diff(res, axis=0) <= 0))
    return {
        "windows": windows,
        "residuals": res,
        "tolerance": tol,
        "within_tolerance": bool(np.all(tail < tol)),
        "monotone": monotone,
        "ok": bool(np.all(tail < tol)) and monotone,
    }


def lemma1_pairs(count: int = 20, seed: int = 0) -> list[tuple[float, float]]:
    """Random admissible ``(a, alpha)`` with ``1 < a * alpha``.

    ``alpha`` is drawn log-uniformly from [0.1, 10] and ``a`` so that the
    product lies in (1, 50].
    """
    rng = np.random.default_rng(seed)
    pairs = []
    while len(pairs) < count:
        alpha = float(10 ** rng.uniform(-1, 1))
        prod = float(10 ** rng.uniform(np.log10(1.05), np.log10(50)))
        pairs.append((prod / alpha, alpha))
    return pairs


def verify_lemma1(pairs=None, grid=None, tol: float = 1e-9) -> dict:
    pairs = lemma1_pairs() if pairs is None else pairs
    grid = np.linspace(0.0, 50.0, 500) if grid is None else grid
    rows = []
    for a, alpha in pairs:
        rows.append((a, alpha, lemma1_r(a, alpha), lemma1_check(a, alpha, grid)))
    worst = max(r[3] for r in rows)
    return {"rows": rows, "worst": worst, "ok": worst <= tol}


@dataclass
class BoundInstance:
    x0: tuple[float, float, float]
    amplitudes: tuple[float, float, float]
    freqs: tuple[float, float, float]


def theorem2_instances(count: int = 10, seed: int = 7) -> list[BoundInstance]:
    """Random initial states and sinusoidal disturbances with ``|d_i| <= 1``.

    Every other instance is disturbance-free, because with the reference
    gains every constant weighting ``||d||`` lies outside the admissible range
    and such instances can only be reported, not checked.
    """
    rng = np.random.default_rng(seed)
    out = []
    for k in range(count):
        x0 = tuple(float(v) for v in rng.uniform(-1, 1, 3))
        amps = tuple(float(v) for v in rng.uniform(0, 1, 3))
        freqs = tuple(float(v) for v in rng.uniform(0.5, 5, 3))
        if k % 2 == 0:
            amps = (0.0, 0.0, 0.0)
        out.append(BoundInstance(x0, amps, freqs))
    return out


def check_theorem2(inst: BoundInstance, lam=(1.0, 2.0, 4.0), t_final: float = 8.0,
                   record_dt: float = 0.01) -> dict:
    """Simulate one instance (``m = 4``) and compare with the explicit bounds."""
    spec = ControllerSpec(3, lam, 4)
    dist = DisturbanceSpec(
        tuple(ChannelSignal(sines=((a, w, 0.0),)) for a, w in zip(inst.amplitudes, inst.freqs)),
        None,
    )
    bounds = theorem2_bounds(lam)
    d_norms = dist.sup_norms()
    flagged = sorted((float(k[0] / bounds.lam[k[1]]), float(k[2]))
                     for k in bounds.required_inadmissible(d_norms))
    c = synthesize(spec)
    traj = simulate_ct(spec, dist, inst.x0, t_final, record_dt, controller=c)
    s = c.sigma(0.0, np.array(inst.x0))
    b1 = bounds.x1(traj.times, inst.x0[0], s[1], s[2], d_norms)
    b2 = bounds.x2(traj.times, inst.x0[0], s[1], s[2], d_norms)
    m1 = float(np.max(np.abs(traj.states[:, 0]) - b1))
    m2 = float(np.max(np.abs(traj.states[:, 1]) - b2))
    return {
        "x0": inst.x0,
        "d_norms": d_norms.tolist(),
        "skipped": bool(flagged),
        "inadmissible": flagged,
        "margin_x1": m1,
        "margin_x2": m2,
        "dominated": m1 <= 0 and m2 <= 0,
    }


def verify_bounds(count: int = 10, seed: int = 7) -> dict:
    rows = [check_theorem2(inst) for inst in theorem2_instances(count, seed)]
    checked = [r for r in rows if not r["skipped"]]
    return {
        "rows": rows,
        "checked": len(checked),
        "skipped": len(rows) - len(checked),
        "ok": bool(checked) and all(r["dominated"] for r in checked),
    }


def verify_limits(ns=(3, 4), hs=(1e-3, 1e-2), t_probe: float = 1e4,
                  tol: float = 1e-3) -> dict:
    reports = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        for n in ns:
            spec = ControllerSpec(n, tuple([1.0] * n), n)
            for h in hs:
                reports.append(limit_matrices(make_dt_system(spec, h, force=True), t_probe))
    return {
        "reports": reports,
        "tol": tol,
        "ok": all(r.max_deviation < tol for r in reports),
    }


def ct_dt_consistency(spec: ControllerSpec, dist: DisturbanceSpec, x0, hs=(1e-2, 5e-3, 2.5e-3),
                      t_end: float = 2.0, scheme: str = "sigma",
                      ref_h_max: float = 1e-4) -> dict:
    """Max state error of the implicit-Euler loop against a fine RK4 reference."""
    grid = min(hs)
    errors = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        ref = simulate_ct(spec, dist, x0, t_end, grid, h_max=ref_h_max, force=True)
        for h in hs:
            traj = simulate_dt(spec, dist, x0, t_end, h, scheme=scheme, force=True)
            stride = int(round(h / grid))
            errors.append(float(np.max(np.abs(traj.states - ref.states[::stride]))))
    errors = np.array(errors)
    return {"h": list(hs), "errors": errors, "ratios": errors[1:] / errors[:-1]}


def _apply_override(data: dict, key: str, value) -> None:
    node = data
    parts = key.split(".")
    for p in parts[:-1]:
        node = node.setdefault(p, {})
    node[parts[-1]] = value


def _run_cell(args) -> dict:
    idx, base, overrides, out_root = args
    data = json.loads(json.dumps(base))
    for k, v in overrides.items():
        _apply_override(data, k, v)
    row = {"cell": idx, **{k: json.dumps(v) for k, v in overrides.items()}}
    try:
        cfg = ExperimentConfig.from_dict(data)
        report = validate_gains(cfg.spec)
        result = run(cfg, Path(out_root) / f"cell_{idx:03d}", force=True)
        row.update(result.diagnostics)
        row["gains_ok"] = int(report.ok)
        row["gain_flags"] = "; ".join(report.errors + report.flags)
        row["status"] = "ok"
    except Exception as exc:  # a failing cell must not stop the sweep
        row["status"] = f"error: {type(exc).__name__}: {exc}"
    return row


def sweep(base: dict, axes: dict, out_dir, workers: int = 1) -> list[dict]:
    """Run the cartesian product of ``axes`` (dotted config keys) over ``base``.

    Writes ``summary.csv`` with one row per cell; failures are recorded in the
    ``status`` column and do not abort the sweep.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    keys = list(axes)
    cells = [dict(zip(keys, combo)) for combo in itertools.product(*(axes[k] for k in keys))]
    jobs = [(i, base, cell, str(out)) for i, cell in enumerate(cells)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_run_cell, jobs))
    else:
        rows = [_run_cell(j) for j in jobs]
    errs = [r.get("ct_ref_max_error") for r in rows]
    if len(rows) > 1 and all(e is not None for e in errs):
        rows[0]["ct_ref_error_ratio"] = ""
        for r, prev, cur in zip(rows[1:], errs[:-1], errs[1:]):
            r["ct_ref_error_ratio"] = cur / prev
    columns = []
    for r in rows:
        for k in r:
            if k not in columns:
                columns.append(k)
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns)
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return rows
