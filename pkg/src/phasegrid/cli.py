"""Command-line front end.

Subcommands: preset, train, sweep, phase, condense, report. Configuration
comes from a single JSON document; command-line flags override file
fields and the resolved configuration is echoed into every output
directory as manifest.json before any run starts.

Exit codes: 0 success (divergences are flagged, not fatal), 1 usage or
configuration error, 2 I/O error, 3 all runs failed.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict
from fractions import Fraction

import numpy as np

from . import __version__, experiment, metrics, model, svgplot
from .data import Dataset, SyntheticSpec, load_idx, synthetic_1d
from .errors import ConfigError, PhaseGridError, SweepError
from .model import Schedule
from .scaling import (HyperConfig, PowerLaw, PRESET_NAMES, config_from_gammas,
                      effective_lr, kappas, preset)

DEFAULT_WORKERS = int(os.environ.get("PHASEGRID_WORKERS", "1"))

DEFAULT_SCHEDULE = {"lr": 0.03, "max_steps": 20000,
                    "rel_loss_target": 1e-3, "divergence_cap": 1e4}

# width lists used in the original figures, plus the desk-scale default
WIDTH_PRESETS = {
    "desk": [100, 500, 1000, 2000, 5000],
    "fig4": [100, 1000, 2000, 5000, 10000],
    "fig5": [100, 1000, 2500, 5000, 10000],
}


def _fail(code, message):
    print(f"error: {message}", file=sys.stderr)
    raise SystemExit(code)


def load_config_file(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        _fail(1, f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        _fail(1, f"config file {path} is not valid JSON: {exc}")


def resolve_dataset(doc: dict) -> Dataset:
    spec = doc.get("data", {})
    if "images" in spec:
        return load_idx(spec["images"], spec["labels"], int(spec.get("limit", 100)))
    if "synthetic" in spec:
        return synthetic_1d(SyntheticSpec(tuple(tuple(p) for p in spec["synthetic"])))
    return synthetic_1d()


def resolve_schedule(doc: dict, args=None) -> tuple[Schedule, bool]:
    """Resolved schedule plus whether the lr should be auto-calibrated.

    lr may be a number or the string "auto" (probe-ladder calibration per
    configuration and width); when auto, the Schedule carries a
    placeholder lr of 1.0 that callers must replace.
    """
    fields = dict(DEFAULT_SCHEDULE)
    fields.update(doc.get("schedule", {}))
    if args is not None:
        if getattr(args, "lr", None) is not None:
            fields["lr"] = args.lr
        if getattr(args, "max_steps", None) is not None:
            fields["max_steps"] = args.max_steps
    auto_lr = isinstance(fields["lr"], str) and fields["lr"].strip().lower() == "auto"
    lr = 1.0 if auto_lr else float(fields["lr"])
    return Schedule(lr=lr, max_steps=int(fields["max_steps"]),
                    rel_loss_target=float(fields["rel_loss_target"]),
                    divergence_cap=float(fields["divergence_cap"])), auto_lr


def resolve_hyperconfig(doc: dict, data: Dataset, m: int) -> HyperConfig:
    """Build a HyperConfig from {preset | gammas | explicit laws}."""
    if "preset" in doc and doc["preset"]:
        return preset(doc["preset"], m=m, d=data.d, d_out=data.d_out)
    if "laws" in doc:
        laws = doc["laws"]

        def law(key):
            c, e = laws[key]
            return PowerLaw(float(c), Fraction(str(e)))
        return HyperConfig(law("alpha"), law("beta1"), law("beta2"), law("beta3"),
                           m=m, d=data.d, d_out=data.d_out, B=laws.get("B"))
    if "gamma2" in doc and "gamma3" in doc:
        return config_from_gammas(doc["gamma2"], doc["gamma3"],
                                  doc.get("alpha_exp", 0), m=m, d=data.d,
                                  d_out=data.d_out, B=doc.get("B", 1.0))
    raise ConfigError("config needs one of: preset, laws, or gamma2/gamma3")


def _resolved_echo(cfg: HyperConfig) -> dict:
    summary = kappas(cfg)
    return {
        "laws": cfg.to_dict(),
        "resolved": {"alpha": cfg.alpha, "beta1": cfg.beta1,
                     "beta2": cfg.beta2, "beta3": cfg.beta3},
        "kappas": {"kappa1": summary.kappa1, "kappa2": summary.kappa2,
                   "kappa3": summary.kappa3},
        "gamma2": float(summary.gamma2), "gamma3": float(summary.gamma3),
        "time_factor": summary.time_factor,
    }


def write_manifest(outdir, doc: dict, extra: dict):
    manifest = {
        "version": __version__,
        "config": doc,
        **extra,
    }
    manifest["content_hash"] = model.config_hash(manifest)
    with open(os.path.join(outdir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return manifest


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)


def _write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(f"{v:.17g}" if isinstance(v, float) else str(v)
                              for v in row) + "\n")


# --- subcommands ------------------------------------------------------------

def cmd_preset(args):
    try:
        cfg = preset(args.name, m=args.m, d=args.d)
    except ConfigError as exc:
        _fail(1, str(exc))
    summary = kappas(cfg)
    print(f"{'name':<8} {'alpha':>12} {'beta1':>12} {'beta2':>12} {'beta3':>12} "
          f"{'kappa2':>12} {'kappa3':>12} {'gamma2':>8} {'gamma3':>8}")
    print(f"{args.name:<8} {cfg.alpha:>12.6g} {cfg.beta1:>12.6g} {cfg.beta2:>12.6g} "
          f"{cfg.beta3:>12.6g} {summary.kappa2:>12.6g} {summary.kappa3:>12.6g} "
          f"{str(summary.gamma2):>8} {str(summary.gamma3):>8}")
    return 0


def _prepare_out(args):
    os.makedirs(args.out, exist_ok=True)
    return load_config_file(args.config)


def cmd_train(args):
    doc = _prepare_out(args)
    data = resolve_dataset(doc)
    schedule, auto_lr = resolve_schedule(doc, args)
    m = args.m if args.m is not None else int(doc.get("m", 100))
    seed = args.seed if args.seed is not None else int(doc.get("seed", 0))
    cfg = resolve_hyperconfig(doc, data, m)
    if auto_lr:
        schedule = Schedule(lr=experiment.calibrate_normalized_lr(cfg, data),
                            max_steps=schedule.max_steps,
                            rel_loss_target=schedule.rel_loss_target,
                            divergence_cap=schedule.divergence_cap)
    raw_lr = effective_lr(cfg, schedule.lr)
    write_manifest(args.out, doc, {
        "command": "train", "seed": seed, "m": m,
        "schedule": asdict(schedule), "raw_lr": raw_lr, "auto_lr": auto_lr,
        "resolved_config": _resolved_echo(cfg),
    })

    rng = np.random.default_rng(seed)
    net = model.init_network(cfg, rng)
    record = model.train(net, data, Schedule(
        lr=raw_lr, max_steps=schedule.max_steps,
        rel_loss_target=schedule.rel_loss_target,
        divergence_cap=schedule.divergence_cap))

    _write_csv(os.path.join(args.out, "loss_curve.csv"), ("step", "loss"),
               [(i, float(v)) for i, v in enumerate(record.losses)])
    model.save_checkpoint(os.path.join(args.out, "checkpoint.npz"),
                          record.final_snapshot, seed=seed, config_doc=cfg.to_dict())

    diverged = record.stop_reason == "diverged"
    summary = {
        "steps_taken": record.steps_taken,
        "stop_reason": record.stop_reason,
        "initial_loss": float(record.losses[0]),
        "final_loss": record.final_loss,
        "diverged": diverged,
    }
    if not diverged:
        rm = metrics.regime_metrics(record)
        summary.update(rd_w1=rm.rd_w1, rd_w2=rm.rd_w2, zeta=rm.zeta)
        _write_json(os.path.join(args.out, "metrics.json"),
                    {"rd_w1": rm.rd_w1, "rd_w2": rm.rd_w2, "zeta": rm.zeta})
        scatter_rows = []
        for phase, pts in (("init", rm.w1_scatter_init), ("final", rm.w1_scatter_final)):
            for k, row in enumerate(pts):
                scatter_rows.append([k] + [float(v) for v in row] + [phase])
        comps = [f"c{i}" for i in range(data.d + 1)]
        _write_csv(os.path.join(args.out, "w1_scatter.csv"),
                   ["k"] + comps + ["phase"], scatter_rows)
        svgplot.scatter_svg(os.path.join(args.out, "w1_scatter.svg"),
                            rm.w1_scatter_init[:, :2], rm.w1_scatter_final[:, :2],
                            title=f"W1 rows, m={m}")
        mat = metrics.cosine_matrix(record.final_snapshot.W2)
        _write_cosine_csv(os.path.join(args.out, "cosine_matrix.csv"), mat)
        svgplot.matrix_svg(os.path.join(args.out, "cosine_matrix.svg"), mat,
                           title=f"W2 cosine similarity, m={m}")
    _write_json(os.path.join(args.out, "summary.json"), summary)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def _write_cosine_csv(path, mat):
    with open(path, "w") as fh:
        fh.write(f"m_selected,{mat.shape[0]}\n")
        for row in mat:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def cmd_sweep(args):
    doc = _prepare_out(args)
    data = resolve_dataset(doc)
    schedule, auto_lr = resolve_schedule(doc, args)
    widths = _resolve_widths(doc)
    seeds = list(doc.get("seeds", range(8)))
    g2, g3 = doc["gamma2"], doc["gamma3"]
    write_manifest(args.out, doc, {
        "command": "sweep", "widths": widths, "seeds": list(seeds),
        "schedule": asdict(schedule), "auto_lr": auto_lr,
    })
    try:
        sweep = experiment.width_sweep(
            g2, g3, widths, seeds, data, schedule,
            alpha_exponent=doc.get("alpha_exp", 0), B=doc.get("B", 1.0),
            auto_lr=auto_lr, progress=_progress)
    except SweepError as exc:
        _fail(3, str(exc))
    experiment.append_run_rows(os.path.join(args.out, "runs.csv"), sweep.rows)
    s1, s2 = experiment.sweep_fits(sweep)
    _write_json(os.path.join(args.out, "fits.json"),
                {"gamma2": float(g2), "gamma3": float(g3),
                 "s_w1": asdict(s1), "s_w2": asdict(s2)})
    print(f"S_W1 = {s1.slope:+.4f} (r2={s1.r_squared:.4f})  "
          f"S_W2 = {s2.slope:+.4f} (r2={s2.r_squared:.4f})")
    return 0


def _resolve_widths(doc):
    widths = doc.get("widths", "desk")
    if isinstance(widths, str):
        if widths not in WIDTH_PRESETS:
            raise ConfigError(f"unknown width preset {widths!r}")
        widths = WIDTH_PRESETS[widths]
    return [int(w) for w in widths]


def _progress(row):
    print(f"  ({row.gamma2:g},{row.gamma3:g}) m={row.m} seed={row.seed} "
          f"rd_w1={row.rd_w1:.4g} rd_w2={row.rd_w2:.4g} zeta={row.zeta:.4g} "
          f"steps={row.steps} [{row.stop_reason}]", flush=True)


def cmd_phase(args):
    doc = _prepare_out(args)
    data = resolve_dataset(doc)
    schedule, auto_lr = resolve_schedule(doc, args)
    widths = _resolve_widths(doc)
    seeds = list(doc.get("seeds", range(8)))
    grid = doc.get("grid", {})
    g2_grid = grid.get("gamma2", [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5])
    g3_grid = grid.get("gamma3", [round(0.3 * k, 10) for k in range(11)])
    write_manifest(args.out, doc, {
        "command": "phase", "widths": widths, "seeds": list(seeds),
        "schedule": asdict(schedule), "auto_lr": auto_lr,
        "grid": {"gamma2": g2_grid, "gamma3": g3_grid},
    })
    scan = experiment.phase_scan(
        g2_grid, g3_grid, widths, seeds, data, schedule,
        alpha_exponent=doc.get("alpha_exp", 0), B=doc.get("B", 1.0),
        auto_lr=auto_lr,
        workers=args.workers, results_csv=os.path.join(args.out, "runs.csv"),
        progress=_progress if args.verbose else None)
    write_scan_outputs(args.out, scan)
    n_failed = sum(1 for r in scan.rows if not r.usable)
    print(f"scan complete: {len(scan.rows)} runs, {n_failed} failed/diverged, "
          f"{len(scan.stars)} boundary stars")
    if n_failed == len(scan.rows):
        _fail(3, "every run in the scan failed")
    return 0


def write_scan_outputs(outdir, scan):
    cell_rows = []
    for (g2, g3), cell in sorted(scan.cells.items()):
        cell_rows.append([
            float(g2), float(g3),
            cell.s_w1.slope if cell.s_w1 else math.nan,
            cell.s_w1.r_squared if cell.s_w1 else math.nan,
            cell.s_w2.slope if cell.s_w2 else math.nan,
            cell.s_w2.r_squared if cell.s_w2 else math.nan,
            cell.zeta_mean, cell.n_seeds])
    _write_csv(os.path.join(outdir, "cells.csv"),
               ("gamma2", "gamma3", "s_w1", "s_w1_r2", "s_w2", "s_w2_r2",
                "zeta_mean", "n_seeds"), cell_rows)
    _write_csv(os.path.join(outdir, "stars.csv"),
               ("metric", "axis", "fixed", "crossing"),
               [[s["metric"], s["axis"], float(s["fixed"]), float(s["crossing"])]
                for s in scan.stars])

    g2s, g3s = scan.gamma2_grid, scan.gamma3_grid

    def grid_of(fn):
        return [[fn(scan.cells[(g2, g3)]) for g2 in g2s] for g3 in g3s]

    def slope_or_nan(which):
        return lambda c: getattr(c, which).slope if getattr(c, which) else math.nan

    for which, title in (("s_w1", "S_W1"), ("s_w2", "S_W2")):
        stars = [(s["fixed"], s["crossing"]) if s["axis"] == "gamma3"
                 else (s["crossing"], s["fixed"])
                 for s in scan.stars if s["metric"] == which]
        svgplot.heatmap_svg(os.path.join(outdir, f"heatmap_{which}.svg"),
                            g2s, g3s, grid_of(slope_or_nan(which)),
                            title=f"{title} (gamma2 across, gamma3 up)",
                            diverging=True, stars=stars)
    svgplot.heatmap_svg(os.path.join(outdir, "heatmap_zeta.svg"),
                        g2s, g3s, grid_of(lambda c: c.zeta_mean),
                        title="zeta (gamma2 across, gamma3 up)", diverging=False)


def cmd_condense(args):
    os.makedirs(args.out, exist_ok=True)
    try:
        net, header = model.load_checkpoint(args.checkpoint)
    except PhaseGridError as exc:
        _fail(2, str(exc))
    mat = metrics.cosine_matrix(net.W2)
    zeta = metrics.condensation_index(net.W2)
    _write_json(os.path.join(args.out, "zeta.json"),
                {"zeta": zeta, "m": net.m, "checkpoint_header": header})
    _write_cosine_csv(os.path.join(args.out, "cosine_matrix.csv"), mat)
    svgplot.matrix_svg(os.path.join(args.out, "cosine_matrix.svg"), mat,
                       title=f"W2 cosine similarity, m={net.m}")
    print(f"zeta = {zeta:.6f} (m={net.m})")
    return 0


def cmd_report(args):
    os.makedirs(args.out, exist_ok=True)
    try:
        rows = experiment.read_run_rows(args.runs)
    except FileNotFoundError:
        _fail(2, f"runs file not found: {args.runs}")
    if not rows:
        _fail(3, "runs file contains no rows")
    g2s = sorted({r.gamma2 for r in rows})
    g3s = sorted({r.gamma3 for r in rows})
    cells = {}
    for g2 in g2s:
        for g3 in g3s:
            sub = [r for r in rows if r.gamma2 == g2 and r.gamma3 == g3]
            if sub:
                cells[(g2, g3)] = experiment.cell_from_rows(g2, g3, sub)
    stars = experiment._scan_stars(cells, g2s, g3s)
    scan = experiment.ScanResult(g2s, g3s, cells, rows, stars)
    # fill holes so the heatmap grid is rectangular
    for g2 in g2s:
        for g3 in g3s:
            cells.setdefault((g2, g3), experiment.PhaseCell(
                g2, g3, None, None, math.nan, 0))
    write_scan_outputs(args.out, scan)
    print(f"report written to {args.out} ({len(cells)} cells)")
    return 0


# --- parser -----------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="phasegrid",
        description="Phase-diagram experiments for three-layer ReLU networks")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preset", help="print scale ratios of a named initialization")
    p.add_argument("name", help=f"one of {', '.join(PRESET_NAMES)}")
    p.add_argument("--m", type=int, default=100)
    p.add_argument("--d", type=int, default=1)
    p.set_defaults(fn=cmd_preset)

    for name, fn, desc in (("train", cmd_train, "train one network and emit diagnostics"),
                           ("sweep", cmd_sweep, "width sweep for one phase cell"),
                           ("phase", cmd_phase, "scan the (gamma2, gamma3) grid")):
        p = sub.add_parser(name, help=desc)
        p.add_argument("config", help="JSON configuration file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--lr", default=None,
                       help="normalized learning rate, or 'auto' for probe calibration")
        p.add_argument("--max-steps", type=int, default=None)
        if name == "train":
            p.add_argument("--m", type=int, default=None)
            p.add_argument("--seed", type=int, default=None)
        if name == "phase":
            p.add_argument("--workers", type=int, default=DEFAULT_WORKERS)
            p.add_argument("--verbose", action="store_true")
        p.set_defaults(fn=fn)

    p = sub.add_parser("condense", help="recompute condensation diagnostics from a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_condense)

    p = sub.add_parser("report", help="rebuild summaries and heatmaps from a runs.csv")
    p.add_argument("runs")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        raise SystemExit(1 if exc.code not in (0, None) else 0)
    try:
        return args.fn(args)
    except ConfigError as exc:
        _fail(1, str(exc))
    except SweepError as exc:
        _fail(3, str(exc))
    except OSError as exc:
        _fail(2, str(exc))


if __name__ == "__main__":
    sys.exit(main())
