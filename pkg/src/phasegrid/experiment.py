"""Width sweeps, log-log slope fits, zero crossings and phase-grid scans.

A scan is a Cartesian product of (gamma2, gamma3) cells; each cell trains
networks over a width list and a seed list, records the relative weight
change of both hidden layers plus the condensation index, and fits the
log RD vs log m slope (seed-averaged RD first, then log). Runs are keyed
by (gamma2, gamma3, m, seed), so scans are deterministic and resumable.
"""

from __future__ import annotations

import csv
import math
import threading
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace, asdict

import numpy as np

from . import metrics, model
from .data import Dataset
from .errors import ConfigError, SweepError
from .model import Schedule
from .scaling import HyperConfig, config_from_gammas, effective_lr, kappas

RUN_COLUMNS = ("gamma2", "gamma3", "m", "seed", "rd_w1", "rd_w2", "zeta",
               "final_loss", "steps", "stop_reason")


@dataclass(frozen=True)
class RunRow:
    gamma2: float
    gamma3: float
    m: int
    seed: int
    rd_w1: float
    rd_w2: float
    zeta: float
    final_loss: float
    steps: int
    stop_reason: str

    @property
    def usable(self) -> bool:
        return self.stop_reason in ("converged", "max_steps")


@dataclass
class SweepResult:
    gamma2: float
    gamma3: float
    rows: list

    def usable_rows(self):
        return [r for r in self.rows if r.usable]


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    r_squared: float
    n_points: int


@dataclass
class PhaseCell:
    gamma2: float
    gamma3: float
    s_w1: SlopeFit | None
    s_w2: SlopeFit | None
    zeta_mean: float
    n_seeds: int


# Descending candidate ladder for the normalized learning rate. Probes walk
# down until stable; condensed cells tolerate (and need) very large values
# because their normalized clock runs slowly.
NLR_LADDER = (3e7, 1e7, 3e6, 1e6, 3e5, 1e5, 3e4, 1e4, 3e3, 1000.0,
              300.0, 100.0, 30.0, 10.0, 3.0, 1.0, 0.3, 0.1,
              0.03, 0.01, 3e-3, 1e-3, 3e-4, 1e-4)


def calibrate_normalized_lr(config: HyperConfig, data: Dataset,
                            ladder=NLR_LADDER, probe_steps: int = 200,
                            backoff: float = 3.0, seed: int = 0) -> float:
    """Pick a normalized learning rate for one configuration at one width.

    Walks the ladder downward and returns the first stable entry divided
    by `backoff`. A probe is stable when its loss never rises above 1.05x
    the starting value and ends below it. The procedure is deterministic
    given (config, data, seed), so calibrated scans stay resumable.
    """
    net = model.init_network(config, np.random.default_rng(seed))
    for nlr in ladder:
        probe = Schedule(lr=effective_lr(config, nlr), max_steps=probe_steps,
                         rel_loss_target=1e-12, divergence_cap=1.05)
        record = model.train(net, data, probe)
        if record.stop_reason != "diverged" and record.final_loss < record.losses[0]:
            return nlr / backoff
    raise SweepError(f"no stable learning rate in {ladder} for config {config}")


def run_config(config: HyperConfig, seed: int, data: Dataset, schedule: Schedule,
               gamma2=math.nan, gamma3=math.nan) -> RunRow:
    """Train one (config, seed) pair; schedule.lr is in normalized time."""
    rng = np.random.default_rng(seed)
    net = model.init_network(config, rng)
    raw = replace(schedule, lr=effective_lr(config, schedule.lr))
    record = model.train(net, data, raw)
    if record.stop_reason == "diverged":
        rd1 = rd2 = zeta = math.nan
    else:
        rd1 = metrics.relative_change(record.initial_snapshot.W1, record.final_snapshot.W1)
        rd2 = metrics.relative_change(record.initial_snapshot.W2, record.final_snapshot.W2)
        zeta = metrics.condensation_index(record.final_snapshot.W2)
    return RunRow(gamma2=float(gamma2), gamma3=float(gamma3), m=config.m, seed=seed,
                  rd_w1=rd1, rd_w2=rd2, zeta=zeta,
                  final_loss=record.final_loss, steps=record.steps_taken,
                  stop_reason=record.stop_reason)


def width_sweep(gamma2, gamma3, widths, seeds, data: Dataset, schedule: Schedule,
                alpha_exponent=0, B=1.0, d_out=None, auto_lr=False,
                progress=None) -> SweepResult:
    """Train every (width, seed) pair of one phase cell.

    With auto_lr the normalized learning rate is calibrated once per
    width (seed 0) and shared by all seeds at that width.
    """
    widths = list(widths)
    if len(widths) < 2 or any(b >= a for a, b in zip(widths[1:], widths[:-1])):
        raise ConfigError(f"widths must be strictly increasing with >= 2 entries: {widths}")
    base = config_from_gammas(gamma2, gamma3, alpha_exponent,
                              m=widths[0], d=data.d, d_out=d_out or data.d_out, B=B)
    rows = []
    for m in widths:
        cfg = base.with_width(m)
        sched = schedule
        if auto_lr:
            sched = replace(schedule, lr=calibrate_normalized_lr(cfg, data))
        for seed in seeds:
            row = run_config(cfg, seed, data, sched, gamma2=float(gamma2), gamma3=float(gamma3))
            rows.append(row)
            if progress is not None:
                progress(row)
    result = SweepResult(float(gamma2), float(gamma3), rows)
    if not result.usable_rows():
        raise SweepError(f"all runs diverged for cell ({gamma2}, {gamma3})")
    return result


def seed_averaged_rd(rows, attr: str):
    """Mean RD per width over usable runs, as (m, rd) pairs sorted by m."""
    by_m = {}
    for row in rows:
        if row.usable and math.isfinite(getattr(row, attr)):
            by_m.setdefault(row.m, []).append(getattr(row, attr))
    return sorted((m, float(np.mean(v))) for m, v in by_m.items())


def fit_slope(points) -> SlopeFit:
    """OLS of log(rd) on log(m). Non-positive rd values are dropped."""
    clean = []
    for m, rd in points:
        if rd > 0 and math.isfinite(rd):
            clean.append((m, rd))
        else:
            warnings.warn(f"fit_slope: dropping non-positive rd={rd} at m={m}")
    if len(clean) < 2 or len({m for m, _ in clean}) < 2:
        raise SweepError(f"need >= 2 distinct widths with positive rd, got {clean}")
    x = np.log([m for m, _ in clean])
    y = np.log([rd for _, rd in clean])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid ** 2)) / ss_tot
    return SlopeFit(float(slope), float(intercept), max(0.0, min(1.0, r2)), len(clean))


def sweep_fits(sweep: SweepResult) -> tuple[SlopeFit, SlopeFit]:
    s1 = fit_slope(seed_averaged_rd(sweep.rows, "rd_w1"))
    s2 = fit_slope(seed_averaged_rd(sweep.rows, "rd_w2"))
    return s1, s2


def zero_crossing(series) -> list[float]:
    """Roots of a piecewise-linear interpolant through (gamma, slope) points.

    Exact zeros count as roots; otherwise each adjacent sign change
    contributes gamma_a - S_a * (gamma_b - gamma_a) / (S_b - S_a).
    """
    roots = []
    pts = list(series)
    for (ga, sa), (gb, sb) in zip(pts, pts[1:]):
        if sa == 0.0:
            roots.append(float(ga))
        elif sa * sb < 0.0:
            roots.append(float(ga - sa * (gb - ga) / (sb - sa)))
    if pts and pts[-1][1] == 0.0:
        roots.append(float(pts[-1][0]))
    return roots


def cell_from_rows(gamma2, gamma3, rows) -> PhaseCell:
    """Aggregate one cell. zeta_mean averages seeds at the largest usable width."""
    s1 = s2 = None
    try:
        s1 = fit_slope(seed_averaged_rd(rows, "rd_w1"))
        s2 = fit_slope(seed_averaged_rd(rows, "rd_w2"))
    except SweepError:
        pass
    zetas_by_m = {}
    for row in rows:
        if row.usable and math.isfinite(row.zeta):
            zetas_by_m.setdefault(row.m, []).append(row.zeta)
    if zetas_by_m:
        zeta_mean = float(np.mean(zetas_by_m[max(zetas_by_m)]))
    else:
        zeta_mean = math.nan
    return PhaseCell(float(gamma2), float(gamma3), s1, s2, zeta_mean,
                     n_seeds=len({r.seed for r in rows}))


@dataclass
class ScanResult:
    gamma2_grid: list
    gamma3_grid: list
    cells: dict          # (gamma2, gamma3) -> PhaseCell
    rows: list           # every RunRow
    stars: list          # boundary crossings, list of dicts

    def cell(self, gamma2, gamma3) -> PhaseCell:
        return self.cells[(float(gamma2), float(gamma3))]


def _scan_stars(cells, gamma2_grid, gamma3_grid):
    """Zero crossings of the fitted slopes along both grid axes."""
    stars = []

    def slope(g2, g3, which):
        fit = getattr(cells.get((g2, g3)), which, None)
        return fit.slope if fit is not None else None

    for which in ("s_w1", "s_w2"):
        for g2 in gamma2_grid:
            series = [(g3, slope(g2, g3, which)) for g3 in gamma3_grid]
            series = [(g, s) for g, s in series if s is not None]
            for root in zero_crossing(series):
                stars.append({"metric": which, "axis": "gamma3", "fixed": g2, "crossing": root})
        for g3 in gamma3_grid:
            series = [(g2, slope(g2, g3, which)) for g2 in gamma2_grid]
            series = [(g, s) for g, s in series if s is not None]
            for root in zero_crossing(series):
                stars.append({"metric": which, "axis": "gamma2", "fixed": g3, "crossing": root})
    return stars


def phase_scan(gamma2_grid, gamma3_grid, widths, seeds, data: Dataset,
               schedule: Schedule, alpha_exponent=0, B=1.0, auto_lr=False,
               workers: int = 1, results_csv=None, progress=None) -> ScanResult:
    """Full Cartesian scan over the phase grid.

    Completed runs found in results_csv are not re-executed; new rows are
    appended as they finish, so an interrupted scan resumes cleanly.
    Failed runs are recorded with stop_reason 'diverged'/'error' and
    excluded from fits. With auto_lr the normalized learning rate is
    calibrated once per (cell, width) and cached.
    """
    gamma2_grid = [float(g) for g in gamma2_grid]
    gamma3_grid = [float(g) for g in gamma3_grid]
    if not gamma2_grid or not gamma3_grid:
        raise ConfigError("phase grids must be non-empty")
    widths = list(widths)
    seeds = list(seeds)

    done = {}
    if results_csv is not None:
        for row in read_run_rows(results_csv, missing_ok=True):
            done[(row.gamma2, row.gamma3, row.m, row.seed)] = row

    tasks = [(g2, g3, m, seed)
             for g2 in gamma2_grid for g3 in gamma3_grid
             for m in widths for seed in seeds]
    pending = [t for t in tasks if t not in done]

    lock = threading.Lock()
    rows = dict(done)
    nlr_cache = {}

    def cell_nlr(cfg, key):
        with lock:
            if key in nlr_cache:
                return nlr_cache[key]
        value = calibrate_normalized_lr(cfg, data)
        with lock:
            nlr_cache[key] = value
        return value

    def execute(task):
        g2, g3, m, seed = task
        try:
            cfg = config_from_gammas(g2, g3, alpha_exponent,
                                     m=m, d=data.d, d_out=data.d_out, B=B)
            nlr = cell_nlr(cfg, (g2, g3, m)) if auto_lr else schedule.lr
            row = run_config(cfg, seed, data, Schedule(
                lr=nlr, max_steps=schedule.max_steps,
                rel_loss_target=schedule.rel_loss_target,
                divergence_cap=schedule.divergence_cap), gamma2=g2, gamma3=g3)
        except Exception as exc:  # record and continue scanning
            warnings.warn(f"run {task} failed: {exc}")
            row = RunRow(g2, g3, m, seed, math.nan, math.nan, math.nan,
                         math.nan, 0, "error")
        with lock:
            rows[task] = row
            if results_csv is not None:
                append_run_rows(results_csv, [row])
            if progress is not None:
                progress(row)
        return row

    if workers > 1 and len(pending) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(execute, pending))
    else:
        for task in pending:
            execute(task)

    cells = {}
    for g2 in gamma2_grid:
        for g3 in gamma3_grid:
            cell_rows = [rows[t] for t in tasks if t[0] == g2 and t[1] == g3]
            cells[(g2, g3)] = cell_from_rows(g2, g3, cell_rows)
    stars = _scan_stars(cells, gamma2_grid, gamma3_grid)
    ordered = [rows[t] for t in tasks]
    return ScanResult(gamma2_grid, gamma3_grid, cells, ordered, stars)


@dataclass
class GroupReport:
    gamma2: float
    gamma3: float
    fits: list           # (config, SlopeFit for W1, SlopeFit for W2)
    spread_w1: float
    spread_w2: float


def group_consistency(configs, widths, seeds, data: Dataset,
                      schedule: Schedule, auto_lr=False, progress=None) -> GroupReport:
    """Slope fits for several parameterizations sharing one (gamma2, gamma3).

    With auto_lr the normalized learning rate per width is calibrated on
    the first config and shared by every config in the group, so the
    equivalent parameterizations follow matched normalized trajectories.
    """
    summaries = [kappas(c) for c in configs]
    g2s = {s.gamma2 for s in summaries}
    g3s = {s.gamma3 for s in summaries}
    if len(g2s) != 1 or len(g3s) != 1:
        raise ConfigError(
            f"configs disagree on phase coordinates: gamma2={g2s}, gamma3={g3s}")
    g2, g3 = float(g2s.pop()), float(g3s.pop())
    nlr_by_width = {}
    if auto_lr:
        for m in widths:
            nlr_by_width[m] = calibrate_normalized_lr(configs[0].with_width(m), data)
    fits = []
    for cfg in configs:
        rows = []
        for m in widths:
            at_m = cfg.with_width(m)
            sched = replace(schedule, lr=nlr_by_width[m]) if auto_lr else schedule
            for seed in seeds:
                row = run_config(at_m, seed, data, sched, gamma2=g2, gamma3=g3)
                rows.append(row)
                if progress is not None:
                    progress(row)
        s1 = fit_slope(seed_averaged_rd(rows, "rd_w1"))
        s2 = fit_slope(seed_averaged_rd(rows, "rd_w2"))
        fits.append((cfg, s1, s2))
    w1_slopes = [s1.slope for _, s1, _ in fits]
    w2_slopes = [s2.slope for _, _, s2 in fits]
    return GroupReport(g2, g3, fits,
                       spread_w1=max(w1_slopes) - min(w1_slopes),
                       spread_w2=max(w2_slopes) - min(w2_slopes))


# --- CSV persistence --------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def append_run_rows(path, rows):
    import os
    new_file = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="") as fh:
        writer = csv.writer(fh)
        if new_file:
            writer.writerow(RUN_COLUMNS)
        for row in rows:
            doc = asdict(row)
            writer.writerow([_fmt(doc[c]) for c in RUN_COLUMNS])
        fh.flush()


def read_run_rows(path, missing_ok=False) -> list:
    import os
    if not os.path.exists(path):
        if missing_ok:
            return []
        raise FileNotFoundError(path)
    out = []
    with open(path, newline="") as fh:
        for doc in csv.DictReader(fh):
            out.append(RunRow(
                gamma2=float(doc["gamma2"]), gamma3=float(doc["gamma3"]),
                m=int(doc["m"]), seed=int(doc["seed"]),
                rd_w1=float(doc["rd_w1"]), rd_w2=float(doc["rd_w2"]),
                zeta=float(doc["zeta"]), final_loss=float(doc["final_loss"]),
                steps=int(doc["steps"]), stop_reason=doc["stop_reason"]))
    return out
