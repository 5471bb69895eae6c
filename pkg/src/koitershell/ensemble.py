"""Monte Carlo ensembles over noise paths, exceedance and growth-rate estimates.

Per-path results are reduced with a fixed pairwise tree (split at the largest
power of two below the leaf count) using the Chan et al. merge of Welford
accumulators.  The reduction order depends only on the path range, so
results are identical for any worker count, and an ensemble of ``2 n``
paths equals the merge of its two halves when ``n`` is a power of two.
"""
import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateWindow, KoiterError
from .gridio import DumpMeta, write_grid_dump
from .solver import DIAG_HEADER, initial_state, simulate_path
from .stochastic import derive_path_seed  # noqa: F401  (re-exported)

QUANTILES = (5, 25, 50, 75, 95)
WILSON_Z = 1.959963984540054
BUCKLING_NOTE = ("stand-in criterion: a path counts as buckled when the sup over recorded "
                 "snapshots of max|eta| exceeds the threshold; no quantitative buckling "
                 "criterion is defined by the model")


@dataclass(frozen=True)
class PathSummary:
    path: int
    max_abs_eta: float
    E_kin: float
    E_mem: float
    E_flex: float
    E_total: float
    drift1: float
    drift2: float

    FIELDS = ("path", "max_abs_eta", "E_kin", "E_mem", "E_flex", "E_total", "drift1", "drift2")

    def row(self):
        return [self.path] + [repr(float(getattr(self, f))) for f in self.FIELDS[1:]]


@dataclass
class EnsembleStats:
    n_paths: int
    snapshot_times: np.ndarray
    mean_field: np.ndarray  # (n_snapshots, n1, n2)
    m2_field: np.ndarray
    snapshot_energies: np.ndarray  # (n_paths, n_snapshots), path order
    thresholds: tuple
    per_path_summaries: list

    @property
    def var_field(self):
        if self.n_paths < 2:
            return np.zeros_like(self.m2_field)
        return self.m2_field / (self.n_paths - 1)

    @property
    def energy_quantiles(self):
        """``(n_snapshots, 5)`` percentiles of E_total at each snapshot."""
        if self.snapshot_energies.size == 0:
            return np.zeros((0, len(QUANTILES)))
        return np.percentile(self.snapshot_energies, QUANTILES, axis=0).T

    def count_exceeding(self, threshold):
        return int(sum(s.max_abs_eta > threshold for s in self.per_path_summaries))

    @property
    def exceedance_counts(self):
        return tuple(self.count_exceeding(x) for x in self.thresholds)


def drift_estimate(eta0, eta, grid):
    """Shift of the pattern, from the phase change of the lowest modes."""
    h0 = grid.fft(eta0)
    h = grid.fft(eta)
    out = []
    for idx, extent in (((1, 0), grid.extents[0]), ((0, 1), grid.extents[1])):
        a, b = h0[idx], h[idx]
        if abs(a) < 1e-14 * max(1.0, np.abs(h0).max()) or b == 0:
            out.append(float("nan"))
        else:
            out.append(float(-np.angle(b / a) * extent / (2 * np.pi)))
    return tuple(out)


def _leaf(config, path):
    try:
        res = simulate_path(config, path)
    except KoiterError as exc:
        exc.path_index = path
        exc.args = (f"path {path}: {exc}",) + exc.args[1:]
        raise
    grid = config.grid.build()
    if res.snapshots:
        fields = np.stack([eta for _, eta in res.snapshots])
    else:
        fields = np.zeros((0,) + grid.shape)
    sup = max((float(np.max(np.abs(f))) for f in fields),
              default=float(np.max(np.abs(res.final.eta))))
    final = dict(zip(DIAG_HEADER, res.diagnostics[-1]))
    d1, d2 = drift_estimate(initial_state(config, grid).eta, res.final.eta, grid)
    summary = PathSummary(path, sup, final["E_kin"], final["E_mem"], final["E_flex"],
                          final["E_total"], d1, d2)
    dt = config.time.dt
    snap_steps = {round(t / dt) for t, _ in res.snapshots}
    energies = np.array([row[4] for row in res.diagnostics if round(row[0] / dt) in snap_steps])
    return summary, fields, energies


def _make_stats(config, leaves, snapshot_times):
    summary, fields, energies = leaves
    return EnsembleStats(1, snapshot_times, fields.astype(float), np.zeros_like(fields),
                         energies[None, :], tuple(config.ensemble.thresholds), [summary])


def merge(a, b):
    """Combine two partial ensembles; ``a`` holds the lower path indices."""
    if not np.array_equal(a.snapshot_times, b.snapshot_times) or a.thresholds != b.thresholds:
        raise ValueError("cannot merge ensembles with different snapshots or thresholds")
    n = a.n_paths + b.n_paths
    delta = b.mean_field - a.mean_field
    mean = a.mean_field + delta * (b.n_paths / n)
    m2 = a.m2_field + b.m2_field + delta**2 * (a.n_paths * b.n_paths / n)
    return EnsembleStats(n, a.snapshot_times, mean, m2,
                         np.concatenate([a.snapshot_energies, b.snapshot_energies]),
                         a.thresholds, a.per_path_summaries + b.per_path_summaries)


def _reduce(items):
    n = len(items)
    if n == 1:
        return items[0]
    split = 1 << ((n - 1).bit_length() - 1)
    return merge(_reduce(items[:split]), _reduce(items[split:]))


def _leaf_task(args):
    return _leaf(*args)


def run_ensemble(config, n_paths=None, first_path=0, workers=None):
    """Run paths ``first_path .. first_path + n_paths - 1`` and reduce them."""
    from .config import validate_config

    validate_config(config)
    n_paths = config.ensemble.n_paths if n_paths is None else int(n_paths)
    workers = config.ensemble.workers if workers is None else int(workers)
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    tasks = [(config, first_path + i) for i in range(n_paths)]
    if workers == 1:
        leaves = [_leaf_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            leaves = list(pool.map(_leaf_task, tasks, chunksize=max(1, n_paths // (4 * workers))))
    dt = config.time.dt
    times = np.array(sorted({round(t / dt) for t in config.time.snapshots}), dtype=float) * dt
    return _reduce([_make_stats(config, leaf, times) for leaf in leaves])


def wilson_interval(count, n, z=WILSON_Z):
    if n < 1:
        raise ValueError("n must be >= 1")
    p = count / n
    denom = 1 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def exceedance_probability(stats, threshold):
    count = stats.count_exceeding(threshold)
    lo, hi = wilson_interval(count, stats.n_paths)
    return count / stats.n_paths, lo, hi


def estimate_growth_rate(series, window):
    """Least-squares slope of ``log ||eta||`` against ``t`` on ``window``.

    ``series`` is a sequence of ``(t, norm)`` pairs; returns ``(slope, r2)``.
    """
    data = np.asarray(series, dtype=float).reshape(-1, 2)
    t, v = data[:, 0], data[:, 1]
    t0, t1 = window
    if t0 < t.min() - 1e-12 or t1 > t.max() + 1e-12 or not t0 < t1:
        raise DegenerateWindow(f"window {window} not inside the series [{t.min()}, {t.max()}]")
    sel = (t >= t0 - 1e-12) & (t <= t1 + 1e-12)
    if sel.sum() < 10:
        raise DegenerateWindow(f"window {window} holds {int(sel.sum())} samples, need >= 10")
    t, v = t[sel], v[sel]
    if not np.all(np.isfinite(v)) or np.any(v <= 0):
        raise DegenerateWindow("norm is zero or non-finite inside the window")
    y = np.log(v)
    A = np.stack([t, np.ones_like(t)], axis=1)
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ np.array([slope, icpt])
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(r2)


def ensemble_report(stats, config):
    from .config import config_hash

    thresholds = []
    for x in stats.thresholds:
        p, lo, hi = exceedance_probability(stats, x)
        thresholds.append({"threshold": x, "count": stats.count_exceeding(x),
                           "p_hat": p, "ci_low": lo, "ci_high": hi})
    q = stats.energy_quantiles
    return {
        "n_paths": stats.n_paths,
        "master_seed": config.master_seed,
        "config_sha256": config_hash(config),
        "snapshot_times": [float(t) for t in stats.snapshot_times],
        "energy_quantiles": {f"p{p}": [float(v) for v in q[:, i]] for i, p in enumerate(QUANTILES)},
        "exceedance": thresholds,
        "buckling_criterion": BUCKLING_NOTE,
        "max_var": float(stats.var_field.max()) if stats.var_field.size else 0.0,
    }


def write_ensemble_outputs(stats, config, output_dir, figures=True):
    """Summary CSV, JSON report, mean/var dumps and figures; returns the file list."""
    os.makedirs(output_dir, exist_ok=True)
    grid = config.grid.build()
    files = []
    p = os.path.join(output_dir, "ensemble_summary.csv")
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PathSummary.FIELDS)
        for s in stats.per_path_summaries:
            w.writerow(s.row())
    files.append(p)
    p = os.path.join(output_dir, "ensemble_report.json")
    with open(p, "w") as fh:
        json.dump(ensemble_report(stats, config), fh, indent=2)
        fh.write("\n")
    files.append(p)
    var = stats.var_field
    for i, t in enumerate(stats.snapshot_times):
        for name, arr in (("mean", stats.mean_field[i]), ("var", var[i])):
            p = os.path.join(output_dir, f"ensemble_{name}_{i:02d}.ksh")
            write_grid_dump(arr, DumpMeta(grid.extents[0], grid.extents[1], float(t)), p)
            files.append(p)
    if figures:
        from . import plotting

        files += plotting.ensemble_figures(stats, grid, output_dir)
    return files
