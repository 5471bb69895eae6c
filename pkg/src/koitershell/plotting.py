"""Figure helpers for simulation and ensemble reports (Agg backend, PNG output)."""
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.dpi": 110,
    "savefig.dpi": 110,
    "savefig.bbox": "tight",
    "font.size": 9,
    "axes.linewidth": 0.6,
    "lines.linewidth": 1.2,
    "image.cmap": "viridis",
}


def _save(fig, path):
    fig.savefig(path)
    plt.close(fig)
    return path


def field_panels(fields, titles, grid, path, cmap=None, symmetric=False):
    """One image panel per field, sharing a color scale."""
    with plt.rc_context(STYLE):
        n = len(fields)
        fig, axes = plt.subplots(1, n, figsize=(3.2 * n, 3.0), squeeze=False)
        lo = min(float(np.min(f)) for f in fields)
        hi = max(float(np.max(f)) for f in fields)
        if symmetric:
            hi = max(abs(lo), abs(hi))
            lo = -hi
        y1, y2 = grid.y1, grid.y2
        extent = (y1[0], y1[0] + grid.extents[0], y2[0], y2[0] + grid.extents[1])
        for ax, f, title in zip(axes[0], fields, titles):
            im = ax.imshow(np.asarray(f).T, origin="lower", extent=extent, vmin=lo, vmax=hi,
                           cmap=cmap, aspect="equal")
            ax.set_title(title)
            ax.set_xlabel("$y_1$")
        axes[0][0].set_ylabel("$y_2$")
        fig.colorbar(im, ax=list(axes[0]), shrink=0.8)
        return _save(fig, path)


def diagnostics_figure(result, path):
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3))
        t = result.column("t")
        for name in ("E_kin", "E_mem", "E_flex", "E_total"):
            ax1.plot(t, result.column(name), label=name)
        ax1.set_xlabel("t")
        ax1.set_ylabel("energy")
        ax1.legend(frameon=False)
        ax2.plot(t, result.column("eta_min"), label="min $\\eta$")
        ax2.plot(t, result.column("eta_max"), label="max $\\eta$")
        ax2.plot(t, result.column("grad_inf"), label="$\\|\\nabla\\eta\\|_\\infty$")
        ax2.set_xlabel("t")
        ax2.legend(frameon=False)
        return _save(fig, path)


def simulation_figures(result, grid, output_dir):
    out = [diagnostics_figure(result, os.path.join(output_dir, "diagnostics.png"))]
    if result.snapshots:
        fields = [eta for _, eta in result.snapshots]
        titles = [f"t = {t:.3g}" for t, _ in result.snapshots]
        out.append(field_panels(fields, titles, grid, os.path.join(output_dir, "snapshots.png")))
    return out


def ensemble_figures(stats, grid, output_dir):
    out = []
    times = stats.snapshot_times
    if len(times):
        out.append(field_panels(list(stats.mean_field), [f"mean, t = {t:.3g}" for t in times],
                                grid, os.path.join(output_dir, "ensemble_mean.png")))
        out.append(field_panels(list(stats.var_field), [f"variance, t = {t:.3g}" for t in times],
                                grid, os.path.join(output_dir, "ensemble_var.png"),
                                cmap="magma"))
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3))
        q = stats.energy_quantiles
        if len(times):
            ax1.fill_between(times, q[:, 0], q[:, 4], alpha=0.25, label="5-95%")
            ax1.fill_between(times, q[:, 1], q[:, 3], alpha=0.4, label="25-75%")
            ax1.plot(times, q[:, 2], label="median")
        ax1.set_xlabel("t")
        ax1.set_ylabel("$E_{total}$")
        ax1.legend(frameon=False)
        th = np.asarray(stats.thresholds, dtype=float)
        from .ensemble import exceedance_probability

        est = np.array([exceedance_probability(stats, x) for x in th]).reshape(-1, 3)
        yerr = np.stack([est[:, 0] - est[:, 1], est[:, 2] - est[:, 0]])
        ax2.errorbar(th, est[:, 0], yerr=yerr, fmt="o-", capsize=3)
        ax2.set_xlabel("threshold on sup $\\|\\eta\\|_\\infty$")
        ax2.set_ylabel("exceedance probability")
        out.append(_save(fig, os.path.join(output_dir, "ensemble_summary.png")))
    return out
