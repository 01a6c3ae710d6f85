"""Figure rendering for the report path of the CLI.

Every plot function takes result objects from the library and writes a
PNG next to the delimited output.  The Agg backend is forced so the
tools work headless; nothing here ever opens a window.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = [
    "plot_trajectory",
    "plot_sweep",
    "plot_spectrum",
    "plot_grid",
    "plot_comparison",
]

_DPI = 130


def _save(fig, path):
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def plot_trajectory(traj, path):
    """Swing angles, body angular rate, actuation and energy vs time."""
    fig, axes = plt.subplots(4, 1, sharex=True, figsize=(8, 9))
    t = traj.t

    ax = axes[0]
    if traj.q.shape[1] == 2:
        ax.plot(t, np.degrees(traj.q[:, 0]), label="q1")
        ax.plot(t, np.degrees(traj.q[:, 1]), label="q2")
    else:
        labels = ["phi1x", "phi1y", "phi2x", "phi2y", "psi"]
        for j, lab in enumerate(labels):
            ax.plot(t, np.degrees(traj.q[:, j]), label=lab)
    ax.set_ylabel("angle [deg]")
    ax.legend(loc="upper right", fontsize=8)

    ax = axes[1]
    wb = np.atleast_2d(traj.wb.T).T
    for j in range(wb.shape[1]):
        ax.plot(t, wb[:, j], label=f"wb[{j}]" if wb.shape[1] > 1 else "wb")
    wlp = np.atleast_2d(traj.wb_lp.T).T
    for j in range(wlp.shape[1]):
        ax.plot(t, wlp[:, j], "--", alpha=0.7,
                label=f"wb_lp[{j}]" if wlp.shape[1] > 1 else "wb_lp")
    ax.set_ylabel("rate [rad/s]")
    ax.legend(loc="upper right", fontsize=8)

    ax = axes[2]
    F = np.atleast_2d(traj.F.T).T
    T = np.atleast_2d(traj.T.T).T
    for j in range(F.shape[1]):
        ax.plot(t, F[:, j], label=f"F[{j}]" if F.shape[1] > 1 else "F")
    for j in range(T.shape[1]):
        ax.plot(t, T[:, j], "--", label=f"T[{j}]" if T.shape[1] > 1 else "T")
    ax.set_ylabel("wrench [N, Nm]")
    ax.legend(loc="upper right", fontsize=8)

    ax = axes[3]
    ax.plot(t, traj.energy, color="tab:red")
    ax.set_ylabel("energy [J]")
    ax.set_xlabel("time [s]")

    fig.suptitle("Simulated response")
    fig.tight_layout()
    return _save(fig, path)


def plot_sweep(results, path):
    """Gains and certified cost against the control-weight scale."""
    sigma = [r.sigma for r in results]
    ok = [r.feasible for r in results]
    fig, axes = plt.subplots(2, 1, sharex=True, figsize=(7, 6))

    ax = axes[0]
    kv = [r.F[0, 0] if r.feasible else np.nan for r in results]
    kw = [r.F[1, 1] if r.feasible else np.nan for r in results]
    ax.plot(sigma, kv, "o-", label="velocity gain")
    ax.plot(sigma, kw, "s-", label="rate gain")
    ax.set_ylabel("gain")
    ax.set_xscale("log")
    ax.legend()

    ax = axes[1]
    cost = [r.cost if r.feasible else np.nan for r in results]
    ax.plot(sigma, cost, "o-", color="tab:green")
    ax.set_ylabel("certified cost bound")
    ax.set_xlabel("control weight scale")
    ax.set_xscale("log")
    ax.set_yscale("log")
    if not all(ok):
        ax.set_title(f"{sum(ok)}/{len(ok)} feasible", fontsize=9)

    fig.suptitle("Gain synthesis sweep")
    fig.tight_layout()
    return _save(fig, path)


def plot_spectrum(spectrum, path):
    """Power spectral density with detected peaks marked."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.semilogy(spectrum.frequencies, np.maximum(spectrum.power, 1e-300))
    for f, p in spectrum.peaks:
        ax.axvline(f, color="tab:orange", alpha=0.5, linestyle="--")
        ax.annotate(f"{f:.3f} Hz", (f, p), textcoords="offset points",
                    xytext=(4, 4), fontsize=8)
    ax.set_xlabel("frequency [Hz]")
    ax.set_ylabel("power")
    ax.set_title("Oscillation spectrum")
    positive = spectrum.power > 0
    if positive.any():
        top = spectrum.power[positive].max()
        ax.set_ylim(bottom=max(top * 1e-10, spectrum.power[positive].min()))
    upper = [f for f, _ in spectrum.peaks]
    if upper:
        ax.set_xlim(0, max(upper) * 3)
    fig.tight_layout()
    return _save(fig, path)


def plot_grid(report, path):
    """Settling time across the operating grid, one panel per rate."""
    spec = report.spec
    rates = list(spec.rates)
    fig, axes = plt.subplots(1, len(rates), figsize=(4.2 * len(rates), 4),
                             sharey=True, squeeze=False)
    l1s = list(spec.l1_values)
    angs = list(spec.angles_deg)
    settle = {(c.l1, c.angle_deg, c.rate): c for c in report.cells}
    vmax = max((c.settling_s for c in report.cells if c.converged),
               default=1.0)

    def _span(v):  # keep the extent non-degenerate for single-value axes
        lo, hi = min(v), max(v)
        return (lo - 0.5, hi + 0.5) if lo == hi else (lo, hi)
    for k, rate in enumerate(rates):
        ax = axes[0][k]
        img = np.full((len(angs), len(l1s)), np.nan)
        for i, a in enumerate(angs):
            for j, l1 in enumerate(l1s):
                cell = settle.get((l1, a, rate))
                if cell is not None and cell.converged:
                    img[i, j] = cell.settling_s
        pcm = ax.imshow(img, origin="lower", aspect="auto",
                        extent=_span(l1s) + _span(angs),
                        vmin=0.0, vmax=vmax, cmap="viridis")
        ax.set_title(f"rate = {rate} rad/s", fontsize=9)
        ax.set_xlabel("upper link length [m]")
        if k == 0:
            ax.set_ylabel("initial tilt [deg]")
    fig.colorbar(pcm, ax=[axes[0][k] for k in range(len(rates))],
                 label="settling time [s]")
    fig.suptitle("Stability grid"
                 + ("" if report.all_converged else "  (non-converged cells blank)"))
    return _save(fig, path)


def plot_comparison(bundle, path, *, signal="energy"):
    """Overlay one signal from each run of a comparison bundle."""
    fig, ax = plt.subplots(figsize=(7.5, 4.5))
    for label in bundle.labels:
        traj = bundle.run(label)
        cols = {name: i for i, name in enumerate(traj.columns)}
        y = traj.as_table()[:, cols[signal]]
        ax.plot(traj.t, y, label=label)
    ax.set_xlabel("time [s]")
    ax.set_ylabel(signal)
    ax.set_title("Controller comparison")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)
