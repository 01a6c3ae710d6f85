"""Command-line front end.

Six subcommands tie scenario files to the library: ``simulate``,
``synthesize``, ``sweep``, ``spectrum``, ``grid`` and ``compare``.
Each run writes CSV artifacts, rendered PNG figures and a
``summary.txt`` with the key metrics into the output directory, and
prints the same summary unless ``--quiet`` is given.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 I/O error.
"""

from __future__ import annotations

import argparse
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from . import analysis
from .control import DampingGains
from .dynamics import linearize, mode_frequencies
from .scenario import (
    ConfigError,
    Scenario,
    _build_controller,
    _build_gains,
    _build_tau,
    _check_keys,
    _number,
    load_scenario,
    scenario_from_dict,
)
from .simulate import simulate, write_csv
from .spatial import SingularConfigurationError
from .synthesis import (
    DEFAULT_SIGMA,
    SWEEP_CSV_COLUMNS,
    LqrWeights,
    SynthesisError,
    certify,
    default_sigma_grid,
    sigma_sweep,
    solve_output_feedback_lqr,
    sweep_table,
)

__all__ = ["build_parser", "main"]

_BUNDLED = {
    "simulate": "default.json",
    "synthesize": "gain_tuning.json",
    "sweep": "gain_sweep.json",
    "spectrum": "free_swing_spectrum.json",
    "grid": "stability_grid.json",
    "compare": "controller_compare.json",
}

_EXTRA_BLOCKS = {
    "simulate": (),
    "synthesize": ("synthesis",),
    "sweep": ("synthesis",),
    "spectrum": ("spectrum",),
    "grid": ("grid",),
    "compare": ("compare",),
}


def bundled_config_path(name: str) -> Path:
    """Path of a configuration file shipped inside the package."""
    return Path(str(resources.files("swaydamp").joinpath("configs", name)))


# ---------------------------------------------------------------------------
# Argument parsing.
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swaydamp",
        description="Simulation and gain-synthesis tools for damping the "
                    "sway of a cable-suspended platform.",
        epilog="Common flags: --config <path>, --out <dir>, --seed <u64>, "
               "--quiet. Synthesis flags: --sigma <f>, --max-iter, --tol, "
               "--xi-init {identity,riccati}. Exit codes: 0 success, "
               "2 config error, 3 numerical failure, 4 I/O error.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, default=None,
                       help="scenario file (default: the bundled one)")
        p.add_argument("--out", type=Path, default=Path("."),
                       help="output directory (default: current directory)")
        p.add_argument("--seed", type=int, default=None, metavar="U64",
                       help="override the noise seed from the sim block")
        p.add_argument("--quiet", action="store_true",
                       help="suppress the summary on stdout")

    def synthesis_opts(p, with_sigma):
        if with_sigma:
            p.add_argument("--sigma", type=float, default=None, metavar="F",
                           help="input-penalty scale (overrides the config)")
        p.add_argument("--max-iter", type=int, default=None, metavar="N",
                       help="re-linearization iteration cap")
        p.add_argument("--tol", type=float, default=None, metavar="F",
                       help="relative trace-convergence tolerance")
        p.add_argument("--xi-init", choices=("identity", "riccati"),
                       default=None,
                       help="first convexification point")

    p = sub.add_parser("simulate",
                       help="run one scenario and write the trajectory")
    common(p)

    p = sub.add_parser("synthesize",
                       help="tune damping gains for one weight setting")
    common(p)
    synthesis_opts(p, with_sigma=True)

    p = sub.add_parser("sweep",
                       help="re-tune gains along an input-penalty grid")
    common(p)
    synthesis_opts(p, with_sigma=False)

    p = sub.add_parser("spectrum",
                       help="power spectrum of a simulated signal")
    common(p)

    p = sub.add_parser("grid",
                       help="closed-loop convergence across an operating grid")
    common(p)

    p = sub.add_parser("compare",
                       help="run several controllers on one scenario")
    common(p)

    return parser


def _load(args) -> Scenario:
    blocks = _EXTRA_BLOCKS[args.command]
    path = args.config
    if path is None:
        path = bundled_config_path(_BUNDLED[args.command])
    scenario = load_scenario(path, extra_blocks=blocks)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed", "must be a non-negative integer")
        scenario.seed = args.seed
    return scenario


def _emit(args, lines) -> None:
    text = "\n".join(lines) + "\n"
    (args.out / "summary.txt").write_text(text)
    if not args.quiet:
        sys.stdout.write(text)


def _fmt(x: float) -> str:
    return f"{x:.6g}"


# ---------------------------------------------------------------------------
# Subcommands.
# ---------------------------------------------------------------------------

def _cmd_simulate(args) -> int:
    from . import plots

    scn = _load(args)
    traj = simulate(scn.params, scn.initial, scn.make_controller(),
                    disturbance=scn.disturbance, **_sim_kw(scn))
    write_csv(args.out / "trajectory.csv", traj.columns, traj.as_table())
    plots.plot_trajectory(traj, args.out / "trajectory.png")

    if scn.model == "planar":
        tilt = traj.q[:, 0] + traj.q[:, 1]  # platform angle from vertical
        rate_mag = np.abs(traj.wb)
    else:
        tilt = traj.q[:, :4]
        rate_mag = np.linalg.norm(traj.wb, axis=1)
    peak_deg = float(np.degrees(np.max(np.abs(tilt))))
    settle = analysis.settling_time_from_samples(traj.t, rate_mag)
    lines = [
        f"scenario: {scn.model}, duration {_fmt(scn.duration)} s, "
        f"dt {_fmt(scn.dt)} s, control {_fmt(scn.control_rate)} Hz, "
        f"seed {scn.seed}",
        f"peak swing: {peak_deg:.3f} deg",
        f"peak force: {_fmt(np.max(np.abs(traj.F)))} N, "
        f"peak torque: {_fmt(np.max(np.abs(traj.T)))} Nm",
        "settling time (5% of peak body rate): "
        + (f"{settle:.3f} s" if settle is not None else "not settled"),
        f"final energy: {_fmt(traj.energy[-1])} J",
        "wrote trajectory.csv, trajectory.png",
    ]
    _emit(args, lines)
    return 0


_SYNTH_KEYS = ("sigma", "sigma_grid", "tau", "structure", "xi_init",
               "max_iter", "tol")


def _synth_options(scn: Scenario, args):
    """Merge the config's synthesis block with command-line overrides."""
    block = scn.extras.get("synthesis", {})
    _check_keys(block, _SYNTH_KEYS, "synthesis")

    sigma = _number(block, "sigma", "synthesis", DEFAULT_SIGMA,
                    minimum=0.0, strict_min=True)
    if getattr(args, "sigma", None) is not None:
        if args.sigma <= 0.0:
            raise ConfigError("--sigma", "must be > 0")
        sigma = args.sigma

    grid = None
    if "sigma_grid" in block:
        raw = block["sigma_grid"]
        if isinstance(raw, dict):
            _check_keys(raw, ("start", "stop", "points"),
                        "synthesis.sigma_grid")
            start = _number(raw, "start", "synthesis.sigma_grid",
                            minimum=0.0, strict_min=True)
            stop = _number(raw, "stop", "synthesis.sigma_grid",
                           minimum=0.0, strict_min=True)
            points = raw.get("points", 20)
            if (not isinstance(points, int) or isinstance(points, bool)
                    or points < 2):
                raise ConfigError("synthesis.sigma_grid.points",
                                  "must be an integer >= 2")
            if stop <= start:
                raise ConfigError("synthesis.sigma_grid.stop",
                                  "must be > start")
            grid = np.geomspace(start, stop, points)
        elif isinstance(raw, list) and raw:
            grid = np.array([_number({"v": v}, "v",
                                     f"synthesis.sigma_grid[{i}]",
                                     minimum=0.0, strict_min=True)
                             for i, v in enumerate(raw)])
        else:
            raise ConfigError("synthesis.sigma_grid",
                              "must be a list or a start/stop/points object")
    if grid is None:
        grid = default_sigma_grid()

    structure = block.get("structure", "diag")
    if structure not in ("diag", "dense"):
        raise ConfigError("synthesis.structure", 'must be "diag" or "dense"')

    xi_init = block.get("xi_init", "identity")
    if xi_init not in ("identity", "riccati"):
        raise ConfigError("synthesis.xi_init",
                          'must be "identity" or "riccati"')
    if getattr(args, "xi_init", None) is not None:
        xi_init = args.xi_init

    max_iter = block.get("max_iter", 50)
    if not isinstance(max_iter, int) or isinstance(max_iter, bool) \
            or max_iter < 1:
        raise ConfigError("synthesis.max_iter", "must be a positive integer")
    if getattr(args, "max_iter", None) is not None:
        if args.max_iter < 1:
            raise ConfigError("--max-iter", "must be a positive integer")
        max_iter = args.max_iter

    tol = _number(block, "tol", "synthesis", 1e-6, minimum=0.0,
                  strict_min=True)
    if getattr(args, "tol", None) is not None:
        if args.tol <= 0.0:
            raise ConfigError("--tol", "must be > 0")
        tol = args.tol

    tau = _build_tau(block.get("tau", "auto"), scn.params, "synthesis.tau")
    model = linearize(scn.params, tau)
    return model, sigma, grid, structure, xi_init, max_iter, tol


def _cmd_synthesize(args) -> int:
    from . import plots

    scn = _load(args)
    model, sigma, _, structure, xi_init, max_iter, tol = \
        _synth_options(scn, args)
    res = solve_output_feedback_lqr(model, LqrWeights.from_sigma(sigma),
                                    structure=structure, xi_init=xi_init,
                                    max_iter=max_iter, tol=tol, sigma=sigma)
    write_csv(args.out / "gains.csv", SWEEP_CSV_COLUMNS, sweep_table([res]))

    lines = [f"sigma: {_fmt(sigma)}  structure: {structure}  "
             f"xi-init: {xi_init}"]
    if res.feasible:
        cert = certify(model, res.F, LqrWeights.from_sigma(sigma), P=res.P)
        lines += [
            f"Kv = {res.F[0, 0]:.4f}" if structure == "diag"
            else f"F = {np.array2string(res.F, precision=4)}",
        ]
        if structure == "diag":
            lines += [f"Kw = {res.F[1, 1]:.4f}"]
        lines += [
            f"trace(P) = {res.cost:.6f} (certified upper bound)",
            f"achieved cost = {cert.lyapunov_cost:.6f}",
            f"hurwitz: {cert.hurwitz}",
            f"iterations: {res.iterations}, "
            f"max eig of the certificate block: {res.max_eig_M:.3e}",
        ]
    else:
        lines += [f"infeasible: {res.message}"]
    lines += ["wrote gains.csv, synthesis.png"]
    plots.plot_sweep([res], args.out / "synthesis.png")
    _emit(args, lines)
    return 0 if res.feasible else 3


def _cmd_sweep(args) -> int:
    from . import plots

    scn = _load(args)
    model, _, grid, structure, xi_init, max_iter, tol = \
        _synth_options(scn, args)
    results = sigma_sweep(model, grid, structure=structure, xi_init=xi_init,
                          max_iter=max_iter, tol=tol)
    write_csv(args.out / "sweep.csv", SWEEP_CSV_COLUMNS,
              sweep_table(results))
    plots.plot_sweep(results, args.out / "sweep.png")

    feas = [r for r in results if r.feasible]
    lines = [f"sweep: {len(results)} weight settings, "
             f"{len(feas)} feasible"]
    if feas:
        lines += [
            f"gain ranges: Kv {feas[-1].F[0, 0]:.2f} .. "
            f"{feas[0].F[0, 0]:.2f}, "
            f"Kw {feas[-1].F[1, 1]:.2f} .. {feas[0].F[1, 1]:.2f}",
            f"cost range: {feas[0].cost:.4f} .. {feas[-1].cost:.4f}",
        ]
    lines += ["wrote sweep.csv, sweep.png"]
    _emit(args, lines)
    return 0


_SPECTRUM_KEYS = ("signal", "threshold", "separation")


def _cmd_spectrum(args) -> int:
    from . import plots

    scn = _load(args)
    block = scn.extras.get("spectrum", {})
    _check_keys(block, _SPECTRUM_KEYS, "spectrum")
    signal = block.get("signal", "wb")
    if not isinstance(signal, str):
        raise ConfigError("spectrum.signal", "must be a column name")
    threshold = _number(block, "threshold", "spectrum", 0.1,
                        minimum=0.0, strict_min=True)
    separation = block.get("separation", 2)
    if not isinstance(separation, int) or isinstance(separation, bool) \
            or separation < 1:
        raise ConfigError("spectrum.separation", "must be a positive integer")

    traj = simulate(scn.params, scn.initial, scn.make_controller(),
                    disturbance=scn.disturbance, **_sim_kw(scn))
    cols = traj.columns
    if signal not in cols:
        raise ConfigError("spectrum.signal",
                          f"no column {signal!r} in a {traj.model} trajectory")
    samples = traj.as_table()[:, cols.index(signal)]
    spec = analysis.power_spectrum(samples, 1.0 / scn.dt, t=traj.t,
                                   peak_threshold=threshold,
                                   peak_separation=separation)
    spec.to_csv(args.out / "spectrum.csv")
    plots.plot_spectrum(spec, args.out / "spectrum.png")

    nu = mode_frequencies(scn.params)
    lines = [
        f"signal: {signal}, {len(samples)} samples at "
        f"{_fmt(1.0 / scn.dt)} Hz, resolution {spec.resolution:.5f} Hz",
        "peaks: " + (", ".join(f"{f:.5f} Hz" for f, _ in spec.peaks)
                     if spec.peaks else "none"),
        f"predicted pendulum modes: {nu[0]:.5f} Hz, {nu[1]:.5f} Hz",
        "wrote spectrum.csv, spectrum.png",
    ]
    _emit(args, lines)
    return 0


_GRID_KEYS = ("l1", "angles_deg", "rates", "duration", "dt", "energy_tol",
              "tau")


def _grid_spec(block) -> tuple:
    _check_keys(block, _GRID_KEYS, "grid")
    defaults = analysis.GridSpec()

    def axis(key, fallback):
        if key not in block:
            return fallback
        raw = block[key]
        if not isinstance(raw, list) or not raw:
            raise ConfigError(f"grid.{key}", "must be a non-empty list")
        return tuple(_number({"v": v}, "v", f"grid.{key}[{i}]")
                     for i, v in enumerate(raw))

    spec = analysis.GridSpec(l1_values=axis("l1", defaults.l1_values),
                             angles_deg=axis("angles_deg",
                                             defaults.angles_deg),
                             rates=axis("rates", defaults.rates))
    duration = _number(block, "duration", "grid", 120.0, minimum=0.0,
                       strict_min=True)
    dt = _number(block, "dt", "grid", 5e-3, minimum=0.0, strict_min=True)
    energy_tol = _number(block, "energy_tol", "grid", 1e-4, minimum=0.0,
                         strict_min=True)
    tau = block.get("tau", "auto")
    return spec, duration, dt, energy_tol, tau


def _cmd_grid(args) -> int:
    from . import plots

    scn = _load(args)
    spec, duration, dt, energy_tol, tau = \
        _grid_spec(scn.extras.get("grid", {}))
    if tau != "auto":
        tau = _build_tau(tau, scn.params, "grid.tau")
    gains = _build_gains(scn.controller_spec.get("gains", {}),
                         "controller.gains")

    t0 = time.perf_counter()
    report = analysis.stability_grid(scn.params, spec, gains,
                                     duration=duration, dt=dt,
                                     energy_tol=energy_tol, tau=tau)
    elapsed = time.perf_counter() - t0
    report.to_csv(args.out / "grid.csv")
    plots.plot_grid(report, args.out / "grid.png")

    done = [c for c in report.cells if c.converged]
    lines = [f"grid: {len(report.cells)} cells, {len(done)} converged "
             f"(energy < {_fmt(energy_tol)} J within {_fmt(duration)} s)"]
    if done:
        lines += [
            f"settling time: {min(c.settling_s for c in done):.2f} .. "
            f"{max(c.settling_s for c in done):.2f} s",
            f"peak force {max(c.peak_force for c in done):.1f} N, "
            f"peak torque {max(c.peak_torque for c in done):.1f} Nm",
        ]
    bad = [c for c in report.cells if not c.converged]
    for c in bad[:5]:
        lines += [f"not converged: l1={_fmt(c.l1)} angle={_fmt(c.angle_deg)} "
                  f"rate={_fmt(c.rate)} ({c.note or 'residual energy'})"]
    if len(bad) > 5:
        lines += [f"... and {len(bad) - 5} more"]
    lines += [f"elapsed: {elapsed:.1f} s", "wrote grid.csv, grid.png"]
    _emit(args, lines)
    return 0


def _cmd_compare(args) -> int:
    from . import plots

    scn = _load(args)
    block = scn.extras.get("compare", {})
    _check_keys(block, ("controllers",), "compare")
    entries = block.get("controllers")
    if not isinstance(entries, list) or len(entries) < 2:
        raise ConfigError("compare.controllers",
                          "must list at least two controllers")
    controllers = []
    labels = set()
    for i, entry in enumerate(entries):
        path = f"compare.controllers[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(path, "must be an object")
        label = entry.get("label")
        if not isinstance(label, str) or not label:
            raise ConfigError(f"{path}.label", "must be a non-empty string")
        if label in labels:
            raise ConfigError(f"{path}.label", f"duplicate label {label!r}")
        labels.add(label)
        spec = {k: v for k, v in entry.items() if k != "label"}
        controllers.append((label,
                            _build_controller(spec, scn.params, path)))

    bundle = analysis.compare_controllers(scn.params, scn.initial,
                                          controllers,
                                          disturbance=scn.disturbance,
                                          **_sim_kw(scn))
    bundle.to_csv(args.out / "compare.csv")
    plots.plot_comparison(bundle, args.out / "compare.png")

    lines = [f"compared {len(controllers)} controllers over "
             f"{_fmt(scn.duration)} s ({scn.model} model)"]
    for label, _ in controllers:
        traj = bundle.run(label)
        if scn.model == "planar":
            mag = np.abs(traj.wb)
        else:
            mag = np.linalg.norm(traj.wb, axis=1)
        settle = analysis.settling_time_from_samples(traj.t, mag)
        lines += [
            f"  {label}: settling "
            + (f"{settle:.3f} s" if settle is not None else "not settled")
            + f", peak force {_fmt(np.max(np.abs(traj.F)))} N"
            + f", final energy {_fmt(traj.energy[-1])} J"
        ]
    lines += ["wrote compare.csv, compare.png"]
    _emit(args, lines)
    return 0


def _sim_kw(scn: Scenario) -> dict:
    kw = scn.sim_kwargs()
    kw.pop("disturbance")
    return kw


_DISPATCH = {
    "simulate": _cmd_simulate,
    "synthesize": _cmd_synthesize,
    "sweep": _cmd_sweep,
    "spectrum": _cmd_spectrum,
    "grid": _cmd_grid,
    "compare": _cmd_compare,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        return _DISPATCH[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SynthesisError, SingularConfigurationError, FloatingPointError,
            np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
