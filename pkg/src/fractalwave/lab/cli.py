"""Command-line interface.

Subcommands: build, export, eigen, wave, heat, convergence, probe,
kernel-fit, mollify, oscillate. Exit status: 0 on success/PASS, 1 on an
experiment FAIL or runtime error, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from ..errors import FractalwaveError
from ..evolution import WaveInput, cfl_timestep, leapfrog, spectral_heat, trajectory_to_binary
from ..forms import assemble
from ..geometry import BoundaryCondition, build_graph, graph_to_json, spec_for
from ..spectral import eigendecompose, export_spectrum_csv
from . import config as cfgmod
from .experiments import (
    fractal_kind,
    run_convergence,
    run_kernel_fit,
    run_mollified_decay,
    run_oscillation_demo,
    run_propagation_probe,
)
from .presets import make_field
from .report import write_report

EXPERIMENTS = {
    "convergence": run_convergence,
    "probe": run_propagation_probe,
    "kernel-fit": run_kernel_fit,
    "mollify": run_mollified_decay,
    "oscillate": run_oscillation_demo,
}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI config file ([global] plus per-command sections)")
    p.add_argument("--fractal", help="sg or interval")
    p.add_argument("--boundary", help="neumann or dirichlet")
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", choices=("csv", "json"), help="table output format")
    p.add_argument("--seed", type=int, help="random seed for random presets")
    p.add_argument("--plot", action="store_true", default=None, help="emit SVG plots")
    p.add_argument(
        "--plot-deterministic",
        dest="plot_deterministic",
        action="store_true",
        default=None,
        help="strip timestamps from SVG output",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fractalwave",
        description="Wave and heat equation laboratory on self-similar fractals",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="build a graph approximation and print a summary")
    p.add_argument("--level", type=int)
    _add_common(p)

    p = sub.add_parser("export", help="serialize a graph approximation to JSON")
    p.add_argument("--level", type=int)
    _add_common(p)

    p = sub.add_parser("eigen", help="eigenbasis; writes spectrum.csv")
    p.add_argument("--level", type=int)
    p.add_argument("--vectors", action="store_true", default=None,
                   help="include eigenfunction columns")
    _add_common(p)

    p = sub.add_parser("wave", help="leapfrog wave run; writes trajectory files")
    p.add_argument("--level", type=int)
    p.add_argument("--preset", help="initial position preset")
    p.add_argument("--steps", type=int)
    p.add_argument("--stride", type=int, help="CSV output stride")
    _add_common(p)

    p = sub.add_parser("heat", help="spectral heat flow at a list of times")
    p.add_argument("--level", type=int)
    p.add_argument("--preset")
    p.add_argument("--times", help="comma-separated times")
    _add_common(p)

    for name, fn in EXPERIMENTS.items():
        p = sub.add_parser(name, help=fn.__doc__.splitlines()[0].lower())
        if name in ("convergence", "probe"):
            p.add_argument("--levels", help="comma-separated levels")
        else:
            p.add_argument("--level", type=int)
        if name == "convergence":
            p.add_argument("--presets", help="comma-separated presets")
            p.add_argument("--t-star", dest="t_star", type=float)
        if name == "probe":
            p.add_argument("--bump-depth", dest="bump_depth", type=int)
            p.add_argument("--eps-rel", dest="eps_rel", type=float)
            p.add_argument("--horizon", type=float)
        if name == "mollify":
            p.add_argument("--bump-depth", dest="bump_depth", type=int)
        if name == "oscillate":
            p.add_argument("--scales", help="comma-separated birth levels")
        _add_common(p)

    return parser


def _resolve(args: argparse.Namespace) -> dict:
    cli = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    return cfgmod.resolve(args.command, cli, args.config)


def _outdir(cfg: dict) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_build(args) -> int:
    cfg = _resolve(args)
    spec = spec_for(fractal_kind(cfg["fractal"]))
    g = build_graph(spec, cfg["level"], BoundaryCondition(cfg["boundary"]))
    form = assemble(spec, g)
    print(f"fractal={spec.kind.value} level={g.level} boundary={cfg['boundary']}")
    print(f"vertices={g.num_vertices} edges={g.num_edges} boundary_size={len(g.boundary)}")
    print(f"sum_mu={form.mu.sum():.15f} conductance_scale={form.conductances.max():.6g}")
    return 0


def _cmd_export(args) -> int:
    cfg = _resolve(args)
    spec = spec_for(fractal_kind(cfg["fractal"]))
    g = build_graph(spec, cfg["level"], BoundaryCondition(cfg["boundary"]))
    out = _outdir(cfg) / "graph.json"
    out.write_text(graph_to_json(g))
    print(f"wrote {out}")
    return 0


def _cmd_eigen(args) -> int:
    cfg = _resolve(args)
    spec = spec_for(fractal_kind(cfg["fractal"]))
    g = build_graph(spec, cfg["level"], BoundaryCondition(cfg["boundary"]))
    form = assemble(spec, g)
    basis = eigendecompose(form, g.boundary)
    out = _outdir(cfg) / "spectrum.csv"
    export_spectrum_csv(basis, out, include_vectors=bool(cfg["vectors"]))
    print(f"eigenpairs={basis.size} lambda_min={basis.lambdas[0]:.6g} "
          f"lambda_max={basis.lambdas[-1]:.6g}")
    print(f"wrote {out}")
    if cfg["plot"]:
        from .plots import plot_field

        idx = min(3, basis.size - 1)
        plot_field(g, basis.phis[:, idx], _outdir(cfg) / "eigenfunction.svg",
                   title=f"eigenfunction {idx + 1}",
                   deterministic=cfg["plot_deterministic"])
    return 0


def _cmd_wave(args) -> int:
    cfg = _resolve(args)
    spec = spec_for(fractal_kind(cfg["fractal"]))
    g = build_graph(spec, cfg["level"], BoundaryCondition(cfg["boundary"]))
    form = assemble(spec, g)
    rng = np.random.default_rng(cfg["seed"])
    basis = eigendecompose(form, g.boundary) if cfg["preset"].startswith("eigenmode") else None
    f = make_field(cfg["preset"], form, basis, rng)
    if g.boundary:
        f = f.copy()
        f[sorted(g.boundary)] = 0.0
    data = WaveInput(f=f, g=np.zeros_like(f), boundary=g.boundary)
    h = cfl_timestep(form)
    traj = leapfrog(form, data, h, cfg["steps"])
    out = _outdir(cfg)
    traj.to_csv(out / "trajectory.csv", stride=cfg["stride"])
    trajectory_to_binary(traj, out / "trajectory.bin")
    print(f"h={h:.6g} steps={cfg['steps']} frames={traj.frames.shape}")
    print(f"wrote {out / 'trajectory.csv'} and {out / 'trajectory.bin'}")
    if cfg["plot"]:
        from .plots import plot_field, plot_traces

        probes = {f"corner{c}": traj.frames[:, g.corner_index(c)]
                  for c in range(spec.v0_size)}
        plot_traces(traj.times, probes, out / "traces.svg",
                    deterministic=cfg["plot_deterministic"])
        plot_field(g, traj.frames[-1], out / "final.svg", title="final frame",
                   deterministic=cfg["plot_deterministic"])
    print("PASS")
    return 0


def _cmd_heat(args) -> int:
    cfg = _resolve(args)
    spec = spec_for(fractal_kind(cfg["fractal"]))
    g = build_graph(spec, cfg["level"], BoundaryCondition(cfg["boundary"]))
    form = assemble(spec, g)
    rng = np.random.default_rng(cfg["seed"])
    basis = eigendecompose(form, g.boundary)
    f = make_field(cfg["preset"], form, basis, rng)
    if g.boundary:
        f = f.copy()
        f[sorted(g.boundary)] = 0.0
    out = _outdir(cfg)
    import csv as _csv

    with open(out / "heat.csv", "w", newline="") as fh:
        writer = _csv.writer(fh, lineterminator="\n")
        times = list(cfg["times"])
        writer.writerow(["vertex"] + [f"t={t}" for t in times])
        fields = [spectral_heat(basis, f, t) for t in times]
        for v in range(g.num_vertices):
            writer.writerow([v] + [repr(float(fld[v])) for fld in fields])
    print(f"wrote {out / 'heat.csv'}")
    if cfg["plot"]:
        from .plots import plot_field

        plot_field(g, fields[-1], out / "heat_final.svg",
                   title=f"heat at t={times[-1]}",
                   deterministic=cfg["plot_deterministic"])
    print("PASS")
    return 0


def _cmd_experiment(args) -> int:
    cfg = _resolve(args)
    report = EXPERIMENTS[args.command](cfg)
    out = _outdir(cfg)
    path = write_report(report, out, cfg["format"])
    for check in report.checks:
        print(f"[{'PASS' if check['passed'] else 'FAIL'}] {check['name']}: {check['detail']}")
    if report.interpretation:
        print(f"note: {report.interpretation}")
    print(f"verdict: {report.verdict} (report at {path})")
    if cfg["plot"]:
        _experiment_plots(args.command, cfg, report, out)
    return 0 if report.verdict == "PASS" else 1


def _experiment_plots(command: str, cfg: dict, report, out: Path) -> None:
    from .plots import plot_traces

    if command == "convergence" and "errors" in report.tables:
        t = report.tables["errors"]
        levels = np.array(t.column("level"), dtype=float)
        errs = np.array(t.column("sup_error"), dtype=float)
        plot_traces(levels, {"sup_error": errs}, out / "errors.svg",
                    title="convergence errors",
                    deterministic=cfg["plot_deterministic"])
    elif command == "kernel-fit" and "on_diagonal" in report.tables:
        t = report.tables["on_diagonal"]
        ts = np.array(t.column("t"))
        ps = np.array(t.column("p_xx"))
        plot_traces(np.log10(ts), {"log10 p_xx": np.log10(ps)},
                    out / "on_diagonal.svg", title="on-diagonal kernel decay",
                    deterministic=cfg["plot_deterministic"])


_HANDLERS = {
    "build": _cmd_build,
    "export": _cmd_export,
    "eigen": _cmd_eigen,
    "wave": _cmd_wave,
    "heat": _cmd_heat,
    **{name: _cmd_experiment for name in EXPERIMENTS},
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except (ValueError, KeyError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except FractalwaveError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
