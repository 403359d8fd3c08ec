"""``levy-rosmac`` command line front end.

Every run writes ``manifest.json`` next to its outputs. The manifest holds the
fully resolved config, so ``--config manifest.json`` replays the run.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .config import (
    ConfigError,
    expand_sweep,
    fpe_config,
    load_config,
    model_params,
    portrait_initials,
    resolve,
    sim_config,
)
from .fpe import FpeInstabilityError, solve_stationary, write_density
from .integrate import ensemble_stats, phase_portrait, run_ensemble
from .model import ModelParams, attractor, bifurcation_mu, coexistence_exists, equilibria

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED, EXIT_DIVERGED = 0, 2, 3, 4

CSV_SCHEMA = {
    "version": 1,
    "trajectory": ["t", "X", "Y"],
    "bifurcation": ["r", "mu"],
    "stats": ["t"] + [f"{v}_{s}" for v in "XY" for s in ("mean", "median", "q25", "q75", "iqr", "min", "max")]
    + ["n_active", "n_flagged"],
}


def write_csv(path: Path, header, columns) -> None:
    # shortest round-trip float text, so values re-read exactly
    frame = pd.DataFrame({h: np.asarray(c) for h, c in zip(header, columns)})
    frame.to_csv(path, index=False, lineterminator="\n")


def _trajectory_csv(path: Path, tr, thin: int = 1) -> None:
    write_csv(path, CSV_SCHEMA["trajectory"], [tr.times[::thin], tr.x[::thin], tr.y[::thin]])


class Run:
    """Collects outputs and notes of one invocation."""

    def __init__(self, out: Path):
        self.out = out
        self.outputs: list[str] = []
        self.notes: list[dict] = []
        self.code = EXIT_OK

    def path(self, subdir: str, name: str) -> Path:
        p = self.out / subdir / name if subdir else self.out / name
        p.parent.mkdir(parents=True, exist_ok=True)
        self.outputs.append(str(p.relative_to(self.out)))
        return p

    def fail(self, code: int) -> None:
        self.code = max(self.code, code)


# --- subcommands -----------------------------------------------------------

def equilibria_report(params: ModelParams) -> dict:
    return {
        "params": params.as_dict(),
        "coexistence_exists": coexistence_exists(params),
        "mu_T": bifurcation_mu(params.r, params),
        "attractor": list(attractor(params)),
        "equilibria": [rep.to_dict() for rep in equilibria(params)],
    }


def cmd_equilibria(cfg: dict, run: Run, sub: str) -> None:
    report = equilibria_report(model_params(cfg))
    with open(run.path(sub, "equilibria.json"), "w") as fh:
        json.dump(report, fh, indent=2)
    print(json.dumps(report, indent=2))


def bifurcation_table(cfg: dict):
    r_min, r_max, n = cfg["r_min"], cfg["r_max"], cfg["n_points"]
    if not (0 < r_min < r_max and math.isfinite(r_max)):
        raise ConfigError(f"need 0 < r_min < r_max, got r_min={r_min}, r_max={r_max}")
    if n < 2:
        raise ConfigError(f"n_points must be >= 2, got {n}")
    params = model_params(cfg)
    rs = np.linspace(r_min, r_max, n)
    return rs, np.array([bifurcation_mu(r, params) for r in rs])


def cmd_bifurcation(cfg: dict, run: Run, sub: str) -> None:
    rs, mus = bifurcation_table(cfg)
    csv = run.path(sub, "bifurcation.csv")
    write_csv(csv, CSV_SCHEMA["bifurcation"], [rs, mus])
    run.path(sub, "bifurcation.gp").write_text(
        "set datafile separator ','\n"
        "set xlabel 'r'\nset ylabel 'mu'\n"
        "set label 'coexistence' at graph 0.6, graph 0.2\n"
        f"plot '{csv.name}' using 1:2 skip 1 with lines title 'transcritical curve'\n"
    )


def cmd_portrait(cfg: dict, run: Run, sub: str) -> None:
    params = model_params(cfg)
    initials = portrait_initials(cfg)
    trs = phase_portrait(params, initials, cfg["portrait_t_end"], cfg["dt"], cfg["record_stride"])
    names = []
    for i, (s0, tr) in enumerate(zip(initials, trs)):
        p = run.path(sub, f"portrait_{i:03d}.csv")
        _trajectory_csv(p, tr, cfg["thin"])
        names.append(p.name)
        if tr.diverged:
            run.notes.append({"point": sub, "diverged": p.name, "initial": list(s0)})
    eq = "\n".join(f"{rep.point.x!r} {rep.point.y!r}" for rep in equilibria(params))
    plots = ", ".join(f"'{n}' using 2:3 skip 1 with lines notitle" for n in names)
    run.path(sub, "portrait.gp").write_text(
        "set datafile separator ','\n"
        "set xlabel 'X (prey)'\nset ylabel 'Y (predator)'\n"
        f"$eq << EOD\n{eq}\nEOD\n"
        f"plot {plots}, $eq using 1:2 with points pt 7 ps 1.5 title 'equilibria'\n"
    )


def cmd_simulate(cfg: dict, run: Run, sub: str) -> None:
    sim = sim_config(cfg)
    ens = run_ensemble(sim, cfg["n_traj"])
    if cfg["write_trajectories"]:
        for i, tr in enumerate(ens.trajectories):
            _trajectory_csv(run.path(sub, f"traj_{i:05d}.csv"), tr, cfg["thin"])
    st = ensemble_stats(ens)
    write_csv(run.path(sub, "stats.csv"), CSV_SCHEMA["stats"], [st[c] for c in CSV_SCHEMA["stats"]])
    run.path(sub, "stats.gp").write_text(
        "set datafile separator ','\nset xlabel 't'\n"
        "plot 'stats.csv' using 1:3 skip 1 with lines title 'X median', "
        "'' using 1:4:5 skip 1 with filledcurves fs transparent solid 0.3 title 'X IQR', "
        "'' using 1:10 skip 1 with lines title 'Y median', "
        "'' using 1:11:12 skip 1 with filledcurves fs transparent solid 0.3 title 'Y IQR'\n"
    )
    n_div = int(ens.diverged.sum())
    if n_div:
        run.notes.append({"point": sub, "diverged_trajectories": n_div, "n_traj": ens.n_traj})
    if n_div == ens.n_traj:
        run.fail(EXIT_DIVERGED)


def cmd_density(cfg: dict, run: Run, sub: str) -> None:
    fcfg = fpe_config(cfg)
    try:
        result = solve_stationary(fcfg)
    except FpeInstabilityError as exc:
        run.notes.append({"point": sub, "instability": str(exc)})
        run.fail(EXIT_NONCONVERGED)
        return
    write_density(result, fcfg, run.path(sub, "density.txt"), run.path(sub, "density_meta.json"))
    run.path(sub, "density.gp").write_text(
        f"# matrix rows are y = {fcfg.y_min}..{fcfg.y_max}, columns x = {fcfg.x_min}..{fcfg.x_max}\n"
        f"hx = {result.grid.hx!r}\nhy = {result.grid.hy!r}\n"
        "set xlabel 'X (prey)'\nset ylabel 'Y (predator)'\nset zlabel 'p'\n"
        "set pm3d\nunset surface\n"
        f"splot 'density.txt' matrix using ({fcfg.x_min!r} + ($1 + 0.5) * hx):"
        f"({fcfg.y_min!r} + ($2 + 0.5) * hy):3 notitle\n"
    )
    if not result.converged:
        run.notes.append({"point": sub, "not_converged": True, "residual": result.residual})
        run.fail(EXIT_NONCONVERGED)


COMMANDS = {
    "equilibria": cmd_equilibria,
    "bifurcation": cmd_bifurcation,
    "portrait": cmd_portrait,
    "simulate": cmd_simulate,
    "density": cmd_density,
}


# --- entry point -----------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="levy-rosmac", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("subcommand", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="JSON config or a previous manifest.json")
    ap.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    ap.add_argument("--out", default=".", help="output directory (default: current)")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    start = time.perf_counter()
    try:
        cfg = resolve(load_config(args.config), seed=args.seed)
        points = expand_sweep(cfg)
        # validate every point before any work is done
        for point in points:
            model_params(point)
            if args.subcommand == "simulate":
                sim_config(point)
                if point["n_traj"] < 1:
                    raise ConfigError("n_traj must be >= 1")
            elif args.subcommand == "density":
                fpe_config(point)
            elif args.subcommand == "bifurcation":
                bifurcation_table(point)
    except ConfigError as exc:
        print(f"levy-rosmac: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    run = Run(out)
    sweep = []
    for i, point in enumerate(points):
        sub = f"point_{i:03d}" if len(points) > 1 else ""
        COMMANDS[args.subcommand](point, run, sub)
        if sub:
            sweep.append({"dir": sub, **{k: point[k] for k in _swept_names(cfg)}})

    manifest = {
        "subcommand": args.subcommand,
        "config": cfg,
        "seed": cfg["seed"],
        "version": __version__,
        "csv_schema": CSV_SCHEMA,
        "sweep_points": sweep,
        "outputs": run.outputs,
        "notes": run.notes,
        "exit_code": run.code,
        "duration_s": time.perf_counter() - start,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
    for note in run.notes:
        print(f"levy-rosmac: {json.dumps(note)}", file=sys.stderr)
    return run.code


def _swept_names(cfg: dict) -> list[str]:
    return [name for key in cfg.get("sweep") or {} for name in key.split(",")]


if __name__ == "__main__":
    sys.exit(main())
