"""Command-line front end: simulate, sweep, oracle, diagnose.

Exit codes: 0 all monitored invariants passed, 1 invariant violation,
2 configuration problem, 3 solver failure.  The environment variable
PKS_THREADS caps the sweep worker pool.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict

import numpy as np

from . import __version__
from .config import ConfigError, oracle_config_from_file, sim_config_from_file
from .diagnostics import lambda_l2, measure_components
from .mcf_oracle import (
    CircleSystem,
    TopologyChangeError,
    circle_curve,
    ellipse_curve,
    front_track_run,
    integrate_circles,
)
from .reporting import (
    RecordWriter,
    RunManifest,
    fmt,
    flags_to_dict,
    record_to_dict,
    render_run_figures,
    render_sweep_figure,
    snapshot_name,
    utc_now,
    write_snapshot,
)
from .rho_solver import InfeasibleMassError, MultiplierSolveError
from .shapes import Annulus, Disk, MultiDisk, PerturbedDisk
from .stepper import SimConfig, SolverError, run


def shape_to_dict(shape) -> dict:
    if isinstance(shape, Disk):
        return {"shape": "disk", "cx": shape.cx, "cy": shape.cy, "r": shape.r}
    if isinstance(shape, MultiDisk):
        return {
            "shape": "disks",
            "cx": [c[0] for c in shape.centers],
            "cy": [c[1] for c in shape.centers],
            "r": list(shape.radii),
        }
    if isinstance(shape, Annulus):
        return {
            "shape": "annulus",
            "cx": shape.cx,
            "cy": shape.cy,
            "r_inner": shape.r_inner,
            "r_outer": shape.r_outer,
        }
    if isinstance(shape, PerturbedDisk):
        return {
            "shape": "perturbed_disk",
            "cx": shape.cx,
            "cy": shape.cy,
            "r": shape.r,
            "amplitude": shape.amplitude,
            "modes": list(shape.modes),
            "seed": shape.seed,
        }
    raise TypeError(f"unknown shape {type(shape).__name__}")


def config_echo(config: SimConfig) -> dict:
    echo = asdict(config)
    echo["init"] = shape_to_dict(config.init)
    echo["h"] = config.h
    return echo


def execute_run(config: SimConfig, out_dir: str, command: str, stable_manifest: bool) -> dict:
    """Run one simulation with streaming CSV, snapshots, and manifest.

    Returns a summary dict with the RunResult, measured interface
    components per snapshot, and the manifest status.  Partial output is
    flushed if the run fails mid-way.
    """
    os.makedirs(out_dir, exist_ok=True)
    manifest = RunManifest(command=command, config=config_echo(config), version=__version__)
    if not stable_manifest:
        manifest.started_at = utc_now()
    records_path = os.path.join(out_dir, "records.csv")
    writer = RecordWriter(records_path)
    manifest.files.append("records.csv")
    snapshots = []

    def snapshot_writer(step_index, state):
        entry = {"step": step_index, "t": state.t}
        for kind, field_ in (("phi", state.phi), ("rho", state.rho)):
            name = snapshot_name(kind, step_index, config.snapshot_format)
            write_snapshot(
                os.path.join(out_dir, name),
                field_,
                state.t,
                config.epsilon,
                config.A,
                config.snapshot_format,
            )
            manifest.files.append(name)
        if state.phi.d == 2:
            entry["components"] = measure_components(state.phi)
        snapshots.append(entry)

    try:
        result = run(config, on_step=writer.write, snapshot_writer=snapshot_writer)
    except Exception as exc:
        manifest.status = f"solver_failure: {exc}"
        manifest.files.append("manifest.json")
        if not stable_manifest:
            manifest.finished_at = utc_now()
        with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
            fh.write(manifest.to_json())
        raise
    finally:
        writer.close()

    manifest.flags = flags_to_dict(result.flags)
    manifest.initial = record_to_dict(result.initial)
    manifest.warnings = result.warnings
    manifest.status = "ok" if result.all_ok else "invariant_violation"
    manifest.files.append("manifest.json")
    if not stable_manifest:
        manifest.finished_at = utc_now()
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        fh.write(manifest.to_json())
    return {
        "result": result,
        "snapshots": snapshots,
        "status": manifest.status,
        "out_dir": out_dir,
    }


def radius_error_vs_oracle(config: SimConfig, snapshots) -> float:
    """Worst relative radius error against the circle-system reference.

    Compared only while the reference's smallest radius stays above 3 eps
    (the oracle's validity window).  NaN when the initial shape is not a
    circle family or no snapshot is comparable.
    """
    circles = config.init.circles() if hasattr(config.init, "circles") else []
    if not circles or isinstance(config.init, (Annulus, PerturbedDisk)):
        return float("nan")
    centers = [c for c, _ in circles]
    radii = np.array([r for _, r in circles])
    traj = integrate_circles(CircleSystem(2, radii, tuple(centers)), config.dt, config.t_end)
    worst = float("nan")
    for snap in snapshots:
        comps = snap.get("components")
        if comps is None:
            continue
        idx = int(round(snap["t"] / config.dt))
        if idx >= len(traj.times):
            break
        ref = traj.radii[idx]
        if ref.min() < 3.0 * config.epsilon:
            break
        if len(comps) != len(centers):
            continue
        for (cx, cy), r_ref in zip(centers, ref):
            best = min(comps, key=lambda c: (c[0][0] - cx) ** 2 + (c[0][1] - cy) ** 2)
            err = abs(best[1] - r_ref) / r_ref
            worst = err if np.isnan(worst) else max(worst, err)
    return worst


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pks-sharp",
        description="Phase-separation simulator and interface-law diagnostics",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run one simulation from a config file")
    p_sim.add_argument("config")
    p_sim.add_argument("--out", default=None, help="output directory (overrides out_dir)")
    p_sim.add_argument(
        "--stable-manifest",
        action="store_true",
        help="omit wall-clock fields so re-runs are byte-identical",
    )

    p_sweep = sub.add_parser("sweep", help="re-run a scenario over a list of eps values")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--eps", nargs="+", type=float, required=True)
    p_sweep.add_argument("--out", default=None)
    p_sweep.add_argument("--stable-manifest", action="store_true")

    p_oracle = sub.add_parser("oracle", help="reference interface-law solutions")
    p_oracle.add_argument("config")
    p_oracle.add_argument("--out", default=None)
    p_oracle.add_argument("--stable-manifest", action="store_true")

    p_diag = sub.add_parser("diagnose", help="render figures and verdicts for a finished run")
    p_diag.add_argument("target", help="run directory (or its config file)")
    p_diag.add_argument("--out", default=None)
    return parser


def cmd_simulate(args) -> int:
    config = sim_config_from_file(args.config, out_dir=args.out)
    out_dir = config.out_dir or "out"
    summary = execute_run(config, out_dir, "simulate", args.stable_manifest)
    return 0 if summary["status"] == "ok" else 1


def _sweep_member(config: SimConfig, eps: float) -> SimConfig:
    """Resolution-matched sweep member: grid and step scale with eps.

    h is kept proportional to eps (constant cells per interface width) and
    dt proportional to eps^2, so members differ only through the physical
    interface width.
    """
    scale = config.epsilon / eps
    nx = max(8, int(round(config.nx * scale)))
    ny = max(8, int(round(config.ny * scale)))
    return SimConfig(
        epsilon=eps,
        A=config.A,
        t_end=config.t_end,
        nx=nx,
        ny=ny,
        lx=config.lx,
        ly=config.ly,
        init=config.init,
        dt=config.dt * (eps / config.epsilon) ** 2,
        target_mass=config.target_mass,
        output_every=config.output_every,
        solver=config.solver,
        seed=config.seed,
        snapshot_format=config.snapshot_format,
        out_dir=None,
    )


def _sweep_worker(payload):
    config, out_dir, stable = payload
    p = config.params()
    row = {
        "eps": config.epsilon,
        "nx": config.nx,
        "ny": config.ny,
        "dt": config.dt,
        "status": "ok",
        "lambda_l2": float("nan"),
        "forcing_l2_cum": float("nan"),
        "energy_in_over_gamma_perimeter": float("nan"),
        "energy_final_over_gamma_perimeter": float("nan"),
        "radius_err_vs_oracle": float("nan"),
    }
    try:
        summary = execute_run(config, out_dir, "sweep", stable)
    except ConfigError:
        raise
    except Exception as exc:  # per-run failures recorded, sweep continues
        row["status"] = f"failed: {type(exc).__name__}"
        return row
    result = summary["result"]
    row["status"] = summary["status"]
    row["lambda_l2"] = lambda_l2(result.records, 0.0, config.t_end)
    row["forcing_l2_cum"] = result.forcing_l2_cum
    init = result.initial
    if init.perimeter_ms > 0:
        row["energy_in_over_gamma_perimeter"] = init.energy_J / (p.gamma * init.perimeter_ms)
    last = result.records[-1] if result.records else init
    if last.perimeter_ms > 0:
        row["energy_final_over_gamma_perimeter"] = last.energy_J / (p.gamma * last.perimeter_ms)
    row["radius_err_vs_oracle"] = radius_error_vs_oracle(config, summary["snapshots"])
    return row


def cmd_sweep(args) -> int:
    if not args.eps:
        raise ConfigError("sweep needs at least one eps value")
    if any(e <= 0.0 for e in args.eps):
        raise ConfigError("eps values must be positive")
    base = sim_config_from_file(args.config, out_dir=args.out)
    out_dir = base.out_dir or "sweep_out"
    os.makedirs(out_dir, exist_ok=True)
    payloads = [
        (_sweep_member(base, eps), os.path.join(out_dir, f"eps_{eps:g}"), args.stable_manifest)
        for eps in args.eps
    ]
    workers = min(len(payloads), int(os.environ.get("PKS_THREADS") or os.cpu_count() or 1))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_worker, payloads))
    else:
        rows = [_sweep_worker(p) for p in payloads]

    from .reporting import SWEEP_COLUMNS

    csv_path = os.path.join(out_dir, "sweep.csv")
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(SWEEP_COLUMNS) + "\n")
        for row in rows:
            cells = []
            for col in SWEEP_COLUMNS:
                v = row[col]
                cells.append(v if isinstance(v, str) else fmt(v) if isinstance(v, float) else str(v))
            fh.write(",".join(cells) + "\n")
    render_sweep_figure(out_dir, rows)
    return 0 if all(r["status"] == "ok" for r in rows) else 1


_CIRCLES_PLOT_SCRIPT = """\
#!/usr/bin/env python3
\"\"\"Plot the circle trajectories emitted next to this script.\"\"\"
import csv
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

with open("circles.csv") as fh:
    rows = list(csv.DictReader(fh))
t = [float(r["t"]) for r in rows]
fig, ax = plt.subplots()
for key in rows[0]:
    if key.startswith("R_"):
        ax.plot(t, [float(r[key]) for r in rows], label=key)
ax.plot(t, [float(r["Lambda"]) for r in rows], "--", label="Lambda")
ax.set_xlabel("t")
ax.legend()
fig.tight_layout()
fig.savefig("circles.png", dpi=130)
"""

_FRONT_PLOT_SCRIPT = """\
#!/usr/bin/env python3
\"\"\"Plot the front-tracking trajectory emitted next to this script.\"\"\"
import csv
from collections import defaultdict
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

with open("front.csv") as fh:
    rows = list(csv.DictReader(fh))
t = [float(r["t"]) for r in rows]
fig, axes = plt.subplots(1, 2, figsize=(10, 4))
axes[0].plot(t, [float(r["length"]) for r in rows], label="length")
axes[0].plot(t, [float(r["area"]) for r in rows], label="area")
axes[0].set_xlabel("t")
axes[0].legend()
polys = defaultdict(list)
try:
    with open("polygons.csv") as fh:
        for r in csv.DictReader(fh):
            polys[float(r["t"])].append((float(r["x"]), float(r["y"])))
except FileNotFoundError:
    pass
for tt, pts in sorted(polys.items()):
    xs = [p[0] for p in pts] + [pts[0][0]]
    ys = [p[1] for p in pts] + [pts[0][1]]
    axes[1].plot(xs, ys, lw=0.8)
axes[1].set_aspect("equal")
fig.tight_layout()
fig.savefig("front.png", dpi=130)
"""


def cmd_oracle(args) -> int:
    spec = oracle_config_from_file(args.config)
    out_dir = args.out or "oracle_out"
    os.makedirs(out_dir, exist_ok=True)
    manifest = RunManifest(command="oracle", config=spec, version=__version__)
    if not args.stable_manifest:
        manifest.started_at = utc_now()
    if spec["kind"] == "circles":
        sys_ = CircleSystem(spec["d"], np.array(spec["radii"]))
        traj = integrate_circles(sys_, spec["dt"], spec["t_end"])
        n = traj.radii.shape[1]
        with open(os.path.join(out_dir, "circles.csv"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write("t," + ",".join(f"R_{i + 1}" for i in range(n)) + ",Lambda\n")
            for k in range(len(traj.times)):
                cells = [fmt(traj.times[k])] + [fmt(v) for v in traj.radii[k]] + [fmt(traj.lambdas[k])]
                fh.write(",".join(cells) + "\n")
        with open(os.path.join(out_dir, "plot_circles.py"), "w", encoding="utf-8") as fh:
            fh.write(_CIRCLES_PLOT_SCRIPT)
        manifest.files += ["circles.csv", "plot_circles.py"]
        if traj.stopped_early:
            manifest.warnings.append(f"stopped early: {traj.stop_reason}")
    else:
        n = spec["n_nodes"]
        if spec["shape"] == "circle":
            curve = circle_curve(spec["cx"], spec["cy"], spec["a"], n)
        else:
            curve = ellipse_curve(spec["cx"], spec["cy"], spec["a"], spec["b"], n)
        traj = front_track_run(curve, spec["dt"], spec["t_end"], store_every=spec["store_every"])
        with open(os.path.join(out_dir, "front.csv"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write("t,length,area,lambda\n")
            for k in range(len(traj.times)):
                fh.write(
                    ",".join(
                        fmt(v)
                        for v in (traj.times[k], traj.lengths[k], traj.areas[k], traj.lambdas[k])
                    )
                    + "\n"
                )
        manifest.files.append("front.csv")
        if spec["store_every"]:
            with open(os.path.join(out_dir, "polygons.csv"), "w", encoding="utf-8", newline="\n") as fh:
                fh.write("t,x,y\n")
                for i, pts in enumerate(traj.curves):
                    tt = traj.times[min(i * spec["store_every"], len(traj.times) - 1)]
                    for x, y in pts:
                        fh.write(f"{fmt(tt)},{fmt(x)},{fmt(y)}\n")
            manifest.files.append("polygons.csv")
        with open(os.path.join(out_dir, "plot_front.py"), "w", encoding="utf-8") as fh:
            fh.write(_FRONT_PLOT_SCRIPT)
        manifest.files.append("plot_front.py")
        if traj.stopped_early:
            manifest.warnings.append(f"stopped early: {traj.stop_reason}")
    manifest.files.append("manifest.json")
    if not args.stable_manifest:
        manifest.finished_at = utc_now()
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        fh.write(manifest.to_json())
    return 0


def cmd_diagnose(args) -> int:
    import json

    target = args.target
    if os.path.isdir(target) and os.path.exists(os.path.join(target, "manifest.json")):
        run_dir = target
    elif os.path.isfile(target):
        config = sim_config_from_file(target)
        if config.out_dir is None:
            raise ConfigError("config has no out_dir; pass the run directory instead")
        run_dir = config.out_dir
    else:
        raise ConfigError(f"no run found at '{target}'")
    with open(os.path.join(run_dir, "manifest.json"), "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    oracle = None
    init = manifest.get("config", {}).get("init", {})
    if init.get("shape") in ("disk", "disks"):
        r = init["r"]
        radii = np.array(r if isinstance(r, list) else [r])
        cfg = manifest["config"]
        traj = integrate_circles(
            CircleSystem(2, radii), cfg["dt"], cfg["t_end"] if cfg["t_end"] > 0 else cfg["dt"]
        )
        oracle = traj
    figures = render_run_figures(run_dir, oracle=oracle)
    flags = manifest.get("flags", {})
    ok = manifest.get("status") == "ok" and all(f.get("ok") for f in flags.values())
    print(f"run {run_dir}: status={manifest.get('status')}")
    for name, f in sorted(flags.items()):
        print(f"  {'PASS' if f.get('ok') else 'FAIL'} {name} (violations={f.get('violations')})")
    for fig in figures:
        print(f"  wrote {os.path.relpath(fig, run_dir)}")
    return 0 if ok else 1


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            return cmd_simulate(args)
        if args.command == "sweep":
            return cmd_sweep(args)
        if args.command == "oracle":
            return cmd_oracle(args)
        if args.command == "diagnose":
            return cmd_diagnose(args)
    except (ConfigError, InfeasibleMassError, FileNotFoundError) as exc:
        print(f"pks-sharp: config error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, MultiplierSolveError, TopologyChangeError) as exc:
        print(f"pks-sharp: solver failure: {exc}", file=sys.stderr)
        return 3
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
