"""Persistence: records CSV, snapshots, run manifest, figures.

All floating-point values are printed with 17 significant digits so that
parsing a written file reproduces the binary doubles exactly; re-running
a command with identical inputs yields byte-identical files (manifest
wall-clock fields can be suppressed with the stable-manifest flag).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import List, Optional

import numpy as np

from .diagnostics import StepRecord
from .grid import ScalarField

RECORD_COLUMNS = (
    "t",
    "ell",
    "lambda",
    "energy_J",
    "energy_J_alt",
    "dissipation_cum",
    "mass_rho",
    "forcing_l2_cum",
    "area",
    "perimeter",
    "radius",
)

SWEEP_COLUMNS = (
    "eps",
    "nx",
    "ny",
    "dt",
    "status",
    "lambda_l2",
    "forcing_l2_cum",
    "energy_in_over_gamma_perimeter",
    "energy_final_over_gamma_perimeter",
    "radius_err_vs_oracle",
)


def fmt(x: float) -> str:
    return f"{float(x):.17g}"


class RecordWriter:
    """Streams diagnostics rows to CSV; partial output survives a crash."""

    def __init__(self, path: str):
        self.path = path
        self._fh = open(path, "w", encoding="utf-8", newline="\n")
        self._fh.write(",".join(RECORD_COLUMNS) + "\n")
        self._fh.flush()

    def write(self, rec: StepRecord, dissipation_cum: float, forcing_l2_cum: float):
        row = (
            rec.t,
            rec.ell,
            rec.lam,
            rec.energy_J,
            rec.energy_J_alt,
            dissipation_cum,
            rec.mass_rho,
            forcing_l2_cum,
            rec.area_over_half,
            rec.perimeter_ms,
            rec.radius_est,
        )
        self._fh.write(",".join(fmt(v) for v in row) + "\n")
        self._fh.flush()

    def close(self):
        self._fh.close()


def read_records_csv(path: str) -> List[dict]:
    """Parse a records CSV back into row dicts of floats (exact round trip)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != RECORD_COLUMNS:
            raise ValueError(f"unexpected records header {header}")
        rows = []
        for line in fh:
            vals = line.strip().split(",")
            rows.append({k: float(v) for k, v in zip(header, vals)})
    return rows


def write_records_csv(path: str, records, dissipation_cums, forcing_cums):
    w = RecordWriter(path)
    for rec, d, f in zip(records, dissipation_cums, forcing_cums):
        w.write(rec, d, f)
    w.close()


# ---------------------------------------------------------------------------
# snapshots

def snapshot_name(kind: str, step_index: int, fmt_kind: str) -> str:
    ext = "dat" if fmt_kind == "text" else "bin"
    return f"{kind}_{step_index:06d}.{ext}"


def write_snapshot(
    path: str, f: ScalarField, t: float, eps: float, a_param: float, fmt_kind: str = "text"
):
    """One field per file: a header line (dims, h, t, eps, A) then the
    row-major values, as text or as a flat float64 buffer."""
    header = " ".join(
        [*(str(n) for n in f.dims), fmt(f.h), fmt(t), fmt(eps), fmt(a_param)]
    )
    if fmt_kind == "text":
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(header + "\n")
            for row in f.values.reshape(f.dims[0], -1):
                fh.write(" ".join(fmt(v) for v in row) + "\n")
    elif fmt_kind == "binary":
        with open(path, "wb") as fh:
            fh.write((header + "\n").encode("ascii"))
            fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())
    else:
        raise ValueError(f"unknown snapshot format '{fmt_kind}'")


def read_snapshot(path: str):
    """Inverse of write_snapshot; returns (ScalarField, t, eps, A)."""
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        ndim = len(header) - 4
        dims = tuple(int(tok) for tok in header[:ndim])
        h, t, eps, a_param = (float(tok) for tok in header[ndim:])
        rest = fh.read()
    count = int(np.prod(dims))
    if len(rest) == 8 * count:
        values = np.frombuffer(rest, dtype="<f8").reshape(dims).copy()
    else:
        values = np.fromstring(rest.decode("ascii"), sep=" ").reshape(dims)
    return ScalarField(values, h), t, eps, a_param


# ---------------------------------------------------------------------------
# manifest


@dataclass
class RunManifest:
    """Inventory and verdict of one command invocation.

    Pass/fail flags are copied from the run's monitored invariants, never
    set by hand; every emitted file is listed.
    """

    command: str
    config: dict
    version: str
    flags: dict = field(default_factory=dict)
    initial: Optional[dict] = None
    files: List[str] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)
    status: str = "ok"
    started_at: Optional[str] = None
    finished_at: Optional[str] = None

    def to_json(self) -> str:
        payload = {
            "command": self.command,
            "config": self.config,
            "version": self.version,
            "flags": self.flags,
            "initial": self.initial,
            "files": sorted(self.files),
            "warnings": self.warnings,
            "status": self.status,
        }
        if self.started_at is not None:
            payload["started_at"] = self.started_at
            payload["finished_at"] = self.finished_at
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def flags_to_dict(flags: dict) -> dict:
    return {
        name: {
            "ok": f.ok,
            "violations": f.violations,
            "first_step": f.first_step,
            "worst": f.worst,
        }
        for name, f in flags.items()
    }


def record_to_dict(rec: StepRecord) -> dict:
    return {
        "t": rec.t,
        "ell": rec.ell,
        "lambda": rec.lam,
        "energy_J": rec.energy_J,
        "energy_J_alt": rec.energy_J_alt,
        "dissipation": rec.dissipation,
        "mass_rho": rec.mass_rho,
        "forcing_l2": rec.forcing_l2,
        "area": rec.area_over_half,
        "perimeter": rec.perimeter_ms,
        "radius": rec.radius_est,
    }


# ---------------------------------------------------------------------------
# figures


def render_run_figures(run_dir: str, oracle=None) -> List[str]:
    """Render diagnostic figures next to the records CSV of a finished run.

    Returns the written file paths.  ``oracle`` may be a CircleTrajectory
    to overlay on the measured radius.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = read_records_csv(os.path.join(run_dir, "records.csv"))
    manifest = {}
    man_path = os.path.join(run_dir, "manifest.json")
    if os.path.exists(man_path):
        with open(man_path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    initial = manifest.get("initial") or {}
    t = np.array([r["t"] for r in rows])
    out = []

    def save(figure, name):
        path = os.path.join(run_dir, name)
        figure.savefig(path, dpi=130)
        plt.close(figure)
        out.append(path)

    if len(rows) == 0:
        return out

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    energy = np.array([r["energy_J"] for r in rows])
    diss = np.array([r["dissipation_cum"] for r in rows])
    ax.plot(t, energy, label="energy")
    ax.plot(t, energy + 0.5 * diss, "--", label="energy + dissipation/2")
    if initial:
        ax.axhline(initial["energy_J"], color="gray", lw=0.8, label="initial energy")
    ax.set_xlabel("t")
    ax.set_ylabel("interface energy")
    ax.legend()
    fig.tight_layout()
    save(fig, "fig_energy.png")

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    lam = np.array([r["lambda"] for r in rows])
    ax.plot(t, lam)
    ax.set_xlabel("t")
    ax.set_ylabel("rescaled multiplier")
    fig.tight_layout()
    save(fig, "fig_multiplier.png")

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(t, [r["radius"] for r in rows], label="measured radius")
    if oracle is not None:
        for i in range(oracle.radii.shape[1]):
            ax.plot(oracle.times, oracle.radii[:, i], "--", label=f"reference R{i + 1}")
    ax.set_xlabel("t")
    ax.set_ylabel("radius")
    ax.legend()
    fig.tight_layout()
    save(fig, "fig_geometry.png")

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    target = manifest.get("config", {}).get("target_mass", 1.0)
    ax.plot(t, np.array([r["mass_rho"] for r in rows]) - target)
    ax.set_xlabel("t")
    ax.set_ylabel("mass deviation")
    fig.tight_layout()
    save(fig, "fig_mass.png")
    return out


def render_sweep_figure(sweep_dir: str, rows: List[dict]) -> str:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    eps = [r["eps"] for r in rows]
    fig, axes = plt.subplots(1, 2, figsize=(9.0, 4.0))
    axes[0].plot(eps, [r["lambda_l2"] for r in rows], "o-", label="multiplier L2 budget")
    axes[0].plot(eps, [r["forcing_l2_cum"] for r in rows], "s-", label="forcing budget")
    axes[0].set_xlabel("eps")
    axes[0].legend()
    axes[1].plot(eps, [r["energy_in_over_gamma_perimeter"] for r in rows], "o-")
    axes[1].axhline(1.0, color="gray", lw=0.8)
    axes[1].set_xlabel("eps")
    axes[1].set_ylabel("initial energy / (gamma * perimeter)")
    fig.tight_layout()
    path = os.path.join(sweep_dir, "fig_sweep.png")
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path
