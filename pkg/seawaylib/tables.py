# seawaylib/tables.py
import csv
import logging
from pathlib import Path

import numpy as np

from seawaylib.config import dump_toml
from seawaylib.errors import ScenarioError
from seawaylib.planner import ComparisonReport, ControllerVariant, LogRecord, TrajectoryLog
from seawaylib.vessel import inverse_allocation

logger = logging.getLogger(__name__)

TRAJECTORY_SCHEMA = "seaway-trajectory/1"
COMPARISON_SCHEMA = "seaway-comparison/1"

BASE_COLUMNS = [
    "t", "x", "y", "psi", "u", "v", "r",
    "tau_x", "tau_y", "tau_n",
    "wcx", "wcy", "wrx", "wry",
    "stage_cost", "objective",
]
STATUS_COLUMNS = ["status", "outer_iters", "flag"]
THRUSTER_COLUMNS = ["f1", "f2", "f3"]


def fmt(value) -> str:
    return format(float(value), ".9g")


def log_columns(n_obstacles: int, n_borders: int, with_thrusters: bool = False) -> list:
    cols = list(BASE_COLUMNS)
    cols += [f"h_obs_{i}" for i in range(n_obstacles)]
    cols += [f"h_border_{j}" for j in range(n_borders)]
    cols += STATUS_COLUMNS
    if with_thrusters:
        cols += THRUSTER_COLUMNS
    return cols


def _meta_line(schema: str, meta: dict) -> str:
    return "#" + ",".join([f"schema={schema}"] + [f"{k}={v}" for k, v in meta.items()])


def _parse_meta(line: str) -> dict:
    if not line.startswith("#"):
        raise ScenarioError("Missing schema line at the top of the CSV file")
    meta = {}
    for item in line[1:].strip().split(","):
        key, _, value = item.partition("=")
        meta[key] = value
    return meta


def write_log(log: TrajectoryLog, path, vessel=None, with_thrusters: bool = False):
    """Trajectory CSV: schema line, header, one row per logged step."""
    if with_thrusters and vessel is None:
        raise ValueError("with_thrusters=True needs the vessel parameters")
    meta = {
        "hash": log.scenario_hash,
        "variant": log.variant.value,
        "Ts": repr(float(log.Ts)),
        "reached_goal": int(log.reached_goal),
        "aborted": int(log.aborted),
    }
    with open(path, "w", newline="") as f:
        f.write(_meta_line(TRAJECTORY_SCHEMA, meta) + "\n")
        writer = csv.writer(f)
        writer.writerow(log_columns(log.n_obstacles, log.n_borders, with_thrusters))
        for rec in log.records:
            row = [fmt(rec.t)]
            row += [fmt(v) for v in rec.state]
            row += [fmt(v) for v in rec.tau]
            row += [fmt(v) for v in rec.omega_wc[:2]]
            row += [fmt(v) for v in rec.omega_r[:2]]
            row += [fmt(rec.stage_cost), fmt(rec.objective)]
            row += [fmt(v) for v in rec.h_obs]
            row += [fmt(v) for v in rec.h_border]
            row += [rec.status, str(int(rec.outer_iterations)), rec.flag]
            if with_thrusters:
                forces = inverse_allocation(rec.tau, vessel) if np.all(np.isfinite(rec.tau)) else np.full(3, np.nan)
                row += [fmt(v) for v in forces]
            writer.writerow(row)
    logger.debug("Wrote %d rows to %s", len(log), path)


def read_log(path) -> TrajectoryLog:
    """Parse a trajectory CSV written by write_log."""
    with open(path, newline="") as f:
        meta = _parse_meta(f.readline())
        if meta.get("schema") != TRAJECTORY_SCHEMA:
            raise ScenarioError(f"{path}: not a trajectory log (schema {meta.get('schema')!r})")
        reader = csv.DictReader(f)
        header = reader.fieldnames or []
        n_obs = sum(1 for c in header if c.startswith("h_obs_"))
        n_bor = sum(1 for c in header if c.startswith("h_border_"))
        log = TrajectoryLog(
            scenario_hash=meta.get("hash", ""),
            variant=ControllerVariant.parse(meta.get("variant", "rmpc_cbf")),
            Ts=float(meta.get("Ts", "nan")),
            n_obstacles=n_obs,
            n_borders=n_bor,
            reached_goal=meta.get("reached_goal") == "1",
            aborted=meta.get("aborted") == "1",
        )
        for row in reader:

            def vals(*names):
                return np.array([float(row[n]) for n in names])

            log.records.append(
                LogRecord(
                    t=float(row["t"]),
                    state=vals("x", "y", "psi", "u", "v", "r"),
                    tau=vals("tau_x", "tau_y", "tau_n"),
                    omega_wc=vals("wcx", "wcy"),
                    omega_r=vals("wrx", "wry"),
                    stage_cost=float(row["stage_cost"]),
                    objective=float(row["objective"]),
                    h_obs=vals(*[f"h_obs_{i}" for i in range(n_obs)]),
                    h_border=vals(*[f"h_border_{j}" for j in range(n_bor)]),
                    status=row["status"],
                    outer_iterations=int(row["outer_iters"]),
                    flag=row["flag"],
                )
            )
    if log.records:
        log.final_state = log.records[-1].state.copy()
    return log


def write_comparison(rep: ComparisonReport, path):
    """Aligned series, one column per (variant, series) pair."""
    with open(path, "w", newline="") as f:
        f.write(_meta_line(COMPARISON_SCHEMA, {"hash": rep.scenario_hash}) + "\n")
        writer = csv.writer(f)
        writer.writerow(["t"] + [f"{label}.{name}" for label in rep.labels for name in rep.SERIES])
        for k, t in enumerate(rep.time):
            writer.writerow(
                [fmt(t)] + [fmt(rep.series[label][name][k]) for label in rep.labels for name in rep.SERIES]
            )


def write_summary(rep: ComparisonReport, path):
    data = {"scenario_hash": rep.scenario_hash, "variants": rep.summary}
    with open(path, "w") as f:
        f.write(dump_toml(data))


PLOT_SCRIPT = '''\
"""Plot seaway trajectory CSVs found in this directory.

Usage: python plot_runs.py [csv ...]
Needs matplotlib; nothing in seaway itself renders figures.
"""
import csv
import sys
from pathlib import Path

import matplotlib.pyplot as plt


def load(path):
    with open(path, newline="") as f:
        meta = f.readline()
        rows = list(csv.DictReader(f))
    cols = {key: [float(r[key]) if key not in ("status", "flag") else r[key] for r in rows]
            for key in (rows[0].keys() if rows else [])}
    return meta, cols


def main(paths):
    paths = paths or sorted(str(p) for p in Path(".").glob("*.csv") if p.name != "comparison.csv")
    fig, (ax_xy, ax_speed, ax_tau) = plt.subplots(3, 1, figsize=(8, 10))
    for path in paths:
        meta, cols = load(path)
        if not cols:
            continue
        label = Path(path).stem
        ax_xy.plot(cols["x"], cols["y"], label=label)
        speed = [(u * u + v * v) ** 0.5 for u, v in zip(cols["u"], cols["v"])]
        ax_speed.plot(cols["t"], speed, label=label)
        ax_tau.plot(cols["t"], cols["tau_x"], label=f"{label} tau_x")
    ax_xy.set_xlabel("x [m]")
    ax_xy.set_ylabel("y [m]")
    ax_xy.set_aspect("equal")
    ax_speed.set_ylabel("speed [m/s]")
    ax_tau.set_xlabel("t [s]")
    ax_tau.set_ylabel("tau [N]")
    for ax in (ax_xy, ax_speed, ax_tau):
        ax.legend()
    fig.tight_layout()
    fig.savefig("runs.png", dpi=150)


if __name__ == "__main__":
    main(sys.argv[1:])
'''


def write_plot_script(out_dir) -> Path:
    path = Path(out_dir) / "plot_runs.py"
    path.write_text(PLOT_SCRIPT)
    return path
