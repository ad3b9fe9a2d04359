#!/usr/bin/env python3
"""Plot a solve/simulate run directory.

Reads ``trajectory.csv`` (and ``summary.json`` when present) from a run
directory produced by ``dubinsopt solve``/``dubinsopt simulate`` and
writes a three-panel figure: planar path, altitude profile, and
per-obstacle clearance over time.  Pass the scenario (JSON file or
preset name) to overlay the intruder tracks.

Usage:
    python3 scripts/plot_run.py out/run1 --preset example1
    python3 scripts/plot_run.py out/run2 --scenario my_scenario.json --out fig.png
"""

import argparse
import csv
import json
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

sys.path.insert(
    0, os.path.join(os.path.dirname(os.path.dirname(__file__)), "src")
)

from dubinsopt.io import load_scenario  # noqa: E402
from dubinsopt.scenarios import preset  # noqa: E402


def read_trajectory(path):
    with open(path) as f:
        reader = csv.reader(f)
        header = next(reader)
        rows = list(reader)
    cols = {name: i for i, name in enumerate(header)}
    n_obs = sum(1 for name in header if name.startswith("clearance_"))
    t = np.array([float(r[cols["t"]]) for r in rows])
    xyz = np.array(
        [[float(r[cols[a]]) for a in ("x", "y", "z")] for r in rows]
    )
    clearances = np.full((n_obs, len(rows)), np.nan)
    for i in range(n_obs):
        j = cols[f"clearance_{i + 1}"]
        for n, r in enumerate(rows):
            if r[j] != "":
                clearances[i, n] = float(r[j])
    return t, xyz, clearances


def load_obstacles(args):
    if args.preset is not None:
        return preset(args.preset).scenario.obstacles
    if args.scenario is not None:
        scenario, _, _ = load_scenario(args.scenario)
        return scenario.obstacles
    return ()


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("run_dir", help="directory with trajectory.csv")
    parser.add_argument("--scenario", help="scenario JSON to overlay")
    parser.add_argument("--preset", help="built-in scenario to overlay")
    parser.add_argument("--out", help="output image (default run_dir/plot.png)")
    args = parser.parse_args(argv)

    traj_path = os.path.join(args.run_dir, "trajectory.csv")
    t, xyz, clearances = read_trajectory(traj_path)
    obstacles = load_obstacles(args)

    summary = None
    summary_path = os.path.join(args.run_dir, "summary.json")
    if os.path.exists(summary_path):
        with open(summary_path) as f:
            summary = json.load(f)

    fig, (ax_xy, ax_z, ax_c) = plt.subplots(1, 3, figsize=(15, 4.5))

    ax_xy.plot(xyz[:, 0], xyz[:, 1], "-", color="tab:blue", label="vehicle")
    ax_xy.plot(*xyz[0, :2], "o", color="tab:green", label="start")
    ax_xy.plot(*xyz[-1, :2], "s", color="tab:red", label="end")
    ax_z.plot(t, xyz[:, 2], "-", color="tab:blue", label="vehicle")

    for i, obs in enumerate(obstacles):
        lo, hi = obs.domain
        tt = np.linspace(lo, min(hi, t[-1]), 400)
        if tt[-1] <= tt[0]:
            continue
        pos, mask = obs.position_many(tt)
        pos = pos[mask]
        label = f"intruder {i + 1}"
        ax_xy.plot(pos[:, 0], pos[:, 1], "--", alpha=0.8, label=label)
        ax_z.plot(tt[mask], pos[:, 2], "--", alpha=0.8, label=label)

    ax_xy.set_xlabel("x [m]")
    ax_xy.set_ylabel("y [m]")
    ax_xy.set_title("planar path")
    ax_xy.axis("equal")
    ax_xy.legend(fontsize=8)

    ax_z.set_xlabel("t [s]")
    ax_z.set_ylabel("z [m]")
    ax_z.set_title("altitude")
    ax_z.legend(fontsize=8)

    for i in range(clearances.shape[0]):
        ax_c.plot(t, clearances[i], label=f"intruder {i + 1}")
    ax_c.axhline(0.0, color="k", lw=0.8)
    ax_c.set_xlabel("t [s]")
    ax_c.set_ylabel("clearance [m]")
    ax_c.set_title("separation margin")
    if clearances.shape[0]:
        ax_c.legend(fontsize=8)

    title = os.path.basename(os.path.normpath(args.run_dir))
    if summary is not None:
        title += (
            f"   T={summary['T']:.4f}  violation={summary['violation']:.1e}"
            f"  converged={summary['converged']}"
        )
    fig.suptitle(title)
    fig.tight_layout()

    out = args.out or os.path.join(args.run_dir, "plot.png")
    fig.savefig(out, dpi=150)
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
