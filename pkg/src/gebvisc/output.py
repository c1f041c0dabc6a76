"""CSV histories and legacy-VTK polyline snapshots."""

from __future__ import annotations

import json
import os

import numpy as np

from .assembly import Simulation, Trajectory

FLOAT_FMT = "%.12g"


def write_history_csv(path, traj: Trajectory) -> None:
    """Probe time histories: header ``t,<probe>.u1,...``, one row per step."""
    names = sorted(traj.probes)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        cols = ["t"] + [f"{n}.u{k}" for n in names for k in (1, 2, 3)]
        fh.write(",".join(cols) + "\r\n")
        for i, t in enumerate(traj.times):
            row = [FLOAT_FMT % t]
            for n in names:
                row.extend(FLOAT_FMT % v for v in traj.probes[n][i])
            fh.write(",".join(row) + "\r\n")


def read_history_csv(path):
    """Header list and data array of a history file."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        data = np.array([[float(v) for v in line.strip().split(",")]
                         for line in fh if line.strip()])
    return header, data


def write_vtk_snapshot(path, sim: Simulation, samples_per_patch: int = 200,
                       title: str = "beam snapshot") -> None:
    """Legacy ASCII VTK polydata: dense centroid polylines per patch with the
    displacement vector field attached to the points."""
    points = []
    displacements = []
    lines = []
    offset = 0
    for k in range(len(sim.runtimes)):
        cur, ini = sim.sample_curve(k, samples_per_patch)
        points.append(cur)
        displacements.append(cur - ini)
        lines.append(offset + np.arange(samples_per_patch))
        offset += samples_per_patch
    pts = np.vstack(points)
    disp = np.vstack(displacements)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(title + "\n")
        fh.write("ASCII\nDATASET POLYDATA\n")
        fh.write(f"POINTS {len(pts)} double\n")
        for p in pts:
            fh.write(" ".join(FLOAT_FMT % v for v in p) + "\n")
        total = sum(1 + len(l) for l in lines)
        fh.write(f"LINES {len(lines)} {total}\n")
        for l in lines:
            fh.write(str(len(l)) + " " + " ".join(str(i) for i in l) + "\n")
        fh.write(f"POINT_DATA {len(pts)}\n")
        fh.write("VECTORS displacement double\n")
        for d in disp:
            fh.write(" ".join(FLOAT_FMT % v for v in d) + "\n")


def read_vtk_points(path):
    """Points and displacement vectors of a snapshot written by this module."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    i = next(k for k, l in enumerate(lines) if l.startswith("POINTS"))
    n = int(lines[i].split()[1])
    pts = np.array([[float(v) for v in lines[i + 1 + k].split()]
                    for k in range(n)])
    j = next(k for k, l in enumerate(lines) if l.startswith("VECTORS"))
    disp = np.array([[float(v) for v in lines[j + 1 + k].split()]
                     for k in range(n)])
    return pts, disp


def write_run_metadata(path, scenario: str, params: dict, traj: Trajectory,
                       extra: dict | None = None) -> None:
    meta = {
        "scenario": scenario,
        "parameters": {k: (list(v) if isinstance(v, (tuple, np.ndarray))
                           else v) for k, v in params.items()},
        "steps": len(traj.times) - 1,
        "newton_iterations_total": int(np.sum(traj.iterations)),
        "newton_iterations_max": int(max(traj.iterations, default=0)),
        "wall_time_s": traj.wall_time,
    }
    if extra:
        meta.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, default=str)
        fh.write("\n")


def ensure_dir(path) -> str:
    os.makedirs(path, exist_ok=True)
    return path
