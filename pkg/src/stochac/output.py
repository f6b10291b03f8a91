"""CSV, manifest and raster writers.

All CSVs carry a header row, use ``.`` as decimal separator and ``\\n`` line
endings.  Floats are written with ``repr`` so files round-trip exactly.
"""
from __future__ import annotations

import csv
import platform
from pathlib import Path

import numpy as np

from . import __version__
from .config import serialize_config


def _writer(path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fh = open(path, "w", newline="")
    return fh, csv.writer(fh, lineterminator="\n")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return v


def write_table(path, header, columns):
    """Write equally long columns under ``header``."""
    fh, w = _writer(path)
    with fh:
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([_fmt(v) for v in row])


def write_record_csv(record, path):
    """One row per recorded time; per-step counters are blank at t = 0."""
    n = len(record.times)
    iters = [""] + [int(v) for v in record.newton_iters]
    counts = [""] + [int(v) for v in record.jump_counts]
    write_table(
        path,
        ["step", "time", "total_damage", "u_min", "u_max", "free_energy", "sq_H_norm",
         "newton_iters", "jump_count"],
        [range(n), record.times, record.total_damage, record.u_min, record.u_max,
         record.free_energy, record.sq_h_norm, iters, counts],
    )


def write_events_csv(events, path):
    cols = list(zip(*events)) if events else [[], [], [], []]
    write_table(path, ["step", "time", "z1", "z2"], cols)


def snapshot_name(t):
    return f"snap_t{t:g}.csv"


def write_snapshot_csv(field, mesh, path):
    """Nodal values as a grid: row ``j`` holds the nodes with ``x2 = j h``."""
    grid = np.asarray(field, dtype=float).reshape(mesh.shape)
    fh, w = _writer(path)
    with fh:
        w.writerow([f"i{i}" for i in range(grid.shape[1])])
        for row in grid:
            w.writerow([repr(float(v)) for v in row])


def read_snapshot_csv(path):
    return np.loadtxt(path, delimiter=",", skiprows=1).ravel()


def write_pgm(field, mesh, path, L=1.0):
    """8-bit binary PGM, top row = largest x2."""
    grid = np.asarray(field, dtype=float).reshape(mesh.shape)[::-1]
    img = np.clip(np.rint(255.0 * grid / L), 0, 255).astype(np.uint8)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def write_vtk(field, mesh, path, name="u"):
    """Legacy-VTK structured points file."""
    m = mesh.n + 1
    lines = [
        "# vtk DataFile Version 3.0",
        name,
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {m} {m} 1",
        "ORIGIN 0 0 0",
        f"SPACING {mesh.h!r} {mesh.h!r} 1",
        f"POINT_DATA {m * m}",
        f"SCALARS {name} double 1",
        "LOOKUP_TABLE default",
    ]
    lines += [repr(float(v)) for v in field]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")


def write_manifest(cfg, path, **extra):
    """Resolved configuration plus provenance, as ``key = value`` lines."""
    text = serialize_config(cfg)
    text += f"code_version = {__version__}\n"
    text += f"numpy_version = {np.__version__}\n"
    text += f"python_version = {platform.python_version()}\n"
    for k, v in extra.items():
        text += f"{k} = {v}\n"
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def write_stats_csv(stats, path):
    write_table(
        path,
        ["time", "mean_total_damage", "std_total_damage", "mean_umin", "min_umin",
         "mean_umax", "max_umax", "mean_sq_H_norm"],
        [stats.times, stats.mean_total_damage, stats.std_total_damage, stats.mean_umin,
         stats.min_umin, stats.mean_umax, stats.max_umax, stats.mean_sq_H_norm],
    )


def write_coupling_csv(coupling, path):
    write_table(path, ["time", "mean_sq_distance"], [coupling.times, coupling.mean_sq_distance])
