"""Poisson jump forcing with Gaussian track kernels.

Marks live on the unit square with intensity ``lambda_jump`` times Lebesgue
measure, so the per-step event count is Poisson with mean
``lambda_jump * dt``.  Each event at ``z`` adds ``A(u(x)) * kappa(x; z)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .rng import JUMP

AMPLITUDES = ("bilinear", "affine")
TRUNCATION = 4.0  # kernel cut-off radius in units of sigma; kappa < e^-8 beyond
DOMAIN_AREA = 1.0


@dataclass(frozen=True)
class JumpConfig:
    lambda_jump: float = 0.0
    sigma_track: float = 0.1
    amplitude: str = "bilinear"
    amplitude_scale: float = 0.5
    compensated: bool = True
    # uncompensated runs only: carry the compensator as explicit drift F2
    # instead of dropping it from the increment (same update, different bookkeeping)
    compensator_in_f2: bool = False

    def __post_init__(self):
        if self.lambda_jump < 0:
            raise ValueError("lambda_jump must be >= 0")
        if not self.sigma_track > 0:
            raise ValueError("sigma_track must be > 0")
        if self.amplitude not in AMPLITUDES:
            raise ValueError(f"amplitude must be one of {AMPLITUDES}")

    def poisson_mean(self, dt):
        return self.lambda_jump * dt * DOMAIN_AREA

    def amp(self, u):
        u = np.asarray(u, dtype=float)
        if self.amplitude == "bilinear":
            return self.amplitude_scale * u * (1.0 - u)
        return self.amplitude_scale * (1.0 - u)


@dataclass
class JumpBatch:
    count: int
    marks: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))
    compensator: np.ndarray | None = None


def sample_batch(config, dt, stream, step):
    if not dt > 0:
        raise ValueError("dt must be > 0")
    rng = stream.generator(JUMP, step)
    count = int(rng.poisson(config.poisson_mean(dt)))
    marks = rng.uniform(0.0, 1.0, size=(count, 2))
    return JumpBatch(count, marks)


def kernel(x, z, sigma):
    """Gaussian track kernel ``exp(-|x - z|^2 / (2 sigma^2))``."""
    d = np.asarray(x, dtype=float) - np.asarray(z, dtype=float)
    return np.exp(-np.sum(d * d, axis=-1) / (2.0 * sigma * sigma))


def _truncated_kernel(x, z, sigma):
    d = np.asarray(x, dtype=float) - np.asarray(z, dtype=float)
    r2 = np.sum(d * d, axis=-1)
    out = np.exp(-r2 / (2.0 * sigma * sigma))
    out[r2 > (TRUNCATION * sigma) ** 2] = 0.0
    return out


def kernel_sum(mesh, marks, sigma):
    """Nodewise sum of truncated kernels over all marks."""
    total = np.zeros(mesh.n_nodes)
    for z in np.atleast_2d(marks):
        total += _truncated_kernel(mesh.node_coords, z, sigma)
    return total


@lru_cache(maxsize=8)
def _kernel_integrals(n, sigma):
    h = 1.0 / n
    centers_1d = (np.arange(n) + 0.5) * h
    cx, cy = np.meshgrid(centers_1d, centers_1d)
    centers = np.column_stack([cx.ravel(), cy.ravel()])
    x = np.arange(n + 1) * h
    nx, ny = np.meshgrid(x, x)
    nodes = np.column_stack([nx.ravel(), ny.ravel()])
    out = np.empty(len(nodes))
    chunk = max(1, 2_000_000 // len(centers))
    for start in range(0, len(nodes), chunk):
        blk = nodes[start:start + chunk]
        d2 = ((blk[:, None, :] - centers[None, :, :]) ** 2).sum(axis=-1)
        k = np.exp(-d2 / (2.0 * sigma * sigma))
        k[d2 > (TRUNCATION * sigma) ** 2] = 0.0
        out[start:start + chunk] = k.sum(axis=1) * h * h
    out.setflags(write=False)
    return out


def kernel_integrals(mesh, sigma):
    """``int_O kappa(x_i; z) dz`` per node, midpoint rule on the mesh cells.

    State independent, so it is computed once per (mesh size, sigma).
    """
    return _kernel_integrals(mesh.n, float(sigma))


def raw_increment(u, batch, config, mesh):
    if batch.count == 0:
        return np.zeros(mesh.n_nodes)
    return config.amp(u) * kernel_sum(mesh, batch.marks, config.sigma_track)


def compensator_field(u, config, mesh, dt):
    if config.lambda_jump == 0:
        return np.zeros(mesh.n_nodes)
    return dt * config.lambda_jump * config.amp(u) * kernel_integrals(mesh, config.sigma_track)


def assemble_jump_increment(u, batch, config, mesh, dt):
    """Compensated (``raw - compensator``) or plain raw jump increment."""
    raw = raw_increment(u, batch, config, mesh)
    if config.compensated:
        comp = compensator_field(u, config, mesh, dt)
        batch.compensator = comp
        return raw - comp
    batch.compensator = np.zeros(mesh.n_nodes)
    return raw


def jump_forcing(u, batch, config, mesh, dt):
    """Increment and explicit drift ``F2`` that the stepper should use.

    For uncompensated runs with ``compensator_in_f2`` the increment stays
    compensated and the compensator reappears as ``F2 = compensator / dt``.
    """
    if not config.compensated and config.compensator_in_f2:
        comp = compensator_field(u, config, mesh, dt)
        batch.compensator = comp
        return raw_increment(u, batch, config, mesh) - comp, comp / dt
    return assemble_jump_increment(u, batch, config, mesh, dt), np.zeros(mesh.n_nodes)
