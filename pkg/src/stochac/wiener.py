"""Truncated sine-series Wiener increments with a phase-localized prefactor."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .rng import WIENER


@dataclass(frozen=True)
class WienerConfig:
    """Noise parameters.

    The default ``alpha = 2 / n_modes`` gives the sine field unit mean
    pointwise variance, so ``c_noise`` alone sets the noise strength.
    """

    c_noise: float = 0.5
    alpha: float = 0.125
    n_modes: int = 16

    def __post_init__(self):
        if self.c_noise < 0:
            raise ValueError("c_noise must be >= 0")
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")
        if int(self.n_modes) != self.n_modes or self.n_modes < 1:
            raise ValueError("n_modes must be an integer >= 1")


@lru_cache(maxsize=16)
def _basis(n, n_modes):
    h = 1.0 / n
    x = np.arange(n + 1) * h
    k = np.arange(1, n_modes + 1)
    s = np.sin(np.pi * np.outer(x, k))  # (n+1, K)
    # node (i, j) -> row j*(n+1)+i; mode (k, l) -> column k*K+l
    B = np.einsum("ik,jl->jikl", s, s).reshape((n + 1) ** 2, n_modes * n_modes)
    B.setflags(write=False)
    return B


def sine_basis(mesh, n_modes):
    """Nodal values of ``sin(k pi x1) sin(l pi x2)`` for ``1 <= k, l <= n_modes``."""
    return _basis(mesh.n, int(n_modes))


def remove_mean(mesh, field):
    m = mesh.lumped_mass
    return field - (m @ field) / m.sum()


def sample_increment(config, mesh, dt, stream, step):
    """``sqrt(dt) * eta`` with ``eta`` the mean-free sine field of one step."""
    if not dt > 0:
        raise ValueError("dt must be > 0")
    rng = stream.generator(WIENER, step)
    xi = rng.standard_normal(config.n_modes * config.n_modes)
    eta = config.alpha * (sine_basis(mesh, config.n_modes) @ xi)
    return np.sqrt(dt) * remove_mean(mesh, eta)


def prefactor(u, c_noise):
    """``G(u) = c_noise * u * (1 - u)``, nodewise."""
    u = np.asarray(u, dtype=float)
    return c_noise * u * (1.0 - u)


def apply_prefactor(u, increment, c_noise):
    u = np.asarray(u, dtype=float)
    increment = np.asarray(increment, dtype=float)
    if u.shape != increment.shape:
        raise ValueError(f"length mismatch: {u.shape} vs {increment.shape}")
    return prefactor(u, c_noise) * increment
