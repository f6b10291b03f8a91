"""Implicit-explicit Euler-Maruyama stepping on the P1 space.

One step solves, with lumped mass ``m`` and nodal nonlinearities,

    m u + tau eps K u + tau m (Psi'(u) + F1(u))
        = m (u_n + tau F2 + G(u_n) dW + dJ)

by damped Newton.  The Jacobian ``diag(m (1 + tau (Psi'' + F1'))) + tau eps K``
is SPD and handed to CG.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import expit, logit

from . import jumps, wiener
from .errors import ConfigError, SolverError, StepFailure
from .mesh import DIRICHLET, apply_bc, solve_spd
from .potential import free_energy
from .rng import INITIAL, Stream

log = logging.getLogger(__name__)

MODES = ("exact_barrier", "yosida")
SPLITTINGS = ("implicit_f1", "convex_split")
SCENARIOS = ("random_half", "circle", "constant")
BARRIER_GAP = 1e-14  # relative distance Newton iterates keep from 0 and L
_SAFE_FRACTION = 0.1


@dataclass(frozen=True)
class SchemeConfig:
    tau: float = 0.05
    t_final: float = 4.0
    eps: float = 1.0 / 1600.0
    mode: str = "exact_barrier"
    lam: float | None = None
    splitting: str = "implicit_f1"
    newton_tol: float = 1e-10
    newton_max_iter: int = 60
    cg_tol: float = 1e-10
    cg_max_iter: int = 5000

    def __post_init__(self):
        if not self.tau > 0:
            raise ConfigError("tau must be > 0", "tau")
        if not self.eps > 0:
            raise ConfigError("eps must be > 0", "eps")
        if self.t_final < 0:
            raise ConfigError("t_final must be >= 0", "t_final")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}", "mode")
        if self.mode == "yosida" and not (self.lam is not None and self.lam > 0):
            raise ConfigError("yosida mode needs lam > 0", "lam")
        if self.splitting not in SPLITTINGS:
            raise ConfigError(f"splitting must be one of {SPLITTINGS}", "splitting")
        n = self.n_steps
        if abs(n * self.tau - self.t_final) > 1e-9 * max(1.0, self.t_final):
            raise ConfigError("t_final must be an integer multiple of tau", "t_final")

    @property
    def n_steps(self):
        return int(round(self.t_final / self.tau))

    def check_split(self, split):
        """Reject parameter pairs for which the Newton Jacobian may lose SPD."""
        if self.splitting == "implicit_f1" and not self.tau * split.f1_coeff < 1.0:
            raise ConfigError(
                f"tau * f1_coeff = {self.tau * split.f1_coeff:g} must be < 1 with implicit F1", "tau"
            )


@dataclass
class RunRecord:
    times: np.ndarray
    total_damage: np.ndarray
    u_min: np.ndarray
    u_max: np.ndarray
    free_energy: np.ndarray
    sq_h_norm: np.ndarray
    newton_iters: np.ndarray
    jump_counts: np.ndarray
    snapshots: dict = field(default_factory=dict)
    events: list = field(default_factory=list)
    final: np.ndarray | None = None
    trajectory: list | None = None
    failure: str | None = None

    @property
    def n_steps(self):
        return len(self.newton_iters)


class _Nonlinearity:
    """Nodal ``Psi'`` / ``Psi''`` for the selected mode."""

    def __init__(self, cfg, split):
        self.split = split
        self.exact = cfg.mode == "exact_barrier"
        self.yos = None if self.exact else split.yosida(cfg.lam)

    def prime(self, u):
        return self.split.psi_prime(u) if self.exact else self.yos.prime(u)

    def second(self, u):
        return self.split.psi_second(u) if self.exact else self.yos.second(u)

    def state(self, u):
        """Where state-dependent noise coefficients are evaluated."""
        return u if self.exact else self.yos.resolvent(u)


def _barrier_update(u, du, alpha, L):
    """Per node: linear step if it keeps a safe distance from 0 and L, else a
    step of the same first-order size taken in the logit variable."""
    trial = u + alpha * du
    safe = (trial > _SAFE_FRACTION * u) & (L - trial > _SAFE_FRACTION * (L - u))
    if not np.all(safe):
        uu = u[~safe]
        slope = uu * (L - uu) / L  # du/dy at y = logit(u/L)
        y = logit(uu / L) + alpha * du[~safe] / slope
        trial[~safe] = L * expit(y)
    return np.clip(trial, BARRIER_GAP * L, (1.0 - BARRIER_GAP) * L)


def _freeze(A, b, mask):
    """Symmetrically remove the unknowns in ``mask`` (their update is zero)."""
    keep = sp.diags((~mask).astype(float))
    A = (keep @ A @ keep + sp.diags(mask.astype(float))).tocsr()
    b = np.where(mask, 0.0, b)
    return A, b


def imex_step(u_n, noise_inc, jump_inc, f2_field, cfg, mesh, split, _nl=None):
    """Advance one step.

    ``noise_inc`` is the already weighted Wiener term ``G(u_n) dW`` and
    ``jump_inc`` the jump increment, both nodal.  Returns ``(u_next, iters)``.
    Under Dirichlet conditions boundary nodes keep their values from ``u_n``.
    """
    nl = _nl or _Nonlinearity(cfg, split)
    tau, L = cfg.tau, split.L
    m = mesh.lumped_mass
    lin = (cfg.tau * cfg.eps) * mesh.stiffness
    dirichlet = mesh.bc == DIRICHLET
    interior = ~mesh.boundary_mask

    rhs = u_n + tau * f2_field + noise_inc + jump_inc
    implicit_f1 = cfg.splitting == "implicit_f1"
    if not implicit_f1:
        rhs = rhs - tau * split.f1(u_n)

    def residual(u):
        r = u + (lin @ u) / m + tau * nl.prime(u) - rhs
        if implicit_f1:
            r += tau * split.f1(u)
        if dirichlet:
            r[~interior] = 0.0
        return r

    lo, hi = BARRIER_GAP * L, (1.0 - BARRIER_GAP) * L

    def effective(r, u):
        # nodes held at the feasibility clamp whose residual points further
        # out are treated as active bounds: the exact root is unrepresentable
        if not nl.exact:
            return r, None
        pinned = ((u >= hi) & (r < 0)) | ((u <= lo) & (r > 0))
        if not pinned.any():
            return r, None
        r = r.copy()
        r[pinned] = 0.0
        return r, pinned

    def scale(u):
        # attainable accuracy per node: near the barriers Psi' amplifies the
        # rounding of u itself by tau * Psi''(u)
        floor = 8.0 * np.finfo(float).eps * (1.0 + np.abs(rhs) + tau * L * nl.second(u))
        return np.maximum(cfg.newton_tol, floor)

    u = np.array(u_n, dtype=float)
    if nl.exact:
        u = np.clip(u, lo, hi)
    r, pinned = effective(residual(u), u)
    f1p = -split.f1_coeff if implicit_f1 else 0.0
    for it in range(cfg.newton_max_iter + 1):
        w = 1.0 / scale(u)
        merit = np.linalg.norm(w * r)
        if np.all(np.abs(r) * w <= 1.0):
            return u, it
        if it == cfg.newton_max_iter:
            break
        diag = m * (1.0 + tau * (nl.second(u) + f1p))
        J = (lin + sp.diags(diag)).tocsr()
        A, b = apply_bc(mesh, J, -m * r)
        if pinned is not None:
            A, b = _freeze(A, b, pinned)
        try:
            du = solve_spd(A, b, tol=cfg.cg_tol, max_iter=cfg.cg_max_iter)
        except SolverError as exc:
            raise StepFailure("linear solve failed", exc.residual) from exc

        # backtracking on the floor-weighted residual norm; the Newton
        # direction is a descent direction for any fixed diagonal weighting
        alpha = 1.0
        while True:
            trial = _barrier_update(u, du, alpha, L) if nl.exact else u + alpha * du
            if dirichlet:
                trial[~interior] = u_n[~interior]
            r_trial, p_trial = effective(residual(trial), trial)
            m_trial = np.linalg.norm(w * r_trial)
            if m_trial <= (1.0 - 1e-4 * alpha) * merit or m_trial == 0.0:
                break
            alpha *= 0.5
            if alpha < 1e-10:
                if np.all(np.abs(r_trial) <= scale(trial)):
                    break
                raise StepFailure("line search stalled", float(np.max(np.abs(r))))
        u, r, pinned = trial, r_trial, p_trial
    raise StepFailure("Newton did not converge", float(np.max(np.abs(r))))


def initial_datum(scenario, mesh, eps, stream=None, amplitude=0.05, n_modes=8):
    """Initial field.

    ``random_half``: 0.5 plus a smooth mean-free sine series with coefficients
    decaying like ``1/(k^2 + l^2)``, scaled to sup-norm ``amplitude`` and
    clipped to [0.01, 0.99].  ``circle``: a healthy disc of radius 0.4 with a
    tanh interface of width ``sqrt(2 eps)``.  ``constant``: 0.5 everywhere.
    """
    if scenario == "constant":
        return np.full(mesh.n_nodes, 0.5)
    if scenario == "circle":
        r = np.linalg.norm(mesh.node_coords - 0.5, axis=1)
        return 0.5 * (1.0 - np.tanh((0.4 - r) / math.sqrt(2.0 * eps)))
    if scenario == "random_half":
        stream = stream or Stream()
        rng = stream.generator(INITIAL)
        k = np.arange(1, n_modes + 1)
        decay = 1.0 / (k[:, None] ** 2 + k[None, :] ** 2)
        xi = rng.standard_normal((n_modes, n_modes)) * decay
        eta = wiener.sine_basis(mesh, n_modes) @ xi.ravel()
        eta = wiener.remove_mean(mesh, eta)
        eta *= amplitude / np.max(np.abs(eta))
        return np.clip(0.5 + eta, 0.01, 0.99)
    raise ValueError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")


def _observe(mesh, u, split, cfg):
    m = mesh.lumped_mass
    lam = None if cfg.mode == "exact_barrier" else cfg.lam
    try:
        energy = free_energy(mesh, u, split, cfg.eps, lam=lam)
    except ValueError:
        energy = float("nan")
    return float(m @ u), float(u.min()), float(u.max()), energy, float(m @ (u * u))


def run_realization(scenario, cfg, mesh, split, wiener_cfg, jump_cfg, seed=0,
                    realization=0, u0=None, snapshot_times=(), record_events=False,
                    keep_trajectory=False, init_amplitude=0.05):
    """Simulate one path and record observables at every step.

    ``u0`` overrides the scenario's initial datum (used for coupled runs).
    On a step failure the partially filled record is attached to the raised
    :class:`StepFailure` as ``exc.record``.
    """
    cfg.check_split(split)
    stream = Stream(seed, realization)
    if u0 is None:
        u = initial_datum(scenario, mesh, cfg.eps, stream, amplitude=init_amplitude)
    else:
        u = np.array(u0, dtype=float)
    n = cfg.n_steps
    times = np.arange(n + 1) * cfg.tau
    obs = np.full((n + 1, 5), np.nan)
    iters = np.zeros(n, dtype=np.int64)
    counts = np.zeros(n, dtype=np.int64)
    snaps = {}
    wanted = {int(round(t / cfg.tau)): t for t in snapshot_times}
    events = []
    traj = [u.copy()] if keep_trajectory else None
    nl = _Nonlinearity(cfg, split)

    obs[0] = _observe(mesh, u, split, cfg)
    if 0 in wanted:
        snaps[wanted[0]] = u.copy()

    def record(done, failure=None):
        # ``done`` completed steps; a failed run keeps only what was observed
        o = obs[: done + 1]
        return RunRecord(times[: done + 1].copy(), *(o[:, k].copy() for k in range(5)),
                         iters[:done].copy(), counts[:done].copy(), snaps, events, u.copy(),
                         traj, failure)

    for step in range(n):
        state = nl.state(u)
        dw = wiener.sample_increment(wiener_cfg, mesh, cfg.tau, stream, step)
        noise = wiener.apply_prefactor(state, dw, wiener_cfg.c_noise)
        batch = jumps.sample_batch(jump_cfg, cfg.tau, stream, step)
        dj, f2 = jumps.jump_forcing(state, batch, jump_cfg, mesh, cfg.tau)
        try:
            u, iters[step] = imex_step(u, noise, dj, f2, cfg, mesh, split, _nl=nl)
        except StepFailure as exc:
            exc.step = step
            exc.record = record(step, failure=str(exc))
            raise
        counts[step] = batch.count
        if record_events:
            t = times[step + 1]
            events.extend((step, t, z[0], z[1]) for z in batch.marks)
        obs[step + 1] = _observe(mesh, u, split, cfg)
        if nl.exact and not (obs[step + 1, 1] > 0 and obs[step + 1, 2] < split.L):
            raise AssertionError(f"barrier breached at step {step}")  # unreachable by construction
        if not nl.exact and not (obs[step + 1, 1] > 0 and obs[step + 1, 2] < split.L):
            log.warning("yosida iterate left (0, L) at step %d: [%g, %g]",
                        step, obs[step + 1, 1], obs[step + 1, 2])
        if step + 1 in wanted:
            snaps[wanted[step + 1]] = u.copy()
        if keep_trajectory:
            traj.append(u.copy())
    return record(n)
