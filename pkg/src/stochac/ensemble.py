"""Multi-realization runs and the estimators built on them.

Realization ``i`` of an ensemble with seed ``s`` always uses the streams keyed
by ``(s, i)``, so results do not depend on worker count or completion order.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import StepFailure
from .jumps import JumpConfig
from .stepper import run_realization
from .wiener import WienerConfig

log = logging.getLogger(__name__)


@dataclass
class EnsembleStats:
    times: np.ndarray
    mean_total_damage: np.ndarray
    std_total_damage: np.ndarray
    mean_umin: np.ndarray
    min_umin: np.ndarray
    mean_umax: np.ndarray
    max_umax: np.ndarray
    mean_sq_H_norm: np.ndarray
    records: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    @property
    def n(self):
        return len(self.records)

    @property
    def se_total_damage(self):
        return self.std_total_damage / math.sqrt(max(self.n, 1))


@dataclass
class CouplingRecord:
    times: np.ndarray
    mean_sq_distance: np.ndarray
    se_sq_distance: np.ndarray
    fitted_rate: float


def _run_one(args):
    cfg, realization, extra = args
    parts = cfg.build()
    try:
        rec = run_realization(
            cfg.scenario, parts.scheme, parts.mesh, parts.split, parts.wiener, parts.jump,
            seed=cfg.seed, realization=realization, init_amplitude=cfg.init_amplitude,
            snapshot_times=cfg.snapshots, record_events=cfg.record_events, **extra)
        return realization, rec, None
    except StepFailure as exc:
        return realization, getattr(exc, "record", None), str(exc)


def _map(tasks, workers):
    if workers and workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_one, tasks))
    return [_run_one(t) for t in tasks]


def summarize(records):
    """Pointwise-in-time sample statistics of finished records."""
    td = np.array([r.total_damage for r in records])
    umin = np.array([r.u_min for r in records])
    umax = np.array([r.u_max for r in records])
    sq = np.array([r.sq_h_norm for r in records])
    std = td.std(axis=0, ddof=1) if len(records) > 1 else np.zeros(td.shape[1])
    return EnsembleStats(
        times=records[0].times.copy(),
        mean_total_damage=td.mean(axis=0),
        std_total_damage=std,
        mean_umin=umin.mean(axis=0),
        min_umin=umin.min(axis=0),
        mean_umax=umax.mean(axis=0),
        max_umax=umax.max(axis=0),
        mean_sq_H_norm=sq.mean(axis=0),
        records=list(records),
    )


def run_ensemble(base_cfg, n_realizations, seed=None, workers=None):
    """Run ``n_realizations`` paths of ``base_cfg``.

    Failed realizations are listed in ``stats.failures`` as
    ``(realization, message)`` and left out of the statistics.
    """
    if n_realizations < 1:
        raise ValueError("n_realizations must be >= 1")
    cfg = base_cfg if seed is None else base_cfg.replace(seed=seed)
    workers = cfg.workers if workers is None else workers
    results = sorted(_map([(cfg, i, {}) for i in range(n_realizations)], workers),
                     key=lambda r: r[0])
    ok = [rec for _, rec, err in results if err is None]
    failures = [(i, err) for i, _, err in results if err is not None]
    if not ok:
        raise StepFailure(f"all {n_realizations} realizations failed: {failures[0][1]}", float("nan"))
    stats = summarize(ok)
    stats.failures = failures
    for i, err in failures:
        log.warning("realization %d failed: %s", i, err)
    return stats


def coupled_decay(x0, y0, base_cfg, n_pairs, seed=None, fit_window=(0.25, 1.0)):
    """Synchronously coupled pairs started from ``x0`` and ``y0``.

    Both members of pair ``i`` use realization ``i``'s Wiener and jump
    streams.  The rate is the least-squares slope of ``log E|u^x - u^y|^2``
    over the fraction ``fit_window`` of the time interval; it is NaN when the
    distance vanishes there.
    """
    cfg = base_cfg if seed is None else base_cfg.replace(seed=seed)
    parts = cfg.build()
    m = parts.mesh.lumped_mass
    dists = []
    for i in range(n_pairs):
        runs = []
        for u0 in (x0, y0):
            rec = run_realization(cfg.scenario, parts.scheme, parts.mesh, parts.split,
                                  parts.wiener, parts.jump, seed=cfg.seed, realization=i,
                                  u0=u0, keep_trajectory=True)
            runs.append(np.array(rec.trajectory))
        diff = runs[0] - runs[1]
        dists.append((diff * diff) @ m)
        times = rec.times
    dists = np.array(dists)
    mean = dists.mean(axis=0)
    se = dists.std(axis=0, ddof=1) / math.sqrt(n_pairs) if n_pairs > 1 else np.zeros_like(mean)
    T = times[-1]
    sel = (times >= fit_window[0] * T) & (times <= fit_window[1] * T) & (mean > 0)
    rate = float(np.polyfit(times[sel], np.log(mean[sel]), 1)[0]) if sel.sum() >= 2 else float("nan")
    return CouplingRecord(times.copy(), mean, se, rate)


def moment_bound_check(stats, x_sq_norm=None, domain_area=1.0, L=1.0, plateau_tol=0.05):
    """Uniform-in-time second-moment report for a finished ensemble.

    ``bound`` is the smallest ``B`` with ``E|u(t)|^2 <= |x|^2 + B`` along the
    run.  ``plateau`` tells whether the last quarter of the curve varies by
    less than ``plateau_tol`` relative to its mean.  Any time with a value
    above ``|O| L^2`` (impossible for a confined field) is flagged.
    """
    q = stats.mean_sq_H_norm
    x2 = float(q[0]) if x_sq_norm is None else float(x_sq_norm)
    tail = q[len(q) * 3 // 4:]
    ceiling = domain_area * L * L
    flagged = stats.times[q > ceiling + 1e-9]
    return {
        "sup_mean_sq_H_norm": float(q.max()),
        "initial_sq_norm": x2,
        "bound": float(q.max() - x2),
        "finite": bool(np.all(np.isfinite(q))),
        "plateau": bool(tail.size == 0 or np.ptp(tail) <= plateau_tol * max(abs(tail.mean()), 1e-300)),
        "confined": bool(flagged.size == 0),
        "flagged_times": flagged.tolist(),
    }


def _functional(record, phi):
    if phi == "total_damage":
        return record.total_damage
    if phi == "energy":
        return record.free_energy
    raise ValueError(f"unknown functional {phi!r}")


def time_average_functional(record, phi, burn_in=0.0):
    """Right-endpoint time average of ``phi`` over ``(burn_in, T]``."""
    T = record.times[-1]
    if not burn_in < T:
        raise ValueError("burn_in must be < T")
    values = _functional(record, phi)
    sel = record.times > burn_in
    tau = record.times[1] - record.times[0]
    return float(tau * values[sel].sum() / (T - burn_in))


def batch_means_se(record, phi, burn_in=0.0, n_batches=10):
    """Batch-means standard error of :func:`time_average_functional`."""
    values = _functional(record, phi)[record.times > burn_in]
    size = len(values) // n_batches
    if size < 1:
        raise ValueError("too few samples for the requested batches")
    means = values[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(n_batches))


def _sup_sq_diff(a, b, m):
    d = np.array(a) - np.array(b)
    return float(((d * d) @ m).max())


def _trajectory(cfg, parts, scheme, realization):
    rec = run_realization(cfg.scenario, scheme, parts.mesh, parts.split, parts.wiener,
                          parts.jump, seed=cfg.seed, realization=realization,
                          init_amplitude=cfg.init_amplitude, keep_trajectory=True)
    return rec.trajectory


def yosida_cauchy_check(base_cfg, lambdas, seed=None, realization=0):
    """Compare Yosida-regularized runs against each other and the exact barrier.

    All runs share one noise path.  ``to_exact[k]`` is
    ``sup_t |u_lambda_k(t) - u_exact(t)|^2`` and ``pairwise[k]`` the same
    distance between consecutive entries of ``lambdas``.  ``c_fit`` is the
    largest ratio of a pairwise distance to ``lambda_1 + lambda_2``.
    """
    if len(lambdas) < 2:
        raise ValueError("need at least two lambdas")
    cfg = base_cfg if seed is None else base_cfg.replace(seed=seed)
    parts = cfg.build()
    m = parts.mesh.lumped_mass
    exact = _trajectory(cfg, parts, cfg.replace(mode="exact_barrier", lam=None).build().scheme, realization)
    trajs = [_trajectory(cfg, parts, cfg.replace(mode="yosida", lam=lam).build().scheme, realization)
             for lam in lambdas]
    to_exact = [_sup_sq_diff(t, exact, m) for t in trajs]
    pairwise = [_sup_sq_diff(trajs[k], trajs[k + 1], m) for k in range(len(lambdas) - 1)]
    ratios = [p / (lambdas[k] + lambdas[k + 1]) for k, p in enumerate(pairwise)]
    order = np.argsort(lambdas)[::-1]
    ordered = [to_exact[k] for k in order]
    return {
        "lambdas": [float(lambdas[k]) for k in order],
        "to_exact": ordered,
        "pairwise": pairwise,
        "c_fit": float(max(ratios)),
        "decreasing": bool(all(a > b for a, b in zip(ordered, ordered[1:]))),
    }


def tau_refinement_check(base_cfg, taus, t_final=1.0):
    """Deterministic time-step refinement study.

    Noise and jumps are switched off.  ``diffs[k]`` is the sup-norm distance
    at ``t_final`` between the runs with ``taus[k]`` and ``taus[k + 1]``;
    ``orders`` are the observed convergence orders from consecutive ratios,
    assuming each tau is half the previous one.
    """
    cfg = base_cfg.replace(c_noise=0.0, lambda_jump=0.0, t_final=t_final)
    finals = []
    for tau in taus:
        c = cfg.replace(tau=tau)
        parts = c.build()
        rec = run_realization(c.scenario, parts.scheme, parts.mesh, parts.split, WienerConfig(0.0),
                              JumpConfig(0.0), seed=c.seed, init_amplitude=c.init_amplitude)
        finals.append(rec.final)
    diffs = [float(np.max(np.abs(a - b))) for a, b in zip(finals, finals[1:])]
    orders = [math.log2(a / b) for a, b in zip(diffs, diffs[1:]) if b > 0]
    return {"taus": list(taus), "diffs": diffs, "orders": orders}
