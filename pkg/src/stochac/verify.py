"""Property suites run by ``stochac verify``.

Each suite returns a list of ``Check`` results; a suite passes when all of
its checks do.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import jumps, wiener
from .mesh import build_mesh, solve_spd
from .potential import PotentialSplit, free_energy
from .rng import Stream
from .stepper import SchemeConfig, imex_step


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}  {self.detail}"


def potential_suite(split=None, n_points=10_000, seed=0):
    split = split or PotentialSplit()
    rng = np.random.default_rng(seed)
    L = split.L
    checks = []

    s = rng.uniform(-2.0, 3.0, n_points)
    res = []
    for lam in (1e-1, 1e-2, 1e-3, 1e-4):
        y = split.yosida(lam)
        res.append(np.max(np.abs(lam * y.prime(s) + y.resolvent(s) - s)))
    worst = float(max(res))
    checks.append(Check("resolvent identity", worst <= 1e-10, f"max err {worst:.2e}"))

    a, b = rng.uniform(-2.0, 3.0, (2, n_points))
    lip_ok = True
    for lam in (1e-1, 1e-2, 1e-3, 1e-4):
        y = split.yosida(lam)
        lhs = np.abs(y.prime(a) - y.prime(b))
        rhs = np.abs(a - b) / lam
        lip_ok &= bool(np.all(lhs <= rhs * (1 + 1e-12) + 1e-12))
    checks.append(Check("(1/lambda)-Lipschitz derivative", lip_ok))

    r_ok = True
    for lam in (1e-1, 1e-2, 1e-3):
        R = split.yosida(lam).resolvent
        r_ok &= bool(np.all(np.abs(R(a) - R(b)) <= np.abs(a - b) * (1 + 1e-12) + 1e-15))
        r_ok &= bool(np.all((R(a) > 0) & (R(a) < L)))
    checks.append(Check("resolvent non-expansive into (0, L)", r_ok))

    pts = rng.uniform(0.0, L, n_points)
    pts = pts[(pts > 0) & (pts < L)]
    vals = [split.yosida(lam).value(pts) for lam in (1e-1, 1e-2, 1e-3)]
    exact = split.psi(pts)
    mono = bool(np.all(vals[0] <= vals[1] + 1e-12) and np.all(vals[1] <= vals[2] + 1e-12)
                and np.all(vals[2] <= exact + 1e-12))
    checks.append(Check("Psi_lambda increases to Psi", mono))

    dmono = True
    for l1, l2 in ((1e-1, 1e-2), (1e-2, 1e-3)):
        dmono &= bool(np.all(np.abs(split.yosida(l1).prime(s)) <= np.abs(split.yosida(l2).prime(s)) + 1e-12))
    checks.append(Check("|Psi'_lambda| increases as lambda decreases", dmono))

    ident = np.max(np.abs(split.psi_second(pts) * pts * (L - pts) - split.theta * L))
    checks.append(Check("Psi'' s (L - s) = theta L", ident <= 1e-12, f"max err {ident:.2e}"))

    c = rng.uniform(-2.0, 3.0, n_points)
    conv = True
    for lam in (1e-1, 1e-3):
        v = split.yosida(lam).value
        conv &= bool(np.all(v(0.5 * (a + c)) <= 0.5 * (v(a) + v(c)) + 1e-12))
    checks.append(Check("Psi_lambda convex (midpoint)", conv))
    return checks


def mesh_suite(seed=0):
    checks = []
    rng = np.random.default_rng(seed)
    for n in (2, 4, 16, 32):
        mesh = build_mesh(n)
        tot = float(mesh.mass.sum())
        checks.append(Check(f"mass total n={n}", abs(tot - 1.0) <= 1e-12, f"{tot!r}"))
        null = float(np.max(np.abs(mesh.stiffness @ np.ones(mesh.n_nodes))))
        checks.append(Check(f"stiffness kills constants n={n}", null <= 1e-12, f"{null:.1e}"))
        sym = float(max(abs(mesh.mass - mesh.mass.T).max(), abs(mesh.stiffness - mesh.stiffness.T).max()))
        checks.append(Check(f"exact symmetry n={n}", sym == 0.0))
    worst = 0.0
    for dim in (10, 50, 200):
        B = rng.standard_normal((dim, dim))
        A = B @ B.T + dim * np.eye(dim)
        b = rng.standard_normal(dim)
        x = solve_spd(A, b, tol=1e-14, max_iter=10 * dim)
        worst = max(worst, float(np.max(np.abs(x - np.linalg.solve(A, b)))))
    checks.append(Check("CG vs dense solve", worst <= 1e-8, f"max err {worst:.1e}"))
    return checks


def noise_suite(n_samples=10_000, seed=0):
    checks = []
    stream = Stream(seed, 0)
    for lam, target, tol in ((10.0, math.exp(-0.5), 0.02), (50.0, math.exp(-2.5), 0.01)):
        cfg = jumps.JumpConfig(lambda_jump=lam)
        zeros = sum(jumps.sample_batch(cfg, 0.05, stream, k).count == 0 for k in range(n_samples))
        freq = zeros / n_samples
        checks.append(Check(f"P(N=0) lambda_jump={lam:g}", abs(freq - target) <= tol,
                            f"{freq:.4f} vs {target:.4f} +- {tol}"))
    mesh = build_mesh(8)
    inc = wiener.sample_increment(wiener.WienerConfig(), mesh, 0.05, stream, 0)
    mean = float(mesh.lumped_mass @ inc)
    checks.append(Check("Wiener increment mean-free", abs(mean) <= 1e-12, f"{mean:.1e}"))
    return checks


def energy_suite(n=16, steps=200, tau=0.05, eps=0.01, seed=0):
    """Deterministic convex-splitting run from random data; energy must not grow."""
    split = PotentialSplit()
    mesh = build_mesh(n)
    cfg = SchemeConfig(tau=tau, t_final=tau * steps, eps=eps, splitting="convex_split",
                       newton_tol=1e-12)
    rng = np.random.default_rng(seed)
    u = rng.uniform(0.05, 0.95, mesh.n_nodes)
    zero = np.zeros(mesh.n_nodes)
    energies = [free_energy(mesh, u, split, eps)]
    for _ in range(steps):
        u, _ = imex_step(u, zero, zero, zero, cfg, mesh, split)
        energies.append(free_energy(mesh, u, split, eps))
    inc = float(np.max(np.diff(energies)))
    return [Check("energy nonincreasing (convex split)", inc <= 1e-10, f"max increase {inc:.2e}")]


SUITES = {
    "potential": potential_suite,
    "mesh": mesh_suite,
    "noise": noise_suite,
    "energy": energy_suite,
}


def run_suites(names=None):
    names = list(SUITES) if not names or names == ["all"] else names
    return {name: SUITES[name]() for name in names}
