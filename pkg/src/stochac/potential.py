"""Logarithmic (Flory-Huggins) potential, its splitting and Yosida regularization.

The double-well density is ``Phi = Psi + int F1`` with the convex entropy

    Psi(s) = theta * (s log(s/L) + (L - s) log((L - s)/L)),   0 < s < L,

and the Lipschitz perturbation ``F1(s) = -f1_coeff * (s - L/2)``.  Integrating
``F1`` gives the concave well ``-(f1_coeff / 2) * (s - L/2)**2``, so the free
energy reported by :func:`free_energy` is always the one whose gradient is the
drift actually simulated.

Scalar resolvent problems are solved in the logit variable ``y`` with
``s = L * expit(y)``: there ``Psi'(s) = theta * y`` exactly, and values of
the resolvent arbitrarily close to the barriers stay representable.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.special import expit, log_expit, logit, xlogy

from .errors import DomainError


@dataclass(frozen=True)
class PotentialSplit:
    theta: float = 0.5
    theta0: float = 1.0
    L: float = 1.0
    f1_coeff: float | None = None

    def __post_init__(self):
        if self.f1_coeff is None:
            object.__setattr__(self, "f1_coeff", 4.0 * self.theta0)
        if not (self.theta > 0 and self.theta0 > 0):
            raise ValueError("theta and theta0 must be positive")
        if not self.theta < self.theta0:
            raise ValueError(f"double-well regime needs theta < theta0, got {self.theta} >= {self.theta0}")
        if not (np.isfinite(self.L) and self.L > 0):
            raise ValueError("L must be finite and positive")

    @property
    def well_weight(self):
        """Coefficient ``c`` of the concave well ``-c (s - L/2)^2``."""
        return 0.5 * self.f1_coeff

    def _check(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(~(s > 0.0)) or np.any(~(s < self.L)):
            raise DomainError(f"argument outside (0, {self.L})")
        return s

    def psi(self, s):
        s = self._check(s)
        L = self.L
        return self.theta * (xlogy(s, s / L) + xlogy(L - s, (L - s) / L))

    def psi_prime(self, s):
        s = self._check(s)
        return self.theta * np.log(s / (self.L - s))

    def psi_second(self, s):
        s = self._check(s)
        return self.theta * self.L / (s * (self.L - s))

    def f1(self, s):
        return -self.f1_coeff * (np.asarray(s, dtype=float) - 0.5 * self.L)

    def f1_prime(self, s):
        return np.full_like(np.asarray(s, dtype=float), -self.f1_coeff)

    def phi(self, s):
        """Double-well density ``Psi(s) - c (s - L/2)^2``."""
        return self.psi(s) - self.well_weight * (np.asarray(s, dtype=float) - 0.5 * self.L) ** 2

    def phi_prime(self, s):
        return self.psi_prime(s) + self.f1(s)

    def yosida(self, lam):
        return YosidaView(self, lam)


def coercivity_constants(split, c0=1.0, n_grid=20001):
    """Constants with ``Phi'(s) s >= c0 s^2 - c1`` on (0, L).

    ``c1`` is the supremum of ``c0 s^2 - Phi'(s) s``, located on a grid and
    polished with a bounded scalar search.
    """
    L = split.L
    s = np.linspace(0.0, L, n_grid)[1:-1]
    gap = c0 * s**2 - split.phi_prime(s) * s
    k = int(np.argmax(gap))
    lo, hi = s[max(k - 1, 0)], s[min(k + 1, len(s) - 1)]

    def neg_gap(x):
        return -(c0 * x * x - split.phi_prime(x) * x)

    res = optimize.minimize_scalar(neg_gap, bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-14})
    c1 = max(gap[k], -res.fun, 0.0)
    # cushion for grid/rounding error
    return c0, c1 * (1 + 1e-9) + 1e-12


def validate_assumptions(split, n_grid=2001, seed=0):
    """Numerical check of the structural hypotheses on the potential.

    Returns a dict of named booleans: convexity of ``Psi``, convexity of
    ``Psi''`` (midpoint test on random triples), Lipschitz ``F1`` and the
    coercivity bound with the computed constants.
    """
    L = split.L
    s = np.linspace(0.0, L, n_grid)[1:-1]
    rng = np.random.default_rng(seed)
    a, b = rng.uniform(0.0, L, size=(2, 10_000))
    a = np.clip(a, 1e-9, L - 1e-9)
    b = np.clip(b, 1e-9, L - 1e-9)
    mid = 0.5 * (a + b)
    pp = split.psi_second
    c0, c1 = coercivity_constants(split)
    return {
        "psi_convex": bool(np.all(split.psi_second(s) > 0)),
        "psi_second_convex": bool(np.all(pp(mid) <= 0.5 * (pp(a) + pp(b)) * (1 + 1e-12))),
        "f1_lipschitz": bool(np.isfinite(split.f1_coeff)),
        "coercive": bool(np.all(split.phi_prime(s) * s >= c0 * s**2 - c1)),
    }


class YosidaView:
    """Yosida regularization ``Psi_lambda`` of the entropy and its resolvent."""

    def __init__(self, base, lam):
        if not lam > 0:
            raise ValueError(f"lambda must be positive, got {lam}")
        self.base = base
        self.lam = float(lam)

    def _logit_resolvent(self, s):
        """Solve ``L expit(y) + lam theta y = s`` for ``y``, elementwise."""
        s = np.asarray(s, dtype=float)
        L, k = self.base.L, self.lam * self.base.theta
        lo = (s - L) / k
        hi = s / k
        y = np.clip(logit(np.clip(s / L, 1e-12, 1 - 1e-12)), lo, hi)
        tol = 1e-15 * (1.0 + np.abs(s))
        for _ in range(200):
            sig = expit(y)
            g = L * sig + k * y - s
            lo = np.where(g < 0, y, lo)
            hi = np.where(g > 0, y, hi)
            dg = L * sig * expit(-y) + k
            step = g / dg
            y_new = y - step
            outside = ~((y_new > lo) & (y_new < hi))
            y_new = np.where(outside, 0.5 * (lo + hi), y_new)
            done = (np.abs(g) <= tol) | (np.abs(step) <= 4e-16 * (1.0 + np.abs(y)))
            y = np.where(done, y, y_new)
            if np.all(done):
                break
        return y

    def resolvent(self, s):
        """``R_lambda(s) = (I + lambda Psi')^{-1}(s)``, always inside (0, L).

        Values closer to a barrier than float spacing allows are returned as
        the nearest representable number strictly inside.
        """
        L = self.base.L
        r = L * expit(self._logit_resolvent(s))
        return np.clip(r, np.nextafter(0.0, 1.0), np.nextafter(L, 0.0))

    def prime(self, s):
        """``Psi'_lambda(s) = Psi'(R_lambda(s)) = (s - R_lambda(s)) / lambda``."""
        return self.base.theta * self._logit_resolvent(s)

    def second(self, s):
        y = self._logit_resolvent(s)
        th, L = self.base.theta, self.base.L
        # Psi''(R) / (1 + lam Psi''(R)) with Psi''(R) = th / (L sig(y) sig(-y))
        return th / (L * expit(y) * expit(-y) + self.lam * th)

    def value(self, s):
        """``Psi_lambda(s) = Psi(R) + |s - R|^2 / (2 lambda)``."""
        y = self._logit_resolvent(s)
        th, L = self.base.theta, self.base.L
        psi_r = th * L * (expit(y) * log_expit(y) + expit(-y) * log_expit(-y))
        return psi_r + 0.5 * self.lam * (th * y) ** 2

    def phi(self, s):
        s = np.asarray(s, dtype=float)
        return self.value(s) - self.base.well_weight * (s - 0.5 * self.base.L) ** 2


def free_energy(mesh, field, split, eps, lam=None):
    """Discrete free energy ``(eps/2) u^T K u + sum_i m_i Phi(u_i)``.

    With ``lam`` given, the Yosida-regularized density is used and the field
    may leave (0, L); otherwise entries outside (0, L) raise DomainError.
    """
    u = np.asarray(field, dtype=float)
    grad = 0.5 * eps * float(u @ (mesh.stiffness @ u))
    density = split.phi(u) if lam is None else split.yosida(lam).phi(u)
    return grad + float(mesh.lumped_mass @ density)
