"""Systemic risk: N banks borrowing and lending toward the average reserve.

Player i's value function solves

    V^i_t + sum_j [(a + q)(xbar - x^j) - d_j V^j] d_j V^i
          + sigma^2/2 sum_jk (rho^2 + delta_jk (1 - rho^2)) d_jk V^i
          + (eps - q^2)/2 (xbar - x^i)^2 + (d_i V^i)^2 / 2 = 0,

with ``V^i(T, x) = c/2 (xbar - x^i)^2``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

from ..autodiff import value_of
from ..residuals import stencil
from ..sampling import DomainBox
from .base import Problem


@dataclass(frozen=True)
class SystemicCoeffs:
    N: int = 2
    a: float = 1.0
    q: float = 1.0
    eps: float = 10.0
    c: float = 1.0
    rho: float = 0.5
    sigma: float = 0.1
    T: float = 1.0

    @property
    def R(self) -> float:
        return (self.a + self.q) ** 2 + (1 - 1 / self.N**2) * (self.eps - self.q**2)

    @property
    def delta_plus(self) -> float:
        return -(self.a + self.q) + float(np.sqrt(self.R))

    @property
    def delta_minus(self) -> float:
        return -(self.a + self.q) - float(np.sqrt(self.R))


def systemic_eta(t, c: SystemicCoeffs):
    """Solution of ``eta' = 2(a+q) eta + (1 - 1/N^2) eta^2 - (eps - q^2)``, ``eta(T) = c``."""
    dp, dm = c.delta_plus, c.delta_minus
    e = np.exp((dp - dm) * (c.T - np.asarray(t, dtype=np.float64)))
    num = -(c.eps - c.q**2) * (e - 1) - c.c * (dp * e - dm)
    den = (dm * e - dp) - c.c * (1 - 1 / c.N**2) * (e - 1)
    return num / den


def systemic_mu(t, c: SystemicCoeffs):
    """``sigma^2/2 (1 - rho^2)(1 - 1/N) int_t^T eta(s) ds`` by adaptive quadrature."""
    k = 0.5 * c.sigma**2 * (1 - c.rho**2) * (1 - 1 / c.N)
    ts = np.atleast_1d(np.asarray(t, dtype=np.float64))
    out = np.array([k * quad(lambda s: float(systemic_eta(s, c)), float(s0), c.T,
                             epsabs=1e-12, epsrel=1e-10)[0] for s0 in ts.ravel()])
    return out.reshape(ts.shape) if np.ndim(t) else float(out[0])


def _mu_spline(c: SystemicCoeffs, n=401):
    ts = np.linspace(0.0, c.T, n)
    return CubicSpline(ts, systemic_mu(ts, c))


def systemic_value_oracle(i, t, x, c: SystemicCoeffs, mu=None):
    """``V^i = eta/2 (xbar - x^i)^2 + mu(t)``; ``x`` has shape (n, N)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    t = np.asarray(t, dtype=np.float64)
    gap = x.mean(axis=1) - x[:, i]
    m = systemic_mu(t, c) if mu is None else mu(t)
    return 0.5 * systemic_eta(t, c) * gap**2 + m


def systemic_control_oracle(i, t, x, c: SystemicCoeffs):
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    return (c.q + (1 - 1 / c.N) * systemic_eta(t, c)) * (x.mean(axis=1) - x[:, i])


def systemic_residual_i(i, V_t, grads, hess, x, c: SystemicCoeffs):
    """Residual of equation i.

    ``V_t`` is ``d_t V^i``; ``grads[j][k]`` is ``d_k V^j`` for every player
    j; ``hess[j][k]`` is ``d_jk V^i``; ``x`` has shape (n, N).
    """
    N = c.N
    xbar = x.mean(axis=1)
    out = V_t
    for j in range(N):
        drift = (c.a + c.q) * (xbar - x[:, j]) - grads[j][j]
        out = out + drift * grads[i][j]
    diag, full = 0.0, 0.0
    for j in range(N):
        diag = diag + hess[j][j]
        for k in range(N):
            full = full + hess[j][k]
    out = out + 0.5 * c.sigma**2 * (c.rho**2 * full + (1 - c.rho**2) * diag)
    gap = xbar - x[:, i]
    return out + 0.5 * (c.eps - c.q**2) * gap**2 + 0.5 * grads[i][i] * grads[i][i]


class Systemic(Problem):
    id = "systemic"

    def __init__(self, coeffs=SystemicCoeffs(), x_max=10.0, sizes=None):
        n = coeffs.N
        super().__init__(coeffs, DomainBox((0.0, coeffs.T), (0.0,) * n, (x_max,) * n), sizes)
        self.unknowns = tuple(f"V{i + 1}" for i in range(n))
        self._mu = None

    def _index(self, name):
        return int(name[1:]) - 1

    def condition(self, name, x):
        x = np.atleast_2d(x)
        return 0.5 * self.coeffs.c * (x.mean(axis=1) - x[:, self._index(name)]) ** 2

    def residuals(self, fns, batch, cfg):
        pts = batch.interior
        ds = [self.derivs(fns[n], pts, cfg, cross=True) for n in self.unknowns]
        grads = [d.grad for d in ds]
        return [systemic_residual_i(i, d.f_t, grads, d.hess, pts[:, 1:], self.coeffs)
                for i, d in enumerate(ds)]

    def mu(self, t):
        if self._mu is None:
            self._mu = _mu_spline(self.coeffs)
        return self._mu(t)

    def oracle(self, name, points):
        p = np.atleast_2d(points)
        return systemic_value_oracle(self._index(name), p[:, 0], p[:, 1:], self.coeffs, self.mu)

    def control(self, fns, points, cfg):
        pts = np.atleast_2d(points)
        x = pts[:, 1:]
        out = {}
        for name in self.unknowns:
            i = self._index(name)
            d = stencil(fns[name], pts, self.steps(cfg), self.t_bounds, space_order=1, time=False)
            out[f"alpha{i + 1}"] = self.coeffs.q * (x.mean(axis=1) - x[:, i]) - value_of(d.grad[i])
        return out

    def control_oracle(self, points):
        p = np.atleast_2d(points)
        return {f"alpha{i + 1}": systemic_control_oracle(i, p[:, 0], p[:, 1:], self.coeffs)
                for i in range(self.coeffs.N)}
