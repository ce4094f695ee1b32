"""Merton portfolio choice with exponential utility."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import value_of
from ..residuals import stencil
from ..sampling import DomainBox
from .base import Problem


@dataclass(frozen=True)
class MertonCoeffs:
    r: float = 0.05
    mu: float = 0.2
    sigma: float = 0.25
    gamma: float = 1.0
    T: float = 1.0

    @property
    def lam(self) -> float:
        """Market price of risk."""
        return (self.mu - self.r) / self.sigma


def merton_residual(H, H_t, H_x, H_xx, x, c: MertonCoeffs):
    """HJB after the optimal portfolio is substituted and the denominator cleared:
    ``-(lam^2/2) H_x^2 + H_xx (H_t + r x H_x)``."""
    return -0.5 * c.lam**2 * H_x * H_x + H_xx * (H_t + c.r * x * H_x)


def merton_value_oracle(t, x, c: MertonCoeffs):
    tau = c.T - np.asarray(t, dtype=np.float64)
    return -np.exp(-np.asarray(x) * c.gamma * np.exp(c.r * tau) - 0.5 * c.lam**2 * tau)


def merton_control_oracle(t, c: MertonCoeffs):
    """Optimal amount held in the risky asset."""
    return c.lam / (c.gamma * c.sigma) * np.exp(-c.r * (c.T - np.asarray(t, dtype=np.float64)))


def merton_control_from_value(H_x, H_xx, c: MertonCoeffs):
    return -c.lam * H_x / (c.sigma * H_xx)


class Merton(Problem):
    id = "merton"

    def __init__(self, coeffs=MertonCoeffs(), x_max=1.0, oversample=1.5, sizes=None):
        super().__init__(coeffs, DomainBox((0.0, coeffs.T), (0.0,), (x_max,), (oversample,)), sizes)

    def condition(self, name, x):
        return -np.exp(-self.coeffs.gamma * np.atleast_2d(x)[:, 0])

    def value_scale(self, name):
        return 1.0

    def residuals(self, fns, batch, cfg):
        pts = batch.interior
        d = self.derivs(fns["f"], pts, cfg)
        return [merton_residual(d.f, d.f_t, d.f_x, d.f_xx, pts[:, 1], self.coeffs)]

    def oracle(self, name, points):
        p = np.atleast_2d(points)
        return merton_value_oracle(p[:, 0], p[:, 1], self.coeffs)

    def control(self, fns, points, cfg):
        d = stencil(fns["f"], points, self.steps(cfg), self.t_bounds, time=False)
        return {"pi": merton_control_from_value(value_of(d.f_x), value_of(d.f_xx), self.coeffs)}

    def control_oracle(self, points):
        return {"pi": merton_control_oracle(np.atleast_2d(points)[:, 0], self.coeffs)}
