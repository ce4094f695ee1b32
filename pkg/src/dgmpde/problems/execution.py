"""Optimal execution with temporary and permanent price impact.

The value function is ``x + q S + h(t, q)``; ``h`` solves
``h_t - phi q^2 + (b q + h_q)^2 / (4k) = 0`` with ``h(T, q) = -alpha q^2``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import value_of
from ..residuals import stencil
from ..sampling import DomainBox
from .base import Problem


@dataclass(frozen=True)
class ExecCoeffs:
    k: float = 0.01
    b: float = 0.001
    phi: float = 0.1
    alpha: float = 0.1
    T: float = 1.0

    @property
    def gamma(self) -> float:
        return float(np.sqrt(self.phi / self.k))

    @property
    def zeta(self) -> float:
        s = np.sqrt(self.k * self.phi)
        return float((self.alpha - 0.5 * self.b + s) / (self.alpha - 0.5 * self.b - s))


def execution_residual(h, h_t, h_q, q, c: ExecCoeffs):
    return h_t - c.phi * q * q + (c.b * q + h_q) * (c.b * q + h_q) * (1.0 / (4 * c.k))


def riccati_coefficient(t, c: ExecCoeffs):
    """``g(t)`` with ``h(t, q) = (g(t) - b/2) q^2``."""
    tau = c.T - np.asarray(t, dtype=np.float64)
    e = c.zeta * np.exp(2 * c.gamma * tau)
    return np.sqrt(c.k * c.phi) * (1 + e) / (1 - e)


def execution_value_oracle(t, q, c: ExecCoeffs):
    return (riccati_coefficient(t, c) - 0.5 * c.b) * np.asarray(q, dtype=np.float64) ** 2


def execution_control_oracle(t, q, c: ExecCoeffs):
    """Optimal selling rate."""
    tau = c.T - np.asarray(t, dtype=np.float64)
    g, z = c.gamma, c.zeta
    return g * (z * np.exp(g * tau) + np.exp(-g * tau)) / (z * np.exp(g * tau) - np.exp(-g * tau)) * np.asarray(q)


def execution_control_from_value(h_q, q, c: ExecCoeffs):
    return -(h_q + c.b * q) / (2 * c.k)


class Execution(Problem):
    id = "execution"

    def __init__(self, coeffs=ExecCoeffs(), q_max=5.0, oversample=1.5, sizes=None):
        super().__init__(coeffs, DomainBox((0.0, coeffs.T), (0.0,), (q_max,), (oversample,)), sizes)

    def condition(self, name, x):
        return -self.coeffs.alpha * np.atleast_2d(x)[:, 0] ** 2

    def residuals(self, fns, batch, cfg):
        pts = batch.interior
        d = self.derivs(fns["f"], pts, cfg, space_order=1)
        return [execution_residual(d.f, d.f_t, d.f_x, pts[:, 1], self.coeffs)]

    def oracle(self, name, points):
        p = np.atleast_2d(points)
        return execution_value_oracle(p[:, 0], p[:, 1], self.coeffs)

    def control(self, fns, points, cfg):
        d = stencil(fns["f"], points, self.steps(cfg), self.t_bounds, space_order=1, time=False)
        return {"nu": execution_control_from_value(value_of(d.f_x), np.atleast_2d(points)[:, 1], self.coeffs)}

    def control_oracle(self, points):
        p = np.atleast_2d(points)
        return {"nu": execution_control_oracle(p[:, 0], p[:, 1], self.coeffs)}
