"""Density of an Ornstein-Uhlenbeck process via the log-density transform.

With ``p = exp(-u) / c(t)`` the Fokker-Planck equation of
``dX = kappa (theta - X) dt + sigma dW`` becomes

    u_t - kappa (x - theta) u_x - sigma^2/2 (u_xx - u_x^2) = I_t - kappa,

where ``I_t = E_p[u_t]`` is estimated by self-normalised importance
sampling. Any ``u`` yields a positive density of unit mass.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import value_of
from ..residuals import ResidualError, weighted_time_mean
from ..sampling import Batch, DomainBox, sample_grid, sample_terminal
from .base import Problem, normalized_density


@dataclass(frozen=True)
class OuCoeffs:
    kappa: float = 0.0
    theta: float = 0.5
    sigma: float = 2.0
    v: float = 0.25  # variance of the Gaussian start
    T: float = 1.0
    m0: float = 0.0  # mean of the Gaussian start


def fp_ou_transformed_residual(u_t, u_x, u_xx, x, I_t, c: OuCoeffs):
    return u_t - c.kappa * (x - c.theta) * u_x - 0.5 * c.sigma**2 * (u_xx - u_x * u_x) - (I_t - c.kappa)


def ou_moments(t, c: OuCoeffs):
    """Mean and variance at time t of the process started from N(m0, v)."""
    t = np.asarray(t, dtype=np.float64)
    if c.kappa == 0.0:
        return c.m0 + 0.0 * t, c.v + c.sigma**2 * t
    e = np.exp(-c.kappa * t)
    mean = c.m0 * e + c.theta * (1 - e)
    var = c.v * e**2 + c.sigma**2 / (2 * c.kappa) * (1 - e**2)
    return mean, var


def fp_ou_density_oracle(t, x, c: OuCoeffs):
    mean, var = ou_moments(t, c)
    return np.exp(-0.5 * (x - mean) ** 2 / var) / np.sqrt(2 * np.pi * var)


def fp_ou_u_oracle(t, x, c: OuCoeffs):
    """Minus log of the exact density."""
    mean, var = ou_moments(t, c)
    return 0.5 * (x - mean) ** 2 / var + 0.5 * np.log(2 * np.pi * var)


def density_moments(fn, t, x_grid):
    """Mean and variance of ``exp(-u(t, .)) / int exp(-u)`` on a uniform grid."""
    x = np.asarray(x_grid, dtype=np.float64)
    u = np.asarray(value_of(fn(np.column_stack([np.full_like(x, t), x]))))
    w = np.exp(-(u - u.min()))
    w /= np.trapezoid(w, x)
    mean = np.trapezoid(x * w, x)
    return mean, np.trapezoid((x - mean) ** 2 * w, x)


class OuFokkerPlanck(Problem):
    id = "fokker_planck"
    unknowns = ("u",)

    def __init__(self, coeffs=OuCoeffs(), x_half_width=8.0, sizes=None):
        box = DomainBox((0.0, coeffs.T), (coeffs.m0 - x_half_width,), (coeffs.m0 + x_half_width,))
        super().__init__(coeffs, box, {"n_t": 16, "n_x": 64, "terminal": 128, **(sizes or {})})

    def condition_time(self, name):
        return self.box.t0

    def condition(self, name, x):
        return fp_ou_u_oracle(0.0, np.atleast_2d(x)[:, 0], self.coeffs)

    def value_scale(self, name):
        return 10.0

    def sample(self, rng, fns=None, cfg=None):
        n_t, n_x = self.sizes["n_t"], self.sizes["n_x"]
        return Batch(sample_grid(self.box, n_t, n_x, rng), sample_terminal(self.box, self.sizes["terminal"], rng),
                     grid_shape=(n_t, n_x))

    def residuals(self, fns, batch, cfg):
        if batch.grid_shape is None:
            raise ResidualError("the integral term needs a product-grid batch")
        n_t, n_x = batch.grid_shape
        pts = batch.interior
        d = self.derivs(fns["u"], pts, cfg)
        I_t = weighted_time_mean(d.f, d.f_t, n_t, n_x)
        shape = (n_t, n_x)
        x = pts[:, 1].reshape(shape)
        return [fp_ou_transformed_residual(d.f_t.reshape(shape), d.f_x.reshape(shape), d.f_xx.reshape(shape),
                                           x, I_t.reshape(n_t, 1), self.coeffs)]

    def oracle(self, name, points):
        p = np.atleast_2d(points)
        return fp_ou_u_oracle(p[:, 0], p[:, 1], self.coeffs)

    def report_values(self, fns, points):
        # u is only determined up to a function of time; compare densities
        return {"density": normalized_density(fns["u"], points, self.box.sample_lo[0], self.box.sample_hi[0])}

    def report_reference(self, points):
        p = np.atleast_2d(points)
        return {"density": fp_ou_density_oracle(p[:, 0], p[:, 1], self.coeffs)}

    def density(self, fn, t, x_grid):
        """Normalised density of the network on ``x_grid`` at time t."""
        x = np.asarray(x_grid, dtype=np.float64)
        u = np.asarray(value_of(fn(np.column_stack([np.full_like(x, t), x]))))
        w = np.exp(-(u - u.min()))
        return w / np.trapezoid(w, x)

