"""European call and American put under Black-Scholes dynamics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.special import ndtr

from ..autodiff import value_of
from ..residuals import inequality_penalty
from ..sampling import Batch, DomainBox, sample_interior_uniform, sample_lognormal, sample_terminal
from .base import Problem


@dataclass(frozen=True)
class BsCoeffs:
    r: float = 0.05
    sigma: float = 0.25
    K: float = 50.0
    T: float = 1.0
    s0: float = 50.0


def bs_call_residual(f, f_t, f_x, f_xx, x, c: BsCoeffs):
    return f_t + c.r * x * f_x + 0.5 * c.sigma**2 * x**2 * f_xx - c.r * f


def bs_call_price(t, x, c: BsCoeffs):
    t, x = np.broadcast_arrays(np.asarray(t, dtype=np.float64), np.asarray(x, dtype=np.float64))
    tau = c.T - t
    live = (tau > 0) & (x > 0)
    tau_s = np.where(live, tau, 1.0)
    x_s = np.where(live, x, c.K)
    sq = c.sigma * np.sqrt(tau_s)
    d_plus = (np.log(x_s / c.K) + (c.r + 0.5 * c.sigma**2) * tau_s) / sq
    d_minus = d_plus - sq
    price = x_s * ndtr(d_plus) - c.K * np.exp(-c.r * tau_s) * ndtr(d_minus)
    return np.where(live, price, np.where(x > 0, np.maximum(x - c.K, 0.0), 0.0))


def bs_put_price(t, x, c: BsCoeffs):
    """Put from put-call parity ``P = C - x + K exp(-r(T-t))``."""
    t = np.asarray(t, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    return bs_call_price(t, x, c) - x + c.K * np.exp(-c.r * (c.T - t))


class EuropeanCall(Problem):
    """Call value on ``[0,T] x [0, x_max]`` trained on the oversampled box."""

    id = "european_call"

    def __init__(self, coeffs=BsCoeffs(), x_max=100.0, oversample=1.3, sampler="uniform", sizes=None):
        super().__init__(coeffs, DomainBox((0.0, coeffs.T), (0.0,), (x_max,), (oversample,)), sizes)
        if sampler not in ("uniform", "lognormal"):
            raise ValueError(f"unknown sampler {sampler!r}")
        self.sampler = sampler

    def payoff(self, x):
        return np.maximum(x[..., 0] - self.coeffs.K, 0.0)

    def condition(self, name, x):
        return self.payoff(np.atleast_2d(x))

    def value_scale(self, name):
        return self.coeffs.K

    def sample(self, rng, fns=None, cfg=None):
        n = self.sizes["interior"]
        if self.sampler == "lognormal":
            c = self.coeffs
            inner = sample_lognormal(self.box, (c.s0, c.r, c.sigma), n, rng)
        else:
            inner = sample_interior_uniform(self.box, n, rng)
        return Batch(inner, sample_terminal(self.box, self.sizes["terminal"], rng))

    def residuals(self, fns, batch, cfg):
        pts = batch.interior
        d = self.derivs(fns["f"], pts, cfg)
        return [bs_call_residual(d.f, d.f_t, d.f_x, d.f_xx, pts[:, 1], self.coeffs)]

    def oracle(self, name, points):
        p = np.atleast_2d(points)
        return bs_call_price(p[:, 0], p[:, 1], self.coeffs)


class AmericanPut(EuropeanCall):
    """American put as a free-boundary problem.

    The Black-Scholes residual is enforced only where the network is above
    the exercise value (the mask is held constant in the gradient), the
    penalty ``max(payoff - f, 0)^2`` keeps the value above the payoff, and
    the terminal condition is the put payoff. ``penalty_margin`` shifts
    the obstacle (penalty threshold and mask alike) up by a constant so the
    fit errs on the admissible side.
    """

    id = "american_put"
    has_penalty = True

    def __init__(self, coeffs=BsCoeffs(), x_max=100.0, oversample=1.3, sampler="uniform", sizes=None,
                 grid=(400, 800), penalty_margin=0.0):
        super().__init__(coeffs, x_max, oversample, sampler, sizes)
        if penalty_margin < 0:
            raise ValueError("penalty_margin must be >= 0")
        self.grid = grid
        self.penalty_margin = penalty_margin
        self._surface = None

    def payoff(self, x):
        return np.maximum(self.coeffs.K - x[..., 0], 0.0)

    def residuals(self, fns, batch, cfg):
        pts = batch.interior
        d = self.derivs(fns["f"], pts, cfg)
        r = bs_call_residual(d.f, d.f_t, d.f_x, d.f_xx, pts[:, 1], self.coeffs)
        hold = (value_of(d.f) > self.payoff(pts[:, 1:]) + self.penalty_margin).astype(np.float64)
        return [r * hold]

    def penalty(self, fns, batch):
        # the constraint holds on the closed box, so maturity points count too
        x = batch.terminal
        pts = np.vstack([batch.interior, np.column_stack([np.full(x.shape[0], self.box.T), x])])
        return inequality_penalty(fns["f"], pts, self.payoff, self.penalty_margin)

    def _grid(self):
        if self._surface is None:
            from ..baselines.grid import bs_grid_solver

            n_t, n_x = self.grid
            g = bs_grid_solver(self.coeffs, n_t, n_x, self.box.sample_hi[0], kind="put", american=True)
            self._surface = RegularGridInterpolator((g.t, g.x), g.u)
        return self._surface

    def oracle(self, name, points):
        """Projected implicit grid solution, linearly interpolated."""
        p = np.atleast_2d(points)
        return self._grid()(p[:, :2])


def american_put_spec(c: BsCoeffs = BsCoeffs(), **kw) -> AmericanPut:
    return AmericanPut(c, **kw)
