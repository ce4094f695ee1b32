"""Optimal liquidation in a mean field of traders with identical preferences.

Unknowns are the value-function part ``h(t, q)`` and the log-density
``u(t, q)`` of inventories, ``m = exp(-u) / c(t)``. The equations are

    h_t - phi q^2 + h_q^2 / (4k) + kappa mu_t q = 0,      h(T, q) = -alpha q^2,
    -u_t + (-u_q h_q + h_qq) / (2k) + E_m[u_t] = 0,       u(0, .) = -log m_0,

with net trading flow ``mu_t = E_m[h_q / (2k)]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.integrate import solve_ivp

from ..autodiff import detach, value_of
from ..residuals import ResidualError, stencil, weighted_time_mean
from ..sampling import Batch, DomainBox, importance_weights, sample_grid, sample_terminal
from .base import Problem, normalized_density


@dataclass(frozen=True)
class MfgCoeffs:
    kappa: float = 1.0
    k: float = 1.0
    phi: float = 1.0
    alpha: float = 1.0
    T: float = 1.0
    E0: float = 5.0
    var0: float = 0.25


def mfg_hjb_residual(h_t, h_q, q, mu, c: MfgCoeffs):
    return h_t - c.phi * q * q + h_q * h_q * (1.0 / (4 * c.k)) + c.kappa * mu * q


def mfg_fp_transformed_residual(u_t, u_q, v_q, v_qq, I_t, c: MfgCoeffs):
    """``v`` is the value-function unknown h (its derivatives drive the flow)."""
    return -u_t + (v_qq - u_q * v_q) * (1.0 / (2 * c.k)) + I_t


def mfg_net_flow(h_q, u, c: MfgCoeffs):
    """``E[h_q / 2k]`` under weights ``exp(-u)``, one value per row of the
    time-major (n_t, n_q) arrays."""
    w = importance_weights(np.atleast_2d(u))
    return (np.atleast_2d(h_q) / (2 * c.k) * w).sum(axis=1)


def initial_log_density(q, c: MfgCoeffs):
    q = np.asarray(q, dtype=np.float64)
    return 0.5 * (q - c.E0) ** 2 / c.var0 + 0.5 * np.log(2 * np.pi * c.var0)


class MfgReference:
    """Semi-analytic solution with a quadratic value function.

    ``h = h0(t) + h1(t) q + h2(t) q^2`` reduces the system to a Riccati
    equation for h2 (solved in closed form), a linear two-point problem for
    (h1, E) with E the mean inventory, and a quadrature for h0. The density
    stays Gaussian because the optimal trading rate is affine in q.
    """

    def __init__(self, c: MfgCoeffs, n=2001):
        self.c = c
        self.t = np.linspace(0.0, c.T, n)
        # two initial slopes, combined so that h1(T) = 0 (the problem is linear)
        sols = [self._shoot(s) for s in (0.0, 1.0)]
        a, b = sols[0].sol(c.T)[0], sols[1].sol(c.T)[0]
        s = -a / (b - a)
        self._sol = self._shoot(s)

    def h2(self, t):
        c = self.c
        s = np.sqrt(c.k * c.phi)
        th = np.tanh(np.sqrt(c.phi / c.k) * (c.T - np.asarray(t, dtype=np.float64)))
        return -s * (c.alpha + s * th) / (s + c.alpha * th)

    def _rhs(self, t, y):
        c = self.c
        h1, E, h0, logvar = y
        h2 = self.h2(t)
        mu = (h1 + 2 * h2 * E) / (2 * c.k)
        return [-h1 * h2 / c.k - c.kappa * mu, mu, -h1 * h1 / (4 * c.k), 2 * h2 / c.k]

    def _shoot(self, h1_0):
        c = self.c
        return solve_ivp(self._rhs, (0.0, c.T), [h1_0, c.E0, 0.0, np.log(c.var0)], method="DOP853",
                         rtol=1e-12, atol=1e-13, dense_output=True)

    def _y(self, t):
        t = np.asarray(t, dtype=np.float64)
        return self._sol.sol(t.ravel()).reshape((4,) + t.shape)

    def h1(self, t):
        return self._y(t)[0]

    def mean(self, t):
        return self._y(t)[1]

    def var(self, t):
        return np.exp(self._y(t)[3])

    def h0(self, t):
        # h0 was integrated from 0 with h0(0)=0; shift so that h0(T)=0
        return self._y(t)[2] - self._y(self.c.T)[2]

    def mu(self, t):
        return (self.h1(t) + 2 * self.h2(t) * self.mean(t)) / (2 * self.c.k)

    def h(self, t, q):
        return self.h0(t) + self.h1(t) * q + self.h2(t) * np.asarray(q) ** 2

    def u(self, t, q):
        m, v = self.mean(t), self.var(t)
        return 0.5 * (np.asarray(q) - m) ** 2 / v + 0.5 * np.log(2 * np.pi * v)

    def control(self, t, q):
        return (self.h1(t) + 2 * self.h2(t) * np.asarray(q)) / (2 * self.c.k)


class MeanFieldExecution(Problem):
    id = "mfg"
    unknowns = ("h", "u")

    def __init__(self, coeffs=MfgCoeffs(), q_max=10.0, sizes=None):
        super().__init__(coeffs, DomainBox((0.0, coeffs.T), (0.0,), (q_max,)),
                         {"n_t": 16, "n_x": 64, "terminal": 128, **(sizes or {})})

    @cached_property
    def reference(self) -> MfgReference:
        return MfgReference(self.coeffs)

    def condition_time(self, name):
        return self.box.T if name == "h" else self.box.t0

    def condition(self, name, x):
        q = np.atleast_2d(x)[:, 0]
        if name == "h":
            return -self.coeffs.alpha * q * q
        return initial_log_density(q, self.coeffs)

    def value_scale(self, name):
        return self.coeffs.alpha * self.box.sample_hi[0] ** 2 if name == "h" else 50.0

    def net_flow(self, fns, interior, grid_shape, cfg):
        """Current ``mu_t`` at the grid times, from numpy evaluations."""
        d = stencil(fns["h"], interior, self.steps(cfg), self.t_bounds, space_order=1, time=False)
        u = np.asarray(value_of(fns["u"](interior)))
        return mfg_net_flow(value_of(d.f_x).reshape(grid_shape), u.reshape(grid_shape), self.coeffs)

    def sample(self, rng, fns=None, cfg=None):
        n_t, n_x = self.sizes["n_t"], self.sizes["n_x"]
        pts = sample_grid(self.box, n_t, n_x, rng)
        batch = Batch(pts, sample_terminal(self.box, self.sizes["terminal"], rng), grid_shape=(n_t, n_x))
        if fns is not None:
            from ..residuals import DerivConfig

            batch.aux["mu"] = self.net_flow(fns, pts, (n_t, n_x), cfg or DerivConfig())
        else:
            batch.aux["mu"] = np.zeros(n_t)
        return batch

    def residuals(self, fns, batch, cfg):
        if batch.grid_shape is None:
            raise ResidualError("the integral term needs a product-grid batch")
        n_t, n_x = batch.grid_shape
        shape = (n_t, n_x)
        pts = batch.interior
        q = pts[:, 1].reshape(shape)
        mu = np.asarray(batch.aux.get("mu", np.zeros(n_t))).reshape(n_t, 1)
        dh = self.derivs(fns["h"], pts, cfg)
        du = self.derivs(fns["u"], pts, cfg, space_order=1)
        I_t = weighted_time_mean(du.f, du.f_t, n_t, n_x)
        hjb = mfg_hjb_residual(dh.f_t.reshape(shape), dh.f_x.reshape(shape), q, mu, self.coeffs)
        # the density equation sees h as given; h is fitted by its own equation
        fp = mfg_fp_transformed_residual(du.f_t.reshape(shape), du.f_x.reshape(shape),
                                         detach(dh.f_x).reshape(shape), detach(dh.f_xx).reshape(shape),
                                         I_t.reshape(n_t, 1), self.coeffs)
        return [hjb, fp]

    def oracle(self, name, points):
        p = np.atleast_2d(points)
        ref = self.reference
        return ref.h(p[:, 0], p[:, 1]) if name == "h" else ref.u(p[:, 0], p[:, 1])

    def control(self, fns, points, cfg):
        d = stencil(fns["h"], points, self.steps(cfg), self.t_bounds, space_order=1, time=False)
        return {"nu": value_of(d.f_x) / (2 * self.coeffs.k)}

    def control_oracle(self, points):
        p = np.atleast_2d(points)
        return {"nu": self.reference.control(p[:, 0], p[:, 1])}

    def report_values(self, fns, points):
        lo, hi = self.box.sample_lo[0], self.box.sample_hi[0]
        return {"h": np.asarray(value_of(fns["h"](points))), "m": normalized_density(fns["u"], points, lo, hi)}

    def report_reference(self, points):
        p = np.atleast_2d(points)
        ref = self.reference
        m, v = ref.mean(p[:, 0]), ref.var(p[:, 0])
        return {"h": ref.h(p[:, 0], p[:, 1]),
                "m": np.exp(-0.5 * (p[:, 1] - m) ** 2 / v) / np.sqrt(2 * np.pi * v)}

    def mean_inventory(self, fn_u, t, n_q=2001):
        """Mean of the network density ``exp(-u(t, .))`` by quadrature."""
        from .fokker_planck import density_moments

        q = np.linspace(self.box.sample_lo[0], self.box.sample_hi[0], n_q)
        return density_moments(fn_u, t, q)[0]
