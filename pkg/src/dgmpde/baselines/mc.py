"""Monte Carlo: Feynman-Kac pricing and Ornstein-Uhlenbeck path simulation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class McConfig:
    n_paths: int = 100_000
    n_steps: int = 1
    seed: int = 0
    antithetic: bool = False

    def __post_init__(self):
        if self.n_paths < 1 or self.n_steps < 1:
            raise ValueError("path and step counts must be >= 1")


def feynman_kac_mc(c, payoff, mc: McConfig, t=0.0, x=None):
    """``E[exp(-r (T-t)) payoff(X_T) | X_t = x]`` under geometric Brownian motion.

    Log-price increments are simulated exactly over ``n_steps`` steps.
    Returns (estimate, standard error); antithetic pairs are averaged before
    the standard error is taken.
    """
    x = c.s0 if x is None else x
    tau = c.T - t
    rng = np.random.default_rng(mc.seed)
    n = (mc.n_paths + 1) // 2 if mc.antithetic else mc.n_paths
    dt = tau / mc.n_steps
    drift = (c.r - 0.5 * c.sigma**2) * dt
    log_x = np.zeros(n)
    log_y = np.zeros(n)
    for _ in range(mc.n_steps):
        z = rng.standard_normal(n)
        log_x += drift + c.sigma * np.sqrt(dt) * z
        log_y += drift - c.sigma * np.sqrt(dt) * z
    disc = np.exp(-c.r * tau)
    vals = disc * payoff(x * np.exp(log_x))
    if mc.antithetic:
        vals = 0.5 * (vals + disc * payoff(x * np.exp(log_y)))
    if vals.size == 1:
        return float(vals[0]), 0.0
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(vals.size))


@dataclass
class OuPaths:
    t: np.ndarray
    samples: np.ndarray  # (len(t), n_paths)

    def moments(self):
        """Per-time sample mean, variance and their standard errors."""
        n = self.samples.shape[1]
        mean = self.samples.mean(axis=1)
        var = self.samples.var(axis=1, ddof=1)
        centred = self.samples - mean[:, None]
        m4 = np.mean(centred**4, axis=1)
        return mean, var, np.sqrt(var / n), np.sqrt(np.maximum(m4 - var**2, 0.0) / n)

    def histogram(self, i, bins=50, range=None):
        return np.histogram(self.samples[i], bins=bins, range=range, density=True)


def ou_simulate(c, n_paths, t_points, seed=0) -> OuPaths:
    """Exact transitions of ``dX = kappa (theta - X) dt + sigma dW`` from N(m0, v)."""
    t_points = np.asarray(t_points, dtype=np.float64)
    if np.any(np.diff(t_points) < 0) or t_points[0] < 0:
        raise ValueError("t_points must be nonnegative and increasing")
    rng = np.random.default_rng(seed)
    x = c.m0 + np.sqrt(c.v) * rng.standard_normal(n_paths)
    out = np.empty((t_points.size, n_paths))
    prev = 0.0
    for i, t in enumerate(t_points):
        dt = t - prev
        if dt > 0:
            if c.kappa == 0.0:
                x = x + c.sigma * np.sqrt(dt) * rng.standard_normal(n_paths)
            else:
                e = np.exp(-c.kappa * dt)
                sd = c.sigma * np.sqrt((1 - e**2) / (2 * c.kappa))
                x = c.theta + (x - c.theta) * e + sd * rng.standard_normal(n_paths)
        out[i] = x
        prev = t
    return OuPaths(t_points, out)
