"""Finite-difference grid solvers in one space dimension."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded


@dataclass
class Grid1D:
    """Values ``u[i, j] ~ u(t[i], x[j])`` on a uniform grid."""

    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.u.shape != (self.t.size, self.x.size):
            raise ValueError("value matrix does not match the node counts")

    @property
    def k_step(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def h_step(self) -> float:
        return float(self.x[1] - self.x[0])


def thomas(lower, diag, upper, rhs):
    """Solve a tridiagonal system; ``lower[0]`` and ``upper[-1]`` are unused."""
    n = diag.size
    c = np.empty(n)
    d = np.empty(n)
    c[0] = upper[0] / diag[0]
    d[0] = rhs[0] / diag[0]
    for i in range(1, n):
        m = diag[i] - lower[i] * c[i - 1]
        c[i] = upper[i] / m
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m
    out = np.empty(n)
    out[-1] = d[-1]
    for i in range(n - 2, -1, -1):
        out[i] = d[i] - c[i] * out[i + 1]
    return out


def _heat_grid(length, t_end, n_x, n_t):
    if n_x < 2 or n_t < 1:
        raise ValueError("need at least 2 space intervals and 1 time step")
    return np.linspace(0.0, t_end, n_t + 1), np.linspace(0.0, length, n_x + 1)


def ftcs_heat(alpha, length, t_end, n_x, n_t, initial, boundary=(None, None), blowup_factor=10.0):
    """Explicit scheme for ``u_t = alpha^2 u_xx``.

    ``info`` holds the ratio ``alpha^2 k / h^2``, the growth of max|u| over
    the run, and ``unstable`` when it exceeds ``blowup_factor``.
    """
    t, x = _heat_grid(length, t_end, n_x, n_t)
    k, h = t[1] - t[0], x[1] - x[0]
    lam = alpha**2 * k / h**2
    left, right = boundary
    u = np.empty((t.size, x.size))
    u[0] = initial(x)
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n_t):
            u[i + 1, 1:-1] = u[i, 1:-1] + lam * (u[i, :-2] - 2 * u[i, 1:-1] + u[i, 2:])
            u[i + 1, 0] = left(t[i + 1]) if left else 0.0
            u[i + 1, -1] = right(t[i + 1]) if right else 0.0
    start = np.max(np.abs(u[0]))
    peak = np.max(np.abs(u)) if np.all(np.isfinite(u)) else np.inf
    growth = peak / start if start > 0 else (0.0 if peak == 0 else np.inf)
    return Grid1D(t, x, u, {"ratio": lam, "growth": growth, "unstable": bool(growth > blowup_factor)})


def btcs_heat(alpha, length, t_end, n_x, n_t, initial, boundary=(None, None)):
    """Implicit scheme for ``u_t = alpha^2 u_xx`` (Thomas solve per step)."""
    t, x = _heat_grid(length, t_end, n_x, n_t)
    k, h = t[1] - t[0], x[1] - x[0]
    lam = alpha**2 * k / h**2
    left, right = boundary
    m = x.size - 2
    lower = np.full(m, -lam)
    diag = np.full(m, 1 + 2 * lam)
    upper = np.full(m, -lam)
    u = np.empty((t.size, x.size))
    u[0] = initial(x)
    for i in range(n_t):
        a = left(t[i + 1]) if left else 0.0
        b = right(t[i + 1]) if right else 0.0
        rhs = u[i, 1:-1].copy()
        rhs[0] += lam * a
        rhs[-1] += lam * b
        u[i + 1, 1:-1] = thomas(lower, diag, upper, rhs)
        u[i + 1, 0], u[i + 1, -1] = a, b
    return Grid1D(t, x, u, {"ratio": lam})


def bs_grid_solver(c, n_t, n_x, x_max, kind="call", american=False, payoff=None):
    """Fully implicit Black-Scholes scheme on ``[0, T] x [0, x_max]``.

    Steps backward from the payoff; for American exercise each step is
    followed by the projection ``u := max(u, payoff)``.
    """
    if kind not in ("call", "put"):
        raise ValueError("kind must be 'call' or 'put'")
    t = np.linspace(0.0, c.T, n_t + 1)
    x = np.linspace(0.0, x_max, n_x + 1)
    dt, dx = t[1] - t[0], x[1] - x[0]
    if payoff is None:
        payoff = (lambda s: np.maximum(s - c.K, 0.0)) if kind == "call" else (lambda s: np.maximum(c.K - s, 0.0))
    g = payoff(x)
    xi = x[1:-1]
    a = 0.5 * c.sigma**2 * xi**2 / dx**2
    b = 0.5 * c.r * xi / dx
    # (1 + dt (2a + r)) u_j - dt (a - b) u_{j-1} - dt (a + b) u_{j+1} = u_j^old
    ab = np.zeros((3, xi.size))
    ab[0, 1:] = -dt * (a + b)[:-1]
    ab[1] = 1 + dt * (2 * a + c.r)
    ab[2, :-1] = -dt * (a - b)[1:]
    lo_c, hi_c = -dt * (a - b)[0], -dt * (a + b)[-1]
    u = np.empty((t.size, x.size))
    u[-1] = g
    for i in range(n_t - 1, -1, -1):
        tau = c.T - t[i]
        if kind == "call":
            left, right = 0.0, x_max - c.K * np.exp(-c.r * tau)
        else:
            left, right = c.K * np.exp(-c.r * tau), 0.0
        if american:
            left, right = max(left, g[0]), max(right, g[-1])
        rhs = u[i + 1, 1:-1].copy()
        rhs[0] -= lo_c * left
        rhs[-1] -= hi_c * right
        u[i, 1:-1] = solve_banded((1, 1), ab, rhs)
        u[i, 0], u[i, -1] = left, right
        if american:
            np.maximum(u[i], g, out=u[i])
    return Grid1D(t, x, u, {"kind": kind, "american": american})
