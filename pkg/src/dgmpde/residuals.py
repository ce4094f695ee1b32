"""Finite-difference derivatives of networks and assembly of the DGM loss.

Spatial and time derivatives are central differences; second derivatives use
the three-point stencil on the diagonal and the four-point cross stencil off
it. All shifted evaluations of a batch are stacked into a single forward
pass, so with a tape the derivatives (and hence the loss) stay differentiable
with respect to the network parameters.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Var, concat, detach, max0, value_of
from .sampling import importance_weights


class ResidualError(ValueError):
    pass


@dataclass(frozen=True)
class DerivConfig:
    """``h`` is relative: the step in each coordinate is ``h`` times the
    width of the sampled range of that coordinate."""

    h: float = 1e-3
    scheme: str = "central"
    symmetrize: bool = True

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("h must be positive")
        if self.h >= 1e-2 + 1e-15:
            raise ValueError("h must be below 1e-2 of the domain width")
        if self.scheme != "central":
            raise ValueError("only the central scheme is implemented")


@dataclass
class LossReport:
    l1_operator: float = 0.0
    l2_boundary: float = 0.0
    l3_terminal: float = 0.0
    l4_penalty: float = 0.0
    integral_terms: float = 0.0
    total: float = 0.0
    total_var: Var | None = None

    def row(self) -> dict:
        return {"l1": self.l1_operator, "l2": self.l2_boundary, "l3": self.l3_terminal,
                "l4": self.l4_penalty, "total": self.total}


# -- pointwise finite differences -------------------------------------------------

def _eval(f, p, coord):
    v = float(f(p))
    if not np.isfinite(v):
        raise ResidualError(f"non-finite function value at shift along coordinate {coord}")
    return v


def fd_gradient(f, p, cfg: DerivConfig | float) -> np.ndarray:
    """Central-difference gradient of ``f`` at ``p`` with absolute step ``h``."""
    h = cfg.h if isinstance(cfg, DerivConfig) else float(cfg)
    p = np.atleast_1d(np.asarray(p, dtype=np.float64))
    g = np.empty(p.size)
    for j in range(p.size):
        e = np.zeros(p.size)
        e[j] = h
        g[j] = (_eval(f, p + e, j) - _eval(f, p - e, j)) / (2 * h)
    return g


def fd_hessian(f, p, cfg: DerivConfig | float) -> np.ndarray:
    """Central-difference Hessian, symmetrised as ``0.5 (H + H^T)``."""
    h = cfg.h if isinstance(cfg, DerivConfig) else float(cfg)
    p = np.atleast_1d(np.asarray(p, dtype=np.float64))
    n = p.size
    H = np.empty((n, n))
    f0 = _eval(f, p, "center")
    for j in range(n):
        ej = np.zeros(n)
        ej[j] = h
        H[j, j] = (_eval(f, p + ej, j) - 2 * f0 + _eval(f, p - ej, j)) / h**2
        for k in range(n):
            if k == j:
                continue
            ek = np.zeros(n)
            ek[k] = h
            H[j, k] = (_eval(f, p + ej + ek, (j, k)) - _eval(f, p + ej - ek, (j, k))
                       - _eval(f, p - ej + ek, (j, k)) + _eval(f, p - ej - ek, (j, k))) / (4 * h * h)
    return 0.5 * (H + H.T)


# -- batched stencils -------------------------------------------------------------

@dataclass
class Derivs:
    """Value and finite-difference derivatives at a batch of points.

    ``grad[j]`` is the derivative along spatial coordinate j, ``hess[j][k]``
    the second derivative (the same object for (j, k) and (k, j)).
    """

    f: object
    f_t: object = None
    grad: list | None = None
    hess: list | None = None

    @property
    def f_x(self):
        return self.grad[0]

    @property
    def f_xx(self):
        return self.hess[0][0]


def time_stencil(t, h, t_bounds):
    """Offsets and weights for d/dt at each point.

    Central ``(f(t+h) - f(t-h)) / 2h`` inside the box; one-sided second-order
    ``(3f(t) - 4f(t-h) + f(t-2h)) / 2h`` (mirrored at the lower end) where the
    central stencil would leave ``t_bounds``.
    """
    n = t.shape[0]
    off = np.empty((n, 2))
    coef = np.zeros((n, 3))  # weights of f(t), f(t+off0 h), f(t+off1 h)
    off[:] = (-1.0, 1.0)
    coef[:] = (0.0, -0.5 / h, 0.5 / h)
    if t_bounds is not None:
        lo, hi = t_bounds
        upper = t + h > hi + 1e-12
        lower = t - h < lo - 1e-12
        if np.any(upper & lower):
            raise ResidualError("time range is narrower than the stencil")
        off[upper] = (-1.0, -2.0)
        coef[upper] = (1.5 / h, -2.0 / h, 0.5 / h)
        off[lower] = (1.0, 2.0)
        coef[lower] = (-1.5 / h, 2.0 / h, -0.5 / h)
    return off, coef


def stencil(fn, points, steps, t_bounds=None, space_order=2, cross=False, time=True) -> Derivs:
    """Evaluate ``fn`` on all shifted copies of ``points`` at once.

    ``points`` has rows ``(t, x_1..x_d)``; ``steps`` gives the absolute step
    per column. ``space_order`` 0/1/2 selects how many spatial derivatives are
    formed; ``cross`` adds mixed second derivatives.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    n, D = pts.shape
    d = D - 1
    steps = np.asarray(steps, dtype=np.float64)
    blocks = [pts]
    if time:
        ht = steps[0]
        off, coef = time_stencil(pts[:, 0], ht, t_bounds)
        for m in range(2):
            b = pts.copy()
            b[:, 0] += off[:, m] * ht
            blocks.append(b)
    if space_order >= 1:
        for j in range(d):
            for s in (1.0, -1.0):
                b = pts.copy()
                b[:, 1 + j] += s * steps[1 + j]
                blocks.append(b)
    pairs = [(j, k) for j in range(d) for k in range(j + 1, d)] if (cross and space_order >= 2) else []
    for j, k in pairs:
        for sj, sk in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
            b = pts.copy()
            b[:, 1 + j] += sj * steps[1 + j]
            b[:, 1 + k] += sk * steps[1 + k]
            blocks.append(b)
    vals = fn(np.concatenate(blocks, axis=0))
    if not np.all(np.isfinite(value_of(vals))):
        bad = np.flatnonzero(~np.isfinite(value_of(vals)))[0] % n
        raise ResidualError(f"non-finite value near point {pts[bad].tolist()}")

    def blk(i):
        return vals[i * n:(i + 1) * n]

    f0 = blk(0)
    out = Derivs(f=f0)
    i = 1
    if time:
        f_t = coef[:, 1] * blk(1) + coef[:, 2] * blk(2)
        if np.any(coef[:, 0] != 0):
            f_t = f_t + coef[:, 0] * f0
        out.f_t = f_t
        i = 3
    if space_order >= 1:
        grad, hess = [], [[None] * d for _ in range(d)]
        for j in range(d):
            fp, fm = blk(i), blk(i + 1)
            i += 2
            h = steps[1 + j]
            grad.append((fp - fm) * (0.5 / h))
            if space_order >= 2:
                hess[j][j] = (fp - 2.0 * f0 + fm) * (1.0 / h**2)
        for j, k in pairs:
            fpp, fpm, fmp, fmm = blk(i), blk(i + 1), blk(i + 2), blk(i + 3)
            i += 4
            # symmetric by construction: one node serves (j, k) and (k, j)
            hess[j][k] = hess[k][j] = (fpp - fpm - fmp + fmm) * (0.25 / (steps[1 + j] * steps[1 + k]))
        out.grad = grad
        out.hess = hess if space_order >= 2 else None
    return out


# -- loss terms -------------------------------------------------------------------

def mean_square(r):
    if isinstance(r, Var):
        return (r * r).mean()
    r = np.asarray(r)
    return np.mean(r * r)


def residual_l1(problem, fns, batch, cfg: DerivConfig):
    """Mean squared interior residual (summed over the equations of a system)."""
    if batch.interior.shape[0] == 0:
        raise ResidualError("interior batch is empty")
    res = problem.residuals(fns, batch, cfg)
    total = 0.0
    for r in res:
        total = total + mean_square(r)
    return total


def terminal_loss_l3(problem, fns, batch):
    if batch.terminal.shape[0] == 0:
        raise ResidualError("terminal batch is empty")
    return problem.condition_loss(fns, batch)


def boundary_loss_l2(problem, fns, batch):
    if not problem.has_boundary:
        return 0.0
    return problem.boundary_loss(fns, batch)


def inequality_penalty(fn, points, payoff, margin=0.0) -> object:
    """Mean of ``max(payoff(x) + margin - f(t, x), 0)^2`` over interior points.

    A positive margin penalises values that come within ``margin`` of the
    payoff, which keeps the fitted surface on the admissible side.
    """
    pts = np.atleast_2d(points)
    if pts.shape[0] == 0:
        raise ResidualError("interior batch is empty")
    f = fn(pts)
    return mean_square(max0(payoff(pts[:, 1:]) + margin - f))


def integral_term(fn, t_grid, x_grid, step_t, t_bounds=None, u_t=None):
    """Importance-sampled ``E[d_t u]`` under the density ``exp(-u)`` per time.

    Returns one value per entry of ``t_grid``. The weights use the current
    values of ``u`` and are treated as constants.
    """
    t_grid = np.asarray(t_grid, dtype=np.float64)
    x_grid = np.asarray(x_grid, dtype=np.float64)
    if t_grid.size == 0 or x_grid.size == 0:
        raise ResidualError("integral grids must be nonempty")
    n_t, n_x = t_grid.size, x_grid.size
    pts = np.column_stack([np.repeat(t_grid, n_x), np.tile(x_grid, n_t)])
    d = stencil(fn, pts, [step_t, 1.0], t_bounds, space_order=0)
    return weighted_time_mean(d.f, d.f_t, n_t, n_x)


def weighted_time_mean(u, u_t, n_t, n_x, values=None):
    """``sum_k values(t_j, x_k) w_jk`` with ``w_j ∝ exp(-u(t_j, .))``.

    ``values`` defaults to ``u_t``; all arrays are time-major of length
    ``n_t * n_x``. Returns shape (n_t,) (a Var if ``values`` is one).
    """
    w = importance_weights(value_of(u).reshape(n_t, n_x))
    v = u_t if values is None else values
    if isinstance(v, Var):
        return (v.reshape(n_t, n_x) * w).sum(axis=1)
    return (np.asarray(v).reshape(n_t, n_x) * w).sum(axis=1)


def total_loss(problem, fns, batch, cfg: DerivConfig, weights=None) -> LossReport:
    """Weighted sum of the loss terms the problem declares (weights default 1)."""
    w = {"l1": 1.0, "l2": 1.0, "l3": 1.0, "l4": 1.0, "integral": 1.0}
    if weights:
        w.update(weights)
    terms = {"l1": residual_l1(problem, fns, batch, cfg),
             "l2": boundary_loss_l2(problem, fns, batch),
             "l3": terminal_loss_l3(problem, fns, batch),
             "l4": problem.penalty(fns, batch) if problem.has_penalty else 0.0,
             "integral": problem.integral_loss(fns, batch, cfg) if problem.has_integral_loss else 0.0}
    total = 0.0
    for k, v in terms.items():
        if w[k] != 0.0 and not (isinstance(v, float) and v == 0.0):
            total = total + w[k] * v
    vals = {k: float(value_of(v)) for k, v in terms.items()}
    for k, v in vals.items():
        if not np.isfinite(v):
            raise ResidualError(f"loss term {k} is not finite")
    return LossReport(vals["l1"], vals["l2"], vals["l3"], vals["l4"], vals["integral"],
                      float(value_of(total)), total if isinstance(total, Var) else None)


__all__ = ["DerivConfig", "LossReport", "Derivs", "fd_gradient", "fd_hessian", "stencil",
           "time_stencil", "residual_l1", "terminal_loss_l3", "boundary_loss_l2",
           "inequality_penalty", "integral_term", "weighted_time_mean", "total_loss",
           "mean_square", "detach", "concat"]
