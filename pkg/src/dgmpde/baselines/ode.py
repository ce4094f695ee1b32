"""Explicit and implicit Euler schemes for scalar ODEs ``y' = f(t, y)``."""
from __future__ import annotations

import numpy as np


class ConvergenceError(RuntimeError):
    pass


def _nodes(t_end, h_step):
    if not h_step > 0:
        raise ValueError("step must be positive")
    n = int(round(t_end / h_step))
    return np.arange(n + 1) * h_step


def euler_explicit(f, y0, t_end, h_step):
    """``y_{i+1} = y_i + h f(t_i, y_i)``. Returns (t, y)."""
    t = _nodes(t_end, h_step)
    y = np.empty(t.size)
    y[0] = y0
    for i in range(t.size - 1):
        y[i + 1] = y[i] + h_step * f(t[i], y[i])
    return t, y


def euler_implicit(f, dfdy, y0, t_end, h_step, newton_tol=1e-12, max_iter=50):
    """``y_{i+1} = y_i + h f(t_{i+1}, y_{i+1})`` with Newton's method per step.

    Returns (t, y, newton_iterations_per_step).
    """
    t = _nodes(t_end, h_step)
    y = np.empty(t.size)
    y[0] = y0
    iters = np.zeros(t.size - 1, dtype=int)
    for i in range(t.size - 1):
        z = y[i]
        for it in range(1, max_iter + 1):
            g = z - y[i] - h_step * f(t[i + 1], z)
            dz = g / (1.0 - h_step * dfdy(t[i + 1], z))
            z -= dz
            if abs(dz) <= newton_tol * max(1.0, abs(z)):
                break
        else:
            raise ConvergenceError(f"Newton did not converge in {max_iter} iterations at t={t[i + 1]:.6g}")
        y[i + 1] = z
        iters[i] = it
    return t, y, iters
