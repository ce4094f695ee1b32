"""Common plumbing for PDE problems solved with DGM networks."""
from __future__ import annotations

import numpy as np

from ..autodiff import value_of
from ..network import Model, dgm
from ..residuals import DerivConfig, mean_square, stencil
from ..sampling import Batch, DomainBox, sample_interior_uniform, sample_terminal


class Problem:
    """A PDE on a space-time box with one network per unknown.

    Subclasses set ``unknowns`` and implement ``residuals`` (a list of
    per-point residual arrays, one per equation), ``condition`` (target at
    the condition time), and optionally oracles and controls. ``fns`` is
    always a mapping from unknown name to a callable on rows ``(t, x...)``.
    """

    id = ""
    unknowns = ("f",)
    has_boundary = False
    has_penalty = False
    has_integral_loss = False

    def __init__(self, coeffs, box: DomainBox, sizes=None):
        self.coeffs = coeffs
        self.box = box
        self.sizes = {"interior": 1000, "terminal": 100}
        if sizes:
            self.sizes.update(sizes)

    # -- geometry --
    @property
    def dim(self) -> int:
        return self.box.dim

    @property
    def t_bounds(self):
        return (self.box.t0, self.box.T)

    def steps(self, cfg: DerivConfig) -> np.ndarray:
        lo, hi = self.box.input_bounds()
        return cfg.h * (hi - lo)

    def condition_time(self, name) -> float:
        return self.box.T

    # -- networks --
    def value_scale(self, name) -> float:
        """Typical magnitude of the unknown, from its condition on a grid."""
        rng = np.random.default_rng(0)
        pts = sample_terminal(self.box, 512, rng)
        return max(float(np.max(np.abs(self.condition(name, pts)))), 1e-3)

    def new_models(self, rng, n_layers=3, width=50, activation="tanh") -> dict:
        lo, hi = self.box.input_bounds()
        return {name: Model(dgm(n_layers, width, self.dim + 1, 1, activation, rng), lo, hi,
                            self.value_scale(name))
                for name in self.unknowns}

    # -- sampling and losses --
    def sample(self, rng, fns=None, cfg=None) -> Batch:
        return Batch(sample_interior_uniform(self.box, self.sizes["interior"], rng),
                     sample_terminal(self.box, self.sizes["terminal"], rng))

    def derivs(self, fn, points, cfg, space_order=2, cross=False):
        return stencil(fn, points, self.steps(cfg), self.t_bounds, space_order, cross)

    def residuals(self, fns, batch, cfg) -> list:
        raise NotImplementedError

    def condition(self, name, x) -> np.ndarray:
        raise NotImplementedError

    def condition_loss(self, fns, batch):
        total = 0.0
        for name in self.unknowns:
            x = batch.terminal
            pts = np.column_stack([np.full(x.shape[0], self.condition_time(name)), x])
            total = total + mean_square(fns[name](pts) - self.condition(name, x))
        return total

    # -- evaluation --
    def oracle(self, name, points):
        """Reference value at rows ``(t, x...)`` or None if unavailable."""
        return None

    def control(self, fns, points, cfg) -> dict:
        """Controls implied by the value functions (numpy evaluation)."""
        return {}

    def control_oracle(self, points) -> dict:
        return {}

    def report_values(self, fns, points) -> dict:
        """Quantities compared against references in error reports."""
        return {n: np.asarray(value_of(fns[n](points))) for n in self.unknowns}

    def report_reference(self, points):
        out = {n: self.oracle(n, points) for n in self.unknowns}
        return None if any(v is None for v in out.values()) else out

    def oracle_fns(self):
        """The oracles as residual-ready callables (None if any is missing)."""
        pts = np.zeros((1, self.dim + 1))
        pts[0, 0] = self.box.T
        if any(self.oracle(n, pts) is None for n in self.unknowns):
            return None
        return {n: (lambda rows, n=n: self.oracle(n, rows)) for n in self.unknowns}


def mean_abs_residual(problem: Problem, fns, points, cfg: DerivConfig) -> float:
    """Average absolute residual over all equations at fixed points (or a batch)."""
    batch = points if isinstance(points, Batch) else Batch(points, np.zeros((0, problem.dim)))
    res = problem.residuals(fns, batch, cfg)
    return float(np.mean([np.mean(np.abs(value_of(r))) for r in res]))


def normalized_density(fn, points, lo, hi, n_quad=2001):
    """``exp(-u) / int exp(-u)`` at rows ``(t, x)``; the normaliser of each
    distinct time is computed by the trapezoid rule on ``[lo, hi]``."""
    pts = np.atleast_2d(points)
    grid = np.linspace(lo, hi, n_quad)
    u = np.asarray(value_of(fn(pts)))
    out = np.empty(pts.shape[0])
    for t in np.unique(pts[:, 0]):
        sel = pts[:, 0] == t
        ug = np.asarray(value_of(fn(np.column_stack([np.full(n_quad, t), grid]))))
        shift = ug.min()
        mass = np.trapezoid(np.exp(-(ug - shift)), grid)
        out[sel] = np.exp(-(u[sel] - shift)) / mass
    return out
