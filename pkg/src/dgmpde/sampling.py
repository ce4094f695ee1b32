"""Random space-time points for training.

Three schemes are supported for the interior: uniform on the (possibly
oversampled) box, lognormal in space following a geometric Brownian motion,
and a product grid of uniformly drawn times and positions used by problems
that need an integral over space at each sampled time.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class DomainBox:
    """Space-time box ``[t0, T] x prod_i [lo_i, hi_i]``.

    ``oversample[i]`` stretches the upper bound of dimension i to
    ``lo_i + factor * (hi_i - lo_i)``; lower bounds stay put.
    """

    t_range: tuple
    lo: tuple
    hi: tuple
    oversample: tuple = ()

    def __post_init__(self):
        t0, t1 = self.t_range
        if not t0 < t1:
            raise ValueError("t_range must satisfy t0 < T")
        if len(self.lo) != len(self.hi):
            raise ValueError("lo and hi must have the same length")
        if any(not a < b for a, b in zip(self.lo, self.hi)):
            raise ValueError("every spatial range needs lo < hi")
        if not self.oversample:
            object.__setattr__(self, "oversample", (1.0,) * len(self.lo))
        if len(self.oversample) != len(self.lo):
            raise ValueError("one oversample factor per spatial dimension")
        if any(not (np.isfinite(f) and f >= 1.0) for f in self.oversample):
            raise ValueError("oversample factors must be finite and >= 1")

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def t0(self) -> float:
        return float(self.t_range[0])

    @property
    def T(self) -> float:
        return float(self.t_range[1])

    @property
    def sample_lo(self) -> np.ndarray:
        return np.asarray(self.lo, dtype=np.float64)

    @property
    def sample_hi(self) -> np.ndarray:
        lo = self.sample_lo
        return lo + np.asarray(self.oversample) * (np.asarray(self.hi, dtype=np.float64) - lo)

    def stretched(self) -> "DomainBox":
        """The oversampled region as a box of its own."""
        return DomainBox(self.t_range, tuple(self.sample_lo), tuple(self.sample_hi))

    def input_bounds(self):
        """Lower/upper corners of the sampled region including time."""
        return (np.concatenate([[self.t0], self.sample_lo]),
                np.concatenate([[self.T], self.sample_hi]))

    def contains(self, points, tol=1e-12) -> np.ndarray:
        pts = np.atleast_2d(points)
        lo, hi = self.input_bounds()
        return np.all((pts >= lo - tol) & (pts <= hi + tol), axis=1)


@dataclass
class Batch:
    """Sampled points. Interior and boundary rows are ``(t, x_1..x_d)``;
    terminal rows are spatial only (time fixed by the problem)."""

    interior: np.ndarray
    terminal: np.ndarray
    boundary: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    grid_shape: tuple | None = None  # (n_t, n_x) when interior is a product grid
    aux: dict = field(default_factory=dict)


def sample_interior_uniform(box: DomainBox, n: int, rng: np.random.Generator) -> np.ndarray:
    lo, hi = box.input_bounds()
    if n <= 0:
        return np.zeros((0, box.dim + 1))
    return lo + (hi - lo) * rng.random((n, box.dim + 1))


def sample_lognormal(box: DomainBox, gbm, n: int, rng: np.random.Generator) -> np.ndarray:
    """Times uniform on ``[t0, T]``; one spatial coordinate distributed as GBM
    started at ``s0``: ``s0 exp((mu - sigma^2/2) t + sigma sqrt(t) Z)``."""
    s0, mu, sigma = gbm
    if not (s0 > 0 and sigma > 0):
        raise ValueError("s0 and sigma must be positive")
    if n <= 0:
        return np.zeros((0, 2))
    t = box.t0 + (box.T - box.t0) * rng.random(n)
    z = rng.standard_normal(n)
    x = s0 * np.exp((mu - 0.5 * sigma**2) * t + sigma * np.sqrt(t) * z)
    return np.column_stack([t, x])


def sample_terminal(box: DomainBox, n: int, rng: np.random.Generator) -> np.ndarray:
    lo, hi = box.sample_lo, box.sample_hi
    if n <= 0:
        return np.zeros((0, box.dim))
    return lo + (hi - lo) * rng.random((n, box.dim))


def sample_boundary(box: DomainBox, n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform on the lateral boundary: a random face, then uniform on it."""
    if n <= 0:
        return np.zeros((0, box.dim + 1))
    pts = sample_interior_uniform(box, n, rng)
    face = rng.integers(0, 2 * box.dim, size=n)
    dim = face // 2
    upper = face % 2 == 1
    lo, hi = box.sample_lo, box.sample_hi
    rows = np.arange(n)
    pts[rows, 1 + dim] = np.where(upper, hi[dim], lo[dim])
    return pts


def sample_grid(box: DomainBox, n_t: int, n_x: int, rng: np.random.Generator) -> np.ndarray:
    """Product of ``n_t`` uniform times and ``n_x`` uniform positions (1-d space).

    Rows are ordered time-major: row ``j * n_x + k`` is ``(t_j, x_k)``.
    """
    if box.dim != 1:
        raise ValueError("product grid sampling is one-dimensional in space")
    t = box.t0 + (box.T - box.t0) * rng.random(n_t)
    x = box.sample_lo[0] + (box.sample_hi[0] - box.sample_lo[0]) * rng.random(n_x)
    return np.column_stack([np.repeat(t, n_x), np.tile(x, n_t)])


def importance_weights(u_values) -> np.ndarray:
    """Self-normalised weights proportional to ``exp(-u)``."""
    u = np.asarray(u_values, dtype=np.float64)
    if u.size == 0:
        raise ValueError("importance_weights needs at least one value")
    if not np.all(np.isfinite(u)):
        raise ValueError("importance_weights needs finite values")
    w = np.exp(-(u - u.min(axis=-1, keepdims=True)))
    return w / w.sum(axis=-1, keepdims=True)


def worker_rng(master_seed: int, worker: int) -> np.random.Generator:
    """Independent stream for one worker, derived from the master seed."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(worker,)))
