"""DGM and plain feed-forward networks built from autodiff primitives.

Both forward passes are written once against the helpers in
:mod:`dgmpde.autodiff`: called with the parameter arrays they run as plain
numpy, called with a mapping of bound tape variables they record the graph.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import ACTIVATIONS, Tape, matmul

GATES = ("z", "g", "r", "h")


class ShapeError(ValueError):
    pass


def _xavier(rng, shape):
    fan_out, fan_in = shape
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


@dataclass
class DgmParams:
    """All weights of a DGM network, stored by name.

    Names: ``w1, b1`` (input layer), ``l{k}.u_{gate}``, ``l{k}.w_{gate}``,
    ``l{k}.b_{gate}`` for layer k = 1..n_layers and gate in z, g, r, h, and
    ``w, b`` for the linear output layer. Weight matrices are (out, in).
    """

    n_layers: int
    width: int
    d_in: int
    d_out: int = 1
    activation: str = "tanh"
    arrays: dict = field(default_factory=dict)

    kind = "dgm"

    def shapes(self) -> dict:
        w, d = self.width, self.d_in
        out = {"w1": (w, d), "b1": (w,)}
        for k in range(1, self.n_layers + 1):
            for g in GATES:
                out[f"l{k}.u_{g}"] = (w, d)
            for g in GATES:
                out[f"l{k}.w_{g}"] = (w, w)
            for g in GATES:
                out[f"l{k}.b_{g}"] = (w,)
        out["w"] = (self.d_out, w)
        out["b"] = (self.d_out,)
        return out

    @property
    def n_params(self) -> int:
        return sum(int(np.prod(a.shape)) for a in self.arrays.values())

    def spec(self) -> dict:
        return {"kind": self.kind, "n_layers": self.n_layers, "width": self.width,
                "d_in": self.d_in, "d_out": self.d_out, "activation": self.activation}

    def bind(self, tape: Tape) -> dict:
        return {k: tape.var(v, role="parameter") for k, v in self.arrays.items()}

    def copy(self) -> "DgmParams":
        return DgmParams(self.n_layers, self.width, self.d_in, self.d_out, self.activation,
                         {k: v.copy() for k, v in self.arrays.items()})

    def check(self):
        for name, shape in self.shapes().items():
            if name not in self.arrays:
                raise ShapeError(f"missing tensor {name}")
            if self.arrays[name].shape != shape:
                raise ShapeError(f"tensor {name}: expected shape {shape}, got {self.arrays[name].shape}")


@dataclass
class MlpParams:
    """Dense network with layer sizes ``sizes = [d_in, hidden..., d_out]``."""

    sizes: list
    activation: str = "tanh"
    arrays: dict = field(default_factory=dict)

    kind = "mlp"

    @property
    def d_in(self):
        return self.sizes[0]

    @property
    def d_out(self):
        return self.sizes[-1]

    def shapes(self) -> dict:
        out = {}
        for i, (a, b) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            out[f"w{i}"] = (b, a)
            out[f"b{i}"] = (b,)
        return out

    @property
    def n_params(self) -> int:
        return sum(int(np.prod(a.shape)) for a in self.arrays.values())

    def spec(self) -> dict:
        return {"kind": self.kind, "sizes": list(self.sizes), "activation": self.activation}

    def bind(self, tape: Tape) -> dict:
        return {k: tape.var(v, role="parameter") for k, v in self.arrays.items()}

    def copy(self) -> "MlpParams":
        return MlpParams(list(self.sizes), self.activation, {k: v.copy() for k, v in self.arrays.items()})

    def check(self):
        for name, shape in self.shapes().items():
            if name not in self.arrays or self.arrays[name].shape != shape:
                raise ShapeError(f"tensor {name}: expected shape {shape}")


def dgm_param_count(n_layers, width, d_in, d_out=1) -> int:
    return (d_in * width + width
            + n_layers * (4 * width * d_in + 4 * width**2 + 4 * width)
            + d_out * width + d_out)


def params_from_spec(spec: dict):
    """Empty (zero) parameter structure for a ``spec()`` dictionary."""
    if spec["kind"] == "dgm":
        p = DgmParams(spec["n_layers"], spec["width"], spec["d_in"], spec["d_out"], spec["activation"])
    elif spec["kind"] == "mlp":
        p = MlpParams(list(spec["sizes"]), spec["activation"])
    else:
        raise ValueError(f"unknown network kind {spec['kind']!r}")
    p.arrays = {k: np.zeros(s) for k, s in p.shapes().items()}
    return p


def xavier_init(params, rng: np.random.Generator):
    """Fill ``params`` in place: Xavier-uniform weights, zero biases."""
    if isinstance(params, DgmParams) and (params.width < 1 or params.n_layers < 0):
        raise ValueError("width must be >= 1")
    arrays = {}
    for name, shape in params.shapes().items():
        if len(shape) == 2:
            arrays[name] = _xavier(rng, shape)
        else:
            arrays[name] = np.zeros(shape)
    params.arrays = arrays
    return params


def dgm(n_layers=3, width=50, d_in=2, d_out=1, activation="tanh", rng=None) -> DgmParams:
    """Fresh Xavier-initialised DGM parameters (default: 3 layers of 50)."""
    if activation not in ACTIVATIONS:
        raise ValueError(f"activation must be one of {sorted(ACTIVATIONS)}")
    rng = np.random.default_rng(0) if rng is None else rng
    return xavier_init(DgmParams(n_layers, width, d_in, d_out, activation), rng)


def mlp(sizes, activation="tanh", rng=None) -> MlpParams:
    rng = np.random.default_rng(0) if rng is None else rng
    return xavier_init(MlpParams(list(sizes), activation), rng)


def _as_inputs(inputs, d_in):
    x = np.asarray(inputs, dtype=np.float64) if not hasattr(inputs, "tape") else inputs
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.shape[-1] != d_in:
        raise ShapeError(f"input dimension {x.shape[-1]} does not match d_in={d_in}")
    return x


def dgm_forward(params: DgmParams, inputs, weights=None):
    """Evaluate the DGM network on rows ``inputs = [(t, x_1, ..., x_d), ...]``.

    Returns an (n, d_out) array, or a Var when ``weights`` are tape variables
    (as returned by ``params.bind(tape)``).
    """
    p = params.arrays if weights is None else weights
    x = _as_inputs(inputs, params.d_in)
    act = ACTIVATIONS[params.activation]
    s = act(matmul(x, p["w1"].T) + p["b1"])
    for k in range(1, params.n_layers + 1):
        z, g, r = (act(matmul(x, p[f"l{k}.u_{q}"].T) + matmul(s, p[f"l{k}.w_{q}"].T) + p[f"l{k}.b_{q}"])
                   for q in "zgr")
        h = act(matmul(x, p[f"l{k}.u_h"].T) + matmul(s * r, p[f"l{k}.w_h"].T) + p[f"l{k}.b_h"])
        s = (1.0 - g) * h + z * s
    return matmul(s, p["w"].T) + p["b"]


def mlp_forward(params: MlpParams, inputs, weights=None):
    p = params.arrays if weights is None else weights
    x = _as_inputs(inputs, params.d_in)
    act = ACTIVATIONS[params.activation]
    n = len(params.sizes) - 1
    for i in range(n):
        x = matmul(x, p[f"w{i}"].T) + p[f"b{i}"]
        if i < n - 1:
            x = act(x)
    return x


def forward(params, inputs, weights=None):
    if isinstance(params, DgmParams):
        return dgm_forward(params, inputs, weights)
    return mlp_forward(params, inputs, weights)


class Model:
    """A network acting on physical coordinates.

    Inputs are mapped affinely from the box ``[lo, hi]`` to the unit cube and
    the first network output is multiplied by ``scale``. ``lo``/``hi`` are the
    training box, so evaluation outside them counts as extrapolation.
    """

    def __init__(self, params, lo, hi, scale=1.0):
        self.params = params
        self.lo = np.asarray(lo, dtype=np.float64)
        self.hi = np.asarray(hi, dtype=np.float64)
        self.scale = float(scale)

    def __call__(self, inputs, weights=None):
        x = (np.atleast_2d(np.asarray(inputs, dtype=np.float64)) - self.lo) / (self.hi - self.lo)
        out = forward(self.params, x, weights)
        return out[:, 0] * self.scale

    def outside(self, inputs, tol=1e-12) -> np.ndarray:
        x = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
        return np.any((x < self.lo - tol) | (x > self.hi + tol), axis=1)
