"""Optimisation loop: Adam/SGD steps, resampling, history and checkpoints."""
from __future__ import annotations

import csv
import io
import json
import struct
import time
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .autodiff import Tape, TapeError
from .network import Model, ShapeError, params_from_spec
from .residuals import DerivConfig, ResidualError, total_loss


class TrainingError(RuntimeError):
    """Training stopped on a non-finite loss or gradient."""

    def __init__(self, message, iteration=None, report=None, history=None):
        super().__init__(message)
        self.iteration = iteration
        self.report = report
        self.history = history or []


class CheckpointVersionError(ValueError):
    pass


# -- optimisers -------------------------------------------------------------------

@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    lr: float = 1e-3


def adam_step(params: dict, grads: dict, state: AdamState, lr=None):
    """Bias-corrected Adam update of the arrays in ``params`` (in place)."""
    lr = state.lr if lr is None else lr
    for name, g in grads.items():
        if name not in params:
            raise KeyError(f"gradient for unknown tensor {name}")
        if params[name].shape != np.shape(g):
            raise ShapeError(f"tensor {name}: gradient shape {np.shape(g)} != {params[name].shape}")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1 - b1**state.step
    c2 = 1 - b2**state.step
    for name, g in grads.items():
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(params[name])
            state.v[name] = np.zeros_like(params[name])
        v = state.v[name]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        params[name] -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


def sgd_step(params: dict, grads: dict, lr: float):
    for name, g in grads.items():
        params[name] -= lr * g
    return params


def learning_rate(schedule, iteration: int) -> float:
    """Piecewise-constant schedule given as [(start_iteration, rate), ...]."""
    rate = schedule[0][1]
    for start, r in schedule:
        if iteration >= start:
            rate = r
    return rate


# -- training loop ----------------------------------------------------------------

@dataclass
class TrainConfig:
    iterations: int = 1000
    resample_every: int = 10
    seed: int = 0
    lr_schedule: list = field(default_factory=lambda: [(0, 1e-3)])
    tol: float = 1e-8
    term_weights: dict = field(default_factory=dict)
    optimizer: str = "adam"

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.resample_every < 1:
            raise ValueError("resample period must be >= 1")
        if not self.lr_schedule:
            raise ValueError("learning-rate schedule is empty")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError("optimizer must be 'adam' or 'sgd'")


@dataclass
class TrainResult:
    history: list
    state: AdamState
    iterations: int
    converged: bool = False


def flat_params(models: dict) -> dict:
    """Views of every model's arrays under ``model/tensor`` names."""
    return {f"{name}/{k}": a for name, m in models.items() for k, a in m.params.arrays.items()}


def train(problem, models: dict, cfg: TrainConfig, deriv: DerivConfig = DerivConfig(),
          state: AdamState | None = None, callback=None) -> TrainResult:
    """Fit ``models`` (unknown name -> Model) to ``problem``.

    Points are redrawn every ``resample_every`` iterations. On a non-finite
    loss or gradient the parameters are left at the last finite step and
    :class:`TrainingError` is raised.
    """
    state = AdamState(lr=cfg.lr_schedule[0][1]) if state is None else state
    rng = np.random.default_rng(cfg.seed)
    params = flat_params(models)
    history = []
    batch = None
    converged = False
    it = 0
    for it in range(cfg.iterations):
        start = time.perf_counter()
        if it % cfg.resample_every == 0:
            batch = problem.sample(rng, models, deriv)
        tape = Tape()
        try:
            bound = {name: m.params.bind(tape) for name, m in models.items()}
            fns = {name: partial(m, weights=bound[name]) for name, m in models.items()}
            report = total_loss(problem, fns, batch, deriv, cfg.term_weights)
        except (TapeError, ResidualError, FloatingPointError) as exc:
            raise TrainingError(f"non-finite loss at iteration {it}: {exc}", it, history=history) from exc
        if report.total_var is None:
            break
        g = tape.backward(report.total_var)
        grads = {f"{name}/{k}": g[v] for name, b in bound.items() for k, v in b.items()}
        if not all(np.all(np.isfinite(a)) for a in grads.values()):
            raise TrainingError(f"non-finite gradient at iteration {it}", it, report, history)
        lr = learning_rate(cfg.lr_schedule, it)
        before = {k: a.copy() for k, a in params.items()} if cfg.tol > 0 else None
        if cfg.optimizer == "adam":
            adam_step(params, grads, state, lr)
        else:
            sgd_step(params, grads, lr)
        row = {"iteration": it, **report.row(), "wall_ms": 1e3 * (time.perf_counter() - start)}
        history.append(row)
        if callback is not None:
            callback(it, report, models)
        if before is not None:
            step = np.sqrt(sum(float(np.sum((params[k] - before[k]) ** 2)) for k in params))
            if step < cfg.tol:
                converged = True
                break
    return TrainResult(history, state, len(history), converged)


HISTORY_COLUMNS = ("iteration", "l1", "l2", "l3", "l4", "total", "wall_ms")


def history_csv(history, deterministic=False) -> str:
    """Loss history as CSV text; ``wall_ms`` is written as 0 when deterministic."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HISTORY_COLUMNS)
    for row in history:
        vals = [row["iteration"]] + [repr(float(row[k])) for k in HISTORY_COLUMNS[1:-1]]
        vals.append(0 if deterministic else f"{row['wall_ms']:.3f}")
        w.writerow(vals)
    return buf.getvalue()


# -- checkpoints ------------------------------------------------------------------

MAGIC = b"DGMCKPT\x00"
VERSION = 1


def _pack_array(name: str, a: np.ndarray) -> bytes:
    raw = name.encode("utf-8")
    a = np.ascontiguousarray(a, dtype="<f8")
    return (struct.pack("<H", len(raw)) + raw + struct.pack("<B", a.ndim)
            + struct.pack(f"<{a.ndim}Q", *a.shape) + a.tobytes())


def checkpoint_bytes(models: dict, state: AdamState | None = None, meta: dict | None = None) -> bytes:
    header = {
        "meta": meta or {},
        "models": {name: {"spec": m.params.spec(), "lo": m.lo.tolist(), "hi": m.hi.tolist(), "scale": m.scale}
                   for name, m in models.items()},
        "adam": None if state is None else {"step": state.step, "beta1": state.beta1, "beta2": state.beta2,
                                             "eps": state.eps, "lr": state.lr},
    }
    arrays = [(f"{name}/{k}", a) for name, m in models.items() for k, a in m.params.arrays.items()]
    if state is not None:
        arrays += [(f"adam.m/{k}", a) for k, a in sorted(state.m.items())]
        arrays += [(f"adam.v/{k}", a) for k, a in sorted(state.v.items())]
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [MAGIC, struct.pack("<I", VERSION), struct.pack("<Q", len(head)), head,
             struct.pack("<I", len(arrays))]
    parts += [_pack_array(n, a) for n, a in arrays]
    return b"".join(parts)


def checkpoint_save(models: dict, state: AdamState | None, meta: dict | None, path):
    with open(path, "wb") as fh:
        fh.write(checkpoint_bytes(models, state, meta))


def checkpoint_load(path, like: dict | None = None):
    """Read a checkpoint; returns (models, state, meta).

    With ``like`` (a dict of models) every tensor is checked against the
    shapes of the corresponding model, and a mismatch names the tensor.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(MAGIC):
        raise ValueError("not a checkpoint file")
    pos = len(MAGIC)
    (version,) = struct.unpack_from("<I", data, pos)
    pos += 4
    if version != VERSION:
        raise CheckpointVersionError(f"checkpoint format version {version}, expected {VERSION}")
    (hlen,) = struct.unpack_from("<Q", data, pos)
    pos += 8
    header = json.loads(data[pos:pos + hlen].decode("utf-8"))
    pos += hlen
    (count,) = struct.unpack_from("<I", data, pos)
    pos += 4
    arrays = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", data, pos)
        pos += 2
        name = data[pos:pos + nlen].decode("utf-8")
        pos += nlen
        (ndim,) = struct.unpack_from("<B", data, pos)
        pos += 1
        shape = struct.unpack_from(f"<{ndim}Q", data, pos)
        pos += 8 * ndim
        size = int(np.prod(shape)) if ndim else 1
        arrays[name] = np.frombuffer(data, dtype="<f8", count=size, offset=pos).reshape(shape).astype(np.float64)
        pos += 8 * size
    models = {}
    for name, info in header["models"].items():
        p = params_from_spec(info["spec"])
        for k in p.arrays:
            key = f"{name}/{k}"
            if key not in arrays:
                raise ShapeError(f"checkpoint is missing tensor {key}")
            if arrays[key].shape != p.arrays[k].shape:
                raise ShapeError(f"tensor {key}: stored shape {arrays[key].shape}, expected {p.arrays[k].shape}")
            p.arrays[k] = arrays[key]
        models[name] = Model(p, info["lo"], info["hi"], info["scale"])
    if like is not None:
        for name, m in like.items():
            if name not in models:
                raise ShapeError(f"checkpoint has no network {name}")
            for k, a in m.params.arrays.items():
                got = models[name].params.arrays.get(k)
                if got is None or got.shape != a.shape:
                    shape = None if got is None else got.shape
                    raise ShapeError(f"tensor {name}/{k}: stored shape {shape}, expected {a.shape}")
    state = None
    if header["adam"] is not None:
        a = header["adam"]
        state = AdamState(step=a["step"], beta1=a["beta1"], beta2=a["beta2"], eps=a["eps"], lr=a["lr"])
        state.m = {k[len("adam.m/"):]: v for k, v in arrays.items() if k.startswith("adam.m/")}
        state.v = {k[len("adam.v/"):]: v for k, v in arrays.items() if k.startswith("adam.v/")}
    return models, state, header["meta"]
