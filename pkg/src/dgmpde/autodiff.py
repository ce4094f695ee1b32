"""Reverse-mode automatic differentiation on an append-only tape.

Every node stores its opcode, the indices of its operands, its forward value
and the local partial derivatives needed by the reverse sweep. Values are
numpy arrays, so a node may hold a single real (0-d array) or a whole batch
of them; the opcodes act element-wise with numpy broadcasting, plus a few
structural ones (matmul, sum, slicing, concatenation) used by the networks.

    >>> tape = Tape()
    >>> x = tape.var(3.0, role="parameter")
    >>> y = x * x
    >>> float(tape.backward(y)[x])
    6.0
"""
from __future__ import annotations

import numpy as np
from scipy.special import expit

ROLES = ("parameter", "input", "constant")

UNARY = ("neg", "exp", "ln", "tanh", "sigmoid", "square", "sqrt", "max0", "pow-int")
BINARY = ("add", "sub", "mul", "div")
STRUCTURAL = ("matmul", "sum", "getitem", "concat", "transpose", "reshape")
OPCODES = BINARY + UNARY + STRUCTURAL
# finite operands always give finite results for these
_FINITE_PRESERVING = frozenset(("neg", "tanh", "sigmoid", "max0", "getitem", "concat", "transpose", "reshape"))


class TapeError(ValueError):
    """Raised when a node cannot be built (bad input or domain violation)."""


class Node:
    __slots__ = ("op", "args", "value", "partials", "attrs", "needs_grad", "role")

    def __init__(self, op, args, value, partials=(), attrs=None, needs_grad=False, role="constant"):
        self.op = op
        self.args = args
        self.value = value
        self.partials = partials
        self.attrs = attrs
        self.needs_grad = needs_grad
        self.role = role


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` (reverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Var:
    """Handle to one node of a :class:`Tape`."""

    __slots__ = ("tape", "index")
    __array_priority__ = 1000  # so ndarray <op> Var defers to Var

    def __init__(self, tape: "Tape", index: int):
        self.tape = tape
        self.index = index

    @property
    def node(self) -> Node:
        return self.tape.nodes[self.index]

    @property
    def value(self) -> np.ndarray:
        return self.tape.nodes[self.index].value

    @property
    def role(self) -> str:
        return self.node.role

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def __len__(self):
        return len(self.value)

    def __repr__(self):
        return f"Var(index={self.index}, op={self.node.op!r}, shape={self.shape})"

    def __hash__(self):
        return hash((id(self.tape), self.index))

    def __eq__(self, other):
        return isinstance(other, Var) and other.tape is self.tape and other.index == self.index

    def __float__(self):
        return float(self.value)

    def __add__(self, other):
        return self.tape.apply("add", self, other)

    def __radd__(self, other):
        return self.tape.apply("add", other, self)

    def __sub__(self, other):
        return self.tape.apply("sub", self, other)

    def __rsub__(self, other):
        return self.tape.apply("sub", other, self)

    def __mul__(self, other):
        return self.tape.apply("mul", self, other)

    def __rmul__(self, other):
        return self.tape.apply("mul", other, self)

    def __truediv__(self, other):
        return self.tape.apply("div", self, other)

    def __rtruediv__(self, other):
        return self.tape.apply("div", other, self)

    def __neg__(self):
        return self.tape.apply("neg", self)

    def __pow__(self, n):
        if isinstance(n, (int, np.integer)):
            if n == 2:
                return self.tape.apply("square", self)
            return self.tape.apply("pow-int", self, n=int(n))
        raise TapeError("pow-int: exponent must be an integer")

    def __matmul__(self, other):
        return self.tape.apply("matmul", self, other)

    def __rmatmul__(self, other):
        return self.tape.apply("matmul", other, self)

    def __getitem__(self, key):
        return self.tape.apply("getitem", self, key=key)

    @property
    def T(self):
        return self.tape.apply("transpose", self)

    def sum(self, axis=None):
        return self.tape.apply("sum", self, axis=axis)

    def mean(self, axis=None):
        count = self.value.size if axis is None else self.value.shape[axis]
        return self.sum(axis=axis) * (1.0 / count)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        return self.tape.apply("reshape", self, shape=shape)


class Tape:
    """Append-only computation record.

    Operand indices always precede the index of the node that uses them, so
    the creation order is a valid topological order and :meth:`backward` is a
    single reverse pass over the list.
    """

    def __init__(self):
        self.nodes: list[Node] = []

    def __len__(self):
        return len(self.nodes)

    def _push(self, node: Node) -> Var:
        self.nodes.append(node)
        return Var(self, len(self.nodes) - 1)

    def var(self, value, role: str = "input") -> Var:
        if role not in ROLES:
            raise TapeError(f"unknown role {role!r}")
        value = np.array(value, dtype=np.float64)
        if not np.all(np.isfinite(value)):
            raise TapeError("var: non-finite value")
        return self._push(Node("var", (), value, needs_grad=(role == "parameter"), role=role))

    def const(self, value) -> Var:
        return self.var(value, role="constant")

    def _lift(self, x) -> Var:
        if isinstance(x, Var):
            if x.tape is not self:
                raise TapeError("operand belongs to a different tape")
            return x
        return self.const(x)

    def apply(self, op: str, *args, **attrs) -> Var:
        if op not in OPCODES:
            raise TapeError(f"unknown opcode {op!r}")
        if op == "concat":
            operands = [self._lift(a) for a in args[0]]
        elif op in BINARY or op == "matmul":
            if len(args) != 2:
                raise TapeError(f"{op}: expects two operands")
            operands = [self._lift(a) for a in args]
        else:
            if len(args) != 1:
                raise TapeError(f"{op}: expects one operand")
            operands = [self._lift(args[0])]
        vals = [o.value for o in operands]
        value, partials = _forward(op, vals, attrs)
        if op not in _FINITE_PRESERVING and not np.all(np.isfinite(value)):
            raise TapeError(f"{op}: non-finite result")
        needs = any(o.node.needs_grad for o in operands)
        idx = tuple(o.index for o in operands)
        return self._push(Node(op, idx, value, partials, attrs or None, needs))

    def backward(self, output: Var) -> dict:
        """Gradient of the scalar ``output`` w.r.t. every parameter node.

        Returns a mapping ``Var -> ndarray`` (0-d arrays convert with float()).
        """
        if output.tape is not self:
            raise TapeError("output belongs to a different tape")
        out_node = self.nodes[output.index]
        if out_node.value.size != 1:
            raise TapeError("backward: output must be a single real")
        grads: list = [None] * (output.index + 1)
        grads[output.index] = np.ones_like(out_node.value)
        nodes = self.nodes
        for i in range(output.index, -1, -1):
            g = grads[i]
            if g is None:
                continue
            node = nodes[i]
            if not node.args:
                continue
            need = [nodes[j].needs_grad for j in node.args]
            if not any(need):
                continue
            for k, contrib in _vjp(node, g, nodes, need):
                j = node.args[k]
                grads[j] = contrib if grads[j] is None else grads[j] + contrib
        result = {}
        for i in range(output.index + 1):
            if nodes[i].role == "parameter":
                g = grads[i]
                result[Var(self, i)] = np.zeros_like(nodes[i].value) if g is None else g
        return result


def _forward(op, vals, attrs):
    """Forward value and cached local partials for one opcode."""
    if op == "add":
        a, b = vals
        return a + b, (1.0, 1.0)
    if op == "sub":
        a, b = vals
        return a - b, (1.0, -1.0)
    if op == "mul":
        a, b = vals
        return a * b, (b, a)
    if op == "div":
        a, b = vals
        if np.any(b == 0):
            raise TapeError("div: division by zero")
        inv = 1.0 / b
        out = a * inv
        return out, (inv, -out * inv)
    x = vals[0]
    if op == "neg":
        return -x, (-1.0,)
    if op == "exp":
        y = np.exp(x)
        return y, (y,)
    if op == "ln":
        if np.any(x <= 0):
            raise TapeError("ln: operand must be positive")
        return np.log(x), (1.0 / x,)
    if op == "tanh":
        y = np.tanh(x)
        return y, (1.0 - y * y,)
    if op == "sigmoid":
        y = expit(x)
        return y, (y * (1.0 - y),)
    if op == "square":
        return x * x, (2.0 * x,)
    if op == "sqrt":
        if np.any(x <= 0):
            raise TapeError("sqrt: operand must be positive")
        y = np.sqrt(x)
        return y, (0.5 / y,)
    if op == "max0":
        # subgradient at the kink is 0
        return np.maximum(x, 0.0), ((x > 0).astype(np.float64),)
    if op == "pow-int":
        n = attrs["n"]
        if n < 0 and np.any(x == 0):
            raise TapeError("pow-int: zero to a negative power")
        return x**n, (n * x ** (n - 1) if n != 0 else np.zeros_like(x),)
    if op == "matmul":
        a, b = vals
        return a @ b, ()
    if op == "sum":
        return np.asarray(x.sum(axis=attrs.get("axis"))), ()
    if op == "getitem":
        return np.array(x[attrs["key"]]), ()
    if op == "transpose":
        return x.T, ()
    if op == "reshape":
        return x.reshape(attrs["shape"]), ()
    if op == "concat":
        return np.concatenate(vals, axis=attrs.get("axis", 0)), ()
    raise TapeError(f"unknown opcode {op!r}")


def _vjp(node, g, nodes, need):
    """Yield (operand position, contribution) pairs for the reverse sweep."""
    op = node.op
    if op in BINARY:
        for k in (0, 1):
            if not need[k]:
                continue
            shape = nodes[node.args[k]].value.shape
            yield k, _unbroadcast(g * node.partials[k], shape)
    elif op in UNARY:
        yield 0, g * node.partials[0]
    elif op == "matmul":
        a = nodes[node.args[0]].value
        b = nodes[node.args[1]].value
        if need[0]:
            if b.ndim == 1:
                yield 0, np.outer(g, b) if a.ndim == 2 else g * b
            else:
                yield 0, g @ b.T if a.ndim == 2 else b @ g
        if need[1]:
            if a.ndim == 1:
                yield 1, np.outer(a, g) if b.ndim == 2 else g * a
            else:
                yield 1, a.T @ g
    elif op == "sum":
        shape = nodes[node.args[0]].value.shape
        axis = node.attrs.get("axis") if node.attrs else None
        if axis is not None:
            g = np.expand_dims(g, axis)
        yield 0, np.broadcast_to(g, shape).copy()
    elif op == "getitem":
        src = nodes[node.args[0]].value
        key = node.attrs["key"]
        out = np.zeros_like(src)
        if _fancy(key):
            np.add.at(out, key, g)
        else:
            out[key] = g
        yield 0, out
    elif op == "transpose":
        yield 0, g.T
    elif op == "reshape":
        yield 0, g.reshape(nodes[node.args[0]].value.shape)
    elif op == "concat":
        axis = node.attrs.get("axis", 0)
        start = 0
        for k, j in enumerate(node.args):
            n = nodes[j].value.shape[axis]
            if need[k]:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(start, start + n)
                yield k, g[tuple(sl)]
            start += n


def _fancy(key) -> bool:
    keys = key if isinstance(key, tuple) else (key,)
    return any(isinstance(k, (list, np.ndarray)) for k in keys)


# -- element-wise helpers working on both Var and ndarray ---------------------

def _unary(op, fn):
    def f(x):
        if isinstance(x, Var):
            return x.tape.apply(op, x)
        return fn(np.asarray(x, dtype=np.float64))

    f.__name__ = op.replace("-", "_")
    return f


exp = _unary("exp", np.exp)
log = _unary("ln", np.log)
tanh = _unary("tanh", np.tanh)
sigmoid = _unary("sigmoid", expit)
sqrt = _unary("sqrt", np.sqrt)
square = _unary("square", np.square)
max0 = _unary("max0", lambda x: np.maximum(x, 0.0))

ACTIVATIONS = {"tanh": tanh, "sigmoid": sigmoid}


def matmul(a, b):
    if isinstance(a, Var):
        return a.tape.apply("matmul", a, b)
    if isinstance(b, Var):
        return b.tape.apply("matmul", a, b)
    return np.asarray(a) @ np.asarray(b)


def concat(items, axis=0):
    for it in items:
        if isinstance(it, Var):
            return it.tape.apply("concat", list(items), axis=axis)
    return np.concatenate([np.asarray(it) for it in items], axis=axis)


def value_of(x) -> np.ndarray:
    """Forward value of a Var, or the array itself."""
    return x.value if isinstance(x, Var) else np.asarray(x)


def detach(x):
    """Same value, cut from the gradient flow."""
    if isinstance(x, Var):
        return x.tape.const(x.value)
    return x


# -- gradient checking ----------------------------------------------------------

def grad_check(builder, point, fd_step: float = 1e-5) -> float:
    """Worst relative error between tape gradients and central differences.

    ``builder(tape, theta)`` must return a scalar Var built from the parameter
    Var ``theta`` (holding ``point``). Relative error uses the denominator
    ``max(|analytic|, 1)``.
    """
    if not fd_step > 0:
        raise ValueError("fd_step must be positive")
    point = np.array(point, dtype=np.float64)
    tape = Tape()
    theta = tape.var(point, role="parameter")
    out = builder(tape, theta)
    analytic = np.asarray(tape.backward(out)[theta], dtype=np.float64).ravel()

    def f(p):
        t = Tape()
        return float(builder(t, t.var(p, role="parameter")).value)

    flat = point.ravel()
    worst = 0.0
    for i in range(flat.size):
        up = flat.copy()
        dn = flat.copy()
        up[i] += fd_step
        dn[i] -= fd_step
        fd = (f(up.reshape(point.shape)) - f(dn.reshape(point.shape))) / (2 * fd_step)
        err = abs(fd - analytic[i]) / max(abs(analytic[i]), 1.0)
        worst = max(worst, err)
    return worst
