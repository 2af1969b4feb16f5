"""Define-by-run reverse-mode autodiff over dense 2-D float64 matrices.

Every primitive returns a new :class:`Node` that remembers its parents and a
closure mapping the upstream gradient to one gradient per parent. The graph is
rebuilt on every forward pass; :func:`backward` walks it once in reverse
topological order.
"""

import numpy as np

from .errors import ContractError, DomainError, ShapeError


class Node:
    __slots__ = ("value", "grad", "op", "parents", "requires_grad", "_backward")

    def __init__(self, value, requires_grad=False, op="leaf", parents=(), backward_fn=None):
        value = np.array(value, dtype=np.float64)
        if value.ndim == 0:
            value = value.reshape(1, 1)
        elif value.ndim == 1:
            value = value.reshape(-1, 1)
        elif value.ndim != 2:
            raise ShapeError(f"expected a 2-D matrix, got {value.ndim}-D array of shape {value.shape}")
        self.value = value
        self.grad = np.zeros_like(value)
        self.op = op
        self.parents = tuple(parents)
        self.requires_grad = bool(requires_grad)
        self._backward = backward_fn

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Node(op={self.op!r}, shape={self.shape}, requires_grad={self.requires_grad})"

    def item(self):
        if self.value.shape != (1, 1):
            raise ContractError(f"item() needs a 1x1 node, got {self.shape}")
        return float(self.value[0, 0])


def constant(value):
    return value if isinstance(value, Node) else Node(value, requires_grad=False)


def parameter(value):
    return Node(value, requires_grad=True)


def _make(value, op, parents, backward_fn):
    rg = any(p.requires_grad for p in parents)
    return Node(value, requires_grad=rg, op=op, parents=parents, backward_fn=backward_fn if rg else None)


def _same_shape(kind, a, b):
    if a.shape != b.shape:
        raise ShapeError(f"{kind}: shapes {a.shape} and {b.shape} do not match")


# -- primitives ---------------------------------------------------------------

def matmul(a, b):
    a, b = constant(a), constant(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions differ, {a.shape} @ {b.shape}")
    av, bv = a.value, b.value
    return _make(av @ bv, "matmul", (a, b), lambda g: (g @ bv.T, av.T @ g))


def add(a, b):
    """Elementwise sum; ``b`` may be a 1 x n row broadcast across the rows of ``a``."""
    a, b = constant(a), constant(b)
    if a.shape == b.shape:
        return _make(a.value + b.value, "add", (a, b), lambda g: (g, g))
    if b.shape[0] != 1 and a.shape[0] == 1 and a.shape[1] == b.shape[1]:
        a, b = b, a
    if b.shape[0] == 1 and b.shape[1] == a.shape[1]:
        return _make(a.value + b.value, "add-broadcast-row", (a, b),
                     lambda g: (g, g.sum(axis=0, keepdims=True)))
    raise ShapeError(f"add: shapes {a.shape} and {b.shape} are not row-broadcast compatible")


def sub(a, b):
    return add(a, neg(b))


def mul(a, b):
    a, b = constant(a), constant(b)
    _same_shape("elementwise-mul", a, b)
    av, bv = a.value, b.value
    return _make(av * bv, "elementwise-mul", (a, b), lambda g: (g * bv, g * av))


def scale(a, c):
    c = float(c)
    return _make(a.value * c, "scale", (a,), lambda g: (g * c,))


def neg(a):
    return _make(-a.value, "neg", (a,), lambda g: (-g,))


def relu(a):
    mask = a.value > 0
    return _make(np.where(mask, a.value, 0.0), "relu", (a,), lambda g: (g * mask,))


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a):
    s = _sigmoid(a.value)
    return _make(s, "sigmoid", (a,), lambda g: (g * s * (1.0 - s),))


def log_sigmoid(a):
    """log(sigmoid(x)) without forming sigmoid(x); finite for any finite x."""
    x = a.value
    out = np.minimum(x, 0.0) - np.log1p(np.exp(-np.abs(x)))
    return _make(out, "log-sigmoid", (a,), lambda g: (g * _sigmoid(-x),))


def tanh(a):
    t = np.tanh(a.value)
    return _make(t, "tanh", (a,), lambda g: (g * (1.0 - t * t),))


def log(a):
    x = a.value
    bad = np.argwhere(~(x > 0))
    if bad.size:
        r, c = bad[0]
        raise DomainError(f"log: non-positive entry {x[r, c]!r} at row {r}, col {c}")
    return _make(np.log(x), "log", (a,), lambda g: (g / x,))


def exp(a):
    e = np.exp(a.value)
    return _make(e, "exp", (a,), lambda g: (g * e,))


def reciprocal(a):
    x = a.value
    if np.any(x == 0):
        r, c = np.argwhere(x == 0)[0]
        raise DomainError(f"reciprocal: zero entry at row {r}, col {c}")
    inv = 1.0 / x
    return _make(inv, "reciprocal", (a,), lambda g: (-g * inv * inv,))


def square(a):
    x = a.value
    return _make(x * x, "square", (a,), lambda g: (2.0 * g * x,))


def clip(a, lo=-np.inf, hi=np.inf):
    x = a.value
    inside = (x >= lo) & (x <= hi)
    return _make(np.clip(x, lo, hi), "clip", (a,), lambda g: (g * inside,))


def sum(a):  # noqa: A001
    shape = a.shape
    return _make(np.array([[a.value.sum()]]), "sum", (a,), lambda g: (np.full(shape, g[0, 0]),))


def mean(a):
    shape = a.shape
    n = a.value.size
    return _make(np.array([[a.value.mean()]]), "mean", (a,), lambda g: (np.full(shape, g[0, 0] / n),))


def logsumexp_rows(a):
    """Row-wise log-sum-exp, m x n -> m x 1."""
    x = a.value
    mx = x.max(axis=1, keepdims=True)
    ex = np.exp(x - mx)
    tot = ex.sum(axis=1, keepdims=True)
    soft = ex / tot
    return _make(mx + np.log(tot), "logsumexp-rows", (a,), lambda g: (g * soft,))


def concat_cols(nodes):
    nodes = [constant(n) for n in nodes]
    rows = {n.shape[0] for n in nodes}
    if len(rows) != 1:
        raise ShapeError(f"concat-cols: row counts differ: {[n.shape for n in nodes]}")
    bounds = np.cumsum([0] + [n.shape[1] for n in nodes])

    def bw(g):
        return tuple(g[:, bounds[i]:bounds[i + 1]] for i in range(len(nodes)))

    return _make(np.concatenate([n.value for n in nodes], axis=1), "concat-cols", tuple(nodes), bw)


def select_rows(a, idx):
    idx = np.asarray(idx, dtype=np.intp).ravel()
    m = a.shape[0]
    if idx.size and (idx.min() < -m or idx.max() >= m):
        raise ShapeError(f"select-rows: index out of range for shape {a.shape}")
    shape = a.shape

    def bw(g):
        out = np.zeros(shape)
        np.add.at(out, idx, g)
        return (out,)

    return _make(a.value[idx], "select-rows", (a,), bw)


PRIMITIVES = {
    "matmul": matmul,
    "add-broadcast-row": add,
    "add": add,
    "elementwise-mul": mul,
    "relu": relu,
    "sigmoid": sigmoid,
    "log-sigmoid": log_sigmoid,
    "tanh": tanh,
    "log": log,
    "exp": exp,
    "reciprocal": reciprocal,
    "neg": neg,
    "sum": sum,
    "mean": mean,
    "square": square,
    "concat-cols": lambda *ns: concat_cols(ns),
    "select-rows": select_rows,
    "logsumexp-rows": logsumexp_rows,
}


def primitive_forward(kind, *inputs, **kwargs):
    try:
        fn = PRIMITIVES[kind]
    except KeyError:
        raise ContractError(f"unknown primitive {kind!r}") from None
    return fn(*inputs, **kwargs)


# -- reverse pass -------------------------------------------------------------

def _topo_order(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(root):
    """Accumulate d(root)/d(node) into ``.grad`` of every node upstream of ``root``.

    Returns a dict mapping each reachable requires-grad leaf to the gradient
    contributed by this call.
    """
    if root.shape != (1, 1):
        raise ContractError(f"backward needs a scalar (1x1) root, got shape {root.shape}")
    if not root.requires_grad:
        return {}
    order = _topo_order(root)
    upstream = {id(root): np.ones((1, 1))}
    leaves = {}
    for node in reversed(order):
        g = upstream.pop(id(node), None)
        if g is None:
            continue
        node.grad += g
        if node._backward is None:
            leaves[node] = g
            continue
        for p, pg in zip(node.parents, node._backward(g)):
            if not p.requires_grad:
                continue
            if id(p) in upstream:
                upstream[id(p)] = upstream[id(p)] + pg
            else:
                upstream[id(p)] = pg
    return leaves


def reset_grads(nodes):
    for n in nodes:
        n.grad = np.zeros_like(n.value)
