"""Minimal reverse-mode gradient engine over numpy arrays.

A forward pass builds a graph of ``Var`` nodes; ``backward`` replays it in
reverse topological order and accumulates vector-Jacobian products into the
leaves. Only the handful of primitives needed by the encoder and the loss
functions are provided (matmul, broadcast add, elementwise multiply, ReLU,
cosine distance, row gather, scalar combine).

All arithmetic is float64.
"""

from __future__ import annotations

import numpy as np

from .errors import NotScalarError, ShapeMismatchError, ZeroVectorError

NORM_FLOOR = 1e-12


class Var:
    """One node of the computation graph.

    Leaves are constructed directly from arrays; interior nodes carry a
    vector-Jacobian closure recorded by the primitive that created them.
    A graph instance is single-threaded for one forward/backward pass.
    """

    __slots__ = ("value", "grad", "_parents", "_vjp")

    def __init__(self, value, parents=(), vjp=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self._parents = parents
        self._vjp = vjp

    @property
    def shape(self):
        return self.value.shape

    def item(self) -> float:
        return float(self.value)

    def __repr__(self):
        return f"Var(shape={self.value.shape}, leaf={self._vjp is None})"


def as_var(x) -> Var:
    return x if isinstance(x, Var) else Var(x)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` to undo numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def add(a: Var, b: Var) -> Var:
    a, b = as_var(a), as_var(b)
    out_val = a.value + b.value

    def vjp(g):
        return _unbroadcast(g, a.value.shape), _unbroadcast(g, b.value.shape)

    return Var(out_val, (a, b), vjp)


def sub(a: Var, b: Var) -> Var:
    a, b = as_var(a), as_var(b)

    def vjp(g):
        return _unbroadcast(g, a.value.shape), _unbroadcast(-g, b.value.shape)

    return Var(a.value - b.value, (a, b), vjp)


def mul(a: Var, b: Var) -> Var:
    """Elementwise (broadcasting) product; also used for dropout masks."""
    a, b = as_var(a), as_var(b)

    def vjp(g):
        return (_unbroadcast(g * b.value, a.value.shape),
                _unbroadcast(g * a.value, b.value.shape))

    return Var(a.value * b.value, (a, b), vjp)


def scale(a: Var, c: float) -> Var:
    a = as_var(a)
    return Var(a.value * c, (a,), lambda g: (g * c,))


def matmul(a: Var, b: Var) -> Var:
    a, b = as_var(a), as_var(b)
    if a.value.ndim != 2 or b.value.ndim != 2 or a.value.shape[1] != b.value.shape[0]:
        raise ShapeMismatchError(
            f"matmul shapes {a.value.shape} x {b.value.shape}")

    def vjp(g):
        return g @ b.value.T, a.value.T @ g

    return Var(a.value @ b.value, (a, b), vjp)


def relu(a: Var) -> Var:
    """max(0, x); subgradient at the kink is taken as 0."""
    a = as_var(a)
    mask = a.value > 0.0

    def vjp(g):
        return (g * mask,)

    return Var(np.where(mask, a.value, 0.0), (a,), vjp)


def take_rows(a: Var, idx) -> Var:
    """Gather rows; the adjoint scatter-adds back (duplicate indices allowed)."""
    a = as_var(a)
    idx = np.asarray(idx, dtype=int)

    def vjp(g):
        full = np.zeros_like(a.value)
        np.add.at(full, idx, g)
        return (full,)

    return Var(a.value[idx], (a,), vjp)


def row(a: Var, i: int) -> Var:
    a = as_var(a)

    def vjp(g):
        full = np.zeros_like(a.value)
        full[i] = g
        return (full,)

    return Var(a.value[i], (a,), vjp)


def add_n(xs) -> Var:
    """Sum of same-shape Vars (used to accumulate per-triplet hinge terms)."""
    xs = [as_var(x) for x in xs]
    out = xs[0].value.copy()
    for x in xs[1:]:
        out = out + x.value

    def vjp(g):
        return tuple(g for _ in xs)

    return Var(out, tuple(xs), vjp)


def cosine_distance(u, v):
    """1 - (u.v)/(|u||v|), in [0, 2].

    Accepts plain 1-D arrays (returns a float) or Vars (returns a scalar Var
    differentiable w.r.t. both arguments). Raises ZeroVectorError when either
    norm falls below 1e-12 -- a collapsed embedding is a bug worth surfacing,
    not something to clamp over.
    """
    graph = isinstance(u, Var) or isinstance(v, Var)
    uval = u.value if isinstance(u, Var) else np.asarray(u, dtype=np.float64)
    vval = v.value if isinstance(v, Var) else np.asarray(v, dtype=np.float64)
    if uval.shape != vval.shape or uval.ndim != 1 or uval.size < 1:
        raise ShapeMismatchError(f"cosine_distance shapes {uval.shape}, {vval.shape}")
    nu = float(np.linalg.norm(uval))
    nv = float(np.linalg.norm(vval))
    if nu < NORM_FLOOR or nv < NORM_FLOOR:
        raise ZeroVectorError(f"vector norm below {NORM_FLOOR:g} ({nu:g}, {nv:g})")
    cos = float(uval @ vval) / (nu * nv)
    dist = 1.0 - cos
    if not graph:
        return dist

    uvar, vvar = as_var(u), as_var(v)

    def vjp(g):
        g = float(g)
        gu = -g * (vval / (nu * nv) - cos * uval / (nu * nu))
        gv = -g * (uval / (nu * nv) - cos * vval / (nv * nv))
        return gu, gv

    return Var(dist, (uvar, vvar), vjp)


def backward(loss: Var):
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every node reachable
    from ``loss``. The loss must be a scalar."""
    if not isinstance(loss, Var):
        raise NotScalarError("backward() expects a Var")
    if loss.value.ndim != 0 and loss.value.size != 1:
        raise NotScalarError(f"loss has shape {loss.value.shape}")

    topo = []
    seen = set()
    stack = [(loss, False)]
    while stack:
        node, done = stack.pop()
        if done:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            stack.append((p, False))

    loss.grad = np.ones_like(loss.value)
    for node in reversed(topo):
        if node._vjp is None or node.grad is None:
            continue
        for parent, g in zip(node._parents, node._vjp(node.grad)):
            g = np.asarray(g, dtype=np.float64)
            parent.grad = g if parent.grad is None else parent.grad + g


def grad_of(leaf: Var) -> np.ndarray:
    """Gradient of a leaf after backward(); zeros if the leaf was unused."""
    return leaf.grad if leaf.grad is not None else np.zeros_like(leaf.value)


def make_rng(seed: int) -> np.random.Generator:
    """Seeded generator (numpy PCG64): same seed, same call sequence, same
    stream. All randomness in the package flows through generators built
    here."""
    return np.random.Generator(np.random.PCG64(seed))
