"""Minimal reverse-mode automatic differentiation on dense float64 arrays.

Values live in numpy ``float64`` arrays (row-major); complex quantities are
carried as separate real/imaginary nodes and combined with the ``c*`` helpers.
Every operation builds a ``Node`` holding the result and a vector-Jacobian
rule; ``backward`` walks the graph once in reverse topological order and
accumulates gradients into parameter leaves.  Gradients accumulate across
``backward`` calls until ``zero_grad``.
"""
from __future__ import annotations

import numpy as np

# Every op output is checked for NaN/Inf when True; a non-finite value is an
# error state, not a number to propagate.
CHECK_FINITE = True


class ShapeError(ValueError):
    """Operands with incompatible shapes."""


class NumericalError(ArithmeticError):
    """A non-finite value appeared where all values must be finite."""


def _as_array(x) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    return a


class Node:
    """One value in the computation graph.

    ``parents`` and ``_vjp`` encode the backward rule: ``_vjp(g)`` returns one
    gradient array per parent (or None for a parent that needs no gradient).
    Leaves created with ``requires_grad=True`` accumulate into ``grad``.
    """

    __slots__ = ("value", "grad", "parents", "_vjp", "requires_grad", "op")

    def __init__(self, value, parents=(), vjp=None, requires_grad=None, op="leaf"):
        self.value = _as_array(value)
        if CHECK_FINITE and not np.all(np.isfinite(self.value)):
            raise NumericalError(f"non-finite values produced by op '{op}'")
        self.parents = tuple(parents)
        self._vjp = vjp
        if requires_grad is None:
            requires_grad = any(p.requires_grad for p in self.parents)
        self.requires_grad = requires_grad
        self.op = op
        self.grad = np.zeros_like(self.value) if (requires_grad and not self.parents) else None

    @property
    def shape(self):
        return self.value.shape

    @property
    def is_leaf(self):
        return not self.parents

    # Arithmetic sugar; scalars and arrays are wrapped as constants.
    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __truediv__(self, other):
        return div(self, _wrap(other))

    def __rtruediv__(self, other):
        return div(_wrap(other), self)

    def __neg__(self):
        return mul(self, constant(-1.0))

    def __matmul__(self, other):
        return matmul(self, _wrap(other))

    def __getitem__(self, key):
        return take(self, key)

    def __repr__(self):
        return f"Node(op={self.op}, shape={self.value.shape})"


def constant(x) -> Node:
    return Node(x, requires_grad=False, op="const")


def parameter(x) -> Node:
    return Node(x, requires_grad=True, op="param")


def _wrap(x) -> Node:
    return x if isinstance(x, Node) else constant(x)


def zero_grad(params) -> None:
    for p in params:
        p.grad = np.zeros_like(p.value)


def backward(loss: Node) -> None:
    """Accumulate d(loss)/d(leaf) into every reachable parameter leaf.

    Visits each node exactly once in reverse topological order.  Repeated
    calls without ``zero_grad`` keep accumulating (gradients are additive).
    """
    if loss.value.size != 1:
        raise ShapeError(f"loss must be scalar, got shape {loss.value.shape}")

    # Iterative post-order DFS; recursion would overflow on long graphs.
    order: list[Node] = []
    seen: set[int] = set()
    stack: list[tuple[Node, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen or not node.requires_grad:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.value)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.is_leaf:
            if node.grad is None:
                node.grad = np.zeros_like(node.value)
            node.grad += g
            continue
        for parent, pg in zip(node.parents, node._vjp(g)):
            if pg is None or not parent.requires_grad:
                continue
            acc = grads.get(id(parent))
            # out-of-place accumulation: a vjp may return aliased arrays for
            # sibling parents, which in-place adds would corrupt
            grads[id(parent)] = pg if acc is None else acc + pg


# ---------------------------------------------------------------------------
# broadcasting helpers


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (reverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _check_broadcast(a: Node, b: Node, op: str) -> None:
    try:
        np.broadcast_shapes(a.value.shape, b.value.shape)
    except ValueError:
        raise ShapeError(
            f"{op}: incompatible shapes {a.value.shape} and {b.value.shape}"
        ) from None


# ---------------------------------------------------------------------------
# elementwise ops


def add(a: Node, b: Node) -> Node:
    _check_broadcast(a, b, "add")
    return Node(
        a.value + b.value,
        (a, b),
        lambda g: (_unbroadcast(g, a.value.shape), _unbroadcast(g, b.value.shape)),
        op="add",
    )


def sub(a: Node, b: Node) -> Node:
    _check_broadcast(a, b, "sub")
    return Node(
        a.value - b.value,
        (a, b),
        lambda g: (_unbroadcast(g, a.value.shape), _unbroadcast(-g, b.value.shape)),
        op="sub",
    )


def mul(a: Node, b: Node) -> Node:
    """Elementwise (Hadamard) product with broadcasting."""
    _check_broadcast(a, b, "mul")
    return Node(
        a.value * b.value,
        (a, b),
        lambda g: (
            _unbroadcast(g * b.value, a.value.shape),
            _unbroadcast(g * a.value, b.value.shape),
        ),
        op="mul",
    )


def div(a: Node, b: Node) -> Node:
    _check_broadcast(a, b, "div")
    out = a.value / b.value
    return Node(
        out,
        (a, b),
        lambda g: (
            _unbroadcast(g / b.value, a.value.shape),
            _unbroadcast(-g * out / b.value, b.value.shape),
        ),
        op="div",
    )


def exp(x: Node) -> Node:
    out = np.exp(x.value)
    return Node(out, (x,), lambda g: (g * out,), op="exp")


def log(x: Node) -> Node:
    return Node(np.log(x.value), (x,), lambda g: (g / x.value,), op="log")


def sqrt(x: Node) -> Node:
    """Square root; the subgradient at exactly 0 is taken as 0."""
    out = np.sqrt(x.value)

    def vjp(g):
        safe = np.where(out > 0.0, out, 1.0)
        return (np.where(out > 0.0, 0.5 * g / safe, 0.0),)

    return Node(out, (x,), vjp, op="sqrt")


def tanh(x: Node) -> Node:
    out = np.tanh(x.value)
    return Node(out, (x,), lambda g: (g * (1.0 - out * out),), op="tanh")


def _softplus(x: np.ndarray) -> np.ndarray:
    # log(1+e^x) without overflow for large |x|
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def mish(x: Node) -> Node:
    """x * tanh(softplus(x))."""
    sp = _softplus(x.value)
    t = np.tanh(sp)
    out = x.value * t

    def vjp(g):
        sig = 1.0 / (1.0 + np.exp(-x.value))
        return (g * (t + x.value * (1.0 - t * t) * sig),)

    return Node(out, (x,), vjp, op="mish")


# ---------------------------------------------------------------------------
# reductions


def sum(x: Node, axis=None, keepdims: bool = False) -> Node:  # noqa: A001
    out = np.sum(x.value, axis=axis, keepdims=keepdims)

    def vjp(g):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.value.shape).copy(),)

    return Node(out, (x,), vjp, op="sum")


def mean(x: Node, axis=None, keepdims: bool = False) -> Node:
    out = np.mean(x.value, axis=axis, keepdims=keepdims)
    denom = x.value.size if axis is None else np.prod(
        [x.value.shape[a] for a in np.atleast_1d(axis)]
    )

    def vjp(g):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.value.shape) / denom,)

    return Node(out, (x,), vjp, op="mean")


def sorted_sum(x: Node, axis: int, keepdims: bool = False) -> Node:
    """Sum along ``axis`` in ascending value order.

    Canonicalizing the accumulation order makes the result invariant to
    permutations of the summands, which is what lets permutation-equivariance
    contracts hold bit-exactly.  The gradient is the same as plain sum.
    """
    out = np.sum(np.sort(x.value, axis=axis), axis=axis, keepdims=keepdims)

    def vjp(g):
        g = np.asarray(g)
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.value.shape).copy(),)

    return Node(out, (x,), vjp, op="sorted_sum")


def squared_norm(x: Node, axis=None, keepdims: bool = False) -> Node:
    """Squared l2-norm along ``axis`` (all elements if None)."""
    out = np.sum(x.value * x.value, axis=axis, keepdims=keepdims)

    def vjp(g):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (2.0 * g * x.value,)

    return Node(out, (x,), vjp, op="squared_norm")


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a: Node, b: Node) -> Node:
    av, bv = a.value, b.value
    if av.ndim < 1 or bv.ndim < 1 or av.shape[-1] != bv.shape[-2 if bv.ndim > 1 else 0]:
        raise ShapeError(f"matmul: incompatible shapes {av.shape} and {bv.shape}")

    def vjp(g):
        ga = g @ np.swapaxes(bv, -1, -2) if bv.ndim > 1 else np.expand_dims(g, -1) * bv
        gb = np.swapaxes(av, -1, -2) @ g if av.ndim > 1 else np.expand_dims(av, -1) * g
        return (_unbroadcast(ga, av.shape), _unbroadcast(gb, bv.shape))

    return Node(av @ bv, (a, b), vjp, op="matmul")


def einsum2(subscripts: str, a: Node, b: Node) -> Node:
    """Binary einsum contraction.

    Every index of each operand must appear in the output or in the other
    operand (true for all matmul-like contractions), so each backward pass is
    itself an einsum with permuted subscripts.
    """
    ins, out_sub = subscripts.replace(" ", "").split("->")
    a_sub, b_sub = ins.split(",")
    value = np.einsum(subscripts, a.value, b.value)

    def vjp(g):
        ga = np.einsum(f"{out_sub},{b_sub}->{a_sub}", g, b.value)
        gb = np.einsum(f"{out_sub},{a_sub}->{b_sub}", g, a.value)
        return (ga, gb)

    return Node(value, (a, b), vjp, op="einsum2")


# ---------------------------------------------------------------------------
# shape manipulation


def reshape(x: Node, shape) -> Node:
    return Node(
        x.value.reshape(shape),
        (x,),
        lambda g: (g.reshape(x.value.shape),),
        op="reshape",
    )


def transpose(x: Node, axes) -> Node:
    inv = np.argsort(axes)
    return Node(
        np.transpose(x.value, axes),
        (x,),
        lambda g: (np.transpose(g, inv),),
        op="transpose",
    )


def concat(nodes, axis: int = 0) -> Node:
    nodes = [_wrap(n) for n in nodes]
    sizes = [n.value.shape[axis] for n in nodes]
    offsets = np.cumsum([0] + sizes)

    def vjp(g):
        slicer = [slice(None)] * g.ndim
        outs = []
        for i in range(len(nodes)):
            slicer[axis] = slice(offsets[i], offsets[i + 1])
            outs.append(g[tuple(slicer)])
        return tuple(outs)

    return Node(np.concatenate([n.value for n in nodes], axis=axis), tuple(nodes), vjp, op="concat")


def take(x: Node, key) -> Node:
    """Basic slicing/indexing; backward scatters into a zero array."""
    out = x.value[key]

    def vjp(g):
        gx = np.zeros_like(x.value)
        np.add.at(gx, key, g)
        return (gx,)

    return Node(out, (x,), vjp, op="slice")


def gather_columns(cb: Node, indices: np.ndarray) -> Node:
    """Select columns of a (D, n) matrix: output shape indices.shape + (D,).

    Backward scatter-adds into the selected columns, so repeated indices
    accumulate.
    """
    idx = np.asarray(indices)
    out = cb.value.T[idx]

    def vjp(g):
        gt = np.zeros((cb.value.shape[1], cb.value.shape[0]))
        np.add.at(gt, idx.ravel(), g.reshape(-1, cb.value.shape[0]))
        return (gt.T,)

    return Node(out, (cb,), vjp, op="gather_columns")


def softmax_rows(x: Node) -> Node:
    """Softmax along the last axis."""
    shifted = x.value - np.max(x.value, axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / np.sum(e, axis=-1, keepdims=True)

    def vjp(g):
        dot = np.sum(g * out, axis=-1, keepdims=True)
        return (out * (g - dot),)

    return Node(out, (x,), vjp, op="softmax_rows")


# ---------------------------------------------------------------------------
# batch normalization


class BatchNormState:
    """Running statistics plus learnable scale/shift for one feature axis."""

    def __init__(self, width: int, momentum: float = 0.9, eps: float = 1e-5):
        self.gamma = parameter(np.ones(width))
        self.beta = parameter(np.zeros(width))
        self.running_mean = np.zeros(width)
        self.running_var = np.ones(width)
        self.momentum = momentum
        self.eps = eps

    def params(self):
        return [self.gamma, self.beta]


def batch_norm(x: Node, state: BatchNormState, training: bool, update_stats: bool = True) -> Node:
    """Normalize over all leading axes, feature axis last.

    Training mode normalizes with batch statistics (and optionally folds them
    into the running estimates); inference mode uses running statistics as
    constants.
    """
    axes = tuple(range(x.value.ndim - 1))
    if training:
        mu = mean(x, axis=axes, keepdims=True)
        centered = sub(x, mu)
        var = mean(mul(centered, centered), axis=axes, keepdims=True)
        if update_stats:
            m = state.momentum
            state.running_mean = m * state.running_mean + (1 - m) * mu.value.reshape(-1)
            state.running_var = m * state.running_var + (1 - m) * var.value.reshape(-1)
        inv = div(constant(1.0), sqrt(add(var, constant(state.eps))))
        xhat = mul(centered, inv)
    else:
        xhat = mul(
            sub(x, constant(state.running_mean)),
            constant(1.0 / np.sqrt(state.running_var + state.eps)),
        )
    return add(mul(xhat, state.gamma), state.beta)


# ---------------------------------------------------------------------------
# complex arithmetic on (re, im) node pairs


def cmatmul(a_re: Node, a_im: Node, b_re: Node, b_im: Node):
    """Complex matmul via 4 real matmuls: (ar+j ai)(br+j bi)."""
    re = sub(matmul(a_re, b_re), matmul(a_im, b_im))
    im = add(matmul(a_re, b_im), matmul(a_im, b_re))
    return re, im
