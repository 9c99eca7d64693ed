"""Reverse-mode automatic differentiation on float64 numpy arrays.

A `Tensor` wraps an ndarray and records, per operation, a closure that
maps the upstream gradient to gradients for each parent.  `backward()`
walks the recorded graph once in reverse topological order, accumulating
into leaf `.grad` fields.  Everything is float64 so central-difference
gradient checks are meaningful at h=1e-5.

Only what the hardness model needs is implemented: elementwise
arithmetic with broadcasting, matmul, a handful of activations,
reductions, shape ops, basic slicing, and a strided 2-D convolution
via im2col.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` back down to `shape` after a broadcast op."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward_fn: Optional[Callable] = None

    # -- graph construction -------------------------------------------------

    @staticmethod
    def _make(
        data: np.ndarray,
        parents: Sequence["Tensor"],
        backward_fn: Callable[[np.ndarray], tuple],
    ) -> "Tensor":
        out = Tensor(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward_fn = backward_fn
        return out

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- backward pass -------------------------------------------------------

    def backward(self, grad=None):
        if not self.requires_grad:
            raise ValueError("backward() on a tensor that does not require grad")
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without an explicit gradient needs a scalar")
            grad = np.ones_like(self.data)
        grad = np.asarray(grad, dtype=np.float64)
        if grad.shape != self.data.shape:
            raise ValueError("gradient shape mismatch")

        # Post-order DFS; reversed, it yields each node before its parents.
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in visited:
                    stack.append((p, False))

        pending: dict[int, np.ndarray] = {id(self): grad}
        for node in reversed(topo):
            g = pending.pop(id(node), None)
            if g is None:
                continue
            if node._backward_fn is None:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward_fn(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in pending:
                    pending[key] = pending[key] + pg
                else:
                    pending[key] = pg

    # -- elementwise arithmetic ----------------------------------------------

    @staticmethod
    def _wrap(value) -> "Tensor":
        return value if isinstance(value, Tensor) else Tensor(value)

    def __add__(self, other):
        other = self._wrap(other)
        a, b = self, other
        return Tensor._make(
            a.data + b.data,
            (a, b),
            lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)),
        )

    __radd__ = __add__

    def __neg__(self):
        return Tensor._make(-self.data, (self,), lambda g: (-g,))

    def __sub__(self, other):
        return self + (-self._wrap(other))

    def __rsub__(self, other):
        return self._wrap(other) + (-self)

    def __mul__(self, other):
        other = self._wrap(other)
        a, b = self, other
        return Tensor._make(
            a.data * b.data,
            (a, b),
            lambda g: (
                _unbroadcast(g * b.data, a.data.shape),
                _unbroadcast(g * a.data, b.data.shape),
            ),
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return self * other ** -1.0
        return self * (1.0 / other)

    def __rtruediv__(self, other):
        return self._wrap(other) * self ** -1.0

    def __pow__(self, exponent):
        if not np.isscalar(exponent):
            raise TypeError("only scalar exponents are supported")
        n = float(exponent)
        x = self
        out = x.data**n
        return Tensor._make(out, (x,), lambda g: (g * n * x.data ** (n - 1.0),))

    # -- activations -----------------------------------------------------------

    def exp(self):
        out = np.exp(self.data)
        return Tensor._make(out, (self,), lambda g: (g * out,))

    def log(self):
        x = self
        return Tensor._make(np.log(x.data), (x,), lambda g: (g / x.data,))

    def tanh(self):
        out = np.tanh(self.data)
        return Tensor._make(out, (self,), lambda g: (g * (1.0 - out * out),))

    def sigmoid(self):
        x = self.data
        out = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
        return Tensor._make(out, (self,), lambda g: (g * out * (1.0 - out),))

    def relu(self):
        x = self
        mask = x.data > 0
        return Tensor._make(x.data * mask, (x,), lambda g: (g * mask,))

    # -- reductions --------------------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False):
        x = self
        out = x.data.sum(axis=axis, keepdims=keepdims)

        def bwd(g):
            if axis is None:
                return (np.broadcast_to(g, x.data.shape).copy(),)
            gg = g
            if not keepdims:
                gg = np.expand_dims(g, axis)
            return (np.broadcast_to(gg, x.data.shape).copy(),)

        return Tensor._make(out, (x,), bwd)

    def mean(self, axis=None, keepdims: bool = False):
        if axis is None:
            count = self.data.size
        elif isinstance(axis, tuple):
            count = int(np.prod([self.data.shape[a] for a in axis]))
        else:
            count = self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    # -- shape ops ------------------------------------------------------------------

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        x = self
        return Tensor._make(
            x.data.reshape(shape), (x,), lambda g: (g.reshape(x.data.shape),)
        )

    def transpose(self, *axes):
        x = self
        if not axes:
            axes = tuple(reversed(range(x.data.ndim)))
        elif len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        inverse = np.argsort(axes)
        return Tensor._make(
            x.data.transpose(axes), (x,), lambda g: (g.transpose(inverse),)
        )

    @property
    def T(self):
        return self.transpose()

    def __getitem__(self, idx):
        x = self
        out = x.data[idx]
        if isinstance(out, np.ndarray) and out.base is not None:
            out = out.copy()

        def bwd(g):
            dx = np.zeros_like(x.data)
            dx[idx] = g
            return (dx,)

        return Tensor._make(out, (x,), bwd)

    # -- linear algebra ------------------------------------------------------------

    def __matmul__(self, other):
        other = self._wrap(other)
        a, b = self, other
        if a.data.ndim != 2 or b.data.ndim != 2:
            raise ValueError("matmul supports 2-D operands only")
        return Tensor._make(
            a.data @ b.data,
            (a, b),
            lambda g: (g @ b.data.T, a.data.T @ g),
        )


# ---------------------------------------------------------------------------
# convolution


def _im2col(padded: np.ndarray, k: int, stride: int):
    n, c, hp, wp = padded.shape
    h_out = (hp - k) // stride + 1
    w_out = (wp - k) // stride + 1
    s0, s1, s2, s3 = padded.strides
    windows = np.lib.stride_tricks.as_strided(
        padded,
        shape=(n, c, k, k, h_out, w_out),
        strides=(s0, s1, s2, s3, s2 * stride, s3 * stride),
    )
    cols = np.ascontiguousarray(windows).reshape(n, c * k * k, h_out * w_out)
    return cols, h_out, w_out


def _col2im(dcols: np.ndarray, padded_shape, k: int, stride: int, h_out: int, w_out: int):
    n, c, hp, wp = padded_shape
    dx = np.zeros(padded_shape, dtype=np.float64)
    d6 = dcols.reshape(n, c, k, k, h_out, w_out)
    for i in range(k):
        for j in range(k):
            dx[:, :, i : i + stride * h_out : stride, j : j + stride * w_out : stride] += d6[
                :, :, i, j
            ]
    return dx


def conv2d(x: Tensor, weight: Tensor, bias: Tensor, stride: int = 2, padding: int = 1) -> Tensor:
    """2-D convolution, NCHW input, OIHW square kernel."""
    if x.data.ndim != 4 or weight.data.ndim != 4:
        raise ValueError("conv2d expects 4-D input and weight")
    f, c_in, k, k2 = weight.data.shape
    if k != k2:
        raise ValueError("kernel must be square")
    if x.data.shape[1] != c_in:
        raise ValueError("channel mismatch")
    if bias.data.shape != (f,):
        raise ValueError("bias shape mismatch")

    padded = np.pad(
        x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)), mode="constant"
    )
    cols, h_out, w_out = _im2col(padded, k, stride)
    w2d = weight.data.reshape(f, c_in * k * k)
    out = np.einsum("fk,nkp->nfp", w2d, cols, optimize=True) + bias.data.reshape(1, f, 1)
    n = x.data.shape[0]
    out = out.reshape(n, f, h_out, w_out)
    padded_shape = padded.shape

    def bwd(g):
        g2 = g.reshape(n, f, h_out * w_out)
        dw = np.einsum("nfp,nkp->fk", g2, cols, optimize=True).reshape(weight.data.shape)
        db = g2.sum(axis=(0, 2))
        dcols = np.einsum("fk,nfp->nkp", w2d, g2, optimize=True)
        dpadded = _col2im(dcols, padded_shape, k, stride, h_out, w_out)
        if padding:
            dx = dpadded[:, :, padding:-padding, padding:-padding]
        else:
            dx = dpadded
        return (dx, dw, db)

    return Tensor._make(out, (x, weight, bias), bwd)
