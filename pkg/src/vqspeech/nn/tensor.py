"""Reverse-mode autodiff on numpy arrays.

Small, purpose-built: only the ops the encoder/quantizer/decoder stack and
the adversarial attack need. Gradients flow to any leaf with
requires_grad=True, which includes plain inputs (the attack differentiates
w.r.t. the spectrogram, not just parameters).
"""

import numpy as np

from .. import kernels
from ..errors import NonFiniteOutput, ShapeMismatch

_GUARD = True  # finite check after every op


def set_finite_guard(enabled):
    global _GUARD
    _GUARD = bool(enabled)


def _check(data, op):
    if _GUARD and not np.all(np.isfinite(data)):
        raise NonFiniteOutput(f"non-finite values produced by {op}")
    return data


def _unbroadcast(grad, shape):
    """Sum grad down to `shape` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, name=None):
        if isinstance(data, Tensor):
            data = data.data
        self.data = np.asarray(data)
        if self.data.dtype not in (np.float32, np.float64):
            self.data = self.data.astype(np.float32)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None
        self.name = name

    # -- basics ----------------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, grad={self.requires_grad})"

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data.copy(), requires_grad=False)

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    @staticmethod
    def _wrap(other, dtype):
        if isinstance(other, Tensor):
            return other
        return Tensor(np.asarray(other, dtype=dtype))

    @classmethod
    def _from_op(cls, data, parents, backward, op):
        out = cls(_check(data, op))
        out._parents = tuple(p for p in parents if isinstance(p, Tensor))
        out.requires_grad = any(p.requires_grad for p in out._parents)
        if out.requires_grad:
            out._backward = backward
        return out

    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise ShapeMismatch("backward() without grad requires a scalar")
            grad = np.ones_like(self.data)
        topo, seen = [], set()

        def visit(t):
            if id(t) in seen:
                return
            seen.add(id(t))
            for p in t._parents:
                visit(p)
            topo.append(t)

        visit(self)
        grads = {id(self): np.asarray(grad, dtype=self.data.dtype)}
        for t in reversed(topo):
            g = grads.pop(id(t), None)
            if g is None:
                continue
            if t._backward is not None:
                for parent, pg in t._backward(g):
                    if not parent.requires_grad:
                        continue
                    if id(parent) in grads:
                        grads[id(parent)] = grads[id(parent)] + pg
                    else:
                        grads[id(parent)] = pg
            elif t.requires_grad and not t._parents:
                t._accumulate(g)

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other):
        other = self._wrap(other, self.dtype)
        a, b = self, other
        return Tensor._from_op(
            a.data + b.data,
            (a, b),
            lambda g: ((a, _unbroadcast(g, a.shape)), (b, _unbroadcast(g, b.shape))),
            "add",
        )

    __radd__ = __add__

    def __neg__(self):
        a = self
        return Tensor._from_op(-a.data, (a,), lambda g: ((a, -g),), "neg")

    def __sub__(self, other):
        other = self._wrap(other, self.dtype)
        a, b = self, other
        return Tensor._from_op(
            a.data - b.data,
            (a, b),
            lambda g: ((a, _unbroadcast(g, a.shape)), (b, _unbroadcast(-g, b.shape))),
            "sub",
        )

    def __rsub__(self, other):
        return self._wrap(other, self.dtype) - self

    def __mul__(self, other):
        other = self._wrap(other, self.dtype)
        a, b = self, other
        return Tensor._from_op(
            a.data * b.data,
            (a, b),
            lambda g: (
                (a, _unbroadcast(g * b.data, a.shape)),
                (b, _unbroadcast(g * a.data, b.shape)),
            ),
            "mul",
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._wrap(other, self.dtype)
        a, b = self, other
        return Tensor._from_op(
            a.data / b.data,
            (a, b),
            lambda g: (
                (a, _unbroadcast(g / b.data, a.shape)),
                (b, _unbroadcast(-g * a.data / (b.data * b.data), b.shape)),
            ),
            "div",
        )

    def __rtruediv__(self, other):
        return self._wrap(other, self.dtype) / self

    def __pow__(self, p):
        a = self
        p = float(p)
        return Tensor._from_op(
            a.data ** p,
            (a,),
            lambda g: ((a, g * p * a.data ** (p - 1.0)),),
            "pow",
        )

    # -- elementwise functions ----------------------------------------------

    def exp(self):
        a = self
        out_data = np.exp(a.data)
        return Tensor._from_op(out_data, (a,), lambda g: ((a, g * out_data),), "exp")

    def log(self):
        a = self
        return Tensor._from_op(np.log(a.data), (a,), lambda g: ((a, g / a.data),), "log")

    def sqrt(self):
        a = self
        out_data = np.sqrt(a.data)
        return Tensor._from_op(
            out_data, (a,), lambda g: ((a, g * 0.5 / out_data),), "sqrt"
        )

    def leaky_relu(self, slope=0.2):
        a = self
        mask = np.where(a.data >= 0, 1.0, slope).astype(a.dtype)
        return Tensor._from_op(
            np.where(a.data >= 0, a.data, a.data * slope),
            (a,),
            lambda g: ((a, g * mask),),
            "leaky_relu",
        )

    def softplus(self):
        a = self
        # stable: log1p(exp(-|x|)) + max(x, 0); derivative = sigmoid(x)
        out_data = np.log1p(np.exp(-np.abs(a.data))) + np.maximum(a.data, 0)
        sig = 1.0 / (1.0 + np.exp(-a.data))
        return Tensor._from_op(out_data, (a,), lambda g: ((a, g * sig),), "softplus")

    def abs(self):
        a = self
        sign = np.sign(a.data)
        return Tensor._from_op(np.abs(a.data), (a,), lambda g: ((a, g * sign),), "abs")

    # -- reductions / shape --------------------------------------------------

    def sum(self, axis=None, keepdims=False):
        a = self
        out_data = a.data.sum(axis=axis, keepdims=keepdims)

        def backward(g):
            g = np.asarray(g)
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return ((a, np.broadcast_to(g, a.shape).copy()),)

        return Tensor._from_op(out_data, (a,), backward, "sum")

    def mean(self, axis=None, keepdims=False):
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def reshape(self, *shape):
        a = self
        return Tensor._from_op(
            a.data.reshape(*shape), (a,), lambda g: ((a, g.reshape(a.shape)),), "reshape"
        )

    def transpose(self, *axes):
        a = self
        if not axes:
            axes = tuple(reversed(range(a.data.ndim)))
        inv = np.argsort(axes)
        return Tensor._from_op(
            a.data.transpose(axes), (a,), lambda g: ((a, g.transpose(inv)),), "transpose"
        )

    @property
    def T(self):
        return self.transpose()

    # -- linear algebra -------------------------------------------------------

    def matmul(self, other):
        other = self._wrap(other, self.dtype)
        a, b = self, other

        def backward(g):
            ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
            gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
            return ((a, _unbroadcast(ga, a.shape)), (b, _unbroadcast(gb, b.shape)))

        return Tensor._from_op(np.matmul(a.data, b.data), (a, b), backward, "matmul")

    __matmul__ = matmul

    def conv1d(self, w, b):
        """Same-padded stride-1 conv; self: (C_in, T), w: (C_out, C_in, k)."""
        a = self
        w = self._wrap(w, self.dtype)
        b = self._wrap(b, self.dtype)
        if a.data.ndim != 2 or w.data.ndim != 3 or w.data.shape[1] != a.data.shape[0]:
            raise ShapeMismatch(
                f"conv1d shapes: input {a.data.shape}, weight {w.data.shape}"
            )
        k = w.data.shape[2]
        if k % 2 != 1:
            raise ShapeMismatch("conv1d kernel size must be odd")
        out_data = kernels.conv1d_forward(a.data, w.data, b.data)

        def backward(g):
            g = np.ascontiguousarray(g)
            return (
                (a, kernels.conv1d_grad_input(g, w.data)),
                (w, kernels.conv1d_grad_weight(a.data, g, k)),
                (b, g.sum(axis=1)),
            )

        return Tensor._from_op(out_data, (a, w, b), backward, "conv1d")

    def take_per_row(self, idx):
        """self: (T, V), idx: int (T,) -> (T,) picking self[t, idx[t]]."""
        a = self
        idx = np.asarray(idx, dtype=np.int64)
        rows = np.arange(a.data.shape[0])

        def backward(g):
            ga = np.zeros_like(a.data)
            ga[rows, idx] = g
            return ((a, ga),)

        return Tensor._from_op(a.data[rows, idx], (a,), backward, "take_per_row")


# -- composites ---------------------------------------------------------------


def constant(data, dtype=np.float32):
    return Tensor(np.asarray(data, dtype=dtype))


def softmax(x, axis=-1):
    shift = Tensor(np.max(x.data, axis=axis, keepdims=True))  # constant shift
    e = (x - shift).exp()
    return e / e.sum(axis=axis, keepdims=True)


def logsumexp(x, axis=-1):
    shift = Tensor(np.max(x.data, axis=axis, keepdims=True))
    return (x - shift).exp().sum(axis=axis, keepdims=True).log() + shift


def cosine_per_column(a, b, eps=1e-12):
    """Columnwise cosine similarity of two (F, T) tensors -> (T,)."""
    num = (a * b).sum(axis=0)
    na = ((a * a).sum(axis=0) + eps).sqrt()
    nb = ((b * b).sum(axis=0) + eps).sqrt()
    return num / (na * nb)


def grad_check(f, x, step=1e-5):
    """Max relative error between analytic and central-difference gradient.

    f: Tensor -> scalar Tensor; x: float64 numpy array.
    """
    x = np.asarray(x, dtype=np.float64)
    leaf = Tensor(x.copy(), requires_grad=True)
    out = f(leaf)
    out.backward()
    analytic = leaf.grad.copy()

    numeric = np.zeros_like(x)
    flat = x.reshape(-1)
    for i in range(flat.size):
        h = step * max(1.0, abs(flat[i]))
        for sgn in (+1.0, -1.0):
            xs = x.copy().reshape(-1)
            xs[i] += sgn * h
            val = f(Tensor(xs.reshape(x.shape))).item()
            numeric.reshape(-1)[i] += sgn * val / (2.0 * h)

    denom = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))
