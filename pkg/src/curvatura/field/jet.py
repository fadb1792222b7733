"""Order-3 jets of parsed fields.

A jet is propagated through the expression tree as truncated symmetric
Taylor data: value, gradient, packed Hessian (entries ``i <= j``) and
packed third-derivative tensor (entries ``i <= j <= k``). Every operation
is vectorised over a batch of evaluation points.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np

from .parser import BinOp, Call, Const, FieldExpr, Neg, Node, Pow, Var


class FieldDomainError(ArithmeticError):
    """The field (or one of its derivatives) is undefined at a point."""

    def __init__(self, message: str, point=None):
        self.point = None if point is None else np.asarray(point, dtype=float)
        if point is not None:
            message = f"{message} at point {np.array2string(self.point, precision=6)}"
        super().__init__(message)


# --------------------------------------------------------------------------
# packed symmetric storage


@lru_cache(maxsize=None)
def hess_pairs(n: int) -> tuple:
    return tuple(combinations_with_replacement(range(n), 2))


@lru_cache(maxsize=None)
def third_triples(n: int) -> tuple:
    return tuple(combinations_with_replacement(range(n), 3))


@lru_cache(maxsize=None)
def hess_index(n: int) -> np.ndarray:
    """(n, n) map from matrix position to packed Hessian slot."""
    idx = np.empty((n, n), dtype=np.intp)
    for p, (i, j) in enumerate(hess_pairs(n)):
        idx[i, j] = idx[j, i] = p
    idx.setflags(write=False)
    return idx


@lru_cache(maxsize=None)
def third_index(n: int) -> np.ndarray:
    """(n, n, n) map from tensor position to packed third-derivative slot."""
    idx = np.empty((n, n, n), dtype=np.intp)
    for q, (i, j, k) in enumerate(third_triples(n)):
        for a, b, c in ((i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)):
            idx[a, b, c] = q
    idx.setflags(write=False)
    return idx


@lru_cache(maxsize=None)
def _leibniz_tables(n: int):
    hi = hess_index(n)
    pairs = np.array(hess_pairs(n), dtype=np.intp).reshape(-1, 2)
    triples = np.array(third_triples(n), dtype=np.intp).reshape(-1, 3)
    pi, pj = pairs[:, 0], pairs[:, 1]
    ti, tj, tk = triples[:, 0], triples[:, 1], triples[:, 2]
    return pi, pj, ti, tj, tk, hi[tj, tk], hi[ti, tk], hi[ti, tj]


def n_hess(n: int) -> int:
    return n * (n + 1) // 2


def n_third(n: int) -> int:
    return n * (n + 1) * (n + 2) // 6


@dataclass(frozen=True)
class Jet3:
    """Value, gradient, Hessian and third derivatives of a field.

    Arrays may carry a leading batch axis: ``value`` has shape ``B``,
    ``grad`` ``B + (n,)``, ``hess`` ``B + (n(n+1)/2,)`` and ``third``
    ``B + (n(n+1)(n+2)/6,)``. Symmetric tensors exist only in packed
    form; :attr:`hess_matrix` and :attr:`third_tensor` expand them.
    """

    value: np.ndarray
    grad: np.ndarray
    hess: np.ndarray
    third: np.ndarray

    @property
    def dim(self) -> int:
        return self.grad.shape[-1]

    @property
    def batch_shape(self) -> tuple:
        return np.shape(self.value)

    @property
    def hess_matrix(self) -> np.ndarray:
        return self.hess[..., hess_index(self.dim)]

    @property
    def third_tensor(self) -> np.ndarray:
        return self.third[..., third_index(self.dim)]

    @property
    def laplacian(self):
        n = self.dim
        diag = [hess_index(n)[i, i] for i in range(n)]
        return self.hess[..., diag].sum(axis=-1)

    @property
    def grad_norm(self):
        return np.sqrt(np.sum(self.grad * self.grad, axis=-1))

    def __getitem__(self, key) -> "Jet3":
        if not self.batch_shape:
            raise TypeError("cannot index an unbatched jet")
        return Jet3(self.value[key], self.grad[key], self.hess[key], self.third[key])

    def __len__(self) -> int:
        if not self.batch_shape:
            raise TypeError("unbatched jet has no length")
        return self.batch_shape[0]

    def scaled(self, c: float) -> "Jet3":
        return Jet3(c * self.value, c * self.grad, c * self.hess, c * self.third)

    @classmethod
    def from_tensors(cls, value, grad, hess, third=None) -> "Jet3":
        """Build a jet from full (symmetric) Hessian and third tensors.

        Only the upper-triangular entries are read.
        """
        grad = np.asarray(grad, dtype=float)
        n = grad.shape[-1]
        hess = np.asarray(hess, dtype=float)
        pairs = np.array(hess_pairs(n), dtype=np.intp).reshape(-1, 2)
        packed_h = hess[..., pairs[:, 0], pairs[:, 1]]
        triples = np.array(third_triples(n), dtype=np.intp).reshape(-1, 3)
        if third is None:
            packed_t = np.zeros(grad.shape[:-1] + (len(triples),))
        else:
            third = np.asarray(third, dtype=float)
            packed_t = third[..., triples[:, 0], triples[:, 1], triples[:, 2]]
        return cls(np.asarray(value, dtype=float), grad, packed_h, packed_t)


# --------------------------------------------------------------------------
# jet algebra; constants stay python floats


class _J:
    __slots__ = ("v", "g", "h", "t")

    def __init__(self, v, g, h, t):
        self.v, self.g, self.h, self.t = v, g, h, t


def _is_const(x) -> bool:
    return isinstance(x, float)


def _add(a, b, sign: float):
    if _is_const(a) and _is_const(b):
        return a + sign * b
    if _is_const(a):
        return _J(a + sign * b.v, sign * b.g, None if b.h is None else sign * b.h,
                  None if b.t is None else sign * b.t)
    if _is_const(b):
        return _J(a.v + sign * b, a.g, a.h, a.t)
    return _J(
        a.v + sign * b.v,
        a.g + sign * b.g,
        None if a.h is None else a.h + sign * b.h,
        None if a.t is None else a.t + sign * b.t,
    )


def _scale(a: _J, c: float) -> _J:
    return _J(c * a.v, c * a.g, None if a.h is None else c * a.h,
              None if a.t is None else c * a.t)


def _mul(a, b, n: int):
    if _is_const(a) and _is_const(b):
        return a * b
    if _is_const(a):
        return _scale(b, a)
    if _is_const(b):
        return _scale(a, b)
    pi, pj, ti, tj, tk, tjk, tik, tij = _leibniz_tables(n)
    av, bv = a.v[:, None], b.v[:, None]
    g = av * b.g + a.g * bv
    h = t = None
    if a.h is not None:
        h = av * b.h + a.g[:, pi] * b.g[:, pj] + a.g[:, pj] * b.g[:, pi] + a.h * bv
    if a.t is not None:
        t = (
            av * b.t
            + a.g[:, ti] * b.h[:, tjk]
            + a.g[:, tj] * b.h[:, tik]
            + a.g[:, tk] * b.h[:, tij]
            + a.h[:, tij] * b.g[:, tk]
            + a.h[:, tik] * b.g[:, tj]
            + a.h[:, tjk] * b.g[:, ti]
            + a.t * bv
        )
    return _J(a.v * b.v, g, h, t)


def _chain(u: _J, d0, d1, d2, d3, n: int) -> _J:
    """Compose a univariate function with derivatives d0..d3 onto jet u."""
    pi, pj, ti, tj, tk, tjk, tik, tij = _leibniz_tables(n)
    d1c = d1[:, None]
    g = d1c * u.g
    h = t = None
    if u.h is not None:
        d2c = d2[:, None]
        h = d2c * u.g[:, pi] * u.g[:, pj] + d1c * u.h
    if u.t is not None:
        t = (
            d3[:, None] * u.g[:, ti] * u.g[:, tj] * u.g[:, tk]
            + d2c * (u.h[:, tij] * u.g[:, tk] + u.h[:, tik] * u.g[:, tj]
                     + u.h[:, tjk] * u.g[:, ti])
            + d1c * u.t
        )
    return _J(d0, g, h, t)


_CONST_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "tanh": np.tanh,
    "atan": np.arctan,
    "sqrt": np.sqrt,
}


def _derivs(func: str, x):
    """Value and first three derivatives of a builtin at x."""
    if func == "sin":
        s, c = np.sin(x), np.cos(x)
        return s, c, -s, -c
    if func == "cos":
        s, c = np.sin(x), np.cos(x)
        return c, -s, -c, s
    if func == "exp":
        e = np.exp(x)
        return e, e, e, e
    if func == "tanh":
        t = np.tanh(x)
        s = 1.0 - t * t
        return t, s, -2.0 * t * s, s * (6.0 * t * t - 2.0)
    if func == "atan":
        w = 1.0 / (1.0 + x * x)
        return np.arctan(x), w, -2.0 * x * w * w, (6.0 * x * x - 2.0) * w ** 3
    if func == "sqrt":
        r = np.sqrt(x)
        return r, 0.5 / r, -0.25 / r ** 3, 0.375 / r ** 5
    raise ValueError(f"unknown function {func!r}")


def _power_derivs(x, p: int):
    out = []
    coef = 1.0
    for j in range(4):
        e = p - j
        if coef == 0.0:
            out.append(np.zeros_like(x))
        else:
            out.append(coef * x ** float(e) if e != 0 else np.full_like(x, coef))
        coef *= e
    return out


class _Evaluator:
    def __init__(self, points: np.ndarray, order: int):
        self.x = points
        self.n = points.shape[1]
        self.N = points.shape[0]
        self.order = order

    def fail(self, message, mask):
        idx = int(np.flatnonzero(mask)[0])
        raise FieldDomainError(message, self.x[idx])

    def var(self, i):
        n, N = self.n, self.N
        g = np.zeros((N, n))
        g[:, i] = 1.0
        h = np.zeros((N, n_hess(n))) if self.order >= 2 else None
        t = np.zeros((N, n_third(n))) if self.order >= 3 else None
        return _J(self.x[:, i].copy(), g, h, t)

    def node(self, node: Node):
        if isinstance(node, Const):
            return float(node.value)
        if isinstance(node, Var):
            return self.var(node.index)
        if isinstance(node, Neg):
            a = self.node(node.arg)
            return -a if _is_const(a) else _scale(a, -1.0)
        if isinstance(node, BinOp):
            a, b = self.node(node.left), self.node(node.right)
            if node.op == "+":
                return _add(a, b, 1.0)
            if node.op == "-":
                return _add(a, b, -1.0)
            if node.op == "*":
                return _mul(a, b, self.n)
            return _mul(a, self.reciprocal(b), self.n)
        if isinstance(node, Pow):
            return self.power(self.node(node.base), node.exponent)
        return self.call(node.func, self.node(node.arg))

    def reciprocal(self, b):
        if _is_const(b):
            if b == 0.0:
                raise FieldDomainError("division by zero")
            return 1.0 / b
        bad = b.v == 0.0
        if bad.any():
            self.fail("division by zero", bad)
        r = 1.0 / b.v
        return _chain(b, r, -r * r, 2.0 * r ** 3, -6.0 * r ** 4, self.n)

    def power(self, a, p: int):
        if _is_const(a):
            if a == 0.0 and p < 0:
                raise FieldDomainError("division by zero in negative power")
            return a ** p
        if p < 0:
            bad = a.v == 0.0
            if bad.any():
                self.fail("division by zero in negative power", bad)
        if p == 0:
            return 1.0
        if p == 1:
            return a
        d = _power_derivs(a.v, p)
        return _chain(a, d[0], d[1], d[2], d[3], self.n)

    def call(self, func: str, a):
        if _is_const(a):
            if func == "sqrt" and a < 0.0:
                raise FieldDomainError("sqrt of negative number")
            return float(_CONST_FUNCS[func](a))
        if func == "sqrt":
            bad = a.v <= 0.0
            if bad.any():
                self.fail("sqrt of non-positive number (derivatives unbounded)", bad)
        d = _derivs(func, a.v)
        return _chain(a, *d, self.n)


def _as_points(expr: FieldExpr, point):
    x = np.asarray(point, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != expr.dim:
        raise ValueError(f"point must have length {expr.dim}, got shape {np.shape(point)}")
    return x, single


def eval_jet(expr: FieldExpr, point, order: int = 3) -> Jet3:
    """Exact derivatives up to ``order`` (1, 2 or 3); missing orders are zero."""
    x, single = _as_points(expr, point)
    n, N = expr.dim, x.shape[0]
    with np.errstate(all="ignore"):
        out = _Evaluator(x, order).node(expr.root)
    if _is_const(out):
        out = _J(np.full(N, out), np.zeros((N, n)), None, None)
    h = out.h if out.h is not None else np.zeros((N, n_hess(n)))
    t = out.t if out.t is not None else np.zeros((N, n_third(n)))
    jet = Jet3(out.v, out.g, h, t)
    finite = np.isfinite(jet.value) & np.isfinite(jet.grad).all(axis=1)
    finite &= np.isfinite(h).all(axis=1) & np.isfinite(t).all(axis=1)
    if not finite.all():
        idx = int(np.flatnonzero(~finite)[0])
        raise FieldDomainError("non-finite derivative", x[idx])
    if single:
        jet = jet[0]
    return jet


def eval_jet3(expr: FieldExpr, point) -> Jet3:
    """Exact order-3 jet of ``expr`` at ``point`` (shape (n,) or (N, n))."""
    return eval_jet(expr, point, order=3)


def evaluate(expr: FieldExpr, point) -> np.ndarray:
    """Field values only (no derivative propagation)."""
    x, single = _as_points(expr, point)
    with np.errstate(all="ignore"):
        out = _value(expr.root, x)
    out = np.broadcast_to(np.asarray(out, dtype=float), (x.shape[0],)).copy()
    if not np.isfinite(out).all():
        idx = int(np.flatnonzero(~np.isfinite(out))[0])
        raise FieldDomainError("non-finite value", x[idx])
    return out[0] if single else out


def _value(node: Node, x):
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return x[:, node.index]
    if isinstance(node, Neg):
        return -_value(node.arg, x)
    if isinstance(node, BinOp):
        a, b = _value(node.left, x), _value(node.right, x)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if np.any(np.asarray(b) == 0.0):
            raise FieldDomainError("division by zero")
        return a / b
    if isinstance(node, Pow):
        a = _value(node.base, x)
        if node.exponent < 0 and np.any(np.asarray(a) == 0.0):
            raise FieldDomainError("division by zero in negative power")
        return np.asarray(a, dtype=float) ** node.exponent
    a = _value(node.arg, x)
    if node.func == "sqrt" and np.any(np.asarray(a) < 0.0):
        raise FieldDomainError("sqrt of negative number")
    return _CONST_FUNCS[node.func](a)
