"""Central-difference jets, used as an independent oracle for the AD path.

Values are computed from a separate scalar interpreter running in
extended precision (mpmath), so the stencil error is truncation only.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import product

import mpmath
import numpy as np

from .jet import FieldDomainError, Jet3, hess_pairs, third_triples
from .parser import BinOp, Call, Const, FieldExpr, Neg, Node, Pow, Var

_DPS = 40

# fourth-order central stencils: {offset: weight}, scaled by h^-order.
# Weights stay exact rationals; they are converted to mpf at working precision.
_STENCILS = {
    0: {0: Fraction(1)},
    1: {-2: Fraction(1, 12), -1: Fraction(-2, 3), 1: Fraction(2, 3), 2: Fraction(-1, 12)},
    2: {-2: Fraction(-1, 12), -1: Fraction(4, 3), 0: Fraction(-5, 2), 1: Fraction(4, 3),
        2: Fraction(-1, 12)},
    3: {-3: Fraction(1, 8), -2: Fraction(-1), -1: Fraction(13, 8), 1: Fraction(-13, 8),
        2: Fraction(1), 3: Fraction(-1, 8)},
}


def _mpf(q: Fraction):
    return mpmath.mpf(q.numerator) / q.denominator


_MP_FUNCS = {
    "sin": mpmath.sin,
    "cos": mpmath.cos,
    "exp": mpmath.exp,
    "tanh": mpmath.tanh,
    "atan": mpmath.atan,
    "sqrt": mpmath.sqrt,
}


def _mp_value(node: Node, x, strict: bool):
    if isinstance(node, Const):
        return mpmath.mpf(node.value)
    if isinstance(node, Var):
        return x[node.index]
    if isinstance(node, Neg):
        return -_mp_value(node.arg, x, strict)
    if isinstance(node, BinOp):
        a, b = _mp_value(node.left, x, strict), _mp_value(node.right, x, strict)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if b == 0:
            raise FieldDomainError("division by zero")
        return a / b
    if isinstance(node, Pow):
        a = _mp_value(node.base, x, strict)
        if node.exponent < 0 and a == 0:
            raise FieldDomainError("division by zero in negative power")
        return a ** node.exponent
    a = _mp_value(node.arg, x, strict)
    if node.func == "sqrt" and (a < 0 or (strict and a == 0)):
        raise FieldDomainError("sqrt of non-positive number")
    return _MP_FUNCS[node.func](a)


def finite_diff_jet3(expr: FieldExpr, point, h: float = 1e-3) -> Jet3:
    """Estimate the order-3 jet of ``expr`` at one point by central differences."""
    if not h > 0:
        raise ValueError("step h must be positive")
    x0 = [float(v) for v in np.asarray(point, dtype=float).ravel()]
    n = expr.dim
    if len(x0) != n:
        raise ValueError(f"point must have length {n}")

    with mpmath.workdps(_DPS):
        base = [mpmath.mpf(v) for v in x0]
        hh = mpmath.mpf(h)
        try:
            center = _mp_value(expr.root, base, strict=True)
        except FieldDomainError as exc:
            raise FieldDomainError(str(exc), x0) from None
        cache = {}

        def f(offsets):
            key = tuple(offsets)
            if key not in cache:
                pt = [base[i] + key[i] * hh for i in range(n)]
                try:
                    cache[key] = _mp_value(expr.root, pt, strict=False)
                except FieldDomainError as exc:
                    raise FieldDomainError(f"{exc} within stencil", x0) from None
            return cache[key]

        def partial(counts):
            axes = [i for i in range(n) if counts[i]]
            stencils = [_STENCILS[counts[i]] for i in axes]
            total = mpmath.mpf(0)
            for combo in product(*(s.items() for s in stencils)):
                offs = [0] * n
                w = mpmath.mpf(1)
                for ax, (o, c) in zip(axes, combo):
                    offs[ax] = o
                    w *= _mpf(c)
                total += w * f(offs)
            return total / hh ** sum(counts)

        def counts_of(idx):
            c = [0] * n
            for i in idx:
                c[i] += 1
            return c

        grad = [partial(counts_of((i,))) for i in range(n)]
        hess = [partial(counts_of(p)) for p in hess_pairs(n)]
        third = [partial(counts_of(t)) for t in third_triples(n)]
        return Jet3(
            np.float64(center),
            np.array([float(v) for v in grad]),
            np.array([float(v) for v in hess]),
            np.array([float(v) for v in third]),
        )
