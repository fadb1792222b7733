"""Dual numbers carrying a spatial gradient.

A :class:`DirectionalDual` holds a quantity (scalar or matrix, batched)
and its derivatives with respect to the n base-point coordinates, stored
on a trailing axis. Arithmetic applies the chain rule, so the gradient of
a curvature density is obtained by running the same formulas on duals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DirectionalDual:
    value: np.ndarray
    deriv: np.ndarray

    @classmethod
    def constant(cls, value, n: int) -> "DirectionalDual":
        value = np.asarray(value, dtype=float)
        return cls(value, np.zeros(value.shape + (n,)))

    @property
    def n(self) -> int:
        return self.deriv.shape[-1]

    def _lift(self, other) -> "DirectionalDual":
        if isinstance(other, DirectionalDual):
            return other
        return DirectionalDual.constant(np.broadcast_to(other, np.shape(self.value)), self.n)

    def __add__(self, other):
        other = self._lift(other)
        return DirectionalDual(self.value + other.value, self.deriv + other.deriv)

    __radd__ = __add__

    def __neg__(self):
        return DirectionalDual(-self.value, -self.deriv)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, DirectionalDual):
            c = np.asarray(other, dtype=float)
            return DirectionalDual(self.value * c, self.deriv * c[..., None])
        return DirectionalDual(
            self.value * other.value,
            self.deriv * other.value[..., None] + self.value[..., None] * other.deriv,
        )

    __rmul__ = __mul__

    def reciprocal(self):
        inv = 1.0 / self.value
        return DirectionalDual(inv, -(inv * inv)[..., None] * self.deriv)

    def __truediv__(self, other):
        if not isinstance(other, DirectionalDual):
            return self * (1.0 / np.asarray(other, dtype=float))
        return self * other.reciprocal()

    def __pow__(self, p: int):
        if p == 0:
            return DirectionalDual.constant(np.ones_like(self.value), self.n)
        return DirectionalDual(
            self.value ** p, (p * self.value ** (p - 1))[..., None] * self.deriv
        )

    def sqrt(self):
        r = np.sqrt(self.value)
        return DirectionalDual(r, (0.5 / r)[..., None] * self.deriv)

    def __matmul__(self, other):
        other = self._lift(other)
        return DirectionalDual(
            self.value @ other.value,
            np.einsum("...ilm,...lj->...ijm", self.deriv, other.value)
            + np.einsum("...il,...ljm->...ijm", self.value, other.deriv),
        )

    def trace(self):
        return DirectionalDual(
            np.trace(self.value, axis1=-2, axis2=-1),
            np.einsum("...iim->...m", self.deriv),
        )

    def dot(self, vector) -> np.ndarray:
        """<grad, vector>: the directional derivative along ``vector``."""
        return np.einsum("...m,...m->...", self.deriv, vector)
