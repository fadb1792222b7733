"""Pointwise integrands for intrinsic and nodal volumes.

Every function takes a :class:`~curvatura.field.Jet3`, single or batched,
and returns one value per point. The heavy lifting happens in
:mod:`curvatura.kernels`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .dual import DirectionalDual
from .field.jet import Jet3

__all__ = [
    "DirectionalDual",
    "IrregularPointError",
    "LevelContext",
    "NODAL_VARIANTS",
    "boundary_density",
    "divergence_integrand",
    "eta",
    "nodal_density",
    "nodal_density_algebraic",
    "nodal_density_arctan",
    "nodal_density_lipschitz",
    "nodal_density_tanh",
]


class IrregularPointError(ValueError):
    """Density requested at a point where the level is not regular."""

    def __init__(self, message: str, index=None, point=None):
        self.index = index
        self.point = None if point is None else np.asarray(point, dtype=float)
        if self.point is not None:
            message = f"{message} at point {np.array2string(self.point, precision=6)}"
        elif index is not None:
            message = f"{message} (batch index {index})"
        super().__init__(message)


@dataclass(frozen=True)
class LevelContext:
    """Level ``a`` and degree ``k``; the regulariser exponent is 3k - 2."""

    a: float
    k: int

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"degree k must be an integer >= 1, got {self.k!r}")

    @property
    def ell(self) -> int:
        return 3 * self.k - 2


def eta(t, g, ell: int):
    """sqrt(t^(2 ell) + g^(2 ell)); g is a gradient norm."""
    if ell < 1:
        raise ValueError("ell must be >= 1")
    t = np.asarray(t, dtype=float)
    g = np.asarray(g, dtype=float)
    out = np.sqrt(t ** (2 * ell) + g ** (2 * ell))
    return float(out) if out.ndim == 0 else out


def _arrays(jet: Jet3):
    single = np.ndim(jet.value) == 0
    if single:
        return (np.atleast_1d(jet.value), jet.grad[None, :], jet.hess[None, :],
                jet.third[None, :], True)
    return jet.value, jet.grad, jet.hess, jet.third, False


def _finish(out, single, what):
    bad = np.isnan(out)
    if bad.any():
        raise IrregularPointError(f"{what}: point is not regular", int(np.flatnonzero(bad)[0]))
    return float(out[0]) if single else out


def boundary_density(jet: Jet3, k: int):
    """e_{k-1} of the shape operator Hess(f)|grad-perp / ||grad f||."""
    if k < 1 or k > jet.dim:
        raise ValueError(f"degree k must lie in [1, {jet.dim}], got {k}")
    _, grad, hess, _, single = _arrays(jet)
    return _finish(kernels.boundary_density(grad, hess, k), single, "zero gradient on the boundary")


def divergence_integrand(jet: Jet3, ctx: LevelContext):
    """div(P_k(Hess f, grad f) / eta_{f-a, 3k-2} * grad f)."""
    if ctx.k > jet.dim:
        raise ValueError(f"degree k must lie in [1, {jet.dim}], got {ctx.k}")
    value, grad, hess, third, single = _arrays(jet)
    out = kernels.divergence_density(value, grad, hess, third, ctx.a, ctx.k)
    return _finish(out, single, "f = a with vanishing gradient")


def _nodal(jet: Jet3, variant: int):
    value, grad, hess, _, single = _arrays(jet)
    out = kernels.nodal_density(value, grad, hess, variant)
    return _finish(out, single, "f = 0 with vanishing gradient")


def nodal_density_algebraic(jet: Jet3):
    """(sigma_f / eta_f^3)(f |grad f|^2 + Hess(grad f, grad f) - eta_f^2 lap f)."""
    return _nodal(jet, kernels.ALGEBRAIC)


def nodal_density_arctan(jet: Jet3):
    """arctan-regularised nodal density; integrates to pi * vol(Z_f)."""
    return _nodal(jet, kernels.ARCTAN)


def nodal_density_tanh(jet: Jet3):
    """tanh-regularised nodal density; integrates to 2 vol(Z_f)."""
    return _nodal(jet, kernels.TANH)


def nodal_density_lipschitz(jet: Jet3):
    """Sign-free density obtained from the algebraic one by parts.

    Continuous in the jet entries. The Ricci term of the curved version
    is zero here (flat metric), see ``_kernels_py._ricci_term``.
    """
    return _nodal(jet, kernels.LIPSCHITZ)


# variant -> (density, global factor): vol(Z_f) = factor * integral of density
NODAL_VARIANTS = {
    "algebraic": (nodal_density_algebraic, 0.5),
    "arctan": (nodal_density_arctan, 1.0 / math.pi),
    "tanh": (nodal_density_tanh, 0.5),
    "lipschitz": (nodal_density_lipschitz, 0.5),
}


def nodal_density(jet: Jet3, variant: str):
    try:
        density, _ = NODAL_VARIANTS[variant]
    except KeyError:
        raise ValueError(f"unknown nodal variant {variant!r}") from None
    return density(jet)
