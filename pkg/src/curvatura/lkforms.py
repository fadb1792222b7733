"""Lipschitz-Killing curvature densities of level sets.

The degree-(k-1) curvature density of a level set with normal v and
ambient Hessian H is a symmetric function of H restricted to v-perp. It is
never expanded symbolically: elementary symmetric functions are read off
the characteristic polynomial by the Faddeev-LeVerrier recurrence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .field.jet import hess_index, hess_pairs

MAX_DEGREE = 12

# relative threshold for the removable singularity of p_polynomial at v = 0;
# the effective cutoff is EPS_V * (1 + ||H||_F)
EPS_V = 1e-10


class NotApplicable(ValueError):
    """A closed form does not apply to this input (not a numerical failure)."""


@dataclass(frozen=True)
class SymMatrix:
    """Symmetric matrix held as its packed upper triangle."""

    packed: np.ndarray

    @property
    def dim(self) -> int:
        m = self.packed.shape[-1]
        return int((math.isqrt(8 * m + 1) - 1) // 2)

    @property
    def matrix(self) -> np.ndarray:
        return self.packed[..., hess_index(self.dim)]

    @classmethod
    def from_matrix(cls, a) -> "SymMatrix":
        a = np.asarray(a, dtype=float)
        n = a.shape[-1]
        pairs = np.array(hess_pairs(n), dtype=np.intp).reshape(-1, 2)
        return cls(a[..., pairs[:, 0], pairs[:, 1]])


def _as_matrix(h) -> np.ndarray:
    if isinstance(h, SymMatrix):
        return h.matrix
    h = np.asarray(h, dtype=float)
    if h.ndim < 2 or h.shape[-1] != h.shape[-2]:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    return h


def _gamma_half(k: int) -> float:
    """Gamma(k/2) for positive integer k via Gamma(z+1) = z Gamma(z)."""
    if k % 2 == 0:
        z, g = 1.0, 1.0
    else:
        z, g = 0.5, math.sqrt(math.pi)
    while z < k / 2:
        g *= z
        z += 1.0
    return g


def b_coefficient(k: int) -> float:
    """Gamma(k/2) / (2 pi^(k/2) (k-1)!), the boundary coefficient of degree k."""
    if not isinstance(k, (int, np.integer)) or not 1 <= k <= MAX_DEGREE:
        raise ValueError(f"degree k must be an integer in [1, {MAX_DEGREE}], got {k!r}")
    k = int(k)
    return _gamma_half(k) / (2.0 * math.pi ** (k / 2) * math.factorial(k - 1))


def lk_coefficient(k: int) -> float:
    """Coefficient multiplying the elementary-symmetric density e_{k-1}.

    The trace of the (k-1)-th Kulkarni-Nomizu power of a symmetric form
    equals (k-1)! times e_{k-1} of its eigenvalues, so the intrinsic volume
    of degree n-k is ``b_k (k-1)!`` times the integral of e_{k-1}(S). This
    equals 1 / area(S^{k-1}).
    """
    return b_coefficient(k) * math.factorial(int(k) - 1)


def char_poly_coefficients(a) -> np.ndarray:
    """Coefficients c_0..c_n of det(lambda I - A), batched over leading axes.

    Faddeev-LeVerrier: M_1 = I, c_{n-m} = -tr(A M_m) / m,
    M_{m+1} = A M_m + c_{n-m} I.
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[-1]
    batch = a.shape[:-2]
    coeffs = np.zeros(batch + (n + 1,))
    coeffs[..., n] = 1.0
    eye = np.eye(n)
    m = np.broadcast_to(eye, a.shape).copy()
    for step in range(1, n + 1):
        am = a @ m
        c = -np.trace(am, axis1=-2, axis2=-1) / step
        coeffs[..., n - step] = c
        m = am + c[..., None, None] * eye
    return coeffs


def elem_sym_of_matrix(a, j: int):
    """e_j of the eigenvalues of A (sum of the j x j principal minors)."""
    a = np.asarray(a, dtype=float)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[-1]
    if not 0 <= j <= n:
        raise ValueError(f"j must lie in [0, {n}], got {j}")
    if j == 0:
        return np.ones(a.shape[:-2]) if a.ndim > 2 else 1.0
    c = char_poly_coefficients(a)[..., n - j]
    out = (-1) ** j * c
    return float(out) if np.ndim(out) == 0 else out


def _check_degree(k, n):
    if not 1 <= k <= n:
        raise ValueError(f"degree k must lie in [1, {n}], got {k}")


def restricted_trace_wedge(h, v, k: int):
    """e_{k-1} of the eigenvalues of H restricted to the hyperplane v-perp."""
    h = _as_matrix(h)
    v = np.asarray(v, dtype=float)
    n = h.shape[-1]
    _check_degree(k, n)
    vv = np.sum(v * v, axis=-1)
    if np.any(vv == 0.0):
        raise ValueError("v must be nonzero; use p_polynomial for the continuous extension")
    proj = np.eye(n) - v[..., :, None] * v[..., None, :] / np.asarray(vv)[..., None, None]
    return elem_sym_of_matrix(proj @ h @ proj, k - 1)


def p_polynomial(h, v, k: int):
    """Polynomial curvature density ||v||^(2(k-1)) e_{k-1}(H|v-perp).

    Evaluated as e_{k-1}(H (||v||^2 I - v v^T)), which is polynomial in the
    entries of H and v; below the EPS_V cutoff the exact value at v = 0 is
    returned (1 for k = 1, else 0).
    """
    h = _as_matrix(h)
    v = np.asarray(v, dtype=float)
    n = h.shape[-1]
    _check_degree(k, n)
    if k == 1:
        return np.ones(v.shape[:-1]) if v.ndim > 1 else 1.0
    vv = np.sum(v * v, axis=-1)
    w = vv[..., None, None] * np.eye(n) - v[..., :, None] * v[..., None, :]
    out = elem_sym_of_matrix(h @ w, k - 1)
    cutoff = EPS_V * (1.0 + np.sqrt(np.sum(h * h, axis=(-2, -1))))
    small = np.sqrt(vv) <= cutoff
    if np.ndim(out) == 0:
        return 0.0 if small else float(out)
    return np.where(small, 0.0, out)


def p2_closed_form(h, v):
    """||v||^2 tr(H) - H(v, v)."""
    h = _as_matrix(h)
    v = np.asarray(v, dtype=float)
    vv = np.sum(v * v, axis=-1)
    hvv = np.einsum("...i,...ij,...j->...", v, h, v)
    out = vv * np.trace(h, axis1=-2, axis2=-1) - hvv
    return float(out) if np.ndim(out) == 0 else out


def pn_nondegenerate_check(h, v, rtol: float = 1e-8) -> float:
    """Top-degree density from det(H), checked against :func:`p_polynomial`.

    Uses det(H) = det(H|v-perp) ||v||^-2 H(v, v^H), where v^H is the
    projection of v onto the H-orthogonal complement of v-perp along v-perp.
    Raises :class:`NotApplicable` when H|v-perp (or H) is degenerate.
    """
    h = _as_matrix(h)
    v = np.asarray(v, dtype=float)
    if h.ndim != 2 or v.ndim != 1:
        raise ValueError("pn_nondegenerate_check takes a single matrix and vector")
    n = h.shape[0]
    vv = float(v @ v)
    if vv == 0.0:
        raise NotApplicable("v = 0")
    scale = max(np.linalg.norm(h), 1e-300)
    restricted = restricted_trace_wedge(h, v, n)
    if abs(restricted) <= 1e-10 * scale ** (n - 1):
        raise NotApplicable("H restricted to v-perp is degenerate")
    det = float(np.linalg.det(h))
    if abs(det) <= 1e-10 * scale ** n:
        raise NotApplicable("H is singular; v^H is undefined")
    hinv_v = np.linalg.solve(h, v)
    v_h = vv / float(v @ hinv_v) * hinv_v
    closed = det * vv ** n / float(v @ h @ v_h)
    reference = p_polynomial(h, v, n)
    if abs(closed - reference) > rtol * max(abs(closed), abs(reference)):
        raise ArithmeticError(
            f"determinant route {closed!r} disagrees with projected route {reference!r}"
        )
    return closed
