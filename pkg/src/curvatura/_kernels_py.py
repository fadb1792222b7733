"""Pure-numpy density kernels (reference backend).

All functions take batched packed jets and return one density per point.
Irregular points yield NaN; callers translate NaN into an error that names
the point. ``_kernels.pyx`` implements the same contract point by point.
"""

from __future__ import annotations

import numpy as np

from .dual import DirectionalDual
from .field.jet import hess_index, third_index

# removable-singularity switch for arctan/tanh densities (||grad f|| / |f|)
SERIES_SWITCH = 1e-4
# cosh^-2 clamp: beyond this argument the true value is below 1e-300
COSH_CLAMP = 350.0

ALGEBRAIC, ARCTAN, TANH, LIPSCHITZ = 0, 1, 2, 3


def _full(hess, third, n):
    h = hess[:, hess_index(n)]
    t = None if third is None else third[:, third_index(n)]
    return h, t


def divergence_density(value, grad, hess, third, level, k):
    """div(P_k(H, grad f) / eta_{f-a, 3k-2} * grad f) at each point.

    phi = P / eta is evaluated on duals seeded from the jet (d grad = H,
    d H = third derivatives), then div(phi grad f) = <grad phi, grad f> +
    phi * lap f.
    """
    value = np.asarray(value, dtype=float)
    grad = np.asarray(grad, dtype=float)
    N, n = grad.shape
    h, tt = _full(np.asarray(hess, dtype=float), np.asarray(third, dtype=float), n)
    ell = 3 * k - 2
    eye = np.eye(n)

    t = DirectionalDual(value - level, grad)
    hd = DirectionalDual(h, tt)
    vv = DirectionalDual(np.einsum("ni,ni->n", grad, grad), 2.0 * np.einsum("nij,nj->ni", h, grad))
    lap = np.trace(h, axis1=1, axis2=2)

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if k == 1:
            p = DirectionalDual.constant(np.ones(N), n)
        else:
            # P = e_{k-1}(H W), W = |v|^2 I - v v^T, by Faddeev-LeVerrier
            outer = DirectionalDual(
                grad[:, :, None] * grad[:, None, :],
                h[:, :, None, :] * grad[:, None, :, None] + grad[:, :, None, None] * h[:, None, :, :],
            )
            w = DirectionalDual(vv.value[:, None, None] * eye,
                                vv.deriv[:, None, None, :] * eye[None, :, :, None]) - outer
            a = hd @ w
            mat = DirectionalDual.constant(np.broadcast_to(eye, (N, n, n)), n)
            c = None
            for step in range(1, k):
                am = a @ mat
                c = am.trace() * (-1.0 / step)
                mat = am + DirectionalDual(c.value[:, None, None] * eye,
                                           c.deriv[:, None, None, :] * eye[None, :, :, None])
            p = c * (-1.0 if (k - 1) % 2 else 1.0)
        eta = ((t ** (2 * ell)) + vv ** ell).sqrt()
        phi = p / eta
        out = phi.dot(grad) + phi.value * lap
    out[eta.value == 0.0] = np.nan
    return out


def boundary_density(grad, hess, k):
    """e_{k-1} of the shape operator Hess|grad-perp / ||grad||."""
    grad = np.asarray(grad, dtype=float)
    N, n = grad.shape
    h, _ = _full(np.asarray(hess, dtype=float), None, n)
    if k == 1:
        out = np.ones(N)
        out[~np.any(grad != 0.0, axis=1)] = np.nan
        return out
    vv = np.einsum("ni,ni->n", grad, grad)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.sqrt(vv)
        proj = np.eye(n) - grad[:, :, None] * grad[:, None, :] / vv[:, None, None]
        s = proj @ (h / g[:, None, None]) @ proj
        mat = np.broadcast_to(np.eye(n), (N, n, n)).copy()
        c = None
        for step in range(1, k):
            am = s @ mat
            c = -np.trace(am, axis1=1, axis2=2) / step
            mat = am + c[:, None, None] * np.eye(n)
        out = (-1.0) ** (k - 1) * c
    out[vv == 0.0] = np.nan
    return out


def nodal_density(value, grad, hess, variant):
    """Nodal-volume densities (without their global constants)."""
    f = np.asarray(value, dtype=float)
    grad = np.asarray(grad, dtype=float)
    N, n = grad.shape
    h, _ = _full(np.asarray(hess, dtype=float), None, n)
    vv = np.einsum("ni,ni->n", grad, grad)
    g = np.sqrt(vv)
    hv = np.einsum("nij,nj->ni", h, grad)
    q = np.einsum("ni,ni->n", grad, hv)
    lap = np.trace(h, axis1=1, axis2=2)
    eta2 = f * f + vv
    eta = np.sqrt(eta2)
    sigma = np.sign(f)
    irregular = eta == 0.0

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if variant == ALGEBRAIC:
            out = sigma / eta ** 3 * (f * vv + q - eta2 * lap)
        elif variant == LIPSCHITZ:
            absf = np.abs(f)
            ricci = _ricci_term(grad)
            hs2 = np.einsum("nij,nij->n", h, h)
            out = absf / eta ** 3 * (vv - f * lap + lap * lap - hs2 - ricci)
            out += 3.0 * absf / eta ** 5 * (
                f * q + np.einsum("ni,ni->n", hv, hv) - lap * (f * vv + q)
            )
        elif variant in (ARCTAN, TANH):
            r = g / f
            small = (f != 0.0) & (g < SERIES_SWITCH * np.abs(f))
            r2 = np.where(small, r * r, 0.0)
            if variant == ARCTAN:
                lim = 1.0 - r2 / 3.0 + r2 * r2 / 5.0
                bracket = 2.0 / 3.0 - 0.8 * r2 + 6.0 / 7.0 * r2 * r2
                tail = r2 / (1.0 + r2)
                series = -lap / f * lim + q / f ** 3 * bracket + tail
                atan = np.where(f == 0.0, 0.0, np.arctan(r))
                direct = atan / g * (q / vv - lap) + (vv - f * q / vv) / eta2
            else:
                lim = 1.0 - r2 / 3.0 + 2.0 * r2 * r2 / 15.0
                bracket = 2.0 / 3.0 - 8.0 / 15.0 * r2 + 34.0 / 105.0 * r2 * r2
                series = -lap / f * lim + q / f ** 3 * bracket + r2 / np.cosh(np.sqrt(r2)) ** 2
                th = np.where(f == 0.0, 0.0, np.tanh(r))
                clamp = ~(np.abs(r) <= COSH_CLAMP)
                sech2 = np.where(clamp, 0.0, 1.0 / np.cosh(np.where(clamp, 0.0, r)) ** 2)
                cosh_term = np.where(clamp, 0.0, sech2 * (vv / (f * f) - q / (f * vv)))
                direct = th / g * (q / vv - lap) + cosh_term
            out = np.where(small, series, direct)
        else:
            raise ValueError(f"unknown nodal variant {variant!r}")
    out = np.array(out, dtype=float)
    out[irregular] = np.nan
    return out


def _ricci_term(grad):
    """Ric(grad f, grad f); identically zero on flat tori and boxes."""
    return np.zeros(grad.shape[0])
