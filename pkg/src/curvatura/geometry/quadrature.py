"""Midpoint-rule volume integrals over sublevel sets."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..field.jet import eval_jet, evaluate
from ..field.parser import FieldExpr
from ..integrand import IrregularPointError
from .domain import Domain

# cell centres with |f - a| below this and |grad f| below GRAD_TOL are
# treated as a critical point sitting on the level
LEVEL_TOL = 1e-12
GRAD_TOL = 1e-8


class NonRegularLevelError(ValueError):
    """The requested level is (numerically) a critical value."""


class SublevelNotContainedError(ValueError):
    """A box sublevel set reaches the outer layer of cells."""


def resolve_threads(threads=None) -> int:
    if threads is None:
        threads = os.environ.get("CURVATURA_THREADS", "1")
    threads = int(threads)
    if threads < 1:
        raise ValueError("thread count must be >= 1")
    return threads


def chunk_size(dim: int) -> int:
    """Points per work unit; depends on the dimension only (determinism)."""
    return max(2048, (1 << 20) // dim ** 3)


def _chunks(total: int, size: int):
    return [(s, min(s + size, total)) for s in range(0, total, size)]


def grid_points(dom: Domain, res, start: int, stop: int):
    """Cell centres with flat indices in [start, stop), plus their multi-indices."""
    shape = dom.resolution(res)
    idx = np.unravel_index(np.arange(start, stop), shape)
    centers = [dom.centers_1d(shape, d) for d in range(dom.dim)]
    pts = np.stack([centers[d][idx[d]] for d in range(dom.dim)], axis=1)
    return pts, idx


def _check_dims(expr: FieldExpr, dom: Domain):
    if expr.dim != dom.dim:
        raise ValueError(f"field has dimension {expr.dim} but domain has {dom.dim}")


def map_chunks(func, total: int, dim: int, threads=None):
    """Apply ``func(start, stop)`` over fixed chunks; results in chunk order."""
    chunks = _chunks(total, chunk_size(dim))
    threads = resolve_threads(threads)
    if threads == 1 or len(chunks) == 1:
        return [func(s, e) for s, e in chunks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda c: func(*c), chunks))


def deterministic_sum(partials) -> float:
    """Exactly rounded sum of per-chunk (pairwise) partial sums."""
    return math.fsum(float(p) for p in partials)


def volume_integral(expr: FieldExpr, dom: Domain, a, res, density=None, *,
                    order: int = 3, threads=None) -> float:
    """Midpoint rule for the integral of ``density`` over {f <= a}.

    ``density`` maps a batched :class:`~curvatura.field.Jet3` to values;
    ``None`` integrates 1 (the volume). Cells whose centre satisfies
    f <= a contribute ``density(centre) * cell measure``. ``a=None``
    integrates over the whole torus.
    """
    _check_dims(expr, dom)
    shape = dom.resolution(res)
    if min(shape) < 8:
        raise ValueError("resolution must be at least 8 cells per axis")
    whole = a is None
    if whole and not dom.is_torus:
        raise ValueError("whole-domain integrals need a torus")
    a = math.inf if whole else float(a)
    total = int(np.prod(shape))

    def work(start, stop):
        pts, idx = grid_points(dom, shape, start, stop)
        if whole:
            inside = np.ones(len(pts), dtype=bool)
            near = np.zeros(len(pts), dtype=bool)
        else:
            vals = evaluate(expr, pts)
            inside = vals <= a
            near = np.abs(vals - a) < LEVEL_TOL
        if not dom.is_torus and inside.any():
            edge = np.zeros_like(inside)
            for d in range(dom.dim):
                edge |= (idx[d] == 0) | (idx[d] == shape[d] - 1)
            hit = inside & edge
            if hit.any():
                p = pts[np.flatnonzero(hit)[0]]
                raise SublevelNotContainedError(
                    f"sublevel set not compactly contained in the box (f <= {a} at boundary "
                    f"cell centre {np.array2string(p, precision=6)})"
                )
        if near.any():
            jn = eval_jet(expr, pts[near], order=1)
            crit = jn.grad_norm < GRAD_TOL
            if crit.any():
                p = pts[near][np.flatnonzero(crit)[0]]
                raise NonRegularLevelError(
                    f"level {a} is not regular: critical point near "
                    f"{np.array2string(p, precision=6)}"
                )
        if density is None:
            return float(np.count_nonzero(inside))
        if not inside.any():
            return 0.0
        sel = pts[inside]
        jet = eval_jet(expr, sel, order=order)
        try:
            dens = np.asarray(density(jet), dtype=float)
        except IrregularPointError as exc:
            point = sel[exc.index] if exc.index is not None else None
            raise IrregularPointError(str(exc).split(" (batch")[0], point=point) from None
        return float(np.sum(dens))

    partials = map_chunks(work, total, dom.dim, threads)
    return deterministic_sum(partials) * dom.cell_measure(shape)


def _polish_eta(expr: FieldExpr, dom: Domain, a: float, x, steps: int = 12):
    """Gauss-Newton on the residual (f - a, grad f); returns eta_{f-a,1} at the iterates' best."""
    best = np.full(len(x), np.inf)
    for _ in range(steps):
        jet = eval_jet(expr, x, order=2)
        r = np.concatenate([(jet.value - a)[:, None], jet.grad], axis=1)
        best = np.minimum(best, np.linalg.norm(r, axis=1))
        J = np.concatenate([jet.grad[:, None, :], jet.hess_matrix], axis=1)
        step = np.stack([np.linalg.lstsq(Ji, ri, rcond=None)[0] for Ji, ri in zip(J, r)])
        x = x - step
        if not dom.is_torus:
            x = np.clip(x, dom.lo, dom.hi)
        ok = np.all(np.isfinite(x), axis=1)
        if not ok.all():
            x = x[ok]
            best = best[ok]
        if len(x) == 0:
            break
    if len(x):
        jet = eval_jet(expr, x, order=1)
        best = np.minimum(best, np.sqrt((jet.value - a) ** 2 + jet.grad_norm ** 2))
    return float(best.min()) if len(best) else np.inf


def regularity_margin(expr: FieldExpr, dom: Domain, a: float, res, threads=None,
                      polish: int = 64):
    """(min of eta_{f-a,1} = sqrt((f-a)^2 + |grad f|^2), max |grad f|) over cell centres.

    The ``polish`` smallest samples are refined by Gauss-Newton on
    (f - a, grad f), so critical points on the level that fall between
    cell centres are still found.
    """
    _check_dims(expr, dom)
    shape = dom.resolution(res)
    total = int(np.prod(shape))
    a = float(a)

    def work(start, stop):
        pts, _ = grid_points(dom, shape, start, stop)
        jet = eval_jet(expr, pts, order=1)
        g = jet.grad_norm
        eta1 = np.sqrt((jet.value - a) ** 2 + g * g)
        m = min(polish, len(eta1))
        sel = np.argpartition(eta1, m - 1)[:m] if m else np.zeros(0, dtype=int)
        return float(eta1.min()), float(g.max()), eta1[sel], pts[sel]

    parts = map_chunks(work, total, dom.dim, threads)
    eta_min = min(p[0] for p in parts)
    gmax = max(p[1] for p in parts)
    if polish and gmax > 0.0:
        vals = np.concatenate([p[2] for p in parts])
        pts = np.concatenate([p[3] for p in parts])
        order = np.lexsort((np.arange(len(vals)), vals))[:polish]
        eta_min = min(eta_min, _polish_eta(expr, dom, a, pts[order]))
    return eta_min, gmax


@dataclass(frozen=True)
class ConvergenceTable:
    rows: tuple          # (res, value, delta-from-previous or None)
    extrapolated: float  # Richardson estimate assuming an O(h) error

    def as_dicts(self):
        return [{"res": r, "value": v, "delta": d} for r, v, d in self.rows]


def richardson(values, resolutions) -> float:
    """Intercept of a least-squares fit value = L + c h, h = 1/res.

    With two resolutions this is classic O(h) Richardson extrapolation;
    with more it averages out the erratic part of the lattice error.
    """
    h = 1.0 / np.asarray(resolutions, dtype=float)
    A = np.stack([np.ones_like(h), h], axis=1)
    coef, *_ = np.linalg.lstsq(A, np.asarray(values, dtype=float), rcond=None)
    return float(coef[0])


def refine_convergence(expr: FieldExpr, dom: Domain, a: float, density, res_list, *,
                       order: int = 3, threads=None) -> ConvergenceTable:
    """Evaluate :func:`volume_integral` on a sequence of resolutions."""
    res_list = [int(r) for r in res_list]
    if len(res_list) < 2 or any(b <= a_ for a_, b in zip(res_list, res_list[1:])):
        raise ValueError("res_list must be strictly increasing with at least 2 entries")
    values = [volume_integral(expr, dom, a, r, density, order=order, threads=threads)
              for r in res_list]
    rows = []
    for i, (r, v) in enumerate(zip(res_list, values)):
        rows.append((r, v, None if i == 0 else v - values[i - 1]))
    return ConvergenceTable(tuple(rows), richardson(values, res_list))
