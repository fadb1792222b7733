"""Independent reference values: ball intrinsic volumes, Morse counts, Monte Carlo."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import qmc

from .field.jet import eval_jet, evaluate
from .field.parser import FieldExpr
from .geometry.domain import Domain

SCAN_RES = 64
CRIT_GRAD = 1e-9
CRIT_EIG = 1e-6
DEDUPE = 1e-6
CLUSTER = 1e-4
LEVEL_GAP = 1e-6


class MorseError(ValueError):
    """The field violates the Morse-oracle preconditions."""


def unit_ball_volume(m: int) -> float:
    return math.pi ** (m / 2) / math.gamma(m / 2 + 1)


def ball_intrinsic_volume(n: int, r: float, j: int) -> float:
    """L_j of the radius-r ball in R^n (Steiner formula)."""
    if n < 1 or not 0 <= j <= n:
        raise ValueError("need n >= 1 and 0 <= j <= n")
    if not r > 0:
        raise ValueError("radius must be positive")
    return math.comb(n, j) * unit_ball_volume(n) / unit_ball_volume(n - j) * r ** j


@dataclass(frozen=True)
class CriticalPoint:
    location: np.ndarray
    index: int
    value: float


def _scan_candidates(expr, dom: Domain, res: int):
    """Centres of scan cells where every gradient component changes sign."""
    n = dom.dim
    shape = (res,) * n
    axes = [dom.nodes_1d(shape, d) for d in range(n)]
    if not dom.is_torus:
        axes = [ax[:-1] for ax in axes]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    grad = eval_jet(expr, pts, order=1).grad.reshape(shape + (n,))
    if dom.is_torus:
        corners = [np.roll(grad, [-o for o in off], axis=tuple(range(n)))
                   for off in np.ndindex(*(2,) * n)]
    else:
        cut = tuple(slice(0, res - 1) for _ in range(n))
        corners = [grad[tuple(slice(o, o + res - 1) for o in off)] for off in np.ndindex(*(2,) * n)]
        mesh = [m[cut] for m in mesh]
    stack = np.stack(corners)
    hit = np.all((stack.min(axis=0) <= 0) & (stack.max(axis=0) >= 0), axis=-1)
    h = dom.spacing(shape)
    origin = np.stack([m[hit] for m in mesh], axis=1)
    return origin + 0.5 * h


def critical_points(expr: FieldExpr, dom: Domain, res: int = SCAN_RES, iters: int = 60) -> list:
    """Nondegenerate critical points located by scan + Newton on grad f = 0."""
    if expr.dim != dom.dim:
        raise ValueError("field and domain dimensions differ")
    x = _scan_candidates(expr, dom, res)
    h = float(np.max(dom.spacing(res)))
    x0 = x.copy()
    for _ in range(iters):
        if len(x) == 0:
            break
        jet = eval_jet(expr, x, order=2)
        with np.errstate(all="ignore"):
            try:
                step = np.linalg.solve(jet.hess_matrix, jet.grad[..., None])[..., 0]
            except np.linalg.LinAlgError:
                step = np.stack([np.linalg.lstsq(H, g, rcond=None)[0]
                                 for H, g in zip(jet.hess_matrix, jet.grad)])
        step[~np.isfinite(step)] = 0.0
        x = x - step
    jet = eval_jet(expr, x, order=2) if len(x) else None
    if jet is None:
        return []
    # keep converged points that stayed near their scan cell
    ok = (jet.grad_norm < CRIT_GRAD) & (np.linalg.norm(dom.min_image(x - x0), axis=1) < 2 * h * dom.dim)
    if not dom.is_torus:
        ok &= np.all((x > np.asarray(dom.lo)) & (x < np.asarray(dom.hi)), axis=1)
    x = dom.wrap(x[ok])
    if len(x) == 0:
        return []
    box = dom.lengths if dom.is_torus else None
    if box is not None:
        x = np.mod(x - np.asarray(dom.lo), box)  # cKDTree periodic box is [0, L)
        x[x >= box] = 0.0
    tree = cKDTree(x, boxsize=box)
    # single-linkage groups within DEDUPE
    parent = list(range(len(x)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in sorted(tree.query_pairs(DEDUPE)):
        parent[find(i)] = find(j)
    reps = sorted({find(i) for i in range(len(x))})
    pts = x[reps]
    if len(pts) > 1 and cKDTree(pts, boxsize=box).query_pairs(CLUSTER):
        raise MorseError("clustered critical points could not be separated")
    if box is not None:
        pts = pts + np.asarray(dom.lo)
    jet = eval_jet(expr, pts, order=2)
    eig = np.linalg.eigvalsh(jet.hess_matrix)
    out = []
    for p, ev, v in zip(pts, eig, jet.value):
        if np.min(np.abs(ev)) <= CRIT_EIG:
            raise MorseError(f"degenerate critical point at {np.array2string(p, precision=6)}")
        out.append(CriticalPoint(p, int(np.count_nonzero(ev < 0)), float(v)))
    out.sort(key=lambda c: (c.value, tuple(c.location)))
    return out


def morse_euler(expr: FieldExpr, dom: Domain, a: float, res: int = SCAN_RES) -> int:
    """Euler characteristic of {f <= a} as the alternating count of critical points below a."""
    crit = critical_points(expr, dom, res)
    near = [c for c in crit if abs(c.value - a) <= LEVEL_GAP]
    if near:
        raise MorseError(f"level {a} is within {LEVEL_GAP} of a critical value {near[0].value}")
    return sum((-1) ** c.index for c in crit if c.value < a)


@dataclass(frozen=True)
class MeasureEstimate:
    value: float
    stderr: float
    samples: int


def brute_force_measure(expr: FieldExpr, dom: Domain, a: float, samples: int = 1 << 20,
                        seed: int = 0, chunk: int = 1 << 16) -> MeasureEstimate:
    """Scrambled-Sobol estimate of vol{f <= a} with its binomial error bar."""
    if samples < 10_000:
        raise ValueError("brute_force_measure needs at least 1e4 samples")
    if expr.dim != dom.dim:
        raise ValueError("field and domain dimensions differ")
    sampler = qmc.Sobol(d=dom.dim, scramble=True, seed=seed)
    lo, L = np.asarray(dom.lo), dom.lengths
    hits = 0
    left = samples
    while left > 0:
        m = min(chunk, left)
        with warnings.catch_warnings():
            # balance warning for non power-of-two counts; the estimate stays valid
            warnings.simplefilter("ignore", UserWarning)
            u = sampler.random(m)
        hits += int(np.count_nonzero(evaluate(expr, lo + u * L) <= a))
        left -= m
    p = hits / samples
    meas = dom.measure
    return MeasureEstimate(meas * p, meas * math.sqrt(p * (1 - p) / samples), samples)
