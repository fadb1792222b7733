"""High-level computations: intrinsic volumes, nodal volumes, sweeps, probes."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .field.jet import evaluate
from .field.parser import FieldExpr
from .geometry import (
    Domain,
    NonRegularLevelError,
    extract_level_set,
    regularity_margin,
    richardson_estimate,
    surface_integral,
    volume_integral,
)
from .integrand import NODAL_VARIANTS, LevelContext, boundary_density, divergence_integrand
from .lkforms import lk_coefficient

METHODS = ("volume", "boundary", "both")
VARIANTS = tuple(NODAL_VARIANTS) + ("all",)
DEFAULT_RES = {1: 4096, 2: 256, 3: 96, 4: 32, 5: 16, 6: 8}
GATE_ETA = 1e-6
NEAR_CRITICAL = 1e-3
SEAM_TOL = 1e-8


class RegularityError(NonRegularLevelError):
    """The regularity gate rejected the (field, level) pair."""


def default_resolution(dim: int) -> int:
    return DEFAULT_RES[dim]


@dataclass(frozen=True)
class ComputeRequest:
    expr: FieldExpr
    domain: Domain
    level: float
    degrees: tuple = (0,)
    method: str = "volume"
    resolution: int | None = None
    richardson: bool = False
    threads: int | None = None

    def __post_init__(self):
        n = self.domain.dim
        if self.expr.dim != n:
            raise ValueError(f"field has dimension {self.expr.dim} but domain has {n}")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if not self.degrees:
            raise ValueError("at least one degree is required")
        for k in self.degrees:
            if int(k) != k or not 0 <= k <= n:
                raise ValueError(f"degree k must lie in [0, {n}], got {k}")
        if self.method != "volume" and n > 3:
            raise ValueError("the boundary formula needs n <= 3")
        object.__setattr__(self, "degrees", tuple(int(k) for k in self.degrees))

    @property
    def res(self) -> int:
        return self.resolution or default_resolution(self.domain.dim)


@dataclass(frozen=True)
class DegreeResult:
    k: int
    value: float
    method: str
    discrepancy: float | None = None
    integrality_defect: float | None = None
    richardson: float | None = None

    def as_dict(self) -> dict:
        return {key: val for key, val in asdict(self).items() if val is not None}


@dataclass(frozen=True)
class VolumeReport:
    field: str
    domain: dict
    level: float
    resolution: int
    results: tuple
    warnings: tuple = ()

    def value(self, k: int, method: str | None = None) -> float:
        for r in self.results:
            if r.k == k and (method is None or r.method == method or r.method == "indicator"):
                return r.value
        raise KeyError(f"no result for k={k} method={method}")

    def as_dict(self) -> dict:
        return {
            "field": self.field,
            "domain": self.domain,
            "level": self.level,
            "resolution": self.resolution,
            "results": [r.as_dict() for r in self.results],
            "warnings": list(self.warnings),
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2)

    def csv_rows(self):
        warn = "; ".join(self.warnings)
        return [(self.level, r.k, r.value, r.method, self.resolution, warn) for r in self.results]


# ---------------------------------------------------------------- gates

def seam_warnings(expr: FieldExpr, dom: Domain, samples: int = 64) -> list:
    """Warn when f does not match across opposite torus faces."""
    if not dom.is_torus:
        return []
    n = dom.dim
    rng = np.random.default_rng(12345)  # fixed probe points
    pts = np.asarray(dom.lo) + rng.random((samples, n)) * dom.lengths
    out = []
    for d in range(n):
        lo = pts.copy()
        lo[:, d] = dom.lo[d]
        hi = lo.copy()
        hi[:, d] = dom.hi[d]
        f0, f1 = evaluate(expr, lo), evaluate(expr, hi)
        gap = float(np.max(np.abs(f0 - f1)))
        scale = 1.0 + float(np.max(np.abs(f0)))
        if gap > SEAM_TOL * scale:
            out.append(f"field is not periodic across the torus seam on axis {d} (jump {gap:.3g})")
    return out


def regularity_gate(expr: FieldExpr, dom: Domain, a: float, res, threads=None) -> list:
    """Grid-sampled regularity check; returns warnings or raises RegularityError."""
    eta_min, gmax = regularity_margin(expr, dom, a, res, threads)
    if gmax == 0.0:
        raise RegularityError("no regular level exists: the field has zero gradient everywhere")
    if eta_min < GATE_ETA:
        raise RegularityError(
            f"level {a} fails the regularity gate: min sqrt((f-a)^2 + |grad f|^2) = {eta_min:.3g}"
        )
    if eta_min < NEAR_CRITICAL:
        return [f"level {a} is close to a critical value (grid margin {eta_min:.3g})"]
    return []


# ---------------------------------------------------------------- intrinsic volumes

def _volume_formula(expr, dom, a, k, res, threads):
    if k == 0:
        return volume_integral(expr, dom, a, res, None, threads=threads)
    ctx = LevelContext(a, k)
    raw = volume_integral(expr, dom, a, res, lambda j: divergence_integrand(j, ctx), threads=threads)
    return lk_coefficient(k) * raw


def _boundary_values(expr, dom, a, ks, res):
    mesh = extract_level_set(expr, dom, a, res)
    return {k: lk_coefficient(k) * surface_integral(mesh, expr, lambda j, k=k: boundary_density(j, k))
            for k in ks}


def _integrality(k, n, value):
    return abs(value - round(value)) if k == n else None


def _discrepancy(u, v):
    return abs(u - v)


def compute_intrinsic_volumes(req: ComputeRequest) -> VolumeReport:
    """L_{n-k}(M^a) for each requested degree k."""
    expr, dom, a, res = req.expr, req.domain, float(req.level), req.res
    n = dom.dim
    warnings = seam_warnings(expr, dom)
    warnings += regularity_gate(expr, dom, a, res, req.threads)

    ks = [k for k in req.degrees if k >= 1]
    bnd = {}
    if ks and req.method in ("boundary", "both"):
        bnd = _boundary_values(expr, dom, a, ks, res)
    results = []
    for k in req.degrees:
        rich = None
        if k == 0 or req.method in ("volume", "both"):
            val = _volume_formula(expr, dom, a, k, res, req.threads)
            if req.richardson:
                coarse = _volume_formula(expr, dom, a, k, res // 2, req.threads)
                rich = richardson_estimate([coarse, val], [res // 2, res])
        if k == 0:
            results.append(DegreeResult(0, val, "indicator", None, _integrality(0, n, val), rich))
            continue
        if req.method == "volume":
            results.append(DegreeResult(k, val, "volume", None, _integrality(k, n, val), rich))
        elif req.method == "boundary":
            b = bnd[k]
            results.append(DegreeResult(k, b, "boundary", None, _integrality(k, n, b)))
        else:
            b = bnd[k]
            d = _discrepancy(val, b)
            results.append(DegreeResult(k, val, "volume", d, _integrality(k, n, val), rich))
            results.append(DegreeResult(k, b, "boundary", d, _integrality(k, n, b)))
    return VolumeReport(expr.render(), dom.describe(), a, res, tuple(results), tuple(warnings))


def intrinsic_volume(expr, dom, a, k, res=None, method="volume", threads=None) -> float:
    """Single-number convenience wrapper."""
    req = ComputeRequest(expr, dom, a, (k,), "volume" if k == 0 else method, res, threads=threads)
    return compute_intrinsic_volumes(req).results[0].value


# ---------------------------------------------------------------- nodal sets

def nodal_volume(expr: FieldExpr, dom: Domain, variant: str = "all", res=None, threads=None):
    """vol(Z_f) on a torus by one of the four density formulas, or all of them."""
    if not dom.is_torus:
        raise ValueError("nodal volumes are defined on tori")
    if expr.dim != dom.dim:
        raise ValueError(f"field has dimension {expr.dim} but domain has {dom.dim}")
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    res = res or default_resolution(dom.dim)
    regularity_gate(expr, dom, 0.0, res, threads)
    names = list(NODAL_VARIANTS) if variant == "all" else [variant]
    out = {}
    for name in names:
        density, factor = NODAL_VARIANTS[name]
        out[name] = factor * volume_integral(expr, dom, None, res, density, order=2, threads=threads)
    return out if variant == "all" else out[variant]


def zero_set_intrinsic_volumes(expr: FieldExpr, dom: Domain, k: int, res=None,
                               method: str = "volume", threads=None) -> float:
    """L_{n-k}(Z_f) = L_{n-k}(M^0_f) + L_{n-k}(M^0_{-f}) - L_{n-k}(M), k odd."""
    if not dom.is_torus:
        raise ValueError("zero-set intrinsic volumes are computed on tori")
    n = dom.dim
    if not 1 <= k <= n:
        raise ValueError(f"degree k must lie in [1, {n}], got {k}")
    if k % 2 == 0:
        raise ValueError(
            f"k = {k} is even: L_(n-k)(Z_f) vanishes identically for even k, "
            "so it is not computed by additivity"
        )
    plus = intrinsic_volume(expr, dom, 0.0, k, res, method, threads)
    minus = intrinsic_volume(expr.negated(), dom, 0.0, k, res, method, threads)
    whole = 0.0  # boundaryless flat torus: L_{n-k}(M) = 0 for k >= 1
    return plus + minus - whole


# ---------------------------------------------------------------- sweeps and probes

@dataclass(frozen=True)
class SweepRow:
    a: float
    k: int | None
    value: float | None
    method: str
    resolution: int
    warning: str = ""


def level_sweep(expr: FieldExpr, dom: Domain, levels, ks, res=None, method="volume",
                threads=None) -> list:
    """Rows (a, k, value); failing levels yield a single warning row."""
    res = res or default_resolution(dom.dim)
    rows = []
    for a in levels:
        try:
            rep = compute_intrinsic_volumes(ComputeRequest(expr, dom, float(a), tuple(ks), method, res,
                                                           threads=threads))
        except (NonRegularLevelError, ValueError) as exc:
            rows.append(SweepRow(float(a), None, None, method, res, f"skipped: {exc}"))
            continue
        warn = "; ".join(rep.warnings)
        for r in rep.results:
            rows.append(SweepRow(float(a), r.k, r.value, r.method, res, warn))
    return rows


@dataclass(frozen=True)
class ProbeRow:
    eps: float
    k: int
    delta: float | None
    ratio: float | None
    skipped: str = ""
    euler_delta: int | None = None  # k = n: change of the rounded (integer) value


def continuity_probe(expr: FieldExpr, perturbation: FieldExpr, dom: Domain, a: float, ks, eps_list,
                     res=None, method="volume", threads=None) -> list:
    """|L(f + eps g) - L(f)| and its ratio to eps, per eps and degree.

    For k = n the Euler characteristic is an integer, so its change is also
    reported between rounded values (``euler_delta``).
    """
    res = res or default_resolution(dom.dim)
    n = dom.dim

    def values(e):
        req = ComputeRequest(e, dom, a, tuple(ks), method, res, threads=threads)
        rep = compute_intrinsic_volumes(req)
        return {r.k: r.value for r in rep.results if r.method in (method, "indicator")}

    base = values(expr)
    rows = []
    for eps in eps_list:
        eps = float(eps)
        try:
            cur = base if eps == 0.0 else values(expr + perturbation.scaled(eps))
        except (NonRegularLevelError, ValueError) as exc:
            rows.extend(ProbeRow(eps, k, None, None, f"skipped: {exc}") for k in ks)
            continue
        for k in ks:
            d = abs(cur[k] - base[k])
            chi = abs(round(cur[k]) - round(base[k])) if k == n else None
            rows.append(ProbeRow(eps, k, d, d / eps if eps != 0.0 else None, "", chi))
    return rows


def ratio_spread(rows, k) -> float:
    """max/min of |dL|/eps over the non-skipped, nonzero rows of degree k."""
    r = [row.ratio for row in rows if row.k == k and row.ratio is not None and row.ratio > 0]
    if not r:
        return math.nan
    return max(r) / min(r)
