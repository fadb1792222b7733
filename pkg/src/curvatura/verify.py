"""The acceptance suite, shared by ``curvatura verify`` and the test suite."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import lkforms
from .engine import (
    ComputeRequest,
    compute_intrinsic_volumes,
    continuity_probe,
    nodal_volume,
    ratio_spread,
    zero_set_intrinsic_volumes,
)
from .field import eval_jet3, finite_diff_jet3, parse
from .geometry import Domain, extract_level_set
from .oracles import ball_intrinsic_volume, morse_euler

DISK = "x^2+y^2-1"
BALL = "x^2+y^2+z^2-1"
MORSE = "cos(2*pi*x)+cos(2*pi*y)"
SINE = "sin(2*pi*x)"
NODAL = "cos(2*pi*x)+cos(2*pi*y)+0.5"
PERTURB = "sin(2*pi*x)*cos(4*pi*y)+0.3*cos(2*pi*y)"

BOX2 = Domain.box([-2, -2], [2, 2])
BOX3 = Domain.box([-2, -2, -2], [2, 2, 2])
T2 = Domain.torus([1, 1])

# five evenly spaced interior levels of each regular interval (-2, 0) and (0, 2)
MORSE_LEVELS = {s: tuple(s * (2 - j / 3) for j in range(1, 6)) for s in (-1, 1)}


@dataclass(frozen=True)
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.number:2d} {self.name}: {self.detail} ({self.seconds:.1f} s)"


def rel_close(value, target, rtol) -> bool:
    return abs(value - target) <= rtol * abs(target)


def method_agree(u, v) -> bool:
    """1% relative, or 0.02 absolute when |value| < 1."""
    if min(abs(u), abs(v)) < 1.0:
        return abs(u - v) <= 0.02
    return abs(u - v) <= 0.01 * max(abs(u), abs(v))


class _Checks:
    def __init__(self):
        self.items = []

    def __call__(self, ok, label):
        self.items.append((bool(ok), label))

    @property
    def ok(self):
        return all(ok for ok, _ in self.items)

    def summary(self):
        bad = [label for ok, label in self.items if not ok]
        if bad:
            return "failed: " + "; ".join(bad)
        return "; ".join(label for _, label in self.items[:6]) + (" ..." if len(self.items) > 6 else "")


# cached reports so criterion 5 reuses 1-3
_CACHE: dict = {}


def _report(key, expr, dom, a, ks, method, res):
    ck = (key, a, ks, method, res)
    if ck not in _CACHE:
        t = time.perf_counter()
        rep = compute_intrinsic_volumes(ComputeRequest(parse(expr, dom.dim), dom, a, ks, method, res, threads=1))
        _CACHE[ck] = (rep, time.perf_counter() - t)
    return _CACHE[ck]


def _by_method(rep, k, method):
    return rep.value(k, method)


def criterion_1():
    rep, secs = _report("disk", DISK, BOX2, 0.0, (0, 1, 2), "both", 1024)
    c = _Checks()
    c(rel_close(rep.value(0), math.pi, 0.01), f"L2={rep.value(0):.5f}")
    for m in ("volume", "boundary"):
        c(rel_close(_by_method(rep, 1, m), math.pi, 0.01), f"L1[{m}]={_by_method(rep, 1, m):.5f}")
        c(abs(_by_method(rep, 2, m) - 1.0) <= 0.02, f"L0[{m}]={_by_method(rep, 2, m):.5f}")
    c(secs <= 60.0, f"{secs:.1f}s<=60s")
    return c


def criterion_2():
    rep, secs = _report("ball", BALL, BOX3, 0.0, (0, 1, 2, 3), "both", 160)
    c = _Checks()
    targets = {0: 4 * math.pi / 3, 1: 2 * math.pi, 2: 4.0}
    for k, tgt in targets.items():
        assert rel_close(tgt, ball_intrinsic_volume(3, 1.0, 3 - k), 1e-14)
        for m in (("indicator",) if k == 0 else ("volume", "boundary")):
            v = _by_method(rep, k, m)
            c(rel_close(v, tgt, 0.02), f"L{3 - k}[{m}]={v:.5f}")
    for m in ("volume", "boundary"):
        v = _by_method(rep, 3, m)
        c(abs(v - 1.0) <= 0.05, f"L0[{m}]={v:.5f}")
    c(secs <= 300.0, f"{secs:.1f}s<=300s")
    return c


def criterion_3():
    c = _Checks()
    f = parse(MORSE, 2)
    for a, want in ((-1.0, 1), (1.0, -1)):
        oracle = morse_euler(f, T2, a)
        c(oracle == want, f"morse_euler({a})={oracle}")
        rep, _ = _report("morse", MORSE, T2, a, (2,), "volume", 256)
        c(abs(rep.value(2) - want) <= 0.05, f"chi({a})={rep.value(2):.4f}")
    for levels in MORSE_LEVELS.values():
        vals = []
        for a in levels:
            rep, _ = _report("morse", MORSE, T2, a, (2,), "volume", 256)
            vals.append(rep.value(2))
        want = morse_euler(f, T2, levels[0])
        c(all(abs(v - want) <= 0.05 for v in vals) and max(vals) - min(vals) <= 0.05,
          f"chi on {levels[0]}..{levels[-1]} in [{min(vals):.4f}, {max(vals):.4f}]")
    return c


def criterion_4():
    c = _Checks()
    sine = nodal_volume(parse(SINE, 2), T2, "all", 512)
    for name, v in sine.items():
        c(rel_close(v, 2.0, 0.01), f"sine {name}={v:.5f}")
    f = parse(NODAL, 2)
    vals = nodal_volume(f, T2, "all", 512)
    names = list(vals)
    worst = max(abs(vals[p] - vals[q]) / max(abs(vals[p]), abs(vals[q]))
                for i, p in enumerate(names) for q in names[i + 1:])
    c(worst <= 1e-2, f"pairwise rel spread {worst:.2e}")
    length = extract_level_set(f, T2, 0.0, 512).total
    for name, v in vals.items():
        c(rel_close(v, length, 0.01), f"{name}={v:.5f} vs mesh {length:.5f}")
    return c


def criterion_5():
    c = _Checks()
    reps = [_report("disk", DISK, BOX2, 0.0, (0, 1, 2), "both", 1024)[0],
            _report("ball", BALL, BOX3, 0.0, (0, 1, 2, 3), "both", 160)[0]]
    for a in (-1.0, 1.0):
        reps.append(_report("morse-both", MORSE, T2, a, (0, 1, 2), "both", 256)[0])
    for rep in reps:
        for r in rep.results:
            if r.method != "volume":
                continue
            b = rep.value(r.k, "boundary")
            c(method_agree(r.value, b), f"{rep.field}@{rep.level} k={r.k}: {r.value:.5f} vs {b:.5f}")
    return c


def criterion_6():
    c = _Checks()
    for text in (SINE, NODAL):
        f = parse(text, 2)
        z = zero_set_intrinsic_volumes(f, T2, 1, 512)
        v = nodal_volume(f, T2, "algebraic", 512)
        c(rel_close(z, v, 1e-2), f"{text}: additivity {z:.5f} vs nodal {v:.5f}")
    return c


def _random_sym(rng, n):
    a = rng.normal(size=(n, n))
    return 0.5 * (a + a.T)


def criterion_7(seed: int = 7):
    c = _Checks()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 7))
        h, v = _random_sym(rng, n), rng.normal(size=n)
        p, q = lkforms.p_polynomial(h, v, 2), lkforms.p2_closed_form(h, v)
        worst = max(worst, abs(p - q) / max(1.0, abs(q)))
    c(worst <= 1e-12, f"p_polynomial vs P2 max err {worst:.1e}")
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(2, 7))
        k = int(rng.integers(1, n + 1))
        h, v = _random_sym(rng, n), rng.normal(size=n)
        q, _ = np.linalg.qr(rng.normal(size=(n, n)))
        base = lkforms.restricted_trace_wedge(h, v, k)
        rot = lkforms.restricted_trace_wedge(q @ h @ q.T, q @ v, k)
        scl = lkforms.restricted_trace_wedge(h, float(rng.uniform(0.1, 10)) * v, k)
        scale = max(1.0, abs(base))
        worst = max(worst, abs(rot - base) / scale, abs(scl - base) / scale)
    c(worst <= 1e-10, f"orthogonal/scale invariance max err {worst:.1e}")
    worst, done = 0.0, 0
    while done < 200:
        n = int(rng.integers(2, 7))
        h, v = _random_sym(rng, n), rng.normal(size=n)
        try:
            val = lkforms.pn_nondegenerate_check(h, v, rtol=1e-8)
        except lkforms.NotApplicable:
            continue
        except ArithmeticError as exc:
            c(False, f"pn check mismatch: {exc}")
            return c
        ref = lkforms.p_polynomial(h, v, n)
        worst = max(worst, abs(val - ref) / max(1.0, abs(ref)))
        done += 1
    c(worst <= 1e-8, f"pn_nondegenerate_check on 200 inputs max err {worst:.1e}")
    return c


# ---------------------------------------------------------------- random fields

_UNARY = (
    "sin({})", "cos({})", "tanh({})", "atan({})", "exp(0.5*{})", "sqrt(1+({})^2)",
)


def _leaf(rng, dim):
    if rng.random() < 0.7:
        return "xyz"[int(rng.integers(dim))] if dim <= 3 else f"x{int(rng.integers(1, dim + 1))}"
    return f"{rng.uniform(-2, 2):.3f}"


def random_expression(rng, dim: int, depth: int = 4) -> str:
    """A random smooth field string using every grammar feature, total on R^dim."""
    if depth == 0 or (depth < 3 and rng.random() < 0.25):
        return _leaf(rng, dim)
    r = rng.random()
    sub = lambda: random_expression(rng, dim, depth - 1)  # noqa: E731
    if r < 0.3:
        return _UNARY[int(rng.integers(len(_UNARY)))].format(sub())
    if r < 0.75:
        return f"({sub()}){'+-*'[int(rng.integers(3))]}({sub()})"
    if r < 0.9:
        return f"({sub()})/(1.5+cos({sub()}))"
    return f"({sub()})^{int(rng.integers(2, 4))}"


def random_basic_expression(rng, dim: int, depth: int = 3) -> str:
    """Random field over {+, *, sin, cos, exp} with coefficients in [-2, 2]."""
    if depth == 0 or (depth < 3 and rng.random() < 0.25):
        return _leaf(rng, dim)
    r = rng.random()
    sub = lambda: random_basic_expression(rng, dim, depth - 1)  # noqa: E731
    if r < 0.4:
        return f"{('sin', 'cos', 'exp')[int(rng.integers(3))]}({sub()})"
    return f"({sub()}){'+*'[int(rng.integers(2))]}({sub()})"


def jet_rel_error(ad, fd, floor: float = 1e-8) -> float:
    """Max componentwise |AD - FD| / |AD| over components with |AD| > floor."""
    a = np.concatenate([np.atleast_1d(ad.value), ad.grad, ad.hess, ad.third])
    b = np.concatenate([np.atleast_1d(fd.value), fd.grad, fd.hess, fd.third])
    big = np.abs(a) > floor
    if not big.any():
        return 0.0
    return float(np.max(np.abs(a[big] - b[big]) / np.abs(a[big])))


def criterion_8(seed: int = 8, count: int = 100):
    c = _Checks()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        dim = int(rng.integers(1, 4))
        expr = parse(random_basic_expression(rng, dim), dim)
        x = rng.uniform(-1, 1, size=dim)
        worst = max(worst, jet_rel_error(eval_jet3(expr, x), finite_diff_jet3(expr, x, h=1e-3)))
    c(worst <= 1e-5, f"{count} expressions x points, max componentwise rel err {worst:.1e}")
    return c


def criterion_9():
    c = _Checks()
    lam = 1.5
    base, _ = _report("disk", DISK, BOX2, 0.0, (0, 1, 2), "both", 1024)
    big, _ = _report("disk-big", "x^2+y^2-2.25", BOX2, 0.0, (0, 1, 2), "both", 1024)
    for k in (0, 1, 2):
        for m in (("indicator",) if k == 0 else ("volume", "boundary")):
            ratio = big.value(k, m) / base.value(k, m)
            c(rel_close(ratio, lam ** (2 - k), 0.01), f"k={k}[{m}] ratio {ratio:.4f}")
    left = "(x+1)^2+y^2-0.25"
    right = "(x-1)^2+y^2-0.25"
    both = f"(({left})*({right}))"
    r_left, _ = _report("disk-l", left, BOX2, 0.0, (0, 1, 2), "both", 1024)
    r_right, _ = _report("disk-r", right, BOX2, 0.0, (0, 1, 2), "both", 1024)
    r_both, _ = _report("disks", both, BOX2, 0.0, (0, 1, 2), "both", 1024)
    for k in (0, 1, 2):
        for m in (("indicator",) if k == 0 else ("volume", "boundary")):
            s = r_left.value(k, m) + r_right.value(k, m)
            v = r_both.value(k, m)
            c(rel_close(v, s, 0.01), f"two disks k={k}[{m}] {v:.4f} vs {s:.4f}")
    return c


def criterion_10(started: float | None = None):
    c = _Checks()
    f, g = parse(MORSE, 2), parse(PERTURB, 2)
    rows = continuity_probe(f, g, T2, 0.5, (0, 1, 2), (1e-2, 5e-3, 2.5e-3), 256)
    for k in (0, 1):
        spread = ratio_spread(rows, k)
        c(spread < 4.0, f"k={k} ratio spread x{spread:.2f}")
    chi = [r.euler_delta for r in rows if r.k == 2]
    c(all(d == 0 for d in chi), f"chi deltas {chi}")
    if started is not None:
        total = time.perf_counter() - started
        c(total <= 900.0, f"suite {total:.0f}s<=900s")
    return c


CRITERIA = {
    1: ("disk intrinsic volumes", criterion_1),
    2: ("ball intrinsic volumes", criterion_2),
    3: ("torus Euler characteristic", criterion_3),
    4: ("nodal volumes", criterion_4),
    5: ("volume vs boundary formula", criterion_5),
    6: ("zero-set additivity", criterion_6),
    7: ("lemma identities", criterion_7),
    8: ("jet AD vs finite differences", criterion_8),
    9: ("scaling and additivity", criterion_9),
    10: ("continuity probe", criterion_10),
}


def run_criterion(number: int, started: float | None = None) -> CriterionResult:
    name, fn = CRITERIA[number]
    t = time.perf_counter()
    try:
        checks = fn(started) if number == 10 else fn()
        passed, detail = checks.ok, checks.summary()
    except Exception as exc:  # a crash is a failure with its message
        passed, detail = False, f"error: {type(exc).__name__}: {exc}"
    return CriterionResult(number, name, passed, detail, time.perf_counter() - t)


def run_all(numbers=None, out=None) -> list:
    started = time.perf_counter()
    results = []
    for n in numbers or sorted(CRITERIA):
        res = run_criterion(n, started)
        results.append(res)
        if out is not None:
            print(res.line(), file=out, flush=True)
    return results
