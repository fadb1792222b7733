import math

import numpy as np
import pytest

from curvatura.field import Jet3, eval_jet, eval_jet3, parse
from curvatura.integrand import (
    IrregularPointError,
    LevelContext,
    boundary_density,
    divergence_integrand,
    eta,
    nodal_density,
    nodal_density_algebraic,
    nodal_density_arctan,
    nodal_density_lipschitz,
    nodal_density_tanh,
)
from curvatura.lkforms import p_polynomial


def _jet(value, grad, hess, third=None):
    return Jet3.from_tensors(value, grad, hess, third)


@pytest.mark.parametrize("t,g,ell,expected", [(0, 1, 5, 1.0), (3, 0, 1, 3.0), (1, 1, 2, math.sqrt(2))])
def test_eta(t, g, ell, expected):
    assert eta(t, g, ell) == pytest.approx(expected)


def test_eta_rejects_ell():
    with pytest.raises(ValueError):
        eta(1.0, 1.0, 0)


def test_level_context():
    assert LevelContext(0.0, 3).ell == 7
    with pytest.raises(ValueError):
        LevelContext(0.0, 0)


def test_boundary_k1(backend, rng):
    jets = eval_jet(parse("sin(x1)*x2+x3^2+x1", 3), rng.uniform(-1, 1, size=(50, 3)))
    np.testing.assert_array_equal(boundary_density(jets, 1), 1.0)


def test_boundary_circle(backend):
    j = eval_jet3(parse("x^2+y^2-1", 2), [1.0, 0.0])
    assert boundary_density(j, 2) == pytest.approx(1.0)


@pytest.mark.parametrize("r", [0.5, 1.0, 2.0])
def test_boundary_sphere(backend, r):
    j = eval_jet3(parse(f"x^2+y^2+z^2-{r * r}", 3), [0.0, r, 0.0])
    assert boundary_density(j, 3) == pytest.approx(1 / r ** 2)
    assert boundary_density(j, 2) == pytest.approx(2 / r)


def test_boundary_zero_gradient(backend):
    with pytest.raises(IrregularPointError):
        boundary_density(_jet(0.0, [0.0, 0.0], np.eye(2)), 2)


def test_boundary_scale_invariance(backend, rng):
    for _ in range(50):
        g = rng.normal(size=3)
        h = rng.normal(size=(3, 3))
        h = h + h.T
        c = rng.uniform(0.01, 100)
        for k in (1, 2, 3):
            a = boundary_density(_jet(0.0, g, h), k)
            b = boundary_density(_jet(0.0, c * g, c * h), k)
            assert abs(a - b) <= 1e-12 * max(1.0, abs(a))


def test_divergence_1d_example(backend):
    e = parse("x^2-1", 1)
    assert divergence_integrand(eval_jet3(e, [0.0]), LevelContext(0.0, 1)) == pytest.approx(2.0)
    for x in (-1.5, -0.3, 0.7, 2.0):
        ref = 2 * (1 - x * x) / (1 + x * x) ** 2
        assert divergence_integrand(eval_jet3(e, [x]), LevelContext(0.0, 1)) == pytest.approx(ref)


def test_divergence_1d_total():
    # 1/2 of the integral over [-1, 1] is chi([-1, 1]) = 1
    x = (np.arange(20000) + 0.5) / 10000 - 1
    vals = divergence_integrand(eval_jet(parse("x^2-1", 1), x[:, None]), LevelContext(0.0, 1))
    assert 0.5 * vals.sum() * 1e-4 == pytest.approx(1.0, abs=1e-8)


def test_divergence_critical_off_level(backend, rng):
    for k in (2, 3):
        h = rng.normal(size=(3, 3))
        j = _jet(0.7, [0.0, 0.0, 0.0], h + h.T, rng.normal(size=(3, 3, 3)))
        assert divergence_integrand(j, LevelContext(0.0, k)) == 0.0


def test_divergence_irregular_point(backend):
    j = _jet(0.0, [0.0, 0.0], np.eye(2))
    with pytest.raises(IrregularPointError):
        divergence_integrand(j, LevelContext(0.0, 1))


def test_divergence_small_gradient(backend, rng):
    for k in (2, 3):
        for g in (1e-6, 1e-9):
            for _ in range(20):
                h = rng.normal(size=(3, 3))
                t = rng.normal(size=(3, 3, 3))
                t = sum(t.transpose(p) for p in [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)])
                v = rng.normal(size=3)
                j = _jet(rng.choice([-1, 1]) * rng.uniform(0.1, 2), g * v / np.linalg.norm(v), h + h.T, t)
                assert abs(divergence_integrand(j, LevelContext(0.0, k))) <= 1e-4


def _trig_field(rng, n):
    terms = []
    for _ in range(3):
        freq = rng.integers(-1, 2, size=n)
        if not freq.any():
            freq[0] = 1
        arg = "+".join(f"{int(c)}*x{i + 1}" for i, c in enumerate(freq))
        terms.append(f"{rng.uniform(-1, 1):.4f}*{rng.choice(['sin', 'cos'])}(2*pi*({arg}))")
    return parse("+".join(terms), n)


def _vector_field(expr, pts, a, k):
    j = eval_jet(expr, pts, order=2)
    g = j.grad
    phi = p_polynomial(j.hess_matrix, g, k) / eta(j.value - a, j.grad_norm, 3 * k - 2)
    return phi[:, None] * g


def _fd_divergence(expr, pts, a, k, h):
    n = pts.shape[1]
    out = np.zeros(len(pts))
    for d in range(n):
        e = np.zeros(n)
        e[d] = h
        out += (_vector_field(expr, pts + e, a, k)[:, d] - _vector_field(expr, pts - e, a, k)[:, d]) / (2 * h)
    return out


def _divergence_errors(rng, n, combine_fd, count=200):
    """Max relative error over ``count`` regular points, per degree k."""
    errs = {k: 0.0 for k in range(1, n + 1)}
    checked = 0
    while checked < count:
        expr = _trig_field(rng, n)
        pts = rng.uniform(0, 1, size=(20, n))
        a = float(rng.uniform(-0.5, 0.5))
        j = eval_jet(expr, pts)
        pts = pts[np.sqrt((j.value - a) ** 2 + j.grad_norm ** 2) > 0.5][: count - checked]
        if not len(pts):
            continue
        for k in errs:
            ad = divergence_integrand(eval_jet(expr, pts), LevelContext(a, k))
            fd = combine_fd(expr, pts, a, k)
            errs[k] = max(errs[k], float(np.max(np.abs(ad - fd) / np.maximum(np.abs(fd), 1e-2))))
        checked += len(pts)
    return errs


@pytest.mark.parametrize("n", [1, 2, 3])
def test_divergence_vs_finite_difference(backend, rng, n):
    # central differences of X = P/eta * grad f at step 1e-4, relative 1e-4
    errs = _divergence_errors(rng, n, lambda e, p, a, k: _fd_divergence(e, p, a, k, 1e-4))
    assert max(errs.values()) <= 1e-4, errs


@pytest.mark.parametrize("n", [1, 2, 3])
def test_divergence_vs_extrapolated_difference(backend, rng, n):
    # same oracle with the O(h^2) truncation removed by one Richardson step
    def fd(e, p, a, k):
        return (4 * _fd_divergence(e, p, a, k, 5e-5) - _fd_divergence(e, p, a, k, 1e-4)) / 3

    errs = _divergence_errors(rng, n, fd)
    assert max(errs.values()) <= 1e-4, errs


def test_nodal_algebraic_examples(backend):
    assert nodal_density_algebraic(_jet(1.0, [0.0, 0.0], 2 * np.eye(2) / 2 * np.array([[1, 0], [0, 1]]))) \
        == pytest.approx(-2.0)
    assert nodal_density_algebraic(_jet(0.0, [1.0, 0.0], np.zeros((2, 2)))) == 0.0
    ref = 1 / (2 * math.sqrt(2))
    assert nodal_density_algebraic(_jet(-1.0, [1.0, 0.0], np.zeros((2, 2)))) == pytest.approx(ref)


def test_nodal_arctan_examples(backend):
    assert nodal_density_arctan(_jet(2.0, [0.0, 0.0], 3 * np.eye(2))) == pytest.approx(-3.0)
    assert nodal_density_arctan(_jet(1e-12, [1.0, 0.0], np.zeros((2, 2)))) == pytest.approx(1.0)


def test_nodal_tanh_examples(backend):
    assert nodal_density_tanh(_jet(2.0, [0.0, 0.0], 3 * np.eye(2))) == pytest.approx(-3.0)
    assert nodal_density_tanh(_jet(1e-12, [1.0, 0.0], np.zeros((2, 2)))) == pytest.approx(0.0, abs=1e-12)
    # |grad f| / f = 1e6: the cosh^-2 term is clamped to exactly 0
    h = np.diag([0.5, -1.5])
    got = nodal_density_tanh(_jet(1e-6, [1.0, 0.0], h))
    assert got == -np.trace(h) + h[0, 0]


def test_nodal_lipschitz_examples(backend):
    assert nodal_density_lipschitz(_jet(1.0, [0.0, 0.0], np.zeros((2, 2)))) == 0.0
    assert nodal_density_lipschitz(_jet(1.0, [0.0, 0.0], np.diag([2.0, 0.0]))) == pytest.approx(-2.0)
    with pytest.raises(IrregularPointError):
        nodal_density_lipschitz(_jet(0.0, [0.0, 0.0], np.eye(2)))


def test_nodal_lipschitz_continuous(backend, rng):
    # no sign function: crossing f = 0 moves the value continuously
    h = rng.normal(size=(2, 2))
    h = h + h.T
    vals = [nodal_density_lipschitz(_jet(t, [0.6, -0.8], h)) for t in (-1e-9, 0.0, 1e-9)]
    assert max(vals) - min(vals) < 1e-6


def test_series_switch_continuity(backend):
    # the Taylor branch and the direct branch meet smoothly near g/|f| = 1e-4
    h = np.array([[1.0, 0.3], [0.3, -2.0]])
    for fn in (nodal_density_arctan, nodal_density_tanh):
        below = fn(_jet(1.0, [0.99e-4, 0.0], h))
        above = fn(_jet(1.0, [1.01e-4, 0.0], h))
        assert below == pytest.approx(above, rel=1e-7)


def test_algebraic_odd_symmetry(backend, rng):
    for _ in range(100):
        g = rng.normal(size=3)
        h = rng.normal(size=(3, 3))
        h = h + h.T
        f = rng.normal()
        a = nodal_density_algebraic(_jet(f, g, h))
        b = nodal_density_algebraic(_jet(-f, -g, -h))
        assert abs(a - b) <= 1e-12 * max(1.0, abs(a))


def test_nodal_dispatch():
    j = _jet(1.0, [0.2, 0.1], np.eye(2))
    assert nodal_density(j, "tanh") == nodal_density_tanh(j)
    with pytest.raises(ValueError):
        nodal_density(j, "bogus")


def test_backends_agree(rng):
    from curvatura import kernels

    if "compiled" not in kernels.BACKENDS:
        pytest.skip("compiled backend not built")
    expr = parse("sin(2*pi*x1)*cos(2*pi*x2)+0.3*cos(2*pi*(x1+x3))+0.1*x2", 3)
    j = eval_jet(expr, rng.uniform(0, 1, size=(2000, 3)))
    outs = {}
    previous = kernels.BACKEND
    try:
        for name in ("compiled", "python"):
            kernels.use_backend(name)
            outs[name] = np.concatenate(
                [divergence_integrand(j, LevelContext(0.05, k)) for k in (1, 2, 3)]
                + [boundary_density(j, k) for k in (1, 2, 3)]
                + [nodal_density(j, v) for v in ("algebraic", "arctan", "tanh", "lipschitz")])
    finally:
        kernels.use_backend(previous)
    np.testing.assert_allclose(outs["compiled"], outs["python"], rtol=1e-10, atol=1e-10)


def test_unknown_backend():
    from curvatura import kernels

    with pytest.raises(ValueError):
        kernels.use_backend("fortran")
