import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curvatura.field import parse
from curvatura.geometry import Domain
from curvatura.oracles import (
    MorseError,
    ball_intrinsic_volume,
    brute_force_measure,
    critical_points,
    morse_euler,
    unit_ball_volume,
)

T2 = Domain.torus([1, 1])
COS2 = parse("cos(2*pi*x)+cos(2*pi*y)", 2)


def test_ball_examples():
    assert ball_intrinsic_volume(2, 1.0, 2) == pytest.approx(math.pi)
    assert ball_intrinsic_volume(2, 1.0, 1) == pytest.approx(math.pi)
    assert ball_intrinsic_volume(3, 1.0, 1) == pytest.approx(4.0)
    assert ball_intrinsic_volume(3, 1.0, 2) == pytest.approx(2 * math.pi)
    for n in range(1, 6):
        assert ball_intrinsic_volume(n, 1.7, 0) == pytest.approx(1.0)


@pytest.mark.parametrize("n", range(1, 9))
def test_ball_volume(n):
    r = 1.3
    assert ball_intrinsic_volume(n, r, n) == pytest.approx(unit_ball_volume(n) * r ** n, rel=1e-14)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 6), st.floats(0.1, 10), st.floats(0.1, 10), st.data())
def test_ball_homogeneity(n, r, lam, data):
    j = data.draw(st.integers(0, n))
    ref = lam ** j * ball_intrinsic_volume(n, r, j)
    assert ball_intrinsic_volume(n, lam * r, j) == pytest.approx(ref, rel=1e-13)


def test_critical_points_cos():
    pts = critical_points(COS2, T2)
    assert len(pts) == 4
    assert sorted(p.index for p in pts) == [0, 1, 1, 2]
    assert sorted(round(p.value, 9) for p in pts) == [-2.0, 0.0, 0.0, 2.0]


@pytest.mark.parametrize("a,chi", [(-1.0, 1), (1.0, -1), (-2.5, 0), (2.5, 0)])
def test_morse_euler(a, chi):
    assert morse_euler(COS2, T2, a) == chi


def test_morse_disk_analog():
    # a single minimum below the level: contractible sublevel set
    f = parse("-cos(2*pi*x)-cos(2*pi*y)", 2)
    assert morse_euler(f, T2, -1.5) == 1


def test_morse_locally_constant():
    for lo, hi in ((-2, 0), (0, 2)):
        vals = {morse_euler(COS2, T2, a) for a in np.linspace(lo, hi, 7)[1:-1]}
        assert len(vals) == 1


def test_morse_rejects_critical_level():
    with pytest.raises(MorseError):
        morse_euler(COS2, T2, 0.0)


def test_morse_rejects_degenerate():
    with pytest.raises(MorseError):
        # d/dx ~ sin^3: sign change with a vanishing Hessian entry
        critical_points(parse("-cos(2*pi*x)+cos(2*pi*x)^3/3+cos(2*pi*y)", 2), T2)


def test_brute_force_disk():
    est = brute_force_measure(parse("x^2+y^2-1", 2), Domain.box([-2, -2], [2, 2]), 0.0, 1 << 20)
    assert abs(est.value - math.pi) <= 3 * est.stderr
    assert est.samples == 1 << 20


def test_brute_force_trivial():
    assert brute_force_measure(COS2, T2, -3.0, 1 << 14).value == 0.0
    assert brute_force_measure(COS2, Domain.torus([2, 3]), 3.0, 1 << 14).value == pytest.approx(6.0)


def test_brute_force_seeded():
    f = parse("x^2+y^2-1", 2)
    box = Domain.box([-2, -2], [2, 2])
    a = brute_force_measure(f, box, 0.0, 1 << 14, seed=3).value
    assert brute_force_measure(f, box, 0.0, 1 << 14, seed=3).value == a
    assert brute_force_measure(f, box, 0.0, 1 << 14, seed=4).value != a


def test_brute_force_min_samples():
    with pytest.raises(ValueError):
        brute_force_measure(COS2, T2, 0.0, 100)
