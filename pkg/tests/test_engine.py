import json
import math

import numpy as np
import pytest

from curvatura import engine, lkforms
from curvatura.engine import (
    ComputeRequest,
    RegularityError,
    compute_intrinsic_volumes,
    continuity_probe,
    intrinsic_volume,
    level_sweep,
    nodal_volume,
    ratio_spread,
    zero_set_intrinsic_volumes,
)
from curvatura.field import parse
from curvatura.geometry import Domain, SublevelNotContainedError, extract_level_set, volume_integral

DISK = parse("x^2+y^2-1", 2)
BOX2 = Domain.box([-2, -2], [2, 2])
T1 = Domain.torus([1])
T2 = Domain.torus([1, 1])
COS2 = parse("cos(2*pi*x)+cos(2*pi*y)", 2)
SINE2 = parse("sin(2*pi*x)", 2)


def test_disk_both_methods():
    rep = compute_intrinsic_volumes(ComputeRequest(DISK, BOX2, 0.0, (0, 1, 2), "both", 1024))
    assert rep.value(0) == pytest.approx(math.pi, rel=1e-2)
    for method in ("volume", "boundary"):
        assert rep.value(1, method) == pytest.approx(math.pi, rel=1e-2)
        assert rep.value(2, method) == pytest.approx(1.0, abs=0.02)
    rows = [r for r in rep.results if r.k == 2]
    assert len(rows) == 2 and all(r.discrepancy is not None for r in rows)
    assert all(r.integrality_defect < 0.02 for r in rows)


def test_morse_field_euler():
    assert intrinsic_volume(COS2, T2, 1.0, 2, 256) == pytest.approx(-1.0, abs=0.05)
    assert intrinsic_volume(COS2, T2, -1.0, 2, 256) == pytest.approx(1.0, abs=0.05)


def test_constant_field_rejected():
    with pytest.raises(RegularityError, match="no regular level"):
        compute_intrinsic_volumes(ComputeRequest(parse("3+0*x", 2), T2, 0.0, (0,)))


def test_critical_level_rejected():
    with pytest.raises(RegularityError):
        intrinsic_volume(COS2, T2, 0.0, 2, 64)


def test_near_critical_warning():
    rep = compute_intrinsic_volumes(ComputeRequest(COS2, T2, 2e-4, (0,), resolution=64))
    assert any("close to a critical value" in w for w in rep.warnings)


def test_box_not_contained():
    with pytest.raises(SublevelNotContainedError):
        intrinsic_volume(DISK, BOX2, 4.5, 1, 64)


@pytest.mark.parametrize("kwargs", [
    dict(degrees=(3,)),
    dict(degrees=()),
    dict(degrees=(1.5,)),
    dict(method="simplex"),
])
def test_request_validation(kwargs):
    with pytest.raises(ValueError):
        ComputeRequest(DISK, BOX2, 0.0, **kwargs)


def test_boundary_needs_low_dimension():
    f = parse("x1^2+x2^2+x3^2+x4^2-1", 4)
    with pytest.raises(ValueError):
        ComputeRequest(f, Domain.box([-2] * 4, [2] * 4), 0.0, (1,), "boundary")
    with pytest.raises(ValueError):
        ComputeRequest(DISK, Domain.torus([1, 1, 1]), 0.0)


def test_default_resolution():
    req = ComputeRequest(DISK, BOX2, 0.0)
    assert req.res == 256
    assert ComputeRequest(parse("x+y+z", 3), Domain.torus([1, 1, 1]), 0.0).res == 96


def test_report_schema():
    rep = compute_intrinsic_volumes(ComputeRequest(DISK, BOX2, 0.0, (0, 2), "both", 128))
    d = json.loads(rep.to_json())
    assert set(d) == {"field", "domain", "level", "resolution", "results", "warnings"}
    assert d["domain"] == {"kind": "box", "bounds": [[-2.0, 2.0], [-2.0, 2.0]]}
    assert [r["method"] for r in d["results"]] == ["indicator", "volume", "boundary"]
    assert "integrality_defect" in d["results"][1] and "discrepancy" in d["results"][1]
    assert "discrepancy" not in d["results"][0]
    assert rep.csv_rows()[0][:2] == (0.0, 0)


def test_richardson_column():
    rep = compute_intrinsic_volumes(ComputeRequest(DISK, BOX2, 0.0, (0,), resolution=512, richardson=True))
    assert rep.results[0].richardson == pytest.approx(math.pi, rel=5e-3)


def test_seam_warning():
    rep = compute_intrinsic_volumes(ComputeRequest(parse("x+cos(2*pi*y)", 2), T2, 0.3, (0,), resolution=32))
    assert any("seam" in w for w in rep.warnings)
    rep = compute_intrinsic_volumes(ComputeRequest(COS2, T2, 0.3, (0,), resolution=32))
    assert not any("seam" in w for w in rep.warnings)


def test_report_thread_invariance():
    req = lambda t: ComputeRequest(COS2, T2, 0.5, (0, 1, 2), "volume", 256, threads=t)
    ref = compute_intrinsic_volumes(req(1)).to_json()
    assert compute_intrinsic_volumes(req(4)).to_json() == ref


# ---------------------------------------------------------------- nodal

def test_nodal_sine_1d():
    vals = nodal_volume(parse("sin(2*pi*x)", 1), T1, "all", 4096)
    for v in vals.values():
        assert v == pytest.approx(2.0, rel=1e-3)


def test_nodal_sine_2d():
    vals = nodal_volume(SINE2, T2, "all", 256)
    assert set(vals) == {"algebraic", "arctan", "tanh", "lipschitz"}
    for v in vals.values():
        assert v == pytest.approx(2.0, rel=1e-2)
    assert nodal_volume(SINE2, T2, "tanh", 256) == vals["tanh"]


def test_nodal_variants_agree_with_mesh():
    f = parse("cos(2*pi*x)+cos(2*pi*y)+0.5", 2)
    vals = list(nodal_volume(f, T2, "all", 512).values())
    assert max(vals) / min(vals) - 1 < 1e-2
    length = extract_level_set(f, T2, 0.0, 512).total
    assert np.mean(vals) == pytest.approx(length, rel=1e-2)


def test_nodal_rejections():
    with pytest.raises(ValueError):
        nodal_volume(DISK, BOX2)
    with pytest.raises(ValueError):
        nodal_volume(SINE2, T2, "median")
    with pytest.raises(RegularityError):
        nodal_volume(COS2, T2, "algebraic", 64)


def test_zero_set_sine():
    assert zero_set_intrinsic_volumes(SINE2, T2, 1, 256) == pytest.approx(2.0, rel=1e-2)


def test_zero_set_matches_nodal():
    f = parse("cos(2*pi*x)+cos(2*pi*y)+0.5", 2)
    z = zero_set_intrinsic_volumes(f, T2, 1, 512)
    assert z == pytest.approx(nodal_volume(f, T2, "algebraic", 512), rel=1e-2)


def test_zero_set_rejections():
    with pytest.raises(ValueError, match="even"):
        zero_set_intrinsic_volumes(SINE2, T2, 2)
    with pytest.raises(ValueError):
        zero_set_intrinsic_volumes(DISK, BOX2, 1)
    with pytest.raises(ValueError):
        zero_set_intrinsic_volumes(SINE2, T2, 3)


# ---------------------------------------------------------------- sweeps and probes

def test_sweep_euler_switch():
    levels = [-1.5, -1.0, -0.5, 0.5, 1.0, 1.5]
    rows = level_sweep(COS2, T2, levels, (0, 2), 256)
    chi = {r.a: r.value for r in rows if r.k == 2}
    for a, v in chi.items():
        assert v == pytest.approx(1.0 if a < 0 else -1.0, abs=0.05)
    areas = [r.value for r in rows if r.k == 0]
    assert all(b >= a for a, b in zip(areas, areas[1:]))


def test_sweep_empty_and_skipped():
    assert level_sweep(COS2, T2, [], (0,), 64) == []
    rows = level_sweep(COS2, T2, [0.0, 0.5], (0,), 64)
    assert rows[0].value is None and rows[0].warning.startswith("skipped")
    assert rows[1].value is not None and rows[1].warning == ""


def test_probe_zero_eps():
    g = parse("sin(2*pi*(x+y))", 2)
    rows = continuity_probe(COS2, g, T2, 0.5, (0, 1, 2), [0.0], 128)
    assert all(r.delta == 0.0 and r.ratio is None for r in rows)


def test_probe_lipschitz_and_euler():
    # not odd under the level set's point symmetry, so dL is first order in eps
    g = parse("sin(2*pi*x)*cos(4*pi*y)+0.3*cos(2*pi*y)", 2)
    rows = continuity_probe(COS2, g, T2, 0.5, (0, 1, 2), [1e-2, 5e-3, 2.5e-3])
    for k in (0, 1):
        assert ratio_spread(rows, k) < 4
    assert all(r.euler_delta == 0 for r in rows if r.k == 2)


def test_probe_skips_irregular():
    rows = continuity_probe(COS2, parse("1+0*x", 2), T2, 0.5, (0,), [0.5], 64)
    assert rows[0].skipped.startswith("skipped") and rows[0].delta is None


# ---------------------------------------------------------------- geometric laws

@pytest.mark.parametrize("lam", [0.5, 1.5])
def test_disk_scaling(lam):
    base = compute_intrinsic_volumes(ComputeRequest(DISK, BOX2, 0.0, (0, 1, 2), "volume", 1024))
    f = parse(f"x^2+y^2-{lam * lam}", 2)
    box = Domain.box([-2 * lam] * 2, [2 * lam] * 2)
    rep = compute_intrinsic_volumes(ComputeRequest(f, box, 0.0, (0, 1, 2), "volume", 1024))
    for k in (0, 1, 2):
        assert rep.value(k) == pytest.approx(lam ** (2 - k) * base.value(k), rel=1e-2)


def test_disjoint_additivity():
    two = parse("((x-1.2)^2+y^2-0.25)*((x+1.2)^2+y^2-0.25)", 2)
    one = parse("x^2+y^2-0.25", 2)
    box = Domain.box([-2.4, -1.2], [2.4, 1.2])
    a = compute_intrinsic_volumes(ComputeRequest(two, box, 0.0, (0, 1, 2), "boundary", 1024))
    b = compute_intrinsic_volumes(ComputeRequest(one, Domain.box([-1.2] * 2, [1.2] * 2), 0.0,
                                                 (0, 1, 2), "boundary", 512))
    for k in (0, 1, 2):
        assert a.value(k) == pytest.approx(2 * b.value(k), rel=1e-2)


def test_eps_v_halving(monkeypatch):
    cases = [(DISK, BOX2, 0.0), (COS2, T2, 0.5)]
    dens = lambda j: lkforms.p_polynomial(j.hess_matrix, j.grad, 2) / (1 + j.grad_norm ** 3)

    def run():
        out = []
        for f, dom, a in cases:
            out += [intrinsic_volume(f, dom, a, k, 128) for k in (1, 2)]
            out.append(volume_integral(f, dom, a, 128, dens))
        return np.array(out)

    ref = run()
    monkeypatch.setattr(lkforms, "EPS_V", lkforms.EPS_V / 2)
    np.testing.assert_allclose(run(), ref, rtol=1e-6)
