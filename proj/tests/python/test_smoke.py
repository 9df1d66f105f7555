import math

import numpy as np
import pytest

import rbridge


def test_manifold_roundtrip():
    s = rbridge.Manifold("sphere2")
    assert s.dim == 2
    x = s.point([0.0, 0.0, 1.0])
    y = s.point([1.0, 0.0, 0.0])
    w, at_cut = s.log(x, y)
    assert not at_cut
    assert s.distance(x, y) == pytest.approx(math.pi / 2)
    np.testing.assert_allclose(s.exp(x, w), y, atol=1e-12)
    assert s.theta(x, y) == pytest.approx(2 / math.pi)


def test_bridge_reaches_target():
    torus = rbridge.Manifold("flat-torus")
    paths = rbridge.simulate_bridges(torus, [1.0, 1.0], [2.0, 2.5], T=1.0, steps=500, paths=8, seed=3,
                                     record_stride=100)
    assert len(paths) == 8
    for p in paths:
        assert p["states"].shape == (len(p["times"]), 2)
        assert p["radials"][-1] < 0.3
        assert p["log_phi"] == 0.0


def test_bridges_are_reproducible():
    s = rbridge.Manifold("so3")
    a = rbridge.simulate_bridges(s, [0, 0, 0], [0.5, 0.2, 0.1], steps=100, paths=2, seed=5)
    b = rbridge.simulate_bridges(s, [0, 0, 0], [0.5, 0.2, 0.1], steps=100, paths=2, seed=5)
    np.testing.assert_array_equal(a[1]["states"], b[1]["states"])


def test_series_and_heat_kernel():
    north = np.array([0.0, 0.0, 1.0])
    assert rbridge.sphere_heat_kernel_series(north, north, 1.0) == pytest.approx(0.11288, abs=1e-4)
    est = rbridge.heat_kernel(rbridge.Manifold("sphere2"), north, north, T=2.0, steps=300, paths=500, seed=1)
    assert est["value"] == pytest.approx(0.11288, rel=0.1)
    assert est["ess"] > 100


def test_sample_and_mean():
    cyl = rbridge.Manifold("cylinder")
    pts = rbridge.sample_endpoints(cyl, [1.0, 0.0], T=0.5, steps=50, count=20, seed=2)
    assert pts.shape == (20, 2)
    res = rbridge.diffusion_mean(cyl, pts, T=0.5, paths=2, steps=20, tol=1e-6)
    assert res.converged
    assert res.estimate[1] == pytest.approx(pts[:, 1].mean(), abs=1e-4)


def test_weights_and_bound():
    w = rbridge.conditional_expectation([1.0, 3.0], [0.0, 0.0])
    assert w["value"] == pytest.approx(2.0)
    assert rbridge.l2_radial_bound(1.0, 2.0, 0.0, 0.5, 1.0) == pytest.approx(2.0)


def test_errors_map_to_python_exceptions():
    with pytest.raises(ValueError):
        rbridge.Manifold("moebius")
    s = rbridge.Manifold("sphere2")
    with pytest.raises(ValueError):
        rbridge.simulate_bridges(s, [0, 0, 1], [1, 0, 0], steps=1)
    with pytest.raises(rbridge.NumericalError):
        rbridge.conditional_expectation([1.0], [-math.inf])
