import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rislocate.geometry import (
    CLAMPED_RANGE,
    SPEED_OF_LIGHT,
    GeometryError,
    Position3,
    ScenarioGeometry,
    SingularConfigurationError,
    distance,
    path_loss,
    propagation_delay,
    trilaterate,
)

from conftest import RIS_POSITIONS, cross2

coord = st.floats(-1e3, 1e3, allow_nan=False)
points = st.builds(Position3, coord, coord, coord)


def test_distance_examples():
    p = Position3(5, 5, 5)
    assert distance(p, p) == 0
    # 30^2 + 20^2 + 10^2 = 1400
    assert distance(Position3(0, 0, 10), Position3(30, 20, 20)) == pytest.approx(math.sqrt(1400))
    assert distance(Position3(0, 0, 10), Position3(30, 20, 20)) == pytest.approx(37.4166, abs=1e-4)
    assert distance(Position3(0, 0, 0), Position3(3, 4, 0)) == 5


@settings(max_examples=1000, deadline=None)
@given(points, points, points)
def test_distance_is_a_metric(a, b, c):
    ab, ba = distance(a, b), distance(b, a)
    assert ab >= 0
    assert ab == ba
    assert distance(a, c) <= ab + distance(b, c) + 1e-9


@pytest.mark.parametrize(
    "dist, mu, expected", [(1.0, 2.0, 1.0), (1.0, 3.7, 1.0), (100.0, 2.0, 0.01), (50.0, 4.0, 4e-4)]
)
def test_path_loss_examples(dist, mu, expected):
    assert path_loss(dist, mu) == pytest.approx(expected, rel=1e-15)


@given(st.floats(1e-3, 1e6))
def test_path_loss_inverse_square_root_of_power(d):
    assert path_loss(d, 2) * d == pytest.approx(1.0, rel=1e-14)


@given(st.floats(1e-3, 1e4), st.floats(1e-3, 1e4), st.floats(0.5, 6))
def test_path_loss_strictly_decreasing(d1, d2, mu):
    if d1 < d2:
        assert path_loss(d1, mu) > path_loss(d2, mu)


@pytest.mark.parametrize("bad", [0.0, -1.0])
def test_path_loss_rejects_nonpositive(bad):
    with pytest.raises(GeometryError):
        path_loss(bad, 2.0)


def test_propagation_delay():
    assert propagation_delay(0.0) == 0.0
    assert propagation_delay(SPEED_OF_LIGHT) == 1.0
    assert propagation_delay(299.792458) == pytest.approx(1e-6, rel=1e-15)


def test_scenario_validation():
    ris = RIS_POSITIONS
    ok = ScenarioGeometry(Position3(0, 0, 10), ris, Position3(60, 20, 0))
    assert ok.k_bs == pytest.approx(math.pi / 2)
    with pytest.raises(GeometryError):
        ScenarioGeometry(Position3(0, 0, 10), ris, Position3(60, 20, 0), mu=0)
    with pytest.raises(GeometryError):
        ScenarioGeometry(Position3(0, 0, 10), (ris[0], ris[0], ris[2]), Position3(60, 20, 0))
    with pytest.raises(GeometryError):
        ScenarioGeometry(Position3(0, 0, 10), ris, Position3(60, 20, 0), carrier_freq=-1)
    with pytest.raises(GeometryError):
        Position3(math.nan, 0, 0)


def _ranges(ms, anchors):
    return [distance(ms, a) for a in anchors]


def test_trilaterate_reference_point():
    ms = Position3(60, 20, 0)
    res = trilaterate(_ranges(ms, RIS_POSITIONS), RIS_POSITIONS, 0.0)
    assert res.position.x == pytest.approx(60, abs=1e-9)
    assert res.position.y == pytest.approx(20, abs=1e-9)
    assert res.warnings == ()


def test_trilaterate_perturbed_ranges_bounded():
    ms = Position3(60, 20, 0)
    ranges = [r + 0.1 for r in _ranges(ms, RIS_POSITIONS)]
    res = trilaterate(ranges, RIS_POSITIONS, 0.0)
    err = math.hypot(res.position.x - 60, res.position.y - 20)
    assert res.residual > 0
    # Perturbation study: for this layout the planar error stays well under 10x the range error.
    assert err < 10 * 0.1


def test_trilaterate_collinear_anchors():
    anchors = (Position3(300, 0, 20), Position3(300, 300, 20), Position3(300, -300, 20))
    with pytest.raises(SingularConfigurationError):
        trilaterate([300, 400, 400], anchors)


def test_trilaterate_clamps_short_ranges():
    res = trilaterate([5.0, 5.0, 5.0], RIS_POSITIONS, 0.0)
    assert CLAMPED_RANGE in res.warnings
    # All horizontal ranges clamp to zero: the least-squares point is the centroid.
    # Gauss-Newton converges only linearly on this nonzero-residual problem, so
    # the cost is near-optimal well before the point is.
    xy = np.array([[a.x, a.y] for a in RIS_POSITIONS])
    best = math.sqrt(np.sum((xy - xy.mean(axis=0)) ** 2))
    assert res.residual == pytest.approx(best, rel=1e-8)
    assert res.position.x == pytest.approx(30, abs=1e-3)
    assert res.position.y == pytest.approx(100 / 3, abs=1e-3)


def test_trilaterate_rejects_negative_range():
    with pytest.raises(GeometryError):
        trilaterate([-1, 2, 3], RIS_POSITIONS)


def _random_layout(rng):
    while True:
        anchors = [Position3(*rng.uniform([-100, -100, 0], [100, 100, 40])) for _ in range(3)]
        xy = np.array([[a.x, a.y] for a in anchors])
        if abs(cross2(xy[1] - xy[0], xy[2] - xy[0])) > 500:
            return anchors


def test_trilaterate_roundtrip_random_scenes():
    rng = np.random.default_rng(1234)
    for _ in range(1000):
        anchors = _random_layout(rng)
        h = float(rng.uniform(-5, 5))
        ms = Position3(*rng.uniform(-150, 150, 2), h)
        res = trilaterate(_ranges(ms, anchors), anchors, h)
        assert abs(res.position.x - ms.x) <= 1e-9
        assert abs(res.position.y - ms.y) <= 1e-9


def test_gauss_newton_never_increases_residual():
    rng = np.random.default_rng(99)
    for _ in range(300):
        anchors = _random_layout(rng)
        ms = Position3(*rng.uniform(-150, 150, 2), 0.0)
        noisy = [max(r + rng.normal(0, 5), 0.0) for r in _ranges(ms, anchors)]
        res = trilaterate(noisy, anchors, 0.0)
        assert res.residual <= res.initial_residual + 1e-12
