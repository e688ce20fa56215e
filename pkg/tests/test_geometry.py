import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from kincrowd import builtins
from kincrowd.errors import ConfigError, DomainError
from kincrowd.geometry import (
    DomainSpec, Obstacle, Rect, Segment, distance_to_exit, quality_at, quality_field,
    wall_query,
)

EXIT = Segment(1.0, 0.4, 1.0, 0.6)
UNIT_WALLS = (Segment(0, 0, 0, 1), Segment(0, 0, 1, 0), Segment(0, 1, 1, 1),
              Segment(1, 0, 1, 0.4), Segment(1, 0.6, 1, 1))


def unit_room(obstacles=()):
    return DomainSpec(Rect(0, 0, 1, 1), UNIT_WALLS, (EXIT,), obstacles)


def config1(alpha_eff=0.0):
    cfg = builtins.builtin("room-obstacle-1-a1" if alpha_eff else "room-obstacle-1-a0")
    return cfg.domain(dimensionless=False)


def test_rect_and_segment_validation():
    with pytest.raises(ConfigError):
        Rect(0, 0, 0, 1)
    with pytest.raises(ConfigError):
        Segment(0, 0, 1, 1)
    with pytest.raises(ConfigError):
        Segment(0, 0, 0, 0)


def test_obstacle_area_ratio_enforced():
    area = Rect(0, 0, 2, 2)
    Obstacle(Rect(0.5, 0.5, 1.5, 1.5), area, 1.0)
    with pytest.raises(ConfigError):
        Obstacle(Rect(0.5, 0.5, 1.4, 1.5), area, 1.0)
    with pytest.raises(ConfigError):
        Obstacle(Rect(0.5, 0.5, 1.5, 1.5), area, 1.2)


def test_domain_rejects_exit_on_wall():
    with pytest.raises(ConfigError):
        DomainSpec(Rect(0, 0, 1, 1), (Segment(1, 0, 1, 1),), (EXIT,))


def test_distance_to_exit_examples():
    d, u = distance_to_exit((0.5, 0.5), unit_room())
    assert d == pytest.approx(0.5) and u == pytest.approx((1.0, 0.0))
    d, u = distance_to_exit((1.0, 0.5), unit_room())
    assert d == 0 and u == pytest.approx((1.0, 0.0))          # outward normal
    with pytest.raises(DomainError):
        distance_to_exit((1.5, 0.5), unit_room())


def test_distance_is_clamped_to_one():
    dom = DomainSpec(Rect(0, 0, 3, 1), (Segment(0, 0, 0, 1),), (Segment(3, 0, 3, 1),))
    assert distance_to_exit((0.5, 0.5), dom)[0] == 1.0


def _crosses_by_sampling(p, q, rect, n=4000):
    t = np.linspace(0, 1, n)
    x = p[0] + t * (q[0] - p[0])
    y = p[1] + t * (q[1] - p[1])
    inside = (x > rect.xmin) & (x < rect.xmax) & (y > rect.ymin) & (y < rect.ymax)
    return bool(inside.any())


def test_dynamic_exit_direction_aims_at_corner():
    dom = config1()
    area = dom.obstacles[0].effective_area
    x = (5.0, 5.0)
    exit_point = (10.0, 5.0)
    assert _crosses_by_sampling(x, exit_point, area)
    _, u = distance_to_exit(x, dom)
    assert not math.isclose(u[1], 0.0, abs_tol=1e-9)
    hits = [c for c in area.corners()
            if math.isclose(math.atan2(c[1] - x[1], c[0] - x[0]), math.atan2(u[1], u[0]),
                            abs_tol=1e-12)]
    assert len(hits) == 1
    assert hits[0][0] == area.xmin                      # exit-facing corner seen from here
    assert not _crosses_by_sampling(x, hits[0], area)


def test_dynamic_exit_direction_far_away_is_straight():
    dom = config1()
    d, u = distance_to_exit((0.5, 5.0), dom)          # more than one diagonal away
    assert u == pytest.approx((1.0, 0.0))


def test_wall_query_examples():
    d, u, xw = wall_query((0.5, 0.5), math.pi, unit_room())
    assert xw == pytest.approx((0.0, 0.5)) and d == pytest.approx(0.5)
    # heading up-right, exit on the right: tangent along the top wall points right
    d, u, xw = wall_query((0.5, 0.8), math.pi / 4, unit_room())
    assert xw == pytest.approx((0.7, 1.0)) and u == pytest.approx((1.0, 0.0))
    # a ray leaving through the exit has no wall term
    d, u, xw = wall_query((0.5, 0.5), 0.0, unit_room())
    assert d == 1.0 and u == pytest.approx((1.0, 0.0))


def test_wall_query_hits_effective_area_first():
    dom = config1()
    area = dom.obstacles[0].effective_area
    d, u, xw = wall_query((4.0, 5.0), 0.0, dom)
    assert xw == pytest.approx((area.xmin, 5.0))
    # brute force over every boundary segment
    best = min(t for s, _ in dom._boundary
               if (t := s.ray_hit(4.0, 5.0, 1.0, 0.0)) is not None)
    assert d == pytest.approx(min(best, 1.0))


def test_quality_examples():
    dom = config1(alpha_eff=0.0)
    area = dom.obstacles[0].effective_area
    assert quality_at((1.0, 1.0), dom, 1.0) == 1.0
    assert quality_at(area.center, dom, 1.0) == 0.0
    assert quality_at((area.xmin, area.ymin), dom, 1.0) == 0.0


def test_quality_field_matches_pointwise():
    dom = config1(alpha_eff=0.0)
    xs = np.linspace(0.05, 13.95, 40)
    ys = np.linspace(0.05, 9.95, 30)
    field = quality_field(dom, xs[:, None], ys[None, :], 0.7)
    expected = np.array([[quality_at((x, y), dom, 0.7) for y in ys] for x in xs])
    np.testing.assert_array_equal(field, expected)
    assert set(np.unique(field)) == {0.0, 0.7}


points = st.tuples(st.floats(0.0, 1.0), st.floats(0.0, 1.0))


@given(points, st.integers(0, 7))
def test_wall_hit_lies_on_boundary(x, h):
    dom = unit_room()
    d, u, xw = wall_query(x, h * math.pi / 4, dom)
    assert 0.0 <= d <= 1.0
    assert math.hypot(*u) == pytest.approx(1.0, abs=1e-12)
    if xw is not None:
        assert min(s.distance(*xw) for s, _ in dom._boundary) < 1e-9


@given(points)
def test_exit_distance_properties(x):
    dom = unit_room()
    d, u = distance_to_exit(x, dom)
    assert 0.0 <= d <= 1.0
    assert math.hypot(*u) == pytest.approx(1.0, abs=1e-12)
    assert (d < 1e-12) == (EXIT.distance(*x) < 1e-12)


@given(st.tuples(st.floats(0.0, 14.0), st.floats(0.0, 10.0)))
def test_without_obstacles_exit_direction_is_straight(x):
    with_ob = builtins.builtin("room-no-obstacle-44").domain(dimensionless=False)
    d, u = distance_to_exit(x, with_ob)
    if with_ob.room_region.contains(*x, tol=0.0) and d > 1e-9:
        seg = with_ob.exits[0]
        px, py = seg.closest_point(*x)
        n = math.hypot(px - x[0], py - x[1])
        assert u == pytest.approx(((px - x[0]) / n, (py - x[1]) / n), abs=1e-12)
