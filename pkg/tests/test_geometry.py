#!/usr/bin/env python
# -*- coding: utf-8 -*-
# @time    : 2024/8/21 16:32
# @author  : timger/yishenggudou
import math

import numpy as np
import pytest

from tesslab.exceptions import DegenerateGeometry, NoIntersection
from tesslab.geometry import (
    ConvexPolygon,
    Line,
    Point2,
    RectWindow,
    Segment,
    collinear_overlap,
    contains_point,
    polygon_area,
    polygon_centroid,
    polygon_diameter,
    polygon_perimeter,
    split_polygon,
    support_width,
)

UNIT_SQUARE = ConvexPolygon(np.array([(0, 0), (1, 0), (1, 1), (0, 1)], dtype=float))
TRIANGLE = ConvexPolygon(np.array([(0, 0), (1, 0), (0, 1)], dtype=float))


def random_convex(rng: np.random.Generator, k: int = 7) -> ConvexPolygon:
    angles = np.sort(rng.uniform(0.0, 2.0 * math.pi, size=k))
    return ConvexPolygon(np.column_stack([np.cos(angles), np.sin(angles)]) * rng.uniform(0.5, 3.0) + rng.normal(size=2))


def fan_area(v: np.ndarray) -> float:
    total = 0.0
    for i in range(1, len(v) - 1):
        a, b = v[i] - v[0], v[i + 1] - v[0]
        total += 0.5 * (a[0] * b[1] - a[1] * b[0])
    return total


def test_unit_cases():
    """单位正方形与直角三角形的面积、周长与重心"""
    assert polygon_area(UNIT_SQUARE) == pytest.approx(1.0), "单位正方形面积应为1"
    assert polygon_area(TRIANGLE) == pytest.approx(0.5), "三角形面积应为0.5"
    assert polygon_perimeter(UNIT_SQUARE) == pytest.approx(4.0), "单位正方形周长应为4"
    assert polygon_perimeter(TRIANGLE) == pytest.approx(2.0 + math.sqrt(2.0)), "三角形周长错误"
    c = polygon_centroid(UNIT_SQUARE)
    assert (c.x, c.y) == pytest.approx((0.5, 0.5)), "单位正方形重心应为 (0.5, 0.5)"
    c = polygon_centroid(TRIANGLE)
    assert (c.x, c.y) == pytest.approx((1 / 3, 1 / 3)), "三角形重心应为 (1/3, 1/3)"


def test_random_polygon_oracles():
    """随机凸多边形的面积、周长与重心和独立的三角剖分结果一致"""
    rng = np.random.default_rng(7)
    for _ in range(50):
        P = random_convex(rng, int(rng.integers(3, 10)))
        v = P.vertices
        assert polygon_area(P) == pytest.approx(fan_area(v), rel=1e-12), "面积与扇形三角剖分不一致"
        sides = np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1).sum()
        assert polygon_perimeter(P) == pytest.approx(sides, rel=1e-12), "周长与逐边求和不一致"
        weights, centres = [], []
        for i in range(1, len(v) - 1):
            tri = np.array([v[0], v[i], v[i + 1]])
            weights.append(fan_area(tri))
            centres.append(tri.mean(axis=0))
        expected = np.average(np.array(centres), axis=0, weights=weights)
        c = polygon_centroid(P)
        assert np.allclose((c.x, c.y), expected, atol=1e-12), "重心与三角剖分加权重心不一致"
        assert contains_point(P, c), "重心必须位于多边形内部"


def test_normalization_drops_flat_vertices():
    """共线的中间顶点被合并，方向统一为逆时针"""
    P = ConvexPolygon(np.array([(0, 0), (0, 1), (1, 1), (1, 0.5), (1, 0)], dtype=float))
    assert P.n_corners == 4, "共线顶点 (1, 0.5) 应被删除"
    assert polygon_area(P) > 0, "顺时针输入应被翻转为逆时针"


def test_degenerate_polygons():
    with pytest.raises(DegenerateGeometry):
        ConvexPolygon(np.array([(0, 0), (1, 0), (2, 0)], dtype=float))
    with pytest.raises(DegenerateGeometry):
        ConvexPolygon(np.array([(0, 0), (1, 0)], dtype=float))
    with pytest.raises(DegenerateGeometry):
        ConvexPolygon(np.array([(0, 0), (2, 0), (1, 0.2), (2, 2), (0, 2)], dtype=float))
    with pytest.raises(DegenerateGeometry):
        Segment(Point2(0.0, 0.0), Point2(0.0, 1e-12))


def test_line_normalization():
    line = Line.normalized(1.0, math.pi + 0.25)
    assert line.phi == pytest.approx(0.25), "方向角应折回 [0, π)"
    assert line.p == pytest.approx(-1.0), "折回一次时 p 变号"
    with pytest.raises(ValueError):
        Line(0.0, math.pi)


def test_support_width():
    assert support_width(UNIT_SQUARE, 0.0) == pytest.approx(1.0)
    assert support_width(UNIT_SQUARE, math.pi / 4) == pytest.approx(math.sqrt(2.0))
    phis = (np.arange(1024) + 0.5) * math.pi / 1024
    mean_width = np.mean([support_width(UNIT_SQUARE, phi) for phi in phis])
    assert mean_width == pytest.approx(4.0 / math.pi, rel=1e-5), "平均宽度应为周长/π"
    assert polygon_diameter(UNIT_SQUARE) == pytest.approx(math.sqrt(2.0))


def test_split_unit_square():
    plus, minus = split_polygon(UNIT_SQUARE, Line(0.5, 0.0))
    assert plus.area == pytest.approx(0.5) and minus.area == pytest.approx(0.5), "两半面积都应为0.5"
    assert plus.centroid.x > 0.5 > minus.centroid.x, "正侧应在法向一侧"
    with pytest.raises(NoIntersection):
        split_polygon(UNIT_SQUARE, Line(2.0, 0.0))
    with pytest.raises(NoIntersection):
        split_polygon(UNIT_SQUARE, Line(1.0, 0.0))


def test_split_conserves_area_and_shares_chord():
    """切分前后面积守恒，弦的端点在两侧坐标完全相同"""
    rng = np.random.default_rng(11)
    for _ in range(200):
        P = random_convex(rng, int(rng.integers(3, 12)))
        phi = float(rng.uniform(0.0, math.pi))
        proj = P.vertices @ np.array((math.cos(phi), math.sin(phi)))
        line = Line(float(rng.uniform(proj.min(), proj.max())), phi)
        try:
            plus, minus = split_polygon(P, line)
        except (DegenerateGeometry, NoIntersection):
            continue
        assert plus.area + minus.area == pytest.approx(P.area, rel=1e-9), "面积不守恒"
        shared = {tuple(v) for v in plus.vertices} & {tuple(v) for v in minus.vertices}
        assert len(shared) == 2, "两个子多边形应恰好共享弦的两个端点"


def test_collinear_overlap():
    s = Segment(Point2(0.0, 0.0), Point2(2.0, 0.0))
    overlap = collinear_overlap(s, Segment(Point2(1.0, 0.0), Point2(3.0, 0.0)))
    assert overlap is not None and overlap.length == pytest.approx(1.0), "重叠部分应为 [1, 2]"
    assert collinear_overlap(s, Segment(Point2(2.0, 0.0), Point2(3.0, 0.0))) is None, "点接触不算重叠"
    assert collinear_overlap(s, Segment(Point2(0.0, 1.0), Point2(2.0, 1.0))) is None, "平行不共线"
    assert collinear_overlap(s, Segment(Point2(1.0, -1.0), Point2(1.0, 1.0))) is None, "相交不共线"


def test_collinear_overlap_is_symmetric():
    """很短的边与长边共线时，两种参数顺序给出同一个重叠"""
    short = Segment(Point2(0.0, 0.0), Point2(2e-6, 1e-14))
    long = Segment(Point2(-1.0, 0.0), Point2(2.0, 0.0))
    for overlap in (collinear_overlap(long, short), collinear_overlap(short, long)):
        assert overlap is not None and overlap.length == pytest.approx(2e-6, rel=1e-6)


def test_rect_window():
    w = RectWindow(0.0, 0.0, 4.0, 2.0)
    assert w.area == 8.0 and w.width == 4.0 and w.height == 2.0
    assert w.contains_window(RectWindow(1.0, 0.5, 3.0, 1.5))
    assert not w.contains_window(RectWindow(-1.0, 0.5, 3.0, 1.5))
    assert w.distance_to_boundary(np.array([1.0, 1.0]))[0] == pytest.approx(1.0)
    assert w.as_polygon().area == pytest.approx(8.0)
    with pytest.raises(ValueError):
        RectWindow(1.0, 0.0, 1.0, 2.0)


if __name__ == "__main__":
    pytest.main([__file__])
