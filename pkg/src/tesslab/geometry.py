#!/usr/bin/env python
# -*- coding: utf-8 -*-
# @time    : 2024/8/21 16:32
# @author  : timger/yishenggudou
"""平面凸几何：点、直线、线段、凸多边形与矩形窗口

所有对象都是不可变值，所有函数都是纯函数，可以在任意线程中并发调用。
"""
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import List, Optional, Tuple

import numpy as np

from tesslab.exceptions import DegenerateGeometry, NoIntersection

logger = logging.getLogger(__name__)

# 容差
EPS_POINT = 1e-9  # 点的识别（绝对值，窗口单位）
EPS_AREA = 1e-12  # 退化面积
EPS_ANGLE = 1e-12  # 共线判定（相对叉积）


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise DegenerateGeometry(f"点坐标必须有限: ({self.x}, {self.y})")


@dataclass(frozen=True)
class Line:
    """直线 {z : <z, v> = p}，其中 v = (cos phi, sin phi)，phi ∈ [0, π)"""
    p: float
    phi: float

    def __post_init__(self):
        if not (0.0 <= self.phi < math.pi) or not math.isfinite(self.p):
            raise ValueError(f"非法的直线参数: p={self.p}, phi={self.phi}")

    @classmethod
    def normalized(cls, p: float, phi: float) -> "Line":
        """把任意方向角折回 [0, π)，必要时翻转 p 的符号"""
        turns = math.floor(phi / math.pi)
        phi = phi - turns * math.pi
        if turns % 2:
            p = -p
        phi = max(phi, 0.0)
        if phi >= math.pi:
            phi, p = 0.0, -p
        return cls(p, phi)

    @property
    def normal(self) -> np.ndarray:
        return np.array((math.cos(self.phi), math.sin(self.phi)))

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.normal - self.p


@dataclass(frozen=True)
class Segment:
    a: Point2
    b: Point2

    def __post_init__(self):
        if math.hypot(self.b.x - self.a.x, self.b.y - self.a.y) <= EPS_POINT:
            raise DegenerateGeometry("线段两端点重合")

    @property
    def length(self) -> float:
        return math.hypot(self.b.x - self.a.x, self.b.y - self.a.y)

    @property
    def midpoint(self) -> Point2:
        return Point2(0.5 * (self.a.x + self.b.x), 0.5 * (self.a.y + self.b.y))


@dataclass(frozen=True)
class RectWindow:
    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError(f"非法的窗口: {self.bounds}")

    @classmethod
    def square(cls, lo: float, hi: float) -> "RectWindow":
        return cls(lo, lo, hi, hi)

    @property
    def bounds(self) -> Tuple[float, float, float, float]:
        return (self.x0, self.y0, self.x1, self.y1)

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def centre(self) -> np.ndarray:
        return np.array((0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1)))

    @property
    def circumradius(self) -> float:
        return 0.5 * math.hypot(self.width, self.height)

    def contains_window(self, other: "RectWindow") -> bool:
        return self.x0 <= other.x0 and self.y0 <= other.y0 and other.x1 <= self.x1 and other.y1 <= self.y1

    def contains_points(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        return (pts[:, 0] >= self.x0) & (pts[:, 0] <= self.x1) & (pts[:, 1] >= self.y0) & (pts[:, 1] <= self.y1)

    def distance_to_boundary(self, points: np.ndarray) -> np.ndarray:
        """窗口内点到窗口边界的距离"""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        return np.minimum.reduce([
            pts[:, 0] - self.x0, self.x1 - pts[:, 0],
            pts[:, 1] - self.y0, self.y1 - pts[:, 1],
        ])

    def as_polygon(self) -> "ConvexPolygon":
        return ConvexPolygon(np.array([
            (self.x0, self.y0), (self.x1, self.y0), (self.x1, self.y1), (self.x0, self.y1),
        ]))


def _shoelace(pts: np.ndarray) -> float:
    d = pts - pts[0]
    x, y = d[:, 0], d[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _turns(pts: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """每个顶点处的叉积及其尺度"""
    a = pts - np.roll(pts, 1, axis=0)
    b = np.roll(pts, -1, axis=0) - pts
    cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    scale = np.hypot(a[:, 0], a[:, 1]) * np.hypot(b[:, 0], b[:, 1])
    return cross, scale


def _normalize_vertices(points) -> np.ndarray:
    pts = np.array(points, dtype=float).reshape(-1, 2)
    if not np.all(np.isfinite(pts)):
        raise DegenerateGeometry("多边形顶点坐标必须有限")
    if len(pts) >= 2:
        step = pts - np.roll(pts, -1, axis=0)
        pts = pts[np.hypot(step[:, 0], step[:, 1]) > EPS_POINT]
    if len(pts) < 3:
        raise DegenerateGeometry(f"多边形至少需要3个顶点，实际 {len(pts)}")
    if _shoelace(pts) < 0:
        pts = pts[::-1].copy()
    # 合并共线的相邻顶点，只保留真正的角点
    while True:
        cross, scale = _turns(pts)
        flat = np.abs(cross) <= EPS_ANGLE * scale
        if not flat.any():
            break
        pts = pts[~flat]
        if len(pts) < 3:
            raise DegenerateGeometry("多边形退化为线段")
    if np.any(cross <= 0):
        raise DegenerateGeometry("多边形不是严格凸的")
    if _shoelace(pts) <= EPS_AREA:
        raise DegenerateGeometry("多边形面积低于容差")
    pts.setflags(write=False)
    return pts


@dataclass(frozen=True, eq=False)
class ConvexPolygon:
    """逆时针排列的凸多边形，顶点就是几何角点"""
    vertices: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vertices", _normalize_vertices(self.vertices))

    @property
    def n_corners(self) -> int:
        return len(self.vertices)

    @cached_property
    def area(self) -> float:
        return polygon_area(self)

    @cached_property
    def perimeter(self) -> float:
        return polygon_perimeter(self)

    @cached_property
    def centroid(self) -> Point2:
        return polygon_centroid(self)

    def sides(self) -> List[Segment]:
        v = self.vertices
        nxt = np.roll(v, -1, axis=0)
        return [Segment(Point2(*a), Point2(*b)) for a, b in zip(v.tolist(), nxt.tolist(), strict=True)]


def polygon_area(P: ConvexPolygon) -> float:
    area = _shoelace(P.vertices)
    if area <= EPS_AREA:
        raise DegenerateGeometry(f"多边形面积低于容差: {area}")
    return area


def polygon_perimeter(P: ConvexPolygon) -> float:
    step = np.roll(P.vertices, -1, axis=0) - P.vertices
    perimeter = float(np.hypot(step[:, 0], step[:, 1]).sum())
    if perimeter <= EPS_POINT:
        raise DegenerateGeometry("多边形周长低于容差")
    return perimeter


def polygon_centroid(P: ConvexPolygon) -> Point2:
    """面积重心"""
    v0 = P.vertices[0]
    d = P.vertices - v0
    x, y = d[:, 0], d[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * float(cross.sum())
    if area <= EPS_AREA:
        raise DegenerateGeometry(f"多边形面积低于容差: {area}")
    cx = float(np.dot(x + xn, cross)) / (6.0 * area)
    cy = float(np.dot(y + yn, cross)) / (6.0 * area)
    return Point2(cx + float(v0[0]), cy + float(v0[1]))


def support_width(P: ConvexPolygon, phi: float) -> float:
    """法向 phi 方向上的宽度"""
    proj = P.vertices @ np.array((math.cos(phi), math.sin(phi)))
    return float(proj.max() - proj.min())


def polygon_diameter(P: ConvexPolygon) -> float:
    d = P.vertices[:, None, :] - P.vertices[None, :, :]
    return float(np.sqrt((d ** 2).sum(axis=-1)).max())


def contains_point(P: ConvexPolygon, q: Point2, strict: bool = True) -> bool:
    v = P.vertices
    edge = np.roll(v, -1, axis=0) - v
    rel = np.array((q.x, q.y)) - v
    cross = edge[:, 0] * rel[:, 1] - edge[:, 1] * rel[:, 0]
    scale = np.hypot(edge[:, 0], edge[:, 1])
    if strict:
        return bool(np.all(cross > EPS_POINT * scale))
    return bool(np.all(cross >= -EPS_POINT * scale))


def split_polygon(P: ConvexPolygon, L: Line) -> Tuple[ConvexPolygon, ConvexPolygon]:
    """用直线 L 把 P 切成 (正侧, 负侧) 两部分

    弦的两个端点只计算一次并同时写入两侧，保证两个子单元共享完全相同的坐标。
    """
    v = P.vertices
    d = L.signed_distance(v)
    if d.max() <= EPS_POINT or d.min() >= -EPS_POINT:
        raise NoIntersection(f"直线 p={L.p}, phi={L.phi} 未穿过多边形内部")
    side = np.where(d > EPS_POINT, 1, np.where(d < -EPS_POINT, -1, 0))
    plus, minus = [], []
    n = len(v)
    for i in range(n):
        j = (i + 1) % n
        if side[i] >= 0:
            plus.append(v[i])
        if side[i] <= 0:
            minus.append(v[i])
        if side[i] * side[j] < 0:
            t = d[i] / (d[i] - d[j])
            q = v[i] + t * (v[j] - v[i])
            plus.append(q)
            minus.append(q)
    return ConvexPolygon(np.array(plus)), ConvexPolygon(np.array(minus))


def collinear_overlap(s: Segment, t: Segment) -> Optional[Segment]:
    """两条共线线段的正长度公共部分；点接触或不共线时返回 None"""
    # 以较长的一条为基准线，短边的方向误差不会被放大
    if t.length > s.length:
        s, t = t, s
    ax, ay = s.a.x, s.a.y
    length = s.length
    ux, uy = (s.b.x - ax) / length, (s.b.y - ay) / length
    for q in (t.a, t.b):
        if abs((q.x - ax) * -uy + (q.y - ay) * ux) > EPS_POINT:
            return None
    ta = (t.a.x - ax) * ux + (t.a.y - ay) * uy
    tb = (t.b.x - ax) * ux + (t.b.y - ay) * uy
    (t_lo, p_lo), (t_hi, p_hi) = sorted(((ta, t.a), (tb, t.b)), key=lambda item: item[0])
    lo, hi = max(0.0, t_lo), min(length, t_hi)
    if hi - lo <= EPS_POINT:
        return None
    start = s.a if t_lo <= 0.0 else p_lo
    end = s.b if t_hi >= length else p_hi
    return Segment(start, end)
