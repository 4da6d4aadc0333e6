#!/usr/bin/env python
# -*- coding: utf-8 -*-
# @time    : 2024/8/21 16:32
# @author  : timger/yishenggudou
"""单元中心点过程的二阶统计量：Ripley K、对相关函数 g 与标记相关函数 k_mm

三者都使用矩形窗口上的平移边缘校正。每个估计量先算出分子与分母的和 (CurveSums)，
多次重复按比值之和合并后再相除。
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.spatial import cKDTree

from tesslab.complex import TessellationComplex
from tesslab.exceptions import InsufficientPoints, ZeroDenominator, ZeroOverlap
from tesslab.geometry import ConvexPolygon, RectWindow
from tesslab.tessgen import RngStream

logger = logging.getLogger(__name__)

R_GRID_SIZE = 512
STOYAN_FACTOR = 0.15


class MarkSelector(Enum):
    AREA = "area"
    PERIMETER = "perimeter"
    CORNERS = "corners"


@dataclass(frozen=True, eq=False)
class PointPattern:
    points: np.ndarray
    window: RectWindow

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        if not np.all(np.isfinite(pts)) or not np.all(self.window.contains_points(pts)):
            raise ValueError("点必须位于窗口内")
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def intensity(self) -> float:
        return self.n / self.window.area


@dataclass(frozen=True, eq=False)
class MarkedPointPattern:
    pattern: PointPattern
    marks: Mapping[str, np.ndarray]

    def __post_init__(self):
        marks = {}
        for selector in MarkSelector:
            values = np.asarray(self.marks[selector.value], dtype=float)
            if values.shape != (self.pattern.n,):
                raise ValueError(f"标记 {selector.value} 的长度与点数不符")
            if np.any(values < 0):
                raise ValueError(f"标记 {selector.value} 必须非负")
            marks[selector.value] = values
        if np.any(marks[MarkSelector.CORNERS.value] < 3):
            raise ValueError("角点数至少为3")
        object.__setattr__(self, "marks", marks)

    def mark(self, selector: MarkSelector) -> np.ndarray:
        return self.marks[selector.value]


@dataclass(frozen=True)
class KernelSpec:
    """Epanechnikov 核 k_h(u) = 3/(4h) · max(0, 1 - (u/h)²)"""
    h: float
    kind: str = "epanechnikov"

    def __post_init__(self):
        if self.kind != "epanechnikov":
            raise ValueError(f"不支持的核函数: {self.kind}")
        if not (math.isfinite(self.h) and self.h > 0):
            raise ValueError(f"带宽必须为有限正数: {self.h}")

    @classmethod
    def stoyan(cls, intensity: float) -> "KernelSpec":
        """Stoyan 经验带宽 0.15/sqrt(λ)"""
        if not intensity > 0:
            raise InsufficientPoints("强度为零，无法选择带宽")
        return cls(STOYAN_FACTOR / math.sqrt(intensity))

    def __call__(self, u: np.ndarray) -> np.ndarray:
        z = np.asarray(u, dtype=float) / self.h
        return 0.75 / self.h * np.clip(1.0 - z * z, 0.0, None)


@dataclass(frozen=True, eq=False)
class CurveEstimate:
    r: np.ndarray
    values: np.ndarray
    n_used: int
    n_pairs: np.ndarray
    bandwidth: Optional[float] = None
    boundary_biased: Optional[np.ndarray] = None

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"r": self.r, "value": self.values, "n_pairs": self.n_pairs.astype(np.int64)})


@dataclass(frozen=True, eq=False)
class CurveSums:
    """估计量在 r 网格上的分子、分母与有序点对数，可跨重复相加"""
    r: np.ndarray
    numerator: np.ndarray
    denominator: np.ndarray
    n_pairs: np.ndarray
    n_points: int
    scale: np.ndarray
    bandwidth: Optional[float] = None

    def __add__(self, other: "CurveSums") -> "CurveSums":
        if not np.array_equal(self.r, other.r) or self.bandwidth != other.bandwidth:
            raise ValueError("只能合并相同 r 网格与带宽的曲线")
        return CurveSums(
            r=self.r,
            numerator=self.numerator + other.numerator,
            denominator=self.denominator + other.denominator,
            n_pairs=self.n_pairs + other.n_pairs,
            n_points=self.n_points + other.n_points,
            scale=self.scale,
            bandwidth=self.bandwidth,
        )


def default_r_grid(window: RectWindow, n: int = R_GRID_SIZE) -> np.ndarray:
    """[0, 短边/4] 上的等距网格"""
    return np.linspace(0.0, min(window.width, window.height) / 4.0, n)


def translation_weight(window: RectWindow, h: Tuple[float, float]) -> float:
    """|W ∩ (W + h)|"""
    dx, dy = h
    if abs(dx) >= window.width or abs(dy) >= window.height:
        raise ZeroOverlap(f"位移 {h} 超出窗口")
    return (window.width - abs(dx)) * (window.height - abs(dy))


def _pairs(p: PointPattern, reach: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """距离不超过 reach 的无序点对，按距离排序：(距离, 平移校正权重, 点对下标)"""
    if p.n < 2:
        raise InsufficientPoints(f"至少需要2个点，实际 {p.n}")
    pairs = cKDTree(p.points).query_pairs(r=reach, output_type="ndarray")
    pairs = np.asarray(pairs, dtype=np.intp).reshape(-1, 2)
    # 点对内按坐标字典序定向，再按 (距离, 坐标) 排序：求和顺序只取决于点的位置，与编号无关
    a, b = p.points[pairs[:, 0]], p.points[pairs[:, 1]]
    swap = (a[:, 0] > b[:, 0]) | ((a[:, 0] == b[:, 0]) & (a[:, 1] > b[:, 1]))
    pairs[swap] = pairs[swap][:, ::-1]
    a, b = p.points[pairs[:, 0]], p.points[pairs[:, 1]]
    delta = b - a
    dist = np.hypot(delta[:, 0], delta[:, 1])
    overlap = (p.window.width - np.abs(delta[:, 0])) * (p.window.height - np.abs(delta[:, 1]))
    if np.any(overlap <= 0):
        raise ZeroOverlap("点对位移超出窗口")
    order = np.lexsort((b[:, 1], b[:, 0], a[:, 1], a[:, 0], dist))
    return dist[order], 1.0 / overlap[order], pairs[order]


def _lambda2(p: PointPattern) -> float:
    return p.n * (p.n - 1) / p.window.area ** 2


def k_sums(p: PointPattern, r_grid: np.ndarray) -> CurveSums:
    r = np.asarray(r_grid, dtype=float)
    dist, weight, _ = _pairs(p, float(r.max()))
    cumulative = np.concatenate([[0.0], np.cumsum(weight)])
    idx = np.searchsorted(dist, r, side="right")
    return CurveSums(
        r=r,
        numerator=2.0 * cumulative[idx],
        denominator=np.full_like(r, _lambda2(p)),
        n_pairs=2 * idx,
        n_points=p.n,
        scale=np.ones_like(r),
    )


def _smoothed(dist: np.ndarray, values: np.ndarray, r: np.ndarray, kernel: KernelSpec
              ) -> Tuple[np.ndarray, np.ndarray]:
    lo = np.searchsorted(dist, r - kernel.h, side="left")
    hi = np.searchsorted(dist, r + kernel.h, side="right")
    sums = np.array([float(np.dot(kernel(rk - dist[a:b]), values[a:b])) for rk, a, b in zip(r, lo, hi, strict=True)])
    return 2.0 * sums, 2 * (hi - lo)


def pcf_sums(p: PointPattern, r_grid: np.ndarray, kernel: KernelSpec) -> CurveSums:
    r = np.asarray(r_grid, dtype=float)
    dist, weight, _ = _pairs(p, float(r.max()) + kernel.h)
    numerator, n_pairs = _smoothed(dist, weight, r, kernel)
    with np.errstate(divide="ignore"):
        scale = np.where(r > 0, 1.0 / (2.0 * math.pi * np.where(r > 0, r, 1.0)), np.nan)
    return CurveSums(r, numerator, np.full_like(r, _lambda2(p)), n_pairs, p.n, scale, kernel.h)


def kmm_sums(p: MarkedPointPattern, mark: MarkSelector, r_grid: np.ndarray, kernel: KernelSpec) -> CurveSums:
    r = np.asarray(r_grid, dtype=float)
    m = p.mark(mark)
    mu = math.fsum(m) / len(m) if len(m) else 0.0
    if mu <= 0:
        raise ZeroDenominator(f"标记 {mark.value} 的均值为零")
    dist, weight, pairs = _pairs(p.pattern, float(r.max()) + kernel.h)
    products = m[pairs[:, 0]] * m[pairs[:, 1]]
    numerator, n_pairs = _smoothed(dist, weight * products, r, kernel)
    mass, _ = _smoothed(dist, weight, r, kernel)
    return CurveSums(r, numerator, mu * mu * mass, n_pairs, p.pattern.n, np.ones_like(r), kernel.h)


def finish_curve(sums: CurveSums) -> CurveEstimate:
    with np.errstate(divide="ignore", invalid="ignore"):
        values = np.where(sums.denominator > 0, sums.numerator * sums.scale / sums.denominator, np.nan)
    biased = sums.r < sums.bandwidth if sums.bandwidth is not None else None
    return CurveEstimate(sums.r, values, sums.n_points, sums.n_pairs, sums.bandwidth, biased)


def pool_curves(parts: Sequence[CurveSums]) -> CurveEstimate:
    """按比值之和合并多次重复"""
    if not parts:
        raise InsufficientPoints("没有可合并的曲线")
    estimate = finish_curve(sum(parts[1:], parts[0]))
    undefined = int(np.count_nonzero(np.isnan(estimate.values)))
    if undefined:
        logger.debug(f"合并曲线中有 {undefined} 个无定义的值")
    return estimate


def estimate_K(p: PointPattern, r_grid: np.ndarray) -> CurveEstimate:
    """K(r) = (1/λ²) Σ_{x≠y} 1(|x-y| ≤ r) / |W ∩ W_{x-y}|"""
    return finish_curve(k_sums(p, r_grid))


def estimate_L(p: PointPattern, r_grid: np.ndarray) -> CurveEstimate:
    k = estimate_K(p, r_grid)
    return CurveEstimate(k.r, np.sqrt(k.values / math.pi), k.n_used, k.n_pairs)


def estimate_pcf(p: PointPattern, r_grid: np.ndarray, k: KernelSpec) -> CurveEstimate:
    return finish_curve(pcf_sums(p, r_grid, k))


def estimate_kmm(p: MarkedPointPattern, mark: MarkSelector, r_grid: np.ndarray, k: KernelSpec) -> CurveEstimate:
    estimate = finish_curve(kmm_sums(p, mark, r_grid, k))
    if np.isnan(estimate.values).any():
        logger.warning(f"k_mm({mark.value}) 在部分 r 处带宽内没有点对，值无定义")
    return estimate


def extract_centres(source: Union[TessellationComplex, Sequence[ConvexPolygon]], sub: RectWindow) -> MarkedPointPattern:
    """重心落在子窗口内的单元的中心，标记为面积、周长与角点数"""
    if isinstance(source, TessellationComplex):
        if not source.window.contains_window(sub):
            raise ValueError(f"子窗口 {sub.bounds} 不在窗口 {source.window.bounds} 内")
        cells = source.cells
    else:
        cells = source
    centroids = np.array([(c.centroid.x, c.centroid.y) for c in cells]).reshape(-1, 2)
    keep = sub.contains_points(centroids)
    chosen = [c for c, k in zip(cells, keep, strict=True) if k]
    marks = {
        MarkSelector.AREA.value: np.array([c.area for c in chosen]),
        MarkSelector.PERIMETER.value: np.array([c.perimeter for c in chosen]),
        MarkSelector.CORNERS.value: np.array([c.n_corners for c in chosen], dtype=float),
    }
    return MarkedPointPattern(PointPattern(centroids[keep], sub), marks)


def simulate_csr(window: RectWindow, intensity: float, rng: RngStream) -> PointPattern:
    """窗口内强度为 intensity 的齐次 Poisson 点过程"""
    g = rng.generator
    n = int(g.poisson(intensity * window.area))
    points = np.column_stack([g.uniform(window.x0, window.x1, size=n), g.uniform(window.y0, window.y1, size=n)])
    return PointPattern(points, window)
