#!/usr/bin/env python
# -*- coding: utf-8 -*-
# @time    : 2024/8/21 16:32
# @author  : timger/yishenggudou
"""快速不变量检查，供 `tesslab selfcheck` 使用"""
import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import Callable, List, Tuple

import numpy as np
from scipy import stats

from tesslab.cellstats import identity_checks, minus_sample, plt_theoretical
from tesslab.complex import (
    TessellationComplex,
    build_complex,
    cell_topology,
    collinear_edge_pairs,
    plate_intensities,
    vertex_degrees,
)
from tesslab.exceptions import DegenerateGeometry, NoIntersection
from tesslab.geometry import (
    EPS_POINT,
    ConvexPolygon,
    Line,
    RectWindow,
    contains_point,
    polygon_area,
    polygon_centroid,
    polygon_perimeter,
    split_polygon,
    support_width,
)
from tesslab.secondorder import (
    KernelSpec,
    MarkedPointPattern,
    MarkSelector,
    estimate_kmm,
    simulate_csr,
    translation_weight,
)
from tesslab.tessgen import DirectionLaw, Model, RngStream, generate_cells, point_probe_overlaps

logger = logging.getLogger(__name__)

SELFCHECK_WINDOW = RectWindow.square(-20.0, 20.0)
SELFCHECK_REPS = 6
SELFCHECK_SEED = 20240821


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def _check(results: List[CheckResult], name: str, fn: Callable[[], Tuple[bool, str]]):
    try:
        passed, detail = fn()
    except Exception as e:
        passed, detail = False, f"{type(e).__name__}: {e}"
    logger.debug(f"检查 {name}: {'通过' if passed else '失败'} {detail}")
    results.append(CheckResult(name, bool(passed), detail))


def _geometry_oracles() -> Tuple[bool, str]:
    square = ConvexPolygon(np.array([(0, 0), (1, 0), (1, 1), (0, 1)], dtype=float))
    triangle = ConvexPolygon(np.array([(0, 0), (1, 0), (0, 1)], dtype=float))
    c = polygon_centroid(triangle)
    ok = (
        math.isclose(polygon_area(square), 1.0)
        and math.isclose(polygon_perimeter(triangle), 2.0 + math.sqrt(2.0))
        and math.isclose(c.x, 1.0 / 3.0) and math.isclose(c.y, 1.0 / 3.0)
        and math.isclose(support_width(square, math.pi / 4.0), math.sqrt(2.0))
    )
    return ok, "单位正方形与直角三角形"


def _random_convex(rng: np.random.Generator, k: int) -> ConvexPolygon:
    angles = np.sort(rng.uniform(0.0, 2.0 * math.pi, size=k))
    radii = rng.uniform(0.5, 1.5)
    return ConvexPolygon(np.column_stack([radii * np.cos(angles), radii * np.sin(angles)]))


def _split_conservation() -> Tuple[bool, str]:
    g = np.random.default_rng(SELFCHECK_SEED)
    worst = 0.0
    for _ in range(200):
        phi = float(g.uniform(0.0, math.pi))
        try:
            P = _random_convex(g, int(g.integers(3, 12)))
            proj = P.vertices @ np.array((math.cos(phi), math.sin(phi)))
            plus, minus = split_polygon(P, Line(float(g.uniform(proj.min(), proj.max())), phi))
        except (DegenerateGeometry, NoIntersection):
            continue
        worst = max(worst, abs(plus.area + minus.area - P.area) / P.area)
        if not all(contains_point(P, polygon_centroid(piece), strict=False) for piece in (plus, minus)):
            return False, "切分后的部分超出原多边形"
    return worst <= 1e-9, f"最大相对误差 {worst:.2e}"


def _realisations(model: Model, eps_point: float) -> List[Tuple[List[ConvexPolygon], TessellationComplex]]:
    out = []
    for rep in range(SELFCHECK_REPS):
        rng = RngStream(SELFCHECK_SEED, rep)
        cells = generate_cells(model, 1.0, DirectionLaw.isotropic(), SELFCHECK_WINDOW, rng)
        out.append((cells, build_complex(cells, SELFCHECK_WINDOW, eps_point=eps_point)))
    return out


def _model_checks(results: List[CheckResult], model: Model, eps_point: float):
    name = model.value
    degree, collinear = (4, 2) if model is Model.PLT else (3, 1)
    runs: List[Tuple[List[ConvexPolygon], TessellationComplex]] = []

    def build() -> Tuple[bool, str]:
        runs.extend(_realisations(model, eps_point))
        return True, f"{len(runs)} 次重复"

    def tiling() -> Tuple[bool, str]:
        bad = sum(point_probe_overlaps(cells, SELFCHECK_WINDOW, np.random.default_rng(rep))
                  for rep, (cells, _) in enumerate(runs))
        return bad == 0, f"{bad} 个探针未被恰好一个单元覆盖"

    def euler() -> Tuple[bool, str]:
        values = [plate_intensities(C).euler for _, C in runs]
        return bool(runs) and all(v == 1 for v in values), f"Euler 示性数 {values}"

    def degrees() -> Tuple[bool, str]:
        histogram = sum((vertex_degrees(C) for _, C in runs), Counter())
        pairs = sum((collinear_edge_pairs(C) for _, C in runs), Counter())
        ok = set(histogram) == {degree} and set(pairs) == {collinear}
        return ok, f"度数 {dict(histogram)}, 共线边对 {dict(pairs)}"

    def plates() -> Tuple[bool, str]:
        bad = 0
        for _, C in runs:
            for cid in range(C.n_cells):
                t = cell_topology(C, cid)
                if t.touches_boundary:
                    continue
                if t.n0 != t.n1 or (model is Model.PLT and t.corners != t.n0):
                    bad += 1
        return bad == 0, f"{bad} 个内部单元违反 n0 = n1"

    def identities() -> Tuple[bool, str]:
        checks = identity_checks([minus_sample(C) for _, C in runs])
        # 重复次数少，临界值取 t 分布的 0.9995 分位数
        k = float(stats.t.ppf(0.9995, len(runs) - 1))
        failed = [c.name for c in checks if not c.within(k)]
        return not failed, f"未通过: {failed}" if failed else f"{len(checks)} 项恒等式"

    _check(results, f"{name}_complex", build)
    for check, fn in (("tiling", tiling), ("euler", euler), ("vertex_degree", degrees),
                      ("plates", plates), ("identities", identities)):
        _check(results, f"{name}_{check}", fn if runs else (lambda: (False, "复形构造失败")))


def _closed_forms() -> Tuple[bool, str]:
    v = plt_theoretical(1.0)
    got = (round(v.N0_22, 5), round(v.V2_22, 5), round(v.V1_22, 5))
    return got == (16.93480, 15.50314, 28.06951), f"L_A=1: {got}"


def _translation_weight() -> Tuple[bool, str]:
    w = translation_weight(RectWindow(0.0, 0.0, 10.0, 8.0), (3.0, -2.0))
    return w == 42.0, f"|W ∩ W_h| = {w}"


def _constant_marks() -> Tuple[bool, str]:
    window = RectWindow.square(0.0, 20.0)
    pattern = simulate_csr(window, 1.0, RngStream(SELFCHECK_SEED, 0))
    marks = {s.value: np.full(pattern.n, 3.0) for s in MarkSelector}
    r = np.linspace(1.0, 4.0, 7)
    k = estimate_kmm(MarkedPointPattern(pattern, marks), MarkSelector.AREA, r, KernelSpec.stoyan(pattern.intensity))
    worst = float(np.nanmax(np.abs(k.values - 1.0)))
    return worst <= 1e-12, f"max |k_mm - 1| = {worst:.2e}"


def run_selfcheck(eps_point: float = EPS_POINT) -> List[CheckResult]:
    """运行全部检查；eps_point 可注入一个错误的容差来验证检查本身"""
    results: List[CheckResult] = []
    _check(results, "geometry_oracles", _geometry_oracles)
    _check(results, "split_conservation", _split_conservation)
    for model in Model:
        _model_checks(results, model, eps_point)
    _check(results, "plt_closed_forms", _closed_forms)
    _check(results, "translation_weight", _translation_weight)
    _check(results, "constant_mark_kmm", _constant_marks)
    return results
