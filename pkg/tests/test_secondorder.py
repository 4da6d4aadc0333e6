#!/usr/bin/env python
# -*- coding: utf-8 -*-
# @time    : 2024/8/21 16:32
# @author  : timger/yishenggudou
import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from tesslab.complex import build_complex
from tesslab.exceptions import InsufficientPoints, ZeroDenominator, ZeroOverlap
from tesslab.geometry import RectWindow
from tesslab.secondorder import (
    KernelSpec,
    MarkedPointPattern,
    MarkSelector,
    PointPattern,
    default_r_grid,
    estimate_K,
    estimate_kmm,
    estimate_L,
    estimate_pcf,
    extract_centres,
    k_sums,
    kmm_sums,
    pcf_sums,
    pool_curves,
    simulate_csr,
    translation_weight,
)
from tesslab.tessgen import DirectionLaw, Model, RngStream, generate_cells

WINDOW = RectWindow.square(0.0, 20.0)


def marked(pattern: PointPattern, values) -> MarkedPointPattern:
    values = np.asarray(values, dtype=float)
    return MarkedPointPattern(pattern, {"area": values, "perimeter": values, "corners": np.full(pattern.n, 4.0)})


def test_translation_weight():
    assert translation_weight(RectWindow(0.0, 0.0, 10.0, 8.0), (3.0, -2.0)) == 42.0
    assert translation_weight(WINDOW, (0.0, 0.0)) == WINDOW.area
    with pytest.raises(ZeroOverlap):
        translation_weight(WINDOW, (20.0, 0.0))


def test_kernel():
    k = KernelSpec(0.5)
    assert k(np.array([0.0]))[0] == pytest.approx(1.5)
    assert k(np.array([0.5, -0.6]))[0] == 0.0
    u = np.linspace(-0.5, 0.5, 20001)
    assert trapezoid(k(u), u) == pytest.approx(1.0, abs=1e-6), "核函数积分为1"
    assert KernelSpec.stoyan(4.0).h == pytest.approx(0.075)
    with pytest.raises(ValueError):
        KernelSpec(0.0)


def test_insufficient_points():
    p = PointPattern(np.array([[1.0, 1.0]]), WINDOW)
    with pytest.raises(InsufficientPoints):
        estimate_K(p, np.linspace(0.0, 1.0, 5))


def test_two_point_K():
    """两个点时 K 的值可以手算"""
    p = PointPattern(np.array([[5.0, 5.0], [8.0, 9.0]]), WINDOW)
    r = np.array([4.0, 5.0, 6.0])
    k = estimate_K(p, r)
    expected = 2.0 / ((20.0 - 3.0) * (20.0 - 4.0)) / (2.0 / WINDOW.area ** 2)
    assert k.values[0] == 0.0
    assert k.values[1] == pytest.approx(expected) and k.values[2] == pytest.approx(expected)
    assert list(k.n_pairs) == [0, 2, 2], "有序点对计数"


def test_csr_calibration():
    """Poisson 点模式上 K(r) ≈ πr²，g ≈ 1"""
    window = RectWindow.square(0.0, 50.0)
    r = np.linspace(0.0, 3.0, 61)
    patterns = [simulate_csr(window, 1.0, RngStream(17, i)) for i in range(100)]
    intensity = sum(p.n for p in patterns) / (len(patterns) * window.area)
    kernel = KernelSpec.stoyan(intensity)
    K = pool_curves([k_sums(p, r) for p in patterns])
    g = pool_curves([pcf_sums(p, r, kernel) for p in patterns])
    assert np.allclose(K.values[1:], math.pi * r[1:] ** 2, rtol=0.1, atol=0.05), "K 偏离 πr²"
    mask = r >= kernel.h
    assert np.max(np.abs(g.values[mask] - 1.0)) <= 0.05, "g 偏离 1"
    assert math.isnan(g.values[0]), "g(0) 无定义"
    assert g.boundary_biased[1] and not g.boundary_biased[-1]
    L = estimate_L(patterns[0], r)
    assert np.allclose(L.values[20:], r[20:], atol=0.25)


def test_pcf_integrates_to_K():
    window = RectWindow.square(0.0, 30.0)
    r = np.linspace(0.0, 4.0, 401)
    patterns = [simulate_csr(window, 1.0, RngStream(23, i)) for i in range(20)]
    kernel = KernelSpec(0.15)
    K = pool_curves([k_sums(p, r) for p in patterns])
    g = pool_curves([pcf_sums(p, r, kernel) for p in patterns])
    integrand = np.nan_to_num(2.0 * math.pi * r * g.values)
    K_from_g = np.concatenate([[0.0], np.cumsum(0.5 * (integrand[1:] + integrand[:-1]) * np.diff(r))])
    assert K_from_g[-1] == pytest.approx(K.values[-1], rel=0.02), "∫ 2πr g(r) dr 应与 K 一致"


def test_constant_marks_give_one():
    p = simulate_csr(WINDOW, 1.0, RngStream(29, 0))
    r = np.linspace(1.0, 4.0, 7)
    kernel = KernelSpec.stoyan(p.intensity)
    k = estimate_kmm(marked(p, np.full(p.n, 2.5)), MarkSelector.AREA, r, kernel)
    assert np.allclose(k.values, 1.0, atol=1e-12), "常数标记的 k_mm 恒为1"


def test_kmm_invariant_under_mark_scaling():
    p = simulate_csr(WINDOW, 1.0, RngStream(31, 0))
    marks = RngStream(31, 1).generator.gamma(2.0, size=p.n)
    r = np.linspace(1.0, 4.0, 7)
    kernel = KernelSpec.stoyan(p.intensity)
    a = estimate_kmm(marked(p, marks), MarkSelector.AREA, r, kernel)
    b = estimate_kmm(marked(p, 3.0 * marks), MarkSelector.AREA, r, kernel)
    assert np.allclose(a.values, b.values, rtol=1e-12)
    with pytest.raises(ZeroDenominator):
        estimate_kmm(marked(p, np.zeros(p.n)), MarkSelector.AREA, r, kernel)


def test_translation_covariance():
    p = simulate_csr(WINDOW, 1.0, RngStream(37, 0))
    shifted = PointPattern(p.points + [5.0, -3.0], RectWindow(5.0, -3.0, 25.0, 17.0))
    r = np.linspace(0.5, 4.0, 8)
    kernel = KernelSpec(0.3)
    assert np.allclose(estimate_pcf(p, r, kernel).values, estimate_pcf(shifted, r, kernel).values, rtol=1e-9)


def test_points_outside_window_rejected():
    with pytest.raises(ValueError):
        PointPattern(np.array([[1.0, 1.0], [25.0, 1.0]]), WINDOW)


def test_extract_centres_from_tessellation():
    window = RectWindow.square(-20.0, 20.0)
    sub = RectWindow.square(-10.0, 10.0)
    cells = generate_cells(Model.PLT, 1.0, DirectionLaw.isotropic(), window, RngStream(41, 0))
    C = build_complex(cells, window)
    p = extract_centres(C, sub)
    assert p.pattern.n > 0 and np.all(sub.contains_points(p.pattern.points))
    assert np.all(p.mark(MarkSelector.CORNERS) >= 3)
    assert p.mark(MarkSelector.AREA).sum() < window.area
    with pytest.raises(ValueError):
        extract_centres(C, RectWindow.square(-30.0, 30.0))


def test_estimates_invariant_under_relabelling():
    """点的编号打乱后 g 与 k_mm 逐位相同"""
    p = simulate_csr(WINDOW, 1.0, RngStream(43, 0))
    marks = RngStream(43, 1).generator.gamma(2.0, size=p.n)
    perm = RngStream(43, 2).generator.permutation(p.n)
    shuffled = PointPattern(p.points[perm], p.window)
    r = np.linspace(0.0, 4.0, 41)
    kernel = KernelSpec.stoyan(p.intensity)
    assert np.array_equal(estimate_pcf(p, r, kernel).values, estimate_pcf(shuffled, r, kernel).values, equal_nan=True)
    a = estimate_kmm(marked(p, marks), MarkSelector.AREA, r[1:], kernel)
    b = estimate_kmm(marked(shuffled, marks[perm]), MarkSelector.AREA, r[1:], kernel)
    assert np.array_equal(a.values, b.values, equal_nan=True)


def test_extract_centres_unit_grid():
    cells = [RectWindow(x, y, x + 1, y + 1).as_polygon() for y in range(2) for x in range(2)]
    p = extract_centres(cells, RectWindow.square(0.0, 2.0))
    points = p.pattern.points[np.lexsort((p.pattern.points[:, 0], p.pattern.points[:, 1]))]
    assert np.allclose(points, [[0.5, 0.5], [1.5, 0.5], [0.5, 1.5], [1.5, 1.5]])
    assert np.allclose(p.mark(MarkSelector.AREA), 1.0) and np.allclose(p.mark(MarkSelector.PERIMETER), 4.0)
    assert np.all(p.mark(MarkSelector.CORNERS) == 4)


def test_plt_centres_cluster_more_than_stit():
    """小距离上 PLT 的对相关函数高于 STIT；面积与周长的 k_mm 小于1，且 PLT 低于 STIT"""
    window = RectWindow.square(-25.0, 25.0)
    sub = RectWindow.square(-15.0, 15.0)
    patterns = {}
    for model in (Model.PLT, Model.STIT):
        patterns[model] = [
            extract_centres(generate_cells(model, 1.0, DirectionLaw.isotropic(), window, RngStream(47, rep)), sub)
            for rep in range(10)
        ]
    n_total = sum(p.pattern.n for ps in patterns.values() for p in ps)
    kernel = KernelSpec.stoyan(n_total / (20 * sub.area))
    r = np.linspace(0.2, 1.0, 17)
    g = {m: np.nanmean(pool_curves([pcf_sums(p.pattern, r, kernel) for p in ps]).values) for m, ps in patterns.items()}
    assert g[Model.PLT] > g[Model.STIT], f"g: {g}"
    for mark in (MarkSelector.AREA, MarkSelector.PERIMETER):
        k = {m: np.nanmean(pool_curves([kmm_sums(p, mark, r, kernel) for p in ps]).values)
             for m, ps in patterns.items()}
        assert k[Model.PLT] < k[Model.STIT] < 1.0, f"k_mm({mark.value}): {k}"


def test_default_r_grid():
    r = default_r_grid(RectWindow(0.0, 0.0, 60.0, 40.0))
    assert len(r) == 512 and r[0] == 0.0 and r[-1] == pytest.approx(10.0)


if __name__ == "__main__":
    pytest.main([__file__])
