#!/usr/bin/env python
# -*- coding: utf-8 -*-
# @time    : 2024/8/21 16:32
# @author  : timger/yishenggudou
import math
from functools import lru_cache

import numpy as np
import pytest
from scipy import stats

from tesslab.cellstats import (
    STATISTIC_NAMES,
    TYPICAL_NAMES,
    CellCharacteristic,
    Weight,
    compare_typical_cells,
    identity_checks,
    minus_sample,
    neighborhood_sums,
    neighborhood_summary,
    plt_theoretical,
    table2_frame,
    typical_cell_means,
    typical_frame,
    typical_sample,
    typical_sums,
    weighted_ks_2samp,
    weighted_typical_means,
)
from tesslab.complex import build_complex
from tesslab.exceptions import EmptySample
from tesslab.geometry import RectWindow
from tesslab.tessgen import DirectionLaw, Model, RngStream, generate_cells


def grid_complex(n: int):
    cells = [RectWindow(x, y, x + 1, y + 1).as_polygon() for y in range(n) for x in range(n)]
    return build_complex(cells, RectWindow.square(0.0, float(n)))


def test_minus_sample_grid():
    """5×5 网格中只有中心单元及其邻居都不接触边界"""
    records = minus_sample(grid_complex(5))
    eligible = [r for r in records if r.eligible]
    assert [r.cell_id for r in eligible] == [12], "只有中心单元可用"
    assert eligible[0].n0 == eligible[0].n1 == 4


def test_grid_neighborhood_summary():
    summary = neighborhood_summary([minus_sample(grid_complex(5))], model="grid")
    assert summary.n == 1
    assert summary.C0_22 == 16.0 and summary.bar_C0 == 4.0 and summary.tilde_C0 == 4.0
    assert summary.V2_22 == pytest.approx(4.0) and summary.tilde_V2 == pytest.approx(1.0)
    assert summary.V1_22 == pytest.approx(16.0)
    assert summary.mean_neighbors == 4.0 and summary.mean_distinct_neighbors == 4.0
    assert math.isnan(summary.se["C0_22"]), "只有一次重复时标准误差无定义"


def test_minus_sample_leaves_nothing():
    records = minus_sample(grid_complex(3))
    empty = neighborhood_sums(records)
    assert empty.n_cells == 0 and empty.weight_sum == 0.0, "没有可用单元的重复给出零统计量"
    with pytest.raises(EmptySample):
        neighborhood_summary([records])
    with pytest.raises(EmptySample):
        identity_checks([records, records])
    with pytest.raises(EmptySample):
        neighborhood_summary([])


def test_empty_replication_pools_with_others():
    """空的重复参与合并而不中断，只有合并后为空时才报错"""
    grid3, grid5 = minus_sample(grid_complex(3)), minus_sample(grid_complex(5))
    summary = neighborhood_summary([grid3, grid5])
    assert summary.n == 1 and summary.C0_22 == 16.0
    assert all(c.passed for c in identity_checks([grid3, grid5, grid5]))


def test_mht_weights_on_grid():
    """中心单元的邻域外接矩形为 3×3，在 5×5 窗口中的权重为 25/4；内部单元自身的权重为 25/16"""
    records = minus_sample(grid_complex(5))
    assert records[12].neighborhood_weight == pytest.approx(25.0 / 4.0)
    assert records[6].typical_weight == pytest.approx(25.0 / 16.0) and records[6].neighborhood_weight == 0.0
    assert records[0].typical_weight == 0.0, "接触边界的单元不进入典型单元样本"
    assert neighborhood_sums(records).weight_sum == pytest.approx(6.25)


def test_sums_pool_by_addition():
    records = minus_sample(grid_complex(5))
    part = neighborhood_sums(records)
    doubled = part + part
    assert doubled.n_cells == 2 and np.allclose(doubled.nb_sum, 2 * part.nb_sum)
    assert (doubled - part).n_cells == 1
    summary = neighborhood_summary([part, part])
    assert summary.C0_22 == 16.0 and summary.se["C0_22"] == 0.0, "相同的重复之间没有离散"


def test_identities_exact_on_grid():
    checks = identity_checks([minus_sample(grid_complex(5))] * 2)
    names = {c.name for c in checks}
    assert names == {"neighbor_sum_C0", "neighbor_sum_V2", "neighbor_sum_V1",
                     "vertex_weighted_C0", "area_perimeter_symmetry"}
    assert all(c.passed for c in checks), "网格上的恒等式两边完全相等"


def test_weighted_and_typical_means():
    records = minus_sample(grid_complex(5))
    means = weighted_typical_means(records, Weight.N0)
    assert (means.corners, means.area, means.perimeter) == (4.0, 1.0, 4.0)
    typical = typical_cell_means(records)
    assert typical.neighbors == 4.0 and typical.n1 == 4.0
    assert CellCharacteristic.AREA.of(records[12]) == 1.0


def test_plt_theoretical_values():
    v = plt_theoretical(1.0)
    assert (round(v.N0_22, 5), round(v.V2_22, 5), round(v.V1_22, 5)) == (16.93480, 15.50314, 28.06951)
    assert (round(v.tilde_N0, 5), round(v.tilde_V2, 5), round(v.tilde_V1, 5)) == (4.23370, 3.87579, 7.01738)
    assert v.V2_zonoid * v.V2_polar == pytest.approx(math.pi ** 2)
    v2 = plt_theoretical(2.0)
    assert v2.N0_22 == pytest.approx(16.93480, abs=1e-5), "角点和与 L_A 无关"
    assert v2.V2_22 == pytest.approx(3.875786, abs=1e-6)
    assert v2.V1_22 == pytest.approx(14.03476, abs=1e-5)
    with pytest.raises(ValueError):
        plt_theoretical(0.0)


def test_table2_frame_layout():
    summary = neighborhood_summary([minus_sample(grid_complex(5))] * 2, model="grid")
    frame = table2_frame({"GRID": summary}, plt_theoretical(1.0))
    assert list(frame.index) == list(STATISTIC_NAMES)
    assert list(frame.columns) == ["GRID", "GRID_se", "PLT_theoretic"]
    assert frame.loc["C0_22", "PLT_theoretic"] == pytest.approx(16.9348, abs=1e-4)
    assert math.isnan(frame.loc["bar_C0", "PLT_theoretic"]), "bar 均值没有闭式值"


def simulated_records(model: Model, seed: int, reps: int = 3, half_width: float = 20.0):
    window = RectWindow.square(-half_width, half_width)
    out = []
    for rep in range(reps):
        cells = generate_cells(model, 1.0, DirectionLaw.isotropic(), window, RngStream(seed, rep))
        out.append(minus_sample(build_complex(cells, window)))
    return out


@lru_cache(maxsize=None)
def pooled_records(model: Model):
    return tuple(simulated_records(model, 17, reps=8, half_width=25.0))


def test_plt_neighborhood_sanity():
    summary = neighborhood_summary(simulated_records(Model.PLT, 3), model="plt")
    assert 3.8 < summary.mean_neighbors < 4.3, f"PLT 平均邻居数 {summary.mean_neighbors}"
    assert 14.0 < summary.C0_22 < 20.0, f"PLT C0_22 = {summary.C0_22}"
    assert all(math.isfinite(summary.se[name]) for name in STATISTIC_NAMES)


def test_stit_has_more_neighbors_than_plt():
    plt = neighborhood_summary(simulated_records(Model.PLT, 5), model="plt")
    stit = neighborhood_summary(simulated_records(Model.STIT, 5), model="stit")
    assert stit.mean_neighbors > plt.mean_neighbors + 1.0, "STIT 的典型单元约有6个邻居，PLT 约有4个"


@pytest.mark.parametrize("model", [Model.PLT, Model.STIT])
def test_identities_hold_on_simulations(model):
    """加权后的恒等式两边在 t 分布临界值倍的 jackknife 标准误差内一致"""
    records = pooled_records(model)
    k = float(stats.t.ppf(0.9995, len(records) - 1))
    for check in identity_checks(list(records)):
        assert check.within(k), f"{model.value} {check.name}: {check.lhs} vs {check.rhs} (se {check.se})"


@pytest.mark.parametrize("model", [Model.PLT, Model.STIT])
def test_tilde_below_bar(model):
    summary = neighborhood_summary(list(pooled_records(model)), model=model.value)
    for f in ("C0", "V2", "V1"):
        ratio = summary.value(f"tilde_{f}") / summary.value(f"bar_{f}")
        assert 0.93 <= ratio <= 0.99, f"{model.value} tilde_{f}/bar_{f} = {ratio}"


def test_mean_neighbors_match_models():
    plt = neighborhood_summary(list(pooled_records(Model.PLT)))
    stit = neighborhood_summary(list(pooled_records(Model.STIT)))
    assert plt.mean_neighbors == pytest.approx(4.0, abs=0.1), f"PLT 平均邻居数 {plt.mean_neighbors}"
    assert stit.mean_neighbors == pytest.approx(6.0, abs=0.15), f"STIT 平均邻居数 {stit.mean_neighbors}"


def test_typical_cells_coincide_between_models():
    """PLT 与 STIT 的典型单元面积、周长分布相同，KS 距离低于临界值"""
    plt = [r for records in pooled_records(Model.PLT) for r in records]
    stit = [r for records in pooled_records(Model.STIT) for r in records]
    for comparison in compare_typical_cells(plt, stit):
        assert comparison.passed, f"{comparison.characteristic}: D={comparison.statistic}, c={comparison.critical}"
    plt_means, stit_means = typical_cell_means(plt), typical_cell_means(stit)
    assert plt_means.area == pytest.approx(math.pi, rel=0.1), "L_A=1 时典型单元平均面积为 π"
    assert plt_means.perimeter == pytest.approx(stit_means.perimeter, rel=0.05)


def test_compare_typical_cells_mechanics():
    a = [r for records in simulated_records(Model.PLT, 7, reps=2) for r in records]
    same = compare_typical_cells(a, a)
    assert [c.characteristic for c in same] == ["area", "perimeter"]
    assert all(c.statistic == 0.0 and c.passed for c in same), "同一样本的 KS 距离为0"
    sample = typical_sample(a)
    n = sample.weight.sum() ** 2 / np.sum(sample.weight ** 2)
    expected = math.sqrt(-math.log(0.005) / 2.0) * math.sqrt(2.0 / n)
    assert same[0].critical == pytest.approx(expected)
    assert same[0].n_a == len(sample) == sum(not r.touches_boundary for r in a)


def test_weighted_ks_matches_scipy_for_equal_weights():
    rng = np.random.default_rng(3)
    x, y = rng.exponential(size=200), rng.exponential(size=150)
    d, _, n, m = weighted_ks_2samp(x, np.ones(200), y, np.full(150, 2.0))
    assert d == pytest.approx(stats.ks_2samp(x, y).statistic)
    assert (n, m) == (pytest.approx(200.0), pytest.approx(150.0))


def test_typical_frame_layout():
    records = minus_sample(grid_complex(5))
    frame = typical_frame({"GRID": typical_sums(records)}, {"GRID": {"L_A": 2.0}})
    assert list(frame.index) == list(TYPICAL_NAMES) + ["L_A"]
    assert frame.loc["mean_neighbors", "GRID"] == 4.0 and frame.loc["n1w_V1", "GRID"] == 4.0
    assert frame.loc["L_A", "GRID"] == 2.0
    with pytest.raises(EmptySample):
        typical_cell_means(minus_sample(grid_complex(2)))


if __name__ == "__main__":
    pytest.main([__file__])
