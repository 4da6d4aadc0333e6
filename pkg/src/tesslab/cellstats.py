#!/usr/bin/env python
# -*- coding: utf-8 -*-
# @time    : 2024/8/21 16:32
# @author  : timger/yishenggudou
"""典型单元及其邻域的统计量（minus sampling 边缘校正）

被观测到的单元按 Miles-Horvitz-Thompson 权重 |W| / ((W - Δx)(H - Δy)) 加权，Δx、Δy 是所需区域
（单元本身，或单元及其全部邻居）外接矩形的边长，即该区域平移后仍完整落在窗口内的概率的倒数。
重复之间的合并只做充分统计量的加法，比值在最后一步才计算；标准误差用按窗口的
jackknife（同一窗口内的单元相互依赖，不同窗口相互独立）。
"""
import logging
import math
from dataclasses import dataclass, fields
from enum import Enum
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import stats

from tesslab.complex import TessellationComplex, cell_topology
from tesslab.exceptions import EmptySample
from tesslab.geometry import RectWindow

logger = logging.getLogger(__name__)


class CellCharacteristic(Enum):
    CORNERS = "C0"
    AREA = "V2"
    PERIMETER = "V1"

    def of(self, record: "CellRecord") -> float:
        if self is CellCharacteristic.CORNERS:
            return float(record.corners)
        if self is CellCharacteristic.AREA:
            return record.area
        return record.perimeter


CHARACTERISTICS = (CellCharacteristic.CORNERS, CellCharacteristic.AREA, CellCharacteristic.PERIMETER)


class Weight(Enum):
    N0 = "n0"
    N1 = "n1"


@dataclass(frozen=True)
class CellRecord:
    cell_id: int
    area: float
    perimeter: float
    corners: int
    n0: int
    n1: int
    neighbors: Tuple[Tuple[int, int], ...]
    neighbor_distinct_count: int
    touches_boundary: bool
    eligible: bool
    typical_weight: float = 0.0  # 单元本身的 MHT 权重，接触边界时为 0
    neighborhood_weight: float = 0.0  # 单元及其邻居的 MHT 权重，不可用时为 0

    def own(self) -> np.ndarray:
        return np.array([c.of(self) for c in CHARACTERISTICS])


def _mht_weight(window: RectWindow, lo: np.ndarray, hi: np.ndarray) -> float:
    dx, dy = hi - lo
    free = (window.width - dx) * (window.height - dy)
    return window.area / free if dx < window.width and dy < window.height and free > 0 else 0.0


def minus_sample(C: TessellationComplex) -> List[CellRecord]:
    """单元及其所有邻居都不接触窗口边界时，该单元才进入邻域统计"""
    topology = [cell_topology(C, i) for i in range(C.n_cells)]
    touches = [t.touches_boundary for t in topology]
    lo = np.array([c.vertices.min(axis=0) for c in C.cells]).reshape(-1, 2)
    hi = np.array([c.vertices.max(axis=0) for c in C.cells]).reshape(-1, 2)
    records = []
    for t, cell, adjacency in zip(topology, C.cells, C.adjacency, strict=True):
        i = t.cell_id
        eligible = not t.touches_boundary and not any(touches[j] for j, _ in adjacency)
        typical_weight = 0.0 if t.touches_boundary else _mht_weight(C.window, lo[i], hi[i])
        neighborhood_weight = 0.0
        if eligible:
            members = [i] + [j for j, _ in adjacency]
            neighborhood_weight = _mht_weight(C.window, lo[members].min(axis=0), hi[members].max(axis=0))
        records.append(CellRecord(
            cell_id=i,
            area=cell.area,
            perimeter=cell.perimeter,
            corners=t.corners,
            n0=t.n0,
            n1=t.n1,
            neighbors=adjacency,
            neighbor_distinct_count=t.neighbor_distinct_count,
            touches_boundary=t.touches_boundary,
            eligible=eligible,
            typical_weight=typical_weight,
            neighborhood_weight=neighborhood_weight,
        ))
    logger.debug(f"minus sampling: {sum(r.eligible for r in records)}/{len(records)} 个单元可用")
    return records


@dataclass(frozen=True)
class _Additive:
    """各字段可逐项相加减的充分统计量"""

    def _combine(self, other, op: Callable):
        return type(self)(**{f.name: op(getattr(self, f.name), getattr(other, f.name)) for f in fields(self)})

    def __add__(self, other):
        return self._combine(other, lambda x, y: x + y)

    def __sub__(self, other):
        return self._combine(other, lambda x, y: x - y)


@dataclass(frozen=True)
class NeighborhoodSums(_Additive):
    """一次重复的加权充分统计量；三元数组按 (角点数, 面积, 周长) 排列，w 为邻域 MHT 权重"""
    n_cells: float  # 未加权的可用单元数
    weight_sum: float
    n_neighbors: float
    n_distinct: float
    nb_sum: np.ndarray  # Σ_x w Σ_{y∈N(x)} f(y)
    nb_bar: np.ndarray  # Σ_x w (1/n1(x)) Σ_{y∈N(x)} f(y)
    own_sum: np.ndarray  # Σ_x w f(x)
    n0_sum: float
    n1_sum: float
    n0_weighted: np.ndarray  # Σ_x w n0(x) f(x)
    n1_weighted: np.ndarray  # Σ_x w n1(x) f(x)
    cross_lhs: float  # Σ_x w area(x) Σ_y perimeter(y)
    cross_rhs: float  # Σ_x w perimeter(x) Σ_y area(y)


def neighborhood_sums(records: Sequence[CellRecord]) -> NeighborhoodSums:
    """没有可用单元的重复给出全零的统计量，合并后仍为空时才报错"""
    by_id = {r.cell_id: r for r in records}
    eligible = [r for r in records if r.eligible]
    nb_sum, nb_bar, own_sum = np.zeros(3), np.zeros(3), np.zeros(3)
    n0_weighted, n1_weighted = np.zeros(3), np.zeros(3)
    weight_sum = n_neighbors = n_distinct = n0_sum = n1_sum = cross_lhs = cross_rhs = 0.0
    for r in eligible:
        w = r.neighborhood_weight
        own = r.own()
        around = np.zeros(3)
        for j, _ in r.neighbors:
            around += by_id[j].own()
        count = len(r.neighbors)
        weight_sum += w
        nb_sum += w * around
        nb_bar += w * around / count
        own_sum += w * own
        n0_weighted += w * r.n0 * own
        n1_weighted += w * r.n1 * own
        n_neighbors += w * count
        n_distinct += w * r.neighbor_distinct_count
        n0_sum += w * r.n0
        n1_sum += w * r.n1
        cross_lhs += w * r.area * around[2]
        cross_rhs += w * r.perimeter * around[1]
    return NeighborhoodSums(
        n_cells=float(len(eligible)),
        weight_sum=weight_sum,
        n_neighbors=n_neighbors,
        n_distinct=n_distinct,
        nb_sum=nb_sum,
        nb_bar=nb_bar,
        own_sum=own_sum,
        n0_sum=n0_sum,
        n1_sum=n1_sum,
        n0_weighted=n0_weighted,
        n1_weighted=n1_weighted,
        cross_lhs=cross_lhs,
        cross_rhs=cross_rhs,
    )


def _ratio(a: float, b: float) -> float:
    return float(a) / float(b) if b else float("nan")


def _jackknife(parts: Sequence[_Additive], statistic: Callable[[_Additive], Dict[str, float]]) -> Dict[str, float]:
    total = sum(parts[1:], parts[0])
    keys = statistic(total).keys()
    n = len(parts)
    if n < 2:
        return {key: float("nan") for key in keys}
    leave_one_out = [statistic(total - p) for p in parts]
    se = {}
    for key in keys:
        values = np.array([s[key] for s in leave_one_out])
        se[key] = float(math.sqrt((n - 1) / n * np.sum((values - values.mean()) ** 2)))
    return se


STATISTIC_NAMES = (
    "C0_22", "bar_C0", "tilde_C0",
    "V2_22", "bar_V2", "tilde_V2",
    "V1_22", "bar_V1", "tilde_V1",
    "mean_neighbors", "mean_distinct_neighbors",
)


def _neighborhood_statistics(total: NeighborhoodSums) -> Dict[str, float]:
    values = {}
    for k, c in enumerate(CHARACTERISTICS):
        values[f"{c.value}_22"] = _ratio(total.nb_sum[k], total.weight_sum)
        values[f"bar_{c.value}"] = _ratio(total.nb_bar[k], total.weight_sum)
        values[f"tilde_{c.value}"] = _ratio(total.nb_sum[k], total.n_neighbors)
    values["mean_neighbors"] = _ratio(total.n_neighbors, total.weight_sum)
    values["mean_distinct_neighbors"] = _ratio(total.n_distinct, total.weight_sum)
    return values


@dataclass(frozen=True)
class NeighborhoodSummary:
    model: str
    n: int
    C0_22: float
    V2_22: float
    V1_22: float
    bar_C0: float
    bar_V2: float
    bar_V1: float
    tilde_C0: float
    tilde_V2: float
    tilde_V1: float
    mean_neighbors: float
    mean_distinct_neighbors: float
    se: Mapping[str, float]

    def value(self, name: str) -> float:
        return getattr(self, name)


def _as_parts(replications: Sequence[Union[NeighborhoodSums, Sequence[CellRecord]]]) -> List[NeighborhoodSums]:
    parts = [p if isinstance(p, NeighborhoodSums) else neighborhood_sums(p) for p in replications]
    if not parts:
        raise EmptySample("没有任何重复")
    total = sum(parts[1:], parts[0])
    if total.n_cells <= 0:
        raise EmptySample("minus sampling 之后没有可用单元")
    return parts


def neighborhood_summary(
    replications: Sequence[Union[NeighborhoodSums, Sequence[CellRecord]]],
    model: str = "",
) -> NeighborhoodSummary:
    """按重复合并的邻域统计量：和统计量、逐单元平均的 bar 均值与比值形式的 tilde 均值"""
    parts = _as_parts(replications)
    total = sum(parts[1:], parts[0])
    values = _neighborhood_statistics(total)
    se = _jackknife(parts, _neighborhood_statistics)
    logger.debug(f"{model} 邻域统计: n={int(total.n_cells)}, 平均邻居数={values['mean_neighbors']:.4f}")
    return NeighborhoodSummary(model=model, n=int(total.n_cells), se=se, **values)


@dataclass(frozen=True)
class IdentityCheck:
    name: str
    lhs: float
    rhs: float
    se: float

    def within(self, k: float) -> bool:
        # 两边在浮点意义下相等时，即使只有一次重复（se 为 NaN）也算通过
        if math.isclose(self.lhs, self.rhs, rel_tol=1e-9, abs_tol=1e-12):
            return True
        return bool(abs(self.lhs - self.rhs) <= k * self.se)

    @property
    def passed(self) -> bool:
        return self.within(3.0)


def _identity_sides(total: NeighborhoodSums) -> Dict[str, Tuple[float, float]]:
    n = total.weight_sum
    sides = {}
    for k, c in enumerate(CHARACTERISTICS):
        # E Σ_{N(x)} f = E n1 · E_{n1} f
        sides[f"neighbor_sum_{c.value}"] = (_ratio(total.nb_sum[k], n), _ratio(total.n1_weighted[k], n))
    sides["vertex_weighted_C0"] = (
        _ratio(total.nb_sum[0], n),
        _ratio(total.n_neighbors, n) * _ratio(total.n0_weighted[0], total.n0_sum),
    )
    sides["area_perimeter_symmetry"] = (_ratio(total.cross_lhs, n), _ratio(total.cross_rhs, n))
    return sides


def identity_checks(replications: Sequence[Union[NeighborhoodSums, Sequence[CellRecord]]]) -> List[IdentityCheck]:
    """邻域和恒等式、顶点加权恒等式与面积-周长对称性的经验检验"""
    parts = _as_parts(replications)
    total = sum(parts[1:], parts[0])
    sides = _identity_sides(total)
    se = _jackknife(parts, lambda t: {k: lhs - rhs for k, (lhs, rhs) in _identity_sides(t).items()})
    return [IdentityCheck(name, lhs, rhs, se[name]) for name, (lhs, rhs) in sides.items()]


@dataclass(frozen=True)
class TypicalSums(_Additive):
    """不接触边界的单元按自身 MHT 权重 w 累加的充分统计量"""
    n_cells: float
    weight_sum: float
    own_sum: np.ndarray  # Σ w f(x)，按 (角点数, 面积, 周长)
    n0_sum: float
    n1_sum: float
    n_neighbors: float
    n0_weighted: np.ndarray
    n1_weighted: np.ndarray


def typical_sums(records: Iterable[CellRecord]) -> TypicalSums:
    inner = [r for r in records if not r.touches_boundary]
    w = np.array([r.typical_weight for r in inner], dtype=float)
    f = np.array([r.own() for r in inner], dtype=float).reshape(-1, 3)
    n0 = np.array([r.n0 for r in inner], dtype=float)
    n1 = np.array([r.n1 for r in inner], dtype=float)
    count = np.array([len(r.neighbors) for r in inner], dtype=float)
    return TypicalSums(
        n_cells=float(len(inner)),
        weight_sum=float(w.sum()),
        own_sum=w @ f,
        n0_sum=float(w @ n0),
        n1_sum=float(w @ n1),
        n_neighbors=float(w @ count),
        n0_weighted=(w * n0) @ f,
        n1_weighted=(w * n1) @ f,
    )


def _as_typical(source: Union[TypicalSums, Iterable[CellRecord]]) -> TypicalSums:
    total = source if isinstance(source, TypicalSums) else typical_sums(source)
    if total.n_cells <= 0:
        raise EmptySample("没有完整落在窗口内的单元")
    return total


@dataclass(frozen=True)
class CharacteristicMeans:
    corners: float
    area: float
    perimeter: float


def weighted_typical_means(source: Union[TypicalSums, Iterable[CellRecord]], weight: Weight) -> CharacteristicMeans:
    """n0 或 n1 加权典型单元的均值 E[n f] / E[n]"""
    total = _as_typical(source)
    if weight is Weight.N0:
        means = total.n0_weighted / total.n0_sum
    else:
        means = total.n1_weighted / total.n1_sum
    return CharacteristicMeans(*(float(m) for m in means))


@dataclass(frozen=True)
class TypicalCellMeans:
    area: float
    perimeter: float
    corners: float
    n0: float
    n1: float
    neighbors: float


def typical_cell_means(source: Union[TypicalSums, Iterable[CellRecord]]) -> TypicalCellMeans:
    total = _as_typical(source)
    corners, area, perimeter = total.own_sum / total.weight_sum
    return TypicalCellMeans(
        area=float(area),
        perimeter=float(perimeter),
        corners=float(corners),
        n0=total.n0_sum / total.weight_sum,
        n1=total.n1_sum / total.weight_sum,
        neighbors=total.n_neighbors / total.weight_sum,
    )


@dataclass(frozen=True)
class TheoreticalPltValues:
    L_A: float
    N0_22: float
    V2_22: float
    V1_22: float
    tilde_N0: float
    tilde_V2: float
    tilde_V1: float
    V2_zonoid: float
    V2_polar: float


def plt_theoretical(L_A: float) -> TheoreticalPltValues:
    """各向同性 PLT 邻域和统计量的闭式值

    各向同性时关联带状体 Π 的面积为 L_A²/π，其极体 Π° 的面积为 π³/L_A²。
    """
    if not (math.isfinite(L_A) and L_A > 0):
        raise ValueError(f"L_A 必须为有限正数: {L_A}")
    v2_zonoid = L_A ** 2 / math.pi
    v2_polar = math.pi ** 3 / L_A ** 2
    n0 = 0.5 * v2_zonoid * v2_polar + 12.0
    v2 = 0.5 * v2_polar
    v1 = 0.5 * L_A * v2_polar + 4.0 * L_A / v2_zonoid
    # PLT 典型单元平均有 4 个邻居
    return TheoreticalPltValues(L_A, n0, v2, v1, n0 / 4.0, v2 / 4.0, v1 / 4.0, v2_zonoid, v2_polar)


@dataclass(frozen=True)
class TypicalSample:
    """完整落在窗口内的单元的面积、周长及其 MHT 权重，多次重复直接拼接"""
    area: np.ndarray
    perimeter: np.ndarray
    weight: np.ndarray

    def __add__(self, other: "TypicalSample") -> "TypicalSample":
        return TypicalSample(*(np.concatenate([getattr(self, f.name), getattr(other, f.name)]) for f in fields(self)))

    def __len__(self) -> int:
        return len(self.weight)


def typical_sample(records: Iterable[CellRecord]) -> TypicalSample:
    inner = [r for r in records if not r.touches_boundary]
    return TypicalSample(
        area=np.array([r.area for r in inner], dtype=float),
        perimeter=np.array([r.perimeter for r in inner], dtype=float),
        weight=np.array([r.typical_weight for r in inner], dtype=float),
    )


def _effective_size(w: np.ndarray) -> float:
    return float(w.sum() ** 2 / np.sum(w ** 2))


def _weighted_cdf(x: np.ndarray, w: np.ndarray, at: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="stable")
    cumulative = np.concatenate([[0.0], np.cumsum(w[order])]) / w.sum()
    return cumulative[np.searchsorted(x[order], at, side="right")]


def weighted_ks_2samp(x: np.ndarray, wx: np.ndarray, y: np.ndarray, wy: np.ndarray
                      ) -> Tuple[float, float, float, float]:
    """加权经验分布函数的双样本 KS 距离，返回 (D, p 值, 有效样本量 n, m)

    权重相等时与 scipy.stats.ks_2samp 的统计量一致；p 值取 Kolmogorov 极限分布。
    """
    at = np.unique(np.concatenate([x, y]))
    d = float(np.max(np.abs(_weighted_cdf(x, wx, at) - _weighted_cdf(y, wy, at))))
    n, m = _effective_size(wx), _effective_size(wy)
    pvalue = float(stats.kstwobign.sf(d * math.sqrt(n * m / (n + m))))
    return d, pvalue, n, m


@dataclass(frozen=True)
class KsComparison:
    characteristic: str
    statistic: float
    pvalue: float
    critical: float
    n_a: int
    n_b: int

    @property
    def passed(self) -> bool:
        return self.statistic < self.critical


def compare_typical_cells(
    a: Union[TypicalSample, Iterable[CellRecord]],
    b: Union[TypicalSample, Iterable[CellRecord]],
    alpha: float = 0.01,
) -> List[KsComparison]:
    """两组完整单元的面积与周长分布的双样本 KS 比较，临界值按有效样本量计算"""
    a = a if isinstance(a, TypicalSample) else typical_sample(a)
    b = b if isinstance(b, TypicalSample) else typical_sample(b)
    if len(a) == 0 or len(b) == 0:
        raise EmptySample("KS 比较需要两组非空样本")
    out = []
    for name in ("area", "perimeter"):
        d, pvalue, n, m = weighted_ks_2samp(getattr(a, name), a.weight, getattr(b, name), b.weight)
        critical = math.sqrt(-math.log(alpha / 2.0) / 2.0) * math.sqrt((n + m) / (n * m))
        out.append(KsComparison(name, d, pvalue, critical, len(a), len(b)))
    return out


def ks_frame(comparisons: Sequence[KsComparison]) -> pd.DataFrame:
    return pd.DataFrame([
        {"characteristic": c.characteristic, "statistic": c.statistic, "pvalue": c.pvalue,
         "critical": c.critical, "n_a": c.n_a, "n_b": c.n_b, "passed": c.passed}
        for c in comparisons
    ])


TYPICAL_NAMES = (
    "mean_area", "mean_perimeter", "mean_corners", "mean_n0", "mean_n1", "mean_neighbors",
    "n0w_C0", "n0w_V2", "n0w_V1", "n1w_C0", "n1w_V2", "n1w_V1",
)


def typical_frame(typicals: Mapping[str, TypicalSums],
                  extra: Optional[Mapping[str, Mapping[str, float]]] = None) -> pd.DataFrame:
    """典型单元均值表；extra 为每个模型附加的行，例如 L_A 与各板强度的估计"""
    columns = {}
    for model, total in typicals.items():
        means = typical_cell_means(total)
        n0w = weighted_typical_means(total, Weight.N0)
        n1w = weighted_typical_means(total, Weight.N1)
        column = {
            "mean_area": means.area, "mean_perimeter": means.perimeter, "mean_corners": means.corners,
            "mean_n0": means.n0, "mean_n1": means.n1, "mean_neighbors": means.neighbors,
        }
        for prefix, weighted in (("n0w", n0w), ("n1w", n1w)):
            column[f"{prefix}_C0"] = weighted.corners
            column[f"{prefix}_V2"] = weighted.area
            column[f"{prefix}_V1"] = weighted.perimeter
        column.update((extra or {}).get(model, {}))
        columns[model] = column
    frame = pd.DataFrame(columns)
    frame.index.name = "statistic"
    return frame


def table2_frame(summaries: Mapping[str, NeighborhoodSummary], theoretical: Optional[TheoreticalPltValues] = None
                 ) -> pd.DataFrame:
    """邻域统计表：行是统计量，列是模型及其标准误差"""
    frame = pd.DataFrame(index=pd.Index(STATISTIC_NAMES, name="statistic"))
    for model, summary in summaries.items():
        frame[model] = [summary.value(name) for name in STATISTIC_NAMES]
        frame[f"{model}_se"] = [summary.se[name] for name in STATISTIC_NAMES]
    if theoretical is not None:
        known = {
            "C0_22": theoretical.N0_22, "tilde_C0": theoretical.tilde_N0,
            "V2_22": theoretical.V2_22, "tilde_V2": theoretical.tilde_V2,
            "V1_22": theoretical.V1_22, "tilde_V1": theoretical.tilde_V1,
            "mean_neighbors": 4.0, "mean_distinct_neighbors": 4.0,
        }
        frame["PLT_theoretic"] = [known.get(name, float("nan")) for name in STATISTIC_NAMES]
    return frame
