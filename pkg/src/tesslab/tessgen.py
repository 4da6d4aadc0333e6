#!/usr/bin/env python
# -*- coding: utf-8 -*-
# @time    : 2024/8/21 16:32
# @author  : timger/yishenggudou
"""在矩形窗口内生成 Poisson 直线镶嵌 (PLT) 与 STIT 镶嵌

两种模型使用同一个参数 L_A：PLT 的直线强度 gamma 与 STIT 的构造时间 t 都等于边长密度。
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Sequence, Tuple

import numpy as np

from tesslab.exceptions import DegenerateGeometry, DivisionLimitExceeded, NoIntersection, ReplicationAborted
from tesslab.geometry import (
    EPS_POINT,
    ConvexPolygon,
    Line,
    RectWindow,
    polygon_diameter,
    polygon_perimeter,
    split_polygon,
    support_width,
)

logger = logging.getLogger(__name__)

MAX_DEGENERATE = 10  # 单次重复允许的退化切分次数
MAX_DIVISIONS = 1_000_000  # 每个窗口的 STIT 分裂上限

_U64 = 2 ** 64


class Model(Enum):
    PLT = "plt"
    STIT = "stit"


class LawKind(Enum):
    ISOTROPIC = "isotropic"
    DISCRETE = "discrete"


@dataclass(frozen=True)
class DirectionLaw:
    """法向方向分布 R：各向同性，或 [0, π) 上的有限原子分布"""
    kind: LawKind = LawKind.ISOTROPIC
    atoms: Tuple[Tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind is LawKind.ISOTROPIC:
            if self.atoms:
                raise ValueError("各向同性分布不接受原子")
            return
        if len({phi for phi, _ in self.atoms}) < 2:
            raise ValueError("离散方向分布至少需要两个不同的原子，否则方向不能张成平面")
        for phi, weight in self.atoms:
            if not 0.0 <= phi < math.pi:
                raise ValueError(f"原子角度必须在 [0, π) 内: {phi}")
            if not weight > 0.0:
                raise ValueError(f"原子权重必须为正: {weight}")
        total = sum(weight for _, weight in self.atoms)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"原子权重之和必须为1，实际为 {total}")

    @classmethod
    def isotropic(cls) -> "DirectionLaw":
        return cls()

    @classmethod
    def discrete(cls, atoms: Sequence[Tuple[float, float]]) -> "DirectionLaw":
        return cls(LawKind.DISCRETE, tuple((float(phi), float(w)) for phi, w in atoms))

    @classmethod
    def parse(cls, text: str) -> "DirectionLaw":
        """解析 `isotropic` 或 `atoms:phi1:w1,phi2:w2,...`"""
        text = text.strip()
        if text == "isotropic":
            return cls.isotropic()
        if not text.startswith("atoms:"):
            raise ValueError(f"无法识别的方向分布: {text}")
        atoms = []
        for item in text[len("atoms:"):].split(","):
            try:
                phi, weight = item.split(":")
                atoms.append((float(phi), float(weight)))
            except ValueError as e:
                raise ValueError(f"无法解析的原子: {item!r}") from e
        return cls.discrete(atoms)

    def describe(self) -> str:
        if self.kind is LawKind.ISOTROPIC:
            return "isotropic"
        return "atoms:" + ",".join(f"{phi!r}:{w!r}" for phi, w in self.atoms)

    @property
    def angles(self) -> np.ndarray:
        return np.array([phi for phi, _ in self.atoms])

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.atoms])

    def sample(self, generator: np.random.Generator, n: int) -> np.ndarray:
        if self.kind is LawKind.ISOTROPIC:
            return generator.uniform(0.0, math.pi, size=n)
        return self.angles[generator.choice(len(self.atoms), size=n, p=self.weights)]


@dataclass
class RngStream:
    """可复现的随机流；相同的 (seed, stream_id, attempt) 给出逐位相同的输出"""
    seed: int
    stream_id: int
    attempt: int = 0
    generator: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("seed", "stream_id", "attempt"):
            value = getattr(self, name)
            if not 0 <= value < _U64:
                raise ValueError(f"{name} 必须是64位无符号整数: {value}")
        sequence = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, self.attempt))
        self.generator = np.random.Generator(np.random.PCG64(sequence))

    def retry(self) -> "RngStream":
        """同一重复的下一个子流，用于退化事件过多后的重试"""
        return RngStream(self.seed, self.stream_id, self.attempt + 1)


@dataclass(frozen=True)
class PltParams:
    gamma: float
    law: DirectionLaw
    window: RectWindow

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and self.gamma > 0):
            raise ValueError(f"直线强度必须为有限正数: {self.gamma}")


@dataclass(frozen=True)
class StitParams:
    t: float
    law: DirectionLaw
    window: RectWindow

    def __post_init__(self):
        if not (math.isfinite(self.t) and self.t > 0):
            raise ValueError(f"构造时间必须为有限正数: {self.t}")


def sample_poisson_lines(params: PltParams, rng: RngStream) -> List[Line]:
    """与窗口外接圆相交的 Poisson 直线"""
    g = rng.generator
    r0 = params.window.circumradius
    n = int(g.poisson(params.gamma * 2.0 * r0))
    phis = params.law.sample(g, n)
    offsets = g.uniform(-r0, r0, size=n)
    centre = params.window.centre
    ps = np.cos(phis) * centre[0] + np.sin(phis) * centre[1] + offsets
    logger.debug(f"采样直线 {n} 条 (gamma={params.gamma}, R0={r0:.3f})")
    return [Line.normalized(float(p), float(phi)) for p, phi in zip(ps, phis, strict=True)]


class _CellStore:
    """单元列表及其外接圆，用于快速筛选可能被直线击中的单元"""

    def __init__(self, first: ConvexPolygon):
        self.cells: List[ConvexPolygon] = []
        self._centres = np.empty((256, 2))
        self._radii = np.empty(256)
        self.append(first)

    def _store_bound(self, i: int, cell: ConvexPolygon):
        centre = cell.vertices.mean(axis=0)
        self._centres[i] = centre
        self._radii[i] = np.hypot(*(cell.vertices - centre).T).max() + EPS_POINT

    def append(self, cell: ConvexPolygon):
        i = len(self.cells)
        if i == len(self._radii):
            self._centres = np.concatenate([self._centres, np.empty_like(self._centres)])
            self._radii = np.concatenate([self._radii, np.empty_like(self._radii)])
        self.cells.append(cell)
        self._store_bound(i, cell)

    def replace(self, i: int, cell: ConvexPolygon):
        self.cells[i] = cell
        self._store_bound(i, cell)

    def candidates(self, line: Line) -> np.ndarray:
        n = len(self.cells)
        dist = np.abs(self._centres[:n] @ line.normal - line.p)
        return np.nonzero(dist < self._radii[:n])[0]


def build_plt(lines: Sequence[Line], window: RectWindow, max_degenerate: int = MAX_DEGENERATE) -> List[ConvexPolygon]:
    """逐条直线切分所有被击中的单元，得到窗口内的 PLT 单元"""
    store = _CellStore(window.as_polygon())
    skipped = 0
    for line in lines:
        for i in store.candidates(line):
            try:
                plus, minus = split_polygon(store.cells[i], line)
            except NoIntersection:
                continue
            except DegenerateGeometry as e:
                skipped += 1
                logger.debug(f"跳过退化切分 #{skipped}: {e}")
                if skipped > max_degenerate:
                    raise ReplicationAborted(f"PLT 退化切分次数超过 {max_degenerate}") from e
                continue
            store.replace(int(i), plus)
            store.append(minus)
    logger.debug(f"PLT 构造完成: {len(lines)} 条直线, {len(store.cells)} 个单元, 跳过 {skipped} 次")
    return list(store.cells)


def cell_hitting_rate(P: ConvexPolygon, law: DirectionLaw) -> float:
    """单元寿命的指数分布参数，即 R 加权的平均宽度"""
    if law.kind is LawKind.ISOTROPIC:
        return polygon_perimeter(P) / math.pi
    return float(sum(w * support_width(P, phi) for phi, w in law.atoms))


def sample_dividing_line(P: ConvexPolygon, law: DirectionLaw, rng: RngStream) -> Line:
    """按限制在击中 P 的直线上的测度 λ⊗R 采样一条分割线"""
    g = rng.generator
    while True:
        if law.kind is LawKind.ISOTROPIC:
            # 拒绝采样：接受概率 width(phi) / diameter
            diameter = polygon_diameter(P)
            while True:
                phi = float(g.uniform(0.0, math.pi))
                if g.uniform() * diameter < support_width(P, phi):
                    break
        else:
            widths = np.array([w * support_width(P, a) for a, w in law.atoms])
            phi = float(law.angles[g.choice(len(widths), p=widths / widths.sum())])
        proj = P.vertices @ np.array((math.cos(phi), math.sin(phi)))
        lo, hi = float(proj.min()), float(proj.max())
        p = float(g.uniform(lo, hi))
        if p - lo > EPS_POINT and hi - p > EPS_POINT:
            return Line(p, phi)


def stit_construct(
    params: StitParams,
    rng: RngStream,
    max_divisions: int = MAX_DIVISIONS,
    max_degenerate: int = MAX_DEGENERATE,
) -> List[ConvexPolygon]:
    """STIT 的随机单元分裂构造

    每个单元带着剩余时间 tau；寿命 e ~ Exp(cell_hitting_rate)，若 e > tau 则单元终止，
    否则被分割线切开，两个子单元以剩余时间 tau - e 独立继续。
    """
    g = rng.generator
    law = params.law
    final: List[ConvexPolygon] = []
    stack = [(params.window.as_polygon(), params.t)]
    divisions = 0
    degenerate = 0
    while stack:
        cell, remaining = stack.pop()
        lifetime = float(g.exponential(1.0 / cell_hitting_rate(cell, law)))
        if lifetime > remaining:
            final.append(cell)
            continue
        while True:
            line = sample_dividing_line(cell, law, rng)
            try:
                plus, minus = split_polygon(cell, line)
                break
            except (DegenerateGeometry, NoIntersection) as e:
                degenerate += 1
                logger.debug(f"重新采样退化分割线 #{degenerate}: {e}")
                if degenerate > max_degenerate:
                    raise ReplicationAborted(f"STIT 退化切分次数超过 {max_degenerate}") from e
        divisions += 1
        if divisions > max_divisions:
            raise DivisionLimitExceeded(f"STIT 分裂次数超过 {max_divisions}")
        remaining -= lifetime
        stack.append((minus, remaining))
        stack.append((plus, remaining))
    logger.debug(f"STIT 构造完成: {divisions} 次分裂, {len(final)} 个单元")
    return final


def generate_cells(model: Model, la: float, law: DirectionLaw, window: RectWindow, rng: RngStream
                   ) -> List[ConvexPolygon]:
    """以边长密度 L_A 生成一个模型的实现"""
    if model is Model.PLT:
        params = PltParams(la, law, window)
        return build_plt(sample_poisson_lines(params, rng), window)
    return stit_construct(StitParams(la, law, window), rng)


def point_probe_overlaps(
    cells: Sequence[ConvexPolygon],
    window: RectWindow,
    generator: np.random.Generator,
    n_probes: int = 1000,
) -> int:
    """随机探针点中未被恰好一个单元内部覆盖的个数（铺砌检查）"""
    probes = np.column_stack([
        generator.uniform(window.x0, window.x1, size=n_probes),
        generator.uniform(window.y0, window.y1, size=n_probes),
    ])
    coverage = np.zeros(n_probes, dtype=int)
    for cell in cells:
        v = cell.vertices
        lo, hi = v.min(axis=0), v.max(axis=0)
        idx = np.nonzero(np.all((probes >= lo) & (probes <= hi), axis=1))[0]
        if not len(idx):
            continue
        edge = np.roll(v, -1, axis=0) - v
        q = probes[idx]
        cross = edge[:, 0, None] * (q[None, :, 1] - v[:, 1, None]) - edge[:, 1, None] * (q[None, :, 0] - v[:, 0, None])
        coverage[idx[np.all(cross > 0, axis=0)]] += 1
    return int(np.count_nonzero(coverage != 1))
