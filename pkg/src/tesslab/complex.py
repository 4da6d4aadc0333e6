#!/usr/bin/env python
# -*- coding: utf-8 -*-
# @time    : 2024/8/21 16:32
# @author  : timger/yishenggudou
"""从单元列表恢复镶嵌复形：0-板（顶点）、1-板（边）与邻接关系

STIT 不是面对面的：T 形顶点位于某些单元的边的内部，因此单元的边要在所有落在其上的
顶点处细分，才能得到真正的 1-板。
"""
import logging
from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from tesslab.exceptions import InconsistentComplex, UnknownCell
from tesslab.geometry import EPS_POINT, ConvexPolygon, Point2, RectWindow, Segment, collinear_overlap

logger = logging.getLogger(__name__)

COLLINEAR_EDGE_TOL = 1e-7  # 顶点处两条边方向的共线判定


@dataclass(frozen=True)
class Edge:
    segment: Segment
    vertex_ids: Tuple[int, int]
    cells: Tuple[int, ...]
    on_boundary: bool

    @property
    def length(self) -> float:
        return self.segment.length


@dataclass(frozen=True, eq=False)
class TessellationComplex:
    cells: Tuple[ConvexPolygon, ...]
    vertices: np.ndarray
    edges: Tuple[Edge, ...]
    adjacency: Tuple[Tuple[Tuple[int, int], ...], ...]
    window: RectWindow
    vertex_on_boundary: np.ndarray
    cell_vertex_ids: Tuple[Tuple[int, ...], ...]
    cell_edge_ids: Tuple[Tuple[int, ...], ...]

    @property
    def n_cells(self) -> int:
        return len(self.cells)


@dataclass(frozen=True)
class CellTopology:
    cell_id: int
    corners: int
    n0: int
    n1: int
    neighbor_plate_count: int
    neighbor_distinct_count: int
    touches_boundary: bool


@dataclass(frozen=True)
class PlateIntensities:
    lambda0: float
    lambda1: float
    lambda2: float
    euler: int  # V_int - E_int + N，窗口内的合法复形恒为 1


def _deduplicate(points: np.ndarray, eps_point: float) -> Tuple[np.ndarray, np.ndarray]:
    """把距离不超过 eps_point 的角点合并成同一个顶点"""
    m = len(points)
    pairs = cKDTree(points).query_pairs(r=eps_point, output_type="ndarray")
    pairs = np.asarray(pairs, dtype=np.intp).reshape(-1, 2)
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(m, m))
    _, labels = connected_components(graph, directed=False)
    _, first = np.unique(labels, return_index=True)
    return points[first], labels


def build_complex(
    cells: Sequence[ConvexPolygon],
    window: RectWindow,
    eps_point: float = EPS_POINT,
) -> TessellationComplex:
    cells = tuple(cells)
    counts = np.array([c.n_corners for c in cells])
    offsets = np.concatenate([[0], np.cumsum(counts)])
    corners = np.concatenate([c.vertices for c in cells])
    vertices, corner_vid = _deduplicate(corners, eps_point)
    on_boundary = window.distance_to_boundary(vertices) <= eps_point
    logger.debug(f"复形: {len(cells)} 个单元, {len(corners)} 个角点, {len(vertices)} 个顶点")

    # 每条单元边的终点角点
    nxt = np.arange(len(corners)) + 1
    nxt[offsets[1:] - 1] = offsets[:-1]
    a, b = corners, corners[nxt]
    step = b - a
    length = np.hypot(step[:, 0], step[:, 1])
    hits = cKDTree(vertices).query_ball_point(0.5 * (a + b), r=0.5 * length + eps_point)

    edge_index: Dict[Tuple[int, int], int] = {}
    edge_cells: List[List[int]] = []
    edge_sides: List[List[int]] = []
    cell_vertex_ids: List[Tuple[int, ...]] = []
    cell_edge_ids: List[Tuple[int, ...]] = []
    for cid in range(len(cells)):
        sequence, sources = [], []
        for side in range(offsets[cid], offsets[cid + 1]):
            va, vb = int(corner_vid[side]), int(corner_vid[nxt[side]])
            sequence.append(va)
            sources.append(side)
            found = hits[side]
            if len(found) <= 2:
                continue
            cand = np.array([v for v in found if v != va and v != vb], dtype=int)
            if not len(cand):
                continue
            u = step[side] / length[side]
            rel = vertices[cand] - a[side]
            along = rel @ u
            across = np.abs(rel[:, 0] * u[1] - rel[:, 1] * u[0])
            keep = (across <= eps_point) & (along > eps_point) & (along < length[side] - eps_point)
            # T 形顶点：落在边内部的其他单元的角点
            for v in cand[keep][np.argsort(along[keep], kind="stable")]:
                sequence.append(int(v))
                sources.append(side)
        plates = []
        for k, u_id in enumerate(sequence):
            w_id = sequence[(k + 1) % len(sequence)]
            if u_id == w_id:
                raise InconsistentComplex(f"单元 {cid} 的边界出现零长度的边")
            key = (min(u_id, w_id), max(u_id, w_id))
            eid = edge_index.setdefault(key, len(edge_index))
            if eid == len(edge_cells):
                edge_cells.append([])
                edge_sides.append([])
            edge_cells[eid].append(cid)
            edge_sides[eid].append(sources[k])
            plates.append(eid)
        cell_vertex_ids.append(tuple(sequence))
        cell_edge_ids.append(tuple(plates))

    def side_segment(side: int) -> Segment:
        return Segment(Point2(*a[side].tolist()), Point2(*b[side].tolist()))

    edges: List[Edge] = []
    adjacency: List[List[Tuple[int, int]]] = [[] for _ in cells]
    for (u_id, w_id), eid in edge_index.items():
        incident = edge_cells[eid]
        segment = Segment(Point2(*vertices[u_id].tolist()), Point2(*vertices[w_id].tolist()))
        boundary = bool(
            on_boundary[u_id] and on_boundary[w_id]
            and window.distance_to_boundary(np.array([segment.midpoint.x, segment.midpoint.y]))[0] <= eps_point
        )
        expected = 1 if boundary else 2
        if len(incident) != expected:
            raise InconsistentComplex(f"1-板 {eid} 关联 {len(incident)} 个单元，应为 {expected}")
        if not boundary:
            i, j = incident
            if i == j or collinear_overlap(side_segment(edge_sides[eid][0]), side_segment(edge_sides[eid][1])) is None:
                raise InconsistentComplex(f"1-板 {eid} 两侧的单元边不重叠")
            adjacency[i].append((j, eid))
            adjacency[j].append((i, eid))
        edges.append(Edge(segment, (u_id, w_id), tuple(incident), boundary))

    logger.debug(f"复形构造完成: {len(edges)} 条边, 内部边 {sum(not e.on_boundary for e in edges)} 条")
    return TessellationComplex(
        cells=cells,
        vertices=vertices,
        edges=tuple(edges),
        adjacency=tuple(tuple(adj) for adj in adjacency),
        window=window,
        vertex_on_boundary=on_boundary,
        cell_vertex_ids=tuple(cell_vertex_ids),
        cell_edge_ids=tuple(cell_edge_ids),
    )


def _vertex_degree(C: TessellationComplex) -> np.ndarray:
    ends = np.array([e.vertex_ids for e in C.edges], dtype=int).reshape(-1)
    return np.bincount(ends, minlength=len(C.vertices))


def vertex_degrees(C: TessellationComplex) -> Counter:
    """内部顶点的度数直方图，窗口边界上的顶点不计"""
    degree = _vertex_degree(C)
    return Counter(int(d) for d in degree[~C.vertex_on_boundary])


def collinear_edge_pairs(C: TessellationComplex) -> Counter:
    """每个内部顶点处共线的边对数目的直方图"""
    incident: List[List[np.ndarray]] = [[] for _ in range(len(C.vertices))]
    for e in C.edges:
        u_id, w_id = e.vertex_ids
        d = C.vertices[w_id] - C.vertices[u_id]
        d = d / np.hypot(*d)
        incident[u_id].append(d)
        incident[w_id].append(-d)
    histogram: Counter = Counter()
    for vid in np.nonzero(~C.vertex_on_boundary)[0]:
        dirs = incident[vid]
        pairs = 0
        for i in range(len(dirs)):
            for j in range(i + 1, len(dirs)):
                cross = dirs[i][0] * dirs[j][1] - dirs[i][1] * dirs[j][0]
                if abs(cross) <= COLLINEAR_EDGE_TOL and float(dirs[i] @ dirs[j]) < 0:
                    pairs += 1
        histogram[pairs] += 1
    return histogram


def edge_length_density(C: TessellationComplex) -> float:
    """内部 1-板总长度除以窗口面积，即 L_A 的估计"""
    return sum(e.length for e in C.edges if not e.on_boundary) / C.window.area


def cell_topology(C: TessellationComplex, cell_id: int) -> CellTopology:
    if not 0 <= cell_id < C.n_cells:
        raise UnknownCell(cell_id)
    vids = C.cell_vertex_ids[cell_id]
    adjacency = C.adjacency[cell_id]
    return CellTopology(
        cell_id=cell_id,
        corners=C.cells[cell_id].n_corners,
        n0=len(vids),
        n1=len(C.cell_edge_ids[cell_id]),
        neighbor_plate_count=len(adjacency),
        neighbor_distinct_count=len({j for j, _ in adjacency}),
        touches_boundary=bool(C.vertex_on_boundary[list(vids)].any()),
    )


def plate_intensities(C: TessellationComplex) -> PlateIntensities:
    n_vertices = int(np.count_nonzero(~C.vertex_on_boundary))
    n_edges = sum(1 for e in C.edges if not e.on_boundary)
    area = C.window.area
    return PlateIntensities(
        lambda0=n_vertices / area,
        lambda1=n_edges / area,
        lambda2=C.n_cells / area,
        euler=n_vertices - n_edges + C.n_cells,
    )


def mean_vertex_cells(C: TessellationComplex) -> float:
    """内部顶点相邻单元数的均值 N_{0,2}"""
    counts = np.zeros(len(C.vertices), dtype=int)
    for vids in C.cell_vertex_ids:
        counts[list(vids)] += 1
    interior = counts[~C.vertex_on_boundary]
    return float(interior.mean()) if len(interior) else float("nan")
