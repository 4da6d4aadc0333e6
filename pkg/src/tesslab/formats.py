#!/usr/bin/env python
# -*- coding: utf-8 -*-
# @time    : 2024/8/21 16:32
# @author  : timger/yishenggudou
"""文件格式：单元文件、运行清单 manifest.yml、曲线与点模式 CSV

单元文件由 `# ` 开头的 YAML 头部和每个单元一行的记录 `cell_id,k,x1,y1,...,xk,yk` 组成，
坐标用 repr 写出，读回后逐位相同。
"""
import io
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import yaml

from tesslab.exceptions import CellsFileError, DegenerateGeometry
from tesslab.geometry import ConvexPolygon, RectWindow
from tesslab.secondorder import CurveEstimate, MarkedPointPattern, MarkSelector, PointPattern
from tesslab.utils import atomic_write_text, stage_text

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
CELLS_COLUMNS = "cell_id,k,x1,y1,...,xk,yk"
MANIFEST_NAME = "manifest.yml"
PATTERN_COLUMNS = ["x", "y", "area", "perimeter", "corners"]


@dataclass(frozen=True)
class CellsHeader:
    model: str
    la: float
    window: RectWindow
    seed: int
    rep: int
    law: str = "isotropic"
    format_version: int = FORMAT_VERSION

    def as_dict(self) -> Dict:
        return {
            "format_version": self.format_version,
            "model": self.model,
            "la": float(self.la),
            "law": self.law,
            "window": [float(v) for v in self.window.bounds],
            "seed": int(self.seed),
            "rep": int(self.rep),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "CellsHeader":
        try:
            version = int(data["format_version"])
            if version != FORMAT_VERSION:
                raise CellsFileError(f"不支持的单元文件版本: {version}")
            return cls(
                model=str(data["model"]),
                la=float(data["la"]),
                window=RectWindow(*(float(v) for v in data["window"])),
                seed=int(data["seed"]),
                rep=int(data["rep"]),
                law=str(data.get("law", "isotropic")),
                format_version=version,
            )
        except (KeyError, TypeError, ValueError) as e:
            raise CellsFileError(f"单元文件头部不完整: {e}") from e


def dumps_cells(header: CellsHeader, cells: Sequence[ConvexPolygon]) -> str:
    out = io.StringIO()
    for line in yaml.safe_dump(header.as_dict(), sort_keys=False, default_flow_style=None).splitlines():
        out.write(f"# {line}\n")
    out.write(CELLS_COLUMNS + "\n")
    for cid, cell in enumerate(cells):
        coords = ",".join(repr(float(c)) for c in cell.vertices.reshape(-1))
        out.write(f"{cid},{cell.n_corners},{coords}\n")
    return out.getvalue()


def loads_cells(text: str, source: str = "<string>") -> Tuple[CellsHeader, List[ConvexPolygon]]:
    lines = text.splitlines()
    head = [line[2:] if line.startswith("# ") else line[1:] for line in lines if line.startswith("#")]
    body = [line for line in lines if line and not line.startswith("#")]
    try:
        header = CellsHeader.from_dict(yaml.safe_load("\n".join(head)) or {})
    except yaml.YAMLError as e:
        raise CellsFileError(f"无法解析单元文件头部: {source}") from e
    if not body or body[0] != CELLS_COLUMNS:
        raise CellsFileError(f"缺少列说明行: {source}")
    cells = []
    for lineno, line in enumerate(body[1:], start=1):
        fields_ = line.split(",")
        try:
            cid, k = int(fields_[0]), int(fields_[1])
            coords = [float(v) for v in fields_[2:]]
        except (IndexError, ValueError) as e:
            raise CellsFileError(f"{source}: 第 {lineno} 条记录无法解析") from e
        if cid != len(cells) or k < 3 or len(coords) != 2 * k:
            raise CellsFileError(f"{source}: 第 {lineno} 条记录不合法 (cell_id={cid}, k={k})")
        try:
            cells.append(ConvexPolygon(np.array(coords).reshape(k, 2)))
        except DegenerateGeometry as e:
            raise CellsFileError(f"{source}: 单元 {cid} 不是合法的凸多边形") from e
    return header, cells


def write_cells(path: Union[str, Path], header: CellsHeader, cells: Sequence[ConvexPolygon]) -> Path:
    return atomic_write_text(path, dumps_cells(header, cells))


def read_cells(path: Union[str, Path]) -> Tuple[CellsHeader, List[ConvexPolygon]]:
    path = Path(path)
    logger.debug(f"读取单元文件: {path}")
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise CellsFileError(f"无法读取文件: {path}") from e
    return loads_cells(text, str(path))


def cells_filename(model: str, rep: int) -> str:
    return f"{model}_rep_{rep:04d}.cells"


@dataclass(frozen=True)
class RunManifest:
    """一次运行的配置记录，写在输出目录的 manifest.yml 中"""
    command: str
    la: float
    law: str
    window: RectWindow
    seed: int
    reps: int
    models: Tuple[str, ...] = ()
    sub_window: Optional[RectWindow] = None
    files: Dict[str, List[str]] = field(default_factory=dict)
    outputs: List[str] = field(default_factory=list)

    def as_dict(self) -> Dict:
        data = {
            "command": self.command,
            "format_version": FORMAT_VERSION,
            "la": float(self.la),
            "law": self.law,
            "models": list(self.models),
            "reps": int(self.reps),
            "seed": int(self.seed),
            "window": [float(v) for v in self.window.bounds],
        }
        if self.sub_window is not None:
            data["sub_window"] = [float(v) for v in self.sub_window.bounds]
        if self.files:
            data["files"] = {model: list(names) for model, names in self.files.items()}
        if self.outputs:
            data["outputs"] = list(self.outputs)
        return data

    def dumps(self) -> str:
        return yaml.safe_dump(self.as_dict(), sort_keys=True, default_flow_style=None)

    @classmethod
    def loads(cls, text: str, source: str = "<string>") -> "RunManifest":
        try:
            data = yaml.safe_load(text)
            sub = data.get("sub_window")
            return cls(
                command=str(data["command"]),
                la=float(data["la"]),
                law=str(data.get("law", "isotropic")),
                window=RectWindow(*(float(v) for v in data["window"])),
                seed=int(data["seed"]),
                reps=int(data["reps"]),
                models=tuple(data.get("models", ())),
                sub_window=RectWindow(*(float(v) for v in sub)) if sub else None,
                files={str(k): [str(v) for v in names] for k, names in (data.get("files") or {}).items()},
                outputs=[str(v) for v in data.get("outputs") or []],
            )
        except (yaml.YAMLError, AttributeError, KeyError, TypeError, ValueError) as e:
            raise CellsFileError(f"无效的清单文件: {source}") from e


def read_manifest(directory: Union[str, Path]) -> RunManifest:
    path = Path(directory) / MANIFEST_NAME
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise CellsFileError(f"无法读取清单文件: {path}") from e
    return RunManifest.loads(text, str(path))


def load_run(directory: Union[str, Path]) -> Tuple[RunManifest, Dict[str, List[List[ConvexPolygon]]]]:
    """读取 simulate 输出目录：每个模型按重复编号排列的单元列表"""
    directory = Path(directory)
    manifest = read_manifest(directory)
    if not manifest.files:
        raise CellsFileError(f"清单中没有单元文件: {directory}")
    runs: Dict[str, List[List[ConvexPolygon]]] = {}
    for model, names in manifest.files.items():
        runs[model] = []
        for name in names:
            header, cells = read_cells(directory / name)
            if header.model != model or header.window != manifest.window:
                raise CellsFileError(f"单元文件 {name} 与清单不一致")
            runs[model].append(cells)
    logger.debug(f"读取运行目录 {directory}: " + ", ".join(f"{m}={len(r)}" for m, r in runs.items()))
    return manifest, runs


def _frame_csv(frame: pd.DataFrame, index: bool = False) -> str:
    return frame.to_csv(index=index, na_rep="", lineterminator="\n")


def curve_csv(curve: CurveEstimate) -> str:
    """`r,value,n_pairs`，无定义的值写为空字段"""
    return _frame_csv(curve.to_frame())


def table_csv(frame: pd.DataFrame) -> str:
    return _frame_csv(frame, index=True)


def pattern_csv(pattern: MarkedPointPattern) -> str:
    pts = pattern.pattern.points
    frame = pd.DataFrame({
        "x": pts[:, 0],
        "y": pts[:, 1],
        "area": pattern.mark(MarkSelector.AREA),
        "perimeter": pattern.mark(MarkSelector.PERIMETER),
        "corners": pattern.mark(MarkSelector.CORNERS).astype(np.int64),
    })
    return _frame_csv(frame[PATTERN_COLUMNS])


def read_pattern(path: Union[str, Path], window: RectWindow) -> MarkedPointPattern:
    frame = pd.read_csv(path)
    missing = [c for c in PATTERN_COLUMNS if c not in frame.columns]
    if missing:
        raise CellsFileError(f"点模式文件缺少列 {missing}: {path}")
    points = frame[["x", "y"]].to_numpy(dtype=float)
    marks = {s.value: frame[s.value].to_numpy(dtype=float) for s in MarkSelector}
    return MarkedPointPattern(PointPattern(points, window), marks)


def write_outputs(directory: Union[str, Path], files: Mapping[str, str]) -> List[Path]:
    """先把全部输出写成临时文件，都成功后再逐个重命名；中途失败时目录保持原样"""
    directory = Path(directory)
    staged: List[Tuple[Path, Path]] = []
    try:
        for name, text in files.items():
            staged.append((stage_text(directory / name, text), directory / name))
    except BaseException:
        for tmp, _ in staged:
            tmp.unlink(missing_ok=True)
        logger.error(f"写入 {directory} 失败，已清理 {len(staged)} 个临时文件")
        raise
    for tmp, path in staged:
        os.replace(tmp, path)
    logger.debug(f"写入 {len(staged)} 个文件到 {directory}")
    return [path for _, path in staged]


def pattern_filename(name: str, rep: int) -> str:
    return f"centres_{name}_rep_{rep:04d}.csv"


def load_patterns(directory: Union[str, Path]) -> Tuple[RunManifest, Dict[str, List[MarkedPointPattern]]]:
    """读取 second-order --save-patterns 写出的中心点模式，窗口取清单中的子窗口"""
    directory = Path(directory)
    manifest = read_manifest(directory)
    if manifest.sub_window is None or not manifest.files:
        raise CellsFileError(f"清单中没有点模式文件: {directory}")
    patterns = {
        name: [read_pattern(directory / f, manifest.sub_window) for f in files]
        for name, files in manifest.files.items()
    }
    return manifest, patterns
