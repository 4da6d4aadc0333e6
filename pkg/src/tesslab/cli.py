#!/usr/bin/env python
# -*- coding: utf-8 -*-
# @time    : 2024/8/21 16:32
# @author  : timger/yishenggudou
import logging
import math
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import typer

from tesslab.cellstats import (
    NeighborhoodSums,
    TypicalSample,
    TypicalSums,
    compare_typical_cells,
    identity_checks,
    ks_frame,
    minus_sample,
    neighborhood_sums,
    neighborhood_summary,
    plt_theoretical,
    table2_frame,
    typical_frame,
    typical_sample,
    typical_sums,
)
from tesslab.complex import PlateIntensities, build_complex, edge_length_density, plate_intensities
from tesslab.engine import ReplicationContext, ReplicationEngine, log_state_updates
from tesslab.exceptions import ConfigError, InsufficientPoints
from tesslab.formats import (
    MANIFEST_NAME,
    CellsHeader,
    RunManifest,
    cells_filename,
    curve_csv,
    dumps_cells,
    load_patterns,
    load_run,
    pattern_csv,
    pattern_filename,
    table_csv,
    write_outputs,
)
from tesslab.geometry import ConvexPolygon, RectWindow
from tesslab.secondorder import (
    CurveSums,
    KernelSpec,
    MarkedPointPattern,
    MarkSelector,
    default_r_grid,
    extract_centres,
    k_sums,
    kmm_sums,
    pcf_sums,
    pool_curves,
    simulate_csr,
)
from tesslab.selfcheck import run_selfcheck
from tesslab.tessgen import DirectionLaw, LawKind, Model, generate_cells
from tesslab.utils import THREADS_ENVVAR, resolve_threads

# 配置日志
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=[
        logging.StreamHandler(sys.stdout)
    ]
)
logger = logging.getLogger(__name__)

app = typer.Typer(
    name="tesslab",
    help="平面 STIT 与 Poisson 直线镶嵌的模拟与统计",
    add_completion=False
)

MODEL_CHOICES = ("plt", "stit", "both")
CSR_MODEL = "csr"


@dataclass(frozen=True)
class RunConfig:
    models: Tuple[Model, ...]
    la: float
    law: DirectionLaw
    window: RectWindow
    reps: int
    seed: int
    threads: int
    out: Path
    sub_window: Optional[RectWindow] = None

    def __post_init__(self):
        if not (math.isfinite(self.la) and self.la > 0):
            raise ConfigError(f"--la 必须为有限正数: {self.la}")
        if self.reps < 1:
            raise ConfigError(f"--reps 必须至少为1: {self.reps}")
        if self.threads < 1:
            raise ConfigError(f"--threads 必须至少为1: {self.threads}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError(f"--seed 必须是64位无符号整数: {self.seed}")
        if self.sub_window is not None and not self.window.contains_window(self.sub_window):
            raise ConfigError(f"子窗口 {self.sub_window.bounds} 不在窗口 {self.window.bounds} 内")

    def manifest(self, command: str, **extra) -> RunManifest:
        return RunManifest(
            command=command,
            la=self.la,
            law=self.law.describe(),
            window=self.window,
            seed=self.seed,
            reps=self.reps,
            models=tuple(m.value for m in self.models),
            sub_window=self.sub_window,
            **extra,
        )


def _setup_logging(debug: bool):
    if debug:
        logger.setLevel(logging.DEBUG)
        logging.getLogger("tesslab").setLevel(logging.DEBUG)


def _parse_models(model: str) -> Tuple[Model, ...]:
    if model not in MODEL_CHOICES:
        raise ConfigError(f"--model 必须是 {'|'.join(MODEL_CHOICES)} 之一: {model}")
    return (Model.PLT, Model.STIT) if model == "both" else (Model(model),)


def _parse_window(square: Tuple[float, float], rect: Optional[Tuple[float, ...]], flag: str) -> RectWindow:
    """`--window A B` 表示正方形 [A,B]²；给出 `--rect x0 y0 x1 y1` 时以它为准"""
    try:
        if rect and None not in rect:
            return RectWindow(*rect)
        return RectWindow.square(*square)
    except ValueError as e:
        raise ConfigError(f"{flag}: {e}") from e


def _parse_law(law: str) -> DirectionLaw:
    try:
        return DirectionLaw.parse(law)
    except ValueError as e:
        raise ConfigError(f"--law: {e}") from e


def _fail(e: Exception):
    logger.error(f"执行失败: {e}")
    raise typer.Exit(code=1)


def _new_engine(config: RunConfig) -> ReplicationEngine:
    engine = ReplicationEngine(threads=config.threads)
    log_state_updates(engine, every=max(1, config.reps // 10))
    return engine


def _cells_source(config: RunConfig, cells_dir: Optional[Path]
                  ) -> Tuple[RunConfig, Dict[str, List[List[ConvexPolygon]]]]:
    """从 simulate 输出目录读取单元；没有给出目录时返回空字典，由调用方现场模拟"""
    if cells_dir is None:
        return config, {}
    manifest, runs = load_run(cells_dir)
    models = tuple(m for m in config.models if m.value in runs)
    if not models:
        raise ConfigError(f"{cells_dir} 中没有所选模型的单元文件")
    reps = min(len(runs[m.value]) for m in models)
    stored = RunConfig(
        models=models,
        la=manifest.la,
        law=DirectionLaw.parse(manifest.law),
        window=manifest.window,
        reps=reps,
        seed=manifest.seed,
        threads=config.threads,
        out=config.out,
        sub_window=config.sub_window,
    )
    logger.info(f"从 {cells_dir} 读取 {reps} 次重复: {', '.join(runs)}")
    return stored, runs


def _cells_task(config: RunConfig, model: Model, runs: Dict[str, List[List[ConvexPolygon]]]):
    stored = runs.get(model.value)

    def cells_for(ctx: ReplicationContext) -> List[ConvexPolygon]:
        if stored is not None:
            return stored[ctx.index]
        return generate_cells(model, config.la, config.law, config.window, ctx.rng)

    return cells_for


WindowOption = typer.Option((-100.0, 100.0), "--window", help="正方形窗口 [A,B]²")
RectOption = typer.Option(None, "--rect", help="矩形窗口 x0 y0 x1 y1，优先于 --window")
LawOption = typer.Option("isotropic", "--law", help="方向分布: isotropic 或 atoms:phi1:w1,phi2:w2,...")
ThreadsOption = typer.Option(None, "--threads", envvar=THREADS_ENVVAR, help="并行的重复数")
DebugOption = typer.Option(False, "--debug", help="启用调试日志模式")


@app.command("simulate")
def simulate(
    model: str = typer.Option("both", "--model", help="plt | stit | both"),
    la: float = typer.Option(1.0, "--la", help="边长密度 L_A"),
    law: str = LawOption,
    window: Tuple[float, float] = WindowOption,
    rect: Optional[Tuple[float, float, float, float]] = RectOption,
    reps: int = typer.Option(1, "--reps", help="重复次数"),
    seed: int = typer.Option(0, "--seed", help="随机种子"),
    threads: Optional[int] = ThreadsOption,
    out: Path = typer.Option(Path("out"), "--out", help="输出目录"),
    debug: bool = DebugOption,
):
    """模拟镶嵌并把每次重复的单元写成单元文件"""
    _setup_logging(debug)
    try:
        config = RunConfig(_parse_models(model), la, _parse_law(law), _parse_window(window, rect, "--window"),
                           reps, seed, resolve_threads(threads), out)
        logger.info(f"开始模拟: 模型 {model}, L_A={la}, 窗口 {config.window.bounds}, {reps} 次重复")
        engine = _new_engine(config)
        files: Dict[str, str] = {}
        names: Dict[str, List[str]] = {}
        for m in config.models:
            task = _cells_task(config, m, {})
            realisations = engine.run(config.reps, config.seed, task)
            names[m.value] = []
            for rep, cells in enumerate(realisations):
                header = CellsHeader(m.value, config.la, config.window, config.seed, rep, config.law.describe())
                name = cells_filename(m.value, rep)
                files[name] = dumps_cells(header, cells)
                names[m.value].append(name)
            mean_cells = float(np.mean([len(c) for c in realisations]))
            logger.info(f"{m.value}: 平均每次重复 {mean_cells:.1f} 个单元")
        files[MANIFEST_NAME] = config.manifest("simulate", files=names).dumps()
        write_outputs(config.out, files)
        logger.info(f"模拟完成，输出目录 {config.out}")
    except Exception as e:
        _fail(e)


@dataclass(frozen=True)
class NeighborReplication:
    sums: NeighborhoodSums
    typical: TypicalSums
    sample: TypicalSample
    la_hat: float
    intensities: PlateIntensities


def _neighbor_task(config: RunConfig, model: Model, runs):
    cells_for = _cells_task(config, model, runs)

    def task(ctx: ReplicationContext) -> NeighborReplication:
        C = build_complex(cells_for(ctx), config.window)
        records = minus_sample(C)
        return NeighborReplication(neighborhood_sums(records), typical_sums(records), typical_sample(records),
                                   edge_length_density(C), plate_intensities(C))

    return task


@app.command("neighbor-stats")
def neighbor_stats(
    model: str = typer.Option("both", "--model", help="plt | stit | both"),
    la: float = typer.Option(1.0, "--la", help="边长密度 L_A"),
    law: str = LawOption,
    window: Tuple[float, float] = WindowOption,
    rect: Optional[Tuple[float, float, float, float]] = RectOption,
    reps: int = typer.Option(40, "--reps", help="每个模型的重复次数"),
    seed: int = typer.Option(0, "--seed", help="随机种子"),
    threads: Optional[int] = ThreadsOption,
    cells: Optional[Path] = typer.Option(None, "--cells", help="simulate 的输出目录，给出时不再模拟",
                                         exists=True, file_okay=False, resolve_path=True),
    out: Path = typer.Option(Path("out"), "--out", help="输出目录"),
    debug: bool = DebugOption,
):
    """典型单元邻域统计：写出 table2.csv、identities.csv、typical.csv，两个模型时还有 ks.csv"""
    _setup_logging(debug)
    try:
        config = RunConfig(_parse_models(model), la, _parse_law(law), _parse_window(window, rect, "--window"),
                           reps, seed, resolve_threads(threads), out)
        config, runs = _cells_source(config, cells)
        engine = _new_engine(config)
        summaries, typicals, samples, extra, rows = {}, {}, {}, {}, []
        for m in config.models:
            name = m.value.upper()
            logger.info(f"{m.value}: 邻域统计, {config.reps} 次重复")
            results: List[NeighborReplication] = engine.run(config.reps, config.seed, _neighbor_task(config, m, runs))
            parts = [r.sums for r in results]
            summary = neighborhood_summary(parts, model=m.value)
            summaries[name] = summary
            typicals[name] = sum((r.typical for r in results[1:]), results[0].typical)
            samples[name] = sum((r.sample for r in results[1:]), results[0].sample)
            extra[name] = {
                "L_A": float(np.mean([r.la_hat for r in results])),
                "lambda0": float(np.mean([r.intensities.lambda0 for r in results])),
                "lambda1": float(np.mean([r.intensities.lambda1 for r in results])),
                "lambda2": float(np.mean([r.intensities.lambda2 for r in results])),
            }
            logger.info(f"{m.value}: n={summary.n}, C0_22={summary.C0_22:.4f}, "
                        f"平均邻居数={summary.mean_neighbors:.4f}, L_A 估计={extra[name]['L_A']:.4f}")
            for check in identity_checks(parts):
                rows.append({"model": name, "identity": check.name, "lhs": check.lhs,
                             "rhs": check.rhs, "se": check.se, "passed": check.passed})
                if not check.passed:
                    logger.warning(f"{m.value}: 恒等式 {check.name} 超出 3 倍标准误差")
        theoretical = plt_theoretical(config.la) if config.law.kind is LawKind.ISOTROPIC else None
        files = {
            "table2.csv": table_csv(table2_frame(summaries, theoretical)),
            "identities.csv": pd.DataFrame(rows).to_csv(index=False, na_rep="", lineterminator="\n"),
            "typical.csv": table_csv(typical_frame(typicals, extra)),
        }
        if len(samples) == 2:
            comparisons = compare_typical_cells(*samples.values())
            for c in comparisons:
                if not c.passed:
                    logger.warning(f"{c.characteristic}: PLT 与 STIT 的 KS 距离 {c.statistic:.4f} 超过临界值 "
                                   f"{c.critical:.4f}")
            files["ks.csv"] = ks_frame(comparisons).to_csv(index=False, na_rep="", lineterminator="\n")
        files[MANIFEST_NAME] = config.manifest("neighbor-stats", outputs=sorted(files)).dumps()
        write_outputs(config.out, files)
        logger.info(f"邻域统计完成，输出目录 {config.out}")
    except Exception as e:
        _fail(e)


def _second_order_sums(patterns: List[MarkedPointPattern], r: np.ndarray, kernel: KernelSpec, name: str
                       ) -> Dict[str, List[CurveSums]]:
    sums: Dict[str, List[CurveSums]] = {"K": [], "g": []}
    for mark in MarkSelector:
        sums[f"kmm_{mark.value}"] = []
    for p in patterns:
        if p.pattern.n < 2:
            logger.warning(f"{name}: 子窗口内只有 {p.pattern.n} 个中心，跳过该重复")
            continue
        sums["K"].append(k_sums(p.pattern, r))
        sums["g"].append(pcf_sums(p.pattern, r, kernel))
        for mark in MarkSelector:
            sums[f"kmm_{mark.value}"].append(kmm_sums(p, mark, r, kernel))
    if not sums["K"]:
        raise InsufficientPoints(f"{name}: 所有重复的子窗口内都少于2个中心")
    return sums


def _simulated_patterns(config: RunConfig, runs, selftest: Optional[str], engine: ReplicationEngine
                        ) -> Dict[str, List[MarkedPointPattern]]:
    sub = config.sub_window
    if selftest == CSR_MODEL:
        # 与 PLT 单元中心强度相同的 Poisson 点模式
        intensity = config.la ** 2 / math.pi
        points = engine.run(config.reps, config.seed, lambda ctx: simulate_csr(sub, intensity, ctx.rng))
        return {CSR_MODEL: [
            MarkedPointPattern(p, {"area": np.ones(p.n), "perimeter": np.ones(p.n), "corners": np.full(p.n, 3.0)})
            for p in points
        ]}
    patterns = {}
    for m in config.models:
        cells_for = _cells_task(config, m, runs)
        patterns[m.value] = engine.run(
            config.reps, config.seed, lambda ctx, f=cells_for: extract_centres(f(ctx), sub))
    return patterns


@app.command("second-order")
def second_order(
    model: str = typer.Option("both", "--model", help="plt | stit | both"),
    la: float = typer.Option(1.0, "--la", help="边长密度 L_A"),
    law: str = LawOption,
    window: Tuple[float, float] = typer.Option((-50.0, 50.0), "--window", help="正方形窗口 [A,B]²"),
    rect: Optional[Tuple[float, float, float, float]] = RectOption,
    sub_window: Tuple[float, float] = typer.Option((-30.0, 30.0), "--sub-window", help="中心所在的正方形子窗口"),
    sub_rect: Optional[Tuple[float, float, float, float]] = typer.Option(None, "--sub-rect", help="矩形子窗口"),
    reps: int = typer.Option(100, "--reps", help="每个模型的重复次数"),
    seed: int = typer.Option(0, "--seed", help="随机种子"),
    threads: Optional[int] = ThreadsOption,
    cells: Optional[Path] = typer.Option(None, "--cells", help="simulate 的输出目录，给出时不再模拟",
                                         exists=True, file_okay=False, resolve_path=True),
    patterns_dir: Optional[Path] = typer.Option(None, "--patterns", help="--save-patterns 写出的点模式目录",
                                                exists=True, file_okay=False, resolve_path=True),
    save_patterns: bool = typer.Option(False, "--save-patterns", help="同时写出每次重复的中心点模式"),
    selftest: Optional[str] = typer.Option(None, "--selftest", help="csr: 用 Poisson 点模式校准估计量"),
    out: Path = typer.Option(Path("out"), "--out", help="输出目录"),
    debug: bool = DebugOption,
):
    """单元中心的 K、g 与 k_mm 曲线"""
    _setup_logging(debug)
    try:
        if selftest not in (None, CSR_MODEL):
            raise ConfigError(f"未知的自检模式: {selftest}")
        if patterns_dir is not None and (cells is not None or selftest is not None):
            raise ConfigError("--patterns 不能与 --cells 或 --selftest 同时使用")
        sub = _parse_window(sub_window, sub_rect, "--sub-window")
        config = RunConfig(_parse_models(model), la, _parse_law(law), _parse_window(window, rect, "--window"),
                           reps, seed, resolve_threads(threads), out)
        if patterns_dir is not None:
            manifest, patterns = load_patterns(patterns_dir)
            config = replace(config, la=manifest.la, law=DirectionLaw.parse(manifest.law), window=manifest.window,
                             sub_window=manifest.sub_window, seed=manifest.seed,
                             reps=min(len(ps) for ps in patterns.values()))
            logger.info(f"从 {patterns_dir} 读取点模式: {', '.join(patterns)}")
        else:
            config, runs = _cells_source(config, cells)
            # 窗口可能来自单元目录的清单，子窗口在此之后才校验
            config = replace(config, sub_window=sub)
            # 子窗口与窗口边界的距离应大于典型单元直径的量级
            margin = min(sub.x0 - config.window.x0, sub.y0 - config.window.y0,
                         config.window.x1 - sub.x1, config.window.y1 - sub.y1)
            if selftest is None and margin < 3.0 * math.pi / config.la:
                logger.warning(f"子窗口边距 {margin:.3f} 小于 3π/L_A = {3.0 * math.pi / config.la:.3f}，"
                               "边缘单元可能被截断")
            patterns = _simulated_patterns(config, runs, selftest, _new_engine(config))
        sub = config.sub_window
        n_total = sum(p.pattern.n for ps in patterns.values() for p in ps)
        n_windows = sum(len(ps) for ps in patterns.values())
        intensity_hat = n_total / (n_windows * sub.area)
        kernel = KernelSpec.stoyan(intensity_hat)
        r = default_r_grid(sub)
        logger.info(f"中心强度估计 {intensity_hat:.5f}, 带宽 h={kernel.h:.5f}, r ∈ [0, {r[-1]:.3f}]")
        files: Dict[str, str] = {}
        for name, ps in patterns.items():
            for curve, parts in _second_order_sums(ps, r, kernel, name).items():
                files[f"{curve}_{name}.csv"] = curve_csv(pool_curves(parts))
        outputs = sorted(files)
        saved: Dict[str, List[str]] = {}
        if save_patterns:
            for name, ps in patterns.items():
                saved[name] = [pattern_filename(name, rep) for rep in range(len(ps))]
                files.update({f: pattern_csv(p) for f, p in zip(saved[name], ps)})
        files[MANIFEST_NAME] = config.manifest("second-order", files=saved, outputs=outputs).dumps()
        write_outputs(config.out, files)
        logger.info(f"二阶统计完成，输出目录 {config.out}")
    except Exception as e:
        _fail(e)


@app.command("table1")
def table1(
    la: float = typer.Option(1.0, "--la", help="边长密度 L_A"),
    debug: bool = DebugOption,
):
    """各向同性 PLT 邻域和统计量的闭式值"""
    _setup_logging(debug)
    try:
        v = plt_theoretical(la)
    except Exception as e:
        _fail(e)
    typer.echo(f"L_A = {la}")
    typer.echo(f"N0_22 = {v.N0_22:.5f}    tilde = {v.tilde_N0:.5f}")
    typer.echo(f"V2_22 = {v.V2_22:.5f}    tilde = {v.tilde_V2:.5f}")
    typer.echo(f"V1_22 = {v.V1_22:.5f}    tilde = {v.tilde_V1:.5f}")


@app.command("selfcheck")
def selfcheck(
    eps_point: float = typer.Option(1e-9, "--eps-point", hidden=True),
    debug: bool = DebugOption,
):
    """运行快速不变量检查，任何一项失败时退出码为1"""
    _setup_logging(debug)
    results = run_selfcheck(eps_point=eps_point)
    for result in results:
        typer.echo(f"{'PASS' if result.passed else 'FAIL'}  {result.name}  {result.detail}")
    failed = [r.name for r in results if not r.passed]
    if failed:
        logger.error(f"{len(failed)} 项检查失败: {', '.join(failed)}")
        raise typer.Exit(code=1)
    logger.info(f"全部 {len(results)} 项检查通过")


@app.command("version")
def version():
    """显示当前版本信息"""
    from tesslab import __version__
    typer.echo(f"tesslab v{__version__}")


if __name__ == "__main__":
    sys.exit(app())
