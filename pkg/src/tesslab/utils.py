#!/usr/bin/env python
# -*- coding: utf-8 -*-
# @time    : 2024/8/21 16:32
# @author  : timger/yishenggudou
import logging
import os
import tempfile
from pathlib import Path
from typing import Optional, Union

from tesslab.exceptions import ConfigError

logger = logging.getLogger(__name__)

THREADS_ENVVAR = "TESSLAB_THREADS"


def stage_text(path: Union[str, Path], text: str) -> Path:
    """把内容写入 path 同目录下的临时文件并返回其路径，目标文件本身不变"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return Path(tmp)


def atomic_write_text(path: Union[str, Path], text: str) -> Path:
    """先写入同目录下的临时文件，再原子地重命名为目标文件"""
    path = Path(path)
    tmp = stage_text(path, text)
    try:
        os.replace(tmp, path)
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise
    logger.debug(f"写入文件: {path}")
    return path


def resolve_threads(threads: Optional[int]) -> int:
    """命令行参数优先，其次是 TESSLAB_THREADS 环境变量，默认为 1"""
    if threads is None:
        raw = os.environ.get(THREADS_ENVVAR, "1")
        try:
            threads = int(raw)
        except ValueError as e:
            raise ConfigError(f"{THREADS_ENVVAR} 不是整数: {raw!r}") from e
    if threads < 1:
        raise ConfigError(f"线程数必须至少为1: {threads}")
    return threads
