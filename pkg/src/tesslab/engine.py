#!/usr/bin/env python
# -*- coding: utf-8 -*-
# @time    : 2024/8/21 16:32
# @author  : timger/yishenggudou
"""响应式的重复实验执行器

每次重复是一个延迟执行的可观察对象，在线程池调度器上运行；所有重复合并后按重复编号排序，
因此结果与线程数无关。
"""
import logging
import threading
import time
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Tuple, TypeVar

import rx
from rx import operators as ops
from rx.core import Observable
from rx.scheduler import ThreadPoolScheduler
from rx.subject import Subject

from tesslab.exceptions import ConfigError, ReplicationAborted
from tesslab.tessgen import RngStream

logger = logging.getLogger(__name__)

T = TypeVar("T")


class TaskState(Enum):
    PENDING = "pending"
    RUNNING = "running"
    SUCCESS = "success"
    FAILED = "failed"
    RETRYING = "retrying"


@dataclass
class ReplicationContext:
    index: int
    rng: RngStream

    @property
    def attempt(self) -> int:
        return self.rng.attempt


class ReplicationEngine:
    def __init__(self, threads: int = 1, max_retries: int = 3):
        if threads < 1:
            raise ConfigError(f"线程数必须至少为1: {threads}")
        if max_retries < 0:
            raise ConfigError(f"重试次数不能为负: {max_retries}")
        self.threads = threads
        self.max_retries = max_retries
        self.state_stream = Subject()
        self.scheduler = ThreadPoolScheduler(threads)

    def run(self, reps: int, seed: int, task: Callable[[ReplicationContext], T]) -> List[T]:
        """执行 reps 次重复，第 i 次使用随机流 (seed, i)，返回按编号排序的结果"""
        if reps < 1:
            raise ConfigError(f"重复次数必须至少为1: {reps}")
        logger.debug(f"开始 {reps} 次重复, 线程数 {self.threads}, seed={seed}")
        for index in range(reps):
            self._emit_state_update(index, TaskState.PENDING)
        observables = [self._create_replication_observable(task, RngStream(seed, index)) for index in range(reps)]
        results: List[Tuple[int, T]] = rx.from_iterable(observables).pipe(
            ops.merge(max_concurrent=self.threads),
            ops.to_list(),
        ).run()
        results.sort(key=lambda item: item[0])
        logger.debug(f"{reps} 次重复全部完成")
        return [value for _, value in results]

    def _create_replication_observable(self, task: Callable[[ReplicationContext], T], rng: RngStream) -> Observable:
        index = rng.stream_id

        def execute(scheduler=None) -> Observable:
            self._emit_state_update(index, TaskState.RUNNING, attempt=rng.attempt)
            value = task(ReplicationContext(index, rng))
            self._emit_state_update(index, TaskState.SUCCESS, attempt=rng.attempt)
            return rx.of((index, value))

        def handle_error(error: Exception, source: Observable) -> Observable:
            # 只有退化事件过多才换一个子流重试，其他错误直接终止整个运行
            if isinstance(error, ReplicationAborted) and rng.attempt < self.max_retries:
                self._emit_state_update(index, TaskState.RETRYING, str(error), attempt=rng.attempt)
                return self._create_replication_observable(task, rng.retry())
            self._emit_state_update(index, TaskState.FAILED, str(error), attempt=rng.attempt)
            return rx.throw(error)

        return rx.defer(execute).pipe(
            ops.subscribe_on(self.scheduler),
            ops.catch(handle_error),
        )

    def _emit_state_update(self, index: int, state: TaskState, result: Any = None, attempt: int = 0):
        """发射状态更新事件"""
        update: Dict[str, Any] = {
            "replication": index,
            "state": state,
            "attempt": attempt,
            "result": result,
            "timestamp": time.monotonic(),
        }
        logger.debug(f"状态更新: 重复 #{index} -> {state.name} (attempt {attempt})")
        self.state_stream.on_next(update)


def log_state_updates(engine: ReplicationEngine, every: Optional[int] = None):
    """订阅状态流并记录日志；every 给出时每完成 every 次重复记一条 INFO"""
    finished = {"count": 0}
    lock = threading.Lock()

    def on_state_update(update: Dict[str, Any]):
        state = update["state"]
        if state is TaskState.SUCCESS:
            with lock:
                finished["count"] += 1
                count = finished["count"]
            if every and count % every == 0:
                logger.info(f"已完成 {count} 次重复")
        elif state is TaskState.RETRYING:
            logger.warning(f"重复 #{update['replication']} 重试: {update['result']}")
        elif state is TaskState.FAILED:
            logger.error(f"重复 #{update['replication']} 失败: {update['result']}")

    return engine.state_stream.subscribe(on_state_update)
