#!/usr/bin/env python
# -*- coding: utf-8 -*-
# @time    : 2024/8/21 16:32
# @author  : timger/yishenggudou
"""tesslab 的异常层次"""


class TesslabError(Exception):
    """所有 tesslab 异常的基类"""


class DegenerateGeometry(TesslabError, ValueError):
    """多边形退化（面积低于容差、顶点不足或不凸）"""


class NoIntersection(TesslabError):
    """直线没有穿过多边形的开内部"""


class InconsistentComplex(TesslabError, RuntimeError):
    """单元列表无法组成合法的镶嵌复形"""


class UnknownCell(TesslabError, KeyError):
    """复形中不存在的单元编号"""


class EmptySample(TesslabError, ValueError):
    """minus sampling 之后没有可用单元"""


class ZeroOverlap(TesslabError, ValueError):
    """平移后的窗口与原窗口不相交"""


class InsufficientPoints(TesslabError, ValueError):
    """点数不足以估计二阶统计量"""


class ZeroDenominator(TesslabError, ZeroDivisionError):
    """标记均值为零，标记相关函数无定义"""


class ReplicationAborted(TesslabError, RuntimeError):
    """单次重复中退化事件过多，需要换一个随机子流重来"""


class DivisionLimitExceeded(TesslabError, RuntimeError):
    """STIT 分裂次数超过上限，说明速率计算有误"""


class ConfigError(TesslabError, ValueError):
    """运行配置非法"""


class CellsFileError(TesslabError, IOError):
    """单元文件格式错误"""
