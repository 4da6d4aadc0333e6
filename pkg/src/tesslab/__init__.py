#!/usr/bin/env python
# -*- coding: utf-8 -*-
# @time    : 2024/8/21 16:32
# @author  : timger/yishenggudou
"""平面 STIT / Poisson 直线镶嵌实验室"""

__version__ = "0.1.0"
