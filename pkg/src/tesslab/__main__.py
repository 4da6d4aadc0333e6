#!/usr/bin/env python
# -*- coding: utf-8 -*-
# @time    : 2024/8/21 16:32
# @author  : timger/yishenggudou
from tesslab.cli import app

app(prog_name="tesslab")
