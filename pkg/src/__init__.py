# -*- coding: utf-8 -*-
"""
GocNet - обнаружение подделок лиц градиентными операторами
"""

__version__ = '1.0.0'
__author__ = 'GocNet Team'
