# -*- coding: utf-8 -*-
"""
Эталонные реализации на циклах и численное дифференцирование
"""

from typing import Callable

import numpy as np


def pad_array(x: np.ndarray, pad: int, kind: str = "zero") -> np.ndarray:
    if pad == 0:
        return x
    mode = "constant" if kind == "zero" else "edge"
    return np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)), mode=mode)


def conv2d_loop(x, w, b=None, stride=1, pad=0, kind="zero", groups=1):
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    n, c, h, wd = x.shape
    oc, icg, kh, kw = w.shape
    xp = pad_array(x, pad, kind)
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (wd + 2 * pad - kw) // stride + 1
    ocg = oc // groups
    out = np.zeros((n, oc, oh, ow))
    for i in range(n):
        for o in range(oc):
            g = o // ocg
            for y in range(oh):
                for z in range(ow):
                    acc = 0.0
                    for ci in range(icg):
                        for a in range(kh):
                            for bb in range(kw):
                                acc += xp[i, g * icg + ci, y * stride + a, z * stride + bb] * w[o, ci, a, bb]
                    out[i, o, y, z] = acc + (b[o] if b is not None else 0.0)
    return out


def pool_loop(x, window, stride, how="max"):
    x = np.asarray(x, dtype=np.float64)
    n, c, h, w = x.shape
    oh = (h - window) // stride + 1
    ow = (w - window) // stride + 1
    out = np.zeros((n, c, oh, ow))
    for i in range(n):
        for ch in range(c):
            for y in range(oh):
                for z in range(ow):
                    values = [x[i, ch, y * stride + a, z * stride + bb]
                              for a in range(window) for bb in range(window)]
                    out[i, ch, y, z] = max(values) if how == "max" else sum(values) / (window * window)
    return out


def global_pool_loop(x, how="avg"):
    x = np.asarray(x, dtype=np.float64)
    n, c = x.shape[:2]
    out = np.zeros((n, c, 1, 1))
    for i in range(n):
        for ch in range(c):
            flat = list(x[i, ch].ravel())
            out[i, ch, 0, 0] = max(flat) if how == "max" else sum(flat) / len(flat)
    return out


def linear_loop(x, w, b):
    n, d = x.shape
    k = w.shape[0]
    out = np.zeros((n, k))
    for i in range(n):
        for j in range(k):
            out[i, j] = sum(x[i, t] * w[j, t] for t in range(d)) + b[j]
    return out


def bilinear_loop(image, height, width):
    """(C, H, W) -> (C, height, width), центры пикселей со сдвигом 0.5"""
    c, in_h, in_w = image.shape
    out = np.zeros((c, height, width))
    for y in range(height):
        sy = min(max((y + 0.5) * in_h / height - 0.5, 0), in_h - 1)
        y0 = int(np.floor(sy))
        y1 = min(y0 + 1, in_h - 1)
        wy = sy - y0
        for x in range(width):
            sx = min(max((x + 0.5) * in_w / width - 0.5, 0), in_w - 1)
            x0 = int(np.floor(sx))
            x1 = min(x0 + 1, in_w - 1)
            wx = sx - x0
            for ch in range(c):
                top = image[ch, y0, x0] * (1 - wx) + image[ch, y0, x1] * wx
                bottom = image[ch, y1, x0] * (1 - wx) + image[ch, y1, x1] * wx
                out[ch, y, x] = top * (1 - wy) + bottom * wy
    return out


def auc_pairwise(scores, labels):
    """Статистика Манна-Уитни полным перебором пар, в целых числах"""
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    doubled = 0
    for p in pos:
        for q in neg:
            doubled += 2 if p > q else (1 if p == q else 0)
    return doubled / (2 * len(pos) * len(neg))


def numeric_grad(f: Callable[[], float], array: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Центральные разности по всем элементам array (меняется на месте и восстанавливается)"""
    grad = np.zeros(array.shape, dtype=np.float64)
    for index in np.ndindex(array.shape):
        original = array[index]
        array[index] = original + h
        plus = f()
        array[index] = original - h
        minus = f()
        array[index] = original
        grad[index] = (plus - minus) / (2 * h)
    return grad


def numeric_grad_at(f: Callable[[], float], array: np.ndarray, indices, h: float = 1e-5) -> np.ndarray:
    """Центральные разности только в выбранных позициях"""
    values = []
    for index in indices:
        original = array[index]
        array[index] = original + h
        plus = f()
        array[index] = original - h
        minus = f()
        array[index] = original
        values.append((plus - minus) / (2 * h))
    return np.array(values)


def rel_error(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    scale = max(np.linalg.norm(a) + np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / scale)
