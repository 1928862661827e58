# -*- coding: utf-8 -*-
"""
Ядро тензоров с обратным автоматическим дифференцированием.

Тензор хранит плотный numpy-массив (по умолчанию float32, ранг 4: n, c, h, w),
флаг requires_grad и буфер градиента. Примитивы сети (свёртка, пулинг,
batch norm, активации, линейный слой, потеря) строят граф вычислений,
backward() обходит его в обратном топологическом порядке и накапливает (+=)
градиенты в листьях.

Свёртка - кросс-корреляция, ядро не переворачивается.
"""

import logging
from collections import OrderedDict
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from errors import ConfigError, DataError, NumericError, ShapeError, UsageError
from models import Mode, PaddingMode

logger = logging.getLogger(__name__)

_DEFAULT_DTYPE = np.float32
_GRAD_ENABLED = True


def default_dtype():
    """Текущий тип данных для новых тензоров"""
    return _DEFAULT_DTYPE


@contextmanager
def float64_mode():
    """64-битный режим - только для проверки градиентов конечными разностями"""
    global _DEFAULT_DTYPE
    previous = _DEFAULT_DTYPE
    _DEFAULT_DTYPE = np.float64
    try:
        yield
    finally:
        _DEFAULT_DTYPE = previous


@contextmanager
def no_grad():
    """Прямой проход без построения графа (оценка, инференс)"""
    global _GRAD_ENABLED
    previous = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = previous


def _require_finite(array: np.ndarray, op: str):
    if not np.all(np.isfinite(array)):
        raise NumericError(f"{op}: обнаружены NaN/Inf в данных")


class Tensor:
    """Плотный тензор с опциональным отслеживанием градиента"""

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        self.data = np.array(data, dtype=_DEFAULT_DTYPE, copy=True)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._parents: Tuple["Tensor", ...] = ()
        self._backward: Optional[Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]] = None

    @classmethod
    def _wrap(cls, data: np.ndarray, parents: Sequence["Tensor"], backward, op: str) -> "Tensor":
        """Результат примитива: проверка конечности и подключение к графу"""
        _require_finite(data, op)
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.name = None
        needs_grad = _GRAD_ENABLED and any(p.requires_grad for p in parents)
        out.requires_grad = needs_grad
        out._parents = tuple(parents) if needs_grad else ()
        out._backward = backward if needs_grad else None
        return out

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dims(self) -> Tuple[int, int, int, int]:
        """(n, c, h, w) для тензоров ранга 4"""
        if self.data.ndim != 4:
            raise ShapeError(f"Ожидался тензор ранга 4, получена форма {self.shape}")
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def item(self) -> float:
        if self.data.size != 1:
            raise UsageError(f"item() требует скаляр, форма {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        self.grad = None

    def backward(self):
        """Обратный проход от скалярного выхода"""
        if self.data.size != 1:
            raise UsageError(f"backward() вызывается только для скаляра, форма {self.shape}")
        if not self.requires_grad:
            raise UsageError("backward(): выход не зависит от параметров с requires_grad")

        order = _topological_order(self)
        pending: Dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            grad = pending.pop(id(node), None)
            if grad is None:
                continue
            if node._backward is None:
                # лист графа
                if node.grad is None:
                    node.grad = np.array(grad, dtype=node.data.dtype).reshape(node.shape)
                else:
                    node.grad += grad
                continue
            for parent, parent_grad in zip(node._parents, node._backward(grad)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in pending:
                    pending[key] = pending[key] + parent_grad
                else:
                    pending[key] = parent_grad

    # Арифметика с broadcasting
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, mul(_as_tensor(other), -1.0))

    def sum(self) -> "Tensor":
        return tensor_sum(self)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def _as_tensor(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def _topological_order(root: Tensor) -> List[Tensor]:
    """Порядок «родители раньше потомков» (итеративный DFS, без рекурсии)"""
    order: List[Tensor] = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    return order


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Сворачивание градиента обратно к форме операнда"""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# =============================================================================
# Поэлементные операции
# =============================================================================

def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        out = a.data + b.data
    except ValueError:
        raise ShapeError(f"add: формы {a.shape} и {b.shape} несовместимы")

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return Tensor._wrap(out, (a, b), backward, "add")


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        out = a.data * b.data
    except ValueError:
        raise ShapeError(f"mul: формы {a.shape} и {b.shape} несовместимы")

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return Tensor._wrap(out, (a, b), backward, "mul")


def tensor_sum(x: Tensor) -> Tensor:
    out = np.array(x.data.sum(), dtype=x.data.dtype)

    def backward(g):
        return (np.broadcast_to(g, x.shape).astype(x.data.dtype),)

    return Tensor._wrap(out, (x,), backward, "sum")


def reshape(x: Tensor, shape: Tuple[int, ...]) -> Tensor:
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: нельзя привести {x.shape} к {shape}")

    def backward(g):
        return (g.reshape(x.shape),)

    return Tensor._wrap(out, (x,), backward, "reshape")


def flatten(x: Tensor) -> Tensor:
    """(n, c, 1, 1) -> (n, c)"""
    return reshape(x, (x.shape[0], -1))


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    out = np.where(mask, x.data, 0).astype(x.data.dtype)

    def backward(g):
        return (g * mask,)

    return Tensor._wrap(out, (x,), backward, "relu")


def _sigmoid_array(z: np.ndarray) -> np.ndarray:
    """Значения строго внутри (0, 1) для любой точности"""
    dtype = z.dtype
    e = np.exp(-np.abs(z))
    out = np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(dtype)
    lower = np.nextafter(np.zeros((), dtype), np.ones((), dtype))
    upper = np.nextafter(np.ones((), dtype), np.zeros((), dtype))
    return np.clip(out, lower, upper)


def sigmoid(x: Tensor) -> Tensor:
    out = _sigmoid_array(x.data)

    def backward(g):
        return (g * out * (1 - out),)

    return Tensor._wrap(out, (x,), backward, "sigmoid")


def tensor_abs(x: Tensor) -> Tensor:
    out = np.abs(x.data)

    def backward(g):
        return (g * np.sign(x.data),)

    return Tensor._wrap(out, (x,), backward, "abs")


# =============================================================================
# Свёртка
# =============================================================================

def _pad(x: np.ndarray, padding: PaddingMode) -> np.ndarray:
    p = padding.size
    if p == 0:
        return x
    mode = "constant" if padding.kind == "zero" else "edge"
    return np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)), mode=mode)


def _unpad_grad(grad: np.ndarray, padding: PaddingMode, h: int, w: int) -> np.ndarray:
    """Градиент по паддингованному входу -> градиент по исходному"""
    p = padding.size
    if p == 0:
        return grad
    if padding.kind == "zero":
        return grad[:, :, p:p + h, p:p + w]
    # replicate: значения за границей - копии крайних пикселей
    rows = np.clip(np.arange(-p, h + p), 0, h - 1)
    cols = np.clip(np.arange(-p, w + p), 0, w - 1)
    by_rows = np.zeros(grad.shape[:2] + (h, grad.shape[3]), dtype=grad.dtype)
    np.add.at(by_rows, (slice(None), slice(None), rows), grad)
    result = np.zeros(grad.shape[:2] + (h, w), dtype=grad.dtype)
    np.add.at(result, (slice(None), slice(None), slice(None), cols), by_rows)
    return result


def conv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def conv2d(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None, stride: int = 1,
           padding: PaddingMode = PaddingMode.zero(0), groups: int = 1) -> Tensor:
    """
    2D кросс-корреляция.

    Args:
        x: (n, c, h, w)
        weight: (out_c, c / groups, kh, kw), kh и kw нечётные
        bias: (out_c,) или None
        padding: PaddingMode.zero(p) | PaddingMode.replicate(p)
    """
    if x.ndim != 4 or weight.ndim != 4:
        raise ShapeError(f"conv2d: ожидались тензоры ранга 4, вход {x.shape}, ядро {weight.shape}")
    if stride < 1 or groups < 1:
        raise ConfigError(f"conv2d: stride={stride}, groups={groups} должны быть >= 1")
    n, c, h, w = x.shape
    out_c, in_per_group, kh, kw = weight.shape
    if c % groups or out_c % groups or in_per_group != c // groups:
        raise ShapeError(f"conv2d: вход {x.shape} несовместим с ядром {weight.shape} при groups={groups}")
    if kh % 2 == 0 or kw % 2 == 0:
        raise ShapeError(f"conv2d: размер ядра должен быть нечётным, ядро {weight.shape}")
    if bias is not None and bias.shape != (out_c,):
        raise ShapeError(f"conv2d: смещение {bias.shape} не соответствует ядру {weight.shape}")
    _require_finite(x.data, "conv2d")

    xp = _pad(x.data, padding)
    if xp.shape[2] < kh or xp.shape[3] < kw:
        raise ShapeError(f"conv2d: вход {x.shape} меньше ядра {weight.shape} после паддинга")
    windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    oh, ow = windows.shape[2], windows.shape[3]
    wdata = weight.data

    if groups == 1:
        out = np.tensordot(windows, wdata, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
    else:
        out_per_group = out_c // groups
        grouped = windows.reshape(n, groups, in_per_group, oh, ow, kh, kw)
        wg = wdata.reshape(groups, out_per_group, in_per_group, kh, kw)
        out = np.einsum("ngchwij,gocij->ngohw", grouped, wg, optimize=True).reshape(n, out_c, oh, ow)
    out = np.ascontiguousarray(out, dtype=np.result_type(x.data, wdata))
    if bias is not None:
        out += bias.data[None, :, None, None]

    def backward(g):
        grad_w = grad_x = None
        if groups == 1:
            if weight.requires_grad:
                grad_w = np.tensordot(g, windows, axes=([0, 2, 3], [0, 2, 3]))
            if x.requires_grad:
                cols = np.tensordot(g, wdata, axes=([1], [0])).transpose(0, 3, 1, 2, 4, 5)
        else:
            gg = g.reshape(n, groups, out_c // groups, oh, ow)
            if weight.requires_grad:
                grad_w = np.einsum("ngohw,ngchwij->gocij", gg, grouped,
                                   optimize=True).reshape(weight.shape)
            if x.requires_grad:
                cols = np.einsum("ngohw,gocij->ngchwij", gg, wg,
                                 optimize=True).reshape(n, c, oh, ow, kh, kw)
        if x.requires_grad:
            grad_xp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    grad_xp[:, :, i:i + stride * (oh - 1) + 1:stride,
                            j:j + stride * (ow - 1) + 1:stride] += cols[:, :, :, :, i, j]
            grad_x = _unpad_grad(grad_xp, padding, h, w)
        grads = [grad_x, grad_w]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return grads

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor._wrap(out, parents, backward, "conv2d")


# =============================================================================
# Пулинг
# =============================================================================

def _pool_windows(x: Tensor, window: int, stride: int, op: str):
    if x.ndim != 4:
        raise ShapeError(f"{op}: ожидался тензор ранга 4, форма {x.shape}")
    n, c, h, w = x.shape
    if window < 1 or window > h or window > w:
        raise ShapeError(f"{op}: окно {window} больше пространственных размеров {(h, w)}")
    if stride < 1:
        raise ConfigError(f"{op}: stride должен быть >= 1")
    return sliding_window_view(x.data, (window, window), axis=(2, 3))[:, :, ::stride, ::stride]


def max_pool2d(x: Tensor, window: int, stride: Optional[int] = None) -> Tensor:
    stride = stride or window
    windows = _pool_windows(x, window, stride, "max_pool2d")
    n, c, oh, ow = windows.shape[:4]
    flat = windows.reshape(n, c, oh, ow, window * window)
    arg = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]

    def backward(g):
        grad = np.zeros_like(x.data)
        di, dj = np.divmod(arg, window)
        ni, ci, hi, wi = np.indices((n, c, oh, ow), sparse=True)
        np.add.at(grad, (ni, ci, hi * stride + di, wi * stride + dj), g)
        return (grad,)

    return Tensor._wrap(np.ascontiguousarray(out), (x,), backward, "max_pool2d")


def avg_pool2d(x: Tensor, window: int, stride: Optional[int] = None) -> Tensor:
    """Среднее по окну; делитель всегда window^2"""
    stride = stride or window
    windows = _pool_windows(x, window, stride, "avg_pool2d")
    oh, ow = windows.shape[2], windows.shape[3]
    area = window * window
    out = windows.sum(axis=(-2, -1)) / area

    def backward(g):
        grad = np.zeros_like(x.data)
        share = g / area
        for i in range(window):
            for j in range(window):
                grad[:, :, i:i + stride * (oh - 1) + 1:stride, j:j + stride * (ow - 1) + 1:stride] += share
        return (grad,)

    return Tensor._wrap(out.astype(x.data.dtype), (x,), backward, "avg_pool2d")


def global_avg_pool(x: Tensor) -> Tensor:
    """(n, c, h, w) -> (n, c, 1, 1)"""
    n, c, h, w = x.dims
    out = x.data.mean(axis=(2, 3), keepdims=True)

    def backward(g):
        return (np.broadcast_to(g / (h * w), x.shape).astype(x.data.dtype),)

    return Tensor._wrap(out, (x,), backward, "global_avg_pool")


def global_max_pool(x: Tensor) -> Tensor:
    """(n, c, h, w) -> (n, c, 1, 1); при равенстве градиент идёт в первый максимум"""
    n, c, h, w = x.dims
    flat = x.data.reshape(n, c, h * w)
    arg = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, arg[..., None], axis=-1).reshape(n, c, 1, 1)

    def backward(g):
        grad = np.zeros((n, c, h * w), dtype=x.data.dtype)
        np.put_along_axis(grad, arg[..., None], g.reshape(n, c, 1), axis=-1)
        return (grad.reshape(x.shape),)

    return Tensor._wrap(out, (x,), backward, "global_max_pool")


# =============================================================================
# Batch normalization
# =============================================================================

def batch_norm2d(x: Tensor, scale: Tensor, shift: Tensor, running_mean: np.ndarray,
                 running_var: np.ndarray, mode: Mode = Mode.TRAIN, momentum: float = 0.1,
                 epsilon: float = 1e-5) -> Tensor:
    """
    Batch norm по каналам.
    Train: статистики батча, running_* обновляются на месте.
    Eval: только running_*, состояние не меняется.
    """
    n, c, h, w = x.dims
    if scale.shape != (c,) or shift.shape != (c,):
        raise ShapeError(f"batch_norm2d: вход {x.shape}, scale {scale.shape}, shift {shift.shape}")
    shape = (1, c, 1, 1)

    if mode == Mode.TRAIN:
        if n < 2:
            raise ConfigError(
                "batch_norm2d: в режиме Train нужен батч из 2+ образцов (получен 1); "
                "переключите модель в режим Eval или увеличьте размер батча")
        count = n * h * w
        mean = x.data.mean(axis=(0, 2, 3))
        var = x.data.var(axis=(0, 2, 3))
        inv_std = 1.0 / np.sqrt(var + epsilon)
        xhat = (x.data - mean.reshape(shape)) * inv_std.reshape(shape)
        running_mean *= (1 - momentum)
        running_mean += momentum * mean.astype(running_mean.dtype)
        running_var *= (1 - momentum)
        running_var += momentum * (var * count / max(count - 1, 1)).astype(running_var.dtype)
    else:
        count = None
        inv_std = 1.0 / np.sqrt(running_var + epsilon)
        xhat = (x.data - running_mean.reshape(shape)) * inv_std.reshape(shape)

    xhat = xhat.astype(x.data.dtype)
    out = xhat * scale.data.reshape(shape) + shift.data.reshape(shape)

    def backward(g):
        grad_scale = (g * xhat).sum(axis=(0, 2, 3))
        grad_shift = g.sum(axis=(0, 2, 3))
        dxhat = g * scale.data.reshape(shape)
        inv = inv_std.reshape(shape).astype(x.data.dtype)
        if count is None:
            grad_x = dxhat * inv
        else:
            grad_x = inv / count * (count * dxhat
                                    - dxhat.sum(axis=(0, 2, 3), keepdims=True)
                                    - xhat * (dxhat * xhat).sum(axis=(0, 2, 3), keepdims=True))
        return grad_x, grad_scale, grad_shift

    return Tensor._wrap(out, (x, scale, shift), backward, "batch_norm2d")


# =============================================================================
# Линейный слой и потеря
# =============================================================================

def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """(n, d) @ (k, d)^T + (k,) -> (n, k)"""
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise ShapeError(f"linear: вход {x.shape} несовместим с весами {weight.shape}")
    if bias is not None and bias.shape != (weight.shape[0],):
        raise ShapeError(f"linear: смещение {bias.shape} не соответствует весам {weight.shape}")
    out = x.data @ weight.data.T
    if bias is not None:
        out = out + bias.data

    def backward(g):
        grads = [g @ weight.data, g.T @ x.data]
        if bias is not None:
            grads.append(g.sum(axis=0))
        return grads

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor._wrap(out, parents, backward, "linear")


def softmax(logits: np.ndarray) -> np.ndarray:
    """Устойчивый softmax по последней оси"""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits: Tensor, labels) -> Tensor:
    """Среднее по батчу -log softmax(logits)[label], через log-sum-exp"""
    labels = np.asarray(labels)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeError(f"softmax_cross_entropy: логиты {logits.shape}, метки {labels.shape}")
    k = logits.shape[1]
    if labels.dtype.kind not in "iu" or np.any((labels < 0) | (labels >= k)):
        raise DataError(f"softmax_cross_entropy: метки должны быть в [0, {k - 1}], получено {labels.tolist()}")
    n = logits.shape[0]
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_sum = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_sum
    loss = np.array(-log_probs[np.arange(n), labels].mean(), dtype=logits.data.dtype)

    def backward(g):
        grad = np.exp(log_probs)
        grad[np.arange(n), labels] -= 1
        return (grad * (g / n),)

    return Tensor._wrap(loss, (logits,), backward, "softmax_cross_entropy")


# =============================================================================
# Хранилище параметров
# =============================================================================

@dataclass
class ParamEntry:
    """Параметр: тензор, флаг обучаемости и вид (param | fixed | buffer)"""
    tensor: Tensor
    trainable: bool
    kind: str = "param"


class ParamStore:
    """
    Упорядоченный набор именованных параметров сети.
    Иерархические имена: "stream1.stage2.block0.conv1.weight".
    """

    KINDS = ("param", "fixed", "buffer")

    def __init__(self):
        self._entries: "OrderedDict[str, ParamEntry]" = OrderedDict()
        self.first_moment: Dict[str, np.ndarray] = {}
        self.second_moment: Dict[str, np.ndarray] = {}

    def register(self, name: str, value, trainable: bool = True, kind: Optional[str] = None) -> Tensor:
        """Регистрация параметра; fixed и buffer никогда не обучаются"""
        if name in self._entries:
            raise ConfigError(f"Параметр '{name}' уже зарегистрирован")
        kind = kind or ("param" if trainable else "fixed")
        if kind not in self.KINDS:
            raise ConfigError(f"Неизвестный вид параметра '{kind}'")
        if kind != "param" and trainable:
            raise ConfigError(f"Параметр '{name}' вида {kind} не может быть обучаемым")
        tensor = value if isinstance(value, Tensor) else Tensor(value)
        tensor.requires_grad = trainable
        tensor.name = name
        self._entries[name] = ParamEntry(tensor, trainable, kind)
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self._entries[name].tensor

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def entry(self, name: str) -> ParamEntry:
        return self._entries[name]

    def items(self) -> Iterator[Tuple[str, ParamEntry]]:
        return iter(self._entries.items())

    def trainable(self) -> List[Tuple[str, Tensor]]:
        return [(name, e.tensor) for name, e in self._entries.items() if e.trainable]

    def of_kind(self, kind: str) -> List[Tuple[str, Tensor]]:
        return [(name, e.tensor) for name, e in self._entries.items() if e.kind == kind]

    def zero_grads(self):
        for entry in self._entries.values():
            entry.tensor.grad = None

    def count(self, kind: str = "param", prefix: str = "") -> int:
        """Число скалярных значений вида `kind` с данным префиксом имени"""
        return int(sum(e.tensor.data.size for name, e in self._entries.items()
                       if e.kind == kind and name.startswith(prefix)))

    def moments(self, name: str) -> Tuple[np.ndarray, np.ndarray]:
        """Буферы первого и второго моментов (создаются при первом обращении)"""
        if name not in self.first_moment:
            data = self[name].data
            self.first_moment[name] = np.zeros_like(data)
            self.second_moment[name] = np.zeros_like(data)
        return self.first_moment[name], self.second_moment[name]

    def snapshot(self, kind: Optional[str] = None) -> Dict[str, np.ndarray]:
        """Копии значений (для проверки неизменности фиксированных ядер)"""
        return {name: e.tensor.data.copy() for name, e in self._entries.items()
                if kind is None or e.kind == kind}


# =============================================================================
# Инициализация весов
# =============================================================================

def he_normal(rng: np.random.Generator, shape: Tuple[int, ...]) -> np.ndarray:
    """He-normal для свёрток: std = sqrt(2 / fan_in)"""
    fan_in = int(np.prod(shape[1:]))
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)


def lecun_normal(rng: np.random.Generator, shape: Tuple[int, ...]) -> np.ndarray:
    """LeCun-normal для линейного слоя: std = sqrt(1 / fan_in)"""
    fan_in = int(np.prod(shape[1:]))
    return rng.normal(0.0, np.sqrt(1.0 / fan_in), size=shape)
