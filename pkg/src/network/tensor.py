"""
Tensor denso com autodiferenciação reversa para o BiLCNet

Conjunto fechado de operações, cada uma com forward e backward explícitos.
float32 por padrão; float64 para verificação de gradientes.
"""

import math
from contextlib import contextmanager
from typing import Callable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import erf, expit

from errors import BatchTooSmall, EvenKernel, InvalidProbability, ShapeMismatch

DEFAULT_DTYPE = np.float32

_grad_enabled = True


@contextmanager
def no_grad() -> Iterator[None]:
    """Desligar a construção do grafo (inferência)"""
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tensor:
    """Valor n-dimensional com gradiente acumulado"""

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        if dtype is None:
            arr = np.asarray(data)
            dtype = arr.dtype if arr.dtype in (np.float32, np.float64) else DEFAULT_DTYPE
        self.data: np.ndarray = np.asarray(data, dtype=dtype)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._parents: Tuple['Tensor', ...] = ()
        self._backward: Optional[BackwardFn] = None

    @classmethod
    def from_op(cls, data: np.ndarray, parents: Sequence['Tensor'], backward: BackwardFn) -> 'Tensor':
        """Resultado de uma operação; o backward recebe o gradiente da saída e devolve um por pai"""
        out = cls(data, dtype=data.dtype)
        if _grad_enabled and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        return out

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def detach(self) -> 'Tensor':
        return Tensor(self.data.copy(), dtype=self.dtype)

    def zero_grad(self) -> None:
        self.grad = None

    def _topological_order(self) -> List['Tensor']:
        order: List[Tensor] = []
        visited = set()
        stack = [(self, False)]
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
                if id(parent) not in visited:
                    stack.append((parent, False))
        return order

    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        """Propagar gradientes até as folhas (acumulando em .grad)"""
        if grad is None:
            if self.size != 1:
                raise ShapeMismatch("backward sem gradiente exige saída escalar")
            grad = np.ones_like(self.data)
        grads = {id(self): np.asarray(grad, dtype=self.dtype)}

        for node in reversed(self._topological_order()):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                if node.requires_grad:
                    node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, parent_grad in zip(node._parents, node._backward(g)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                if id(parent) in grads:
                    grads[id(parent)] = grads[id(parent)] + parent_grad
                else:
                    grads[id(parent)] = parent_grad

    # operadores

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_as_tensor(other, self), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("Divisão só é suportada por escalar")
        return mul(self, 1.0 / float(other))

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)

    def reshape(self, *shape) -> 'Tensor':
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes) -> 'Tensor':
        return transpose(self, axes if axes else None)

    def sum(self, axis=None, keepdims: bool = False) -> 'Tensor':
        return tensor_sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> 'Tensor':
        return mean(self, axis, keepdims)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"


class Parameter(Tensor):
    """Tensor treinável com nome hierárquico"""

    def __init__(self, data, name: str = "", decay: bool = True, dtype=None):
        super().__init__(np.array(data, dtype=dtype), requires_grad=True)
        self.name = name
        self.decay = decay  # weight decay não se aplica a vieses e normalizações


class Buffer(Tensor):
    """Estado não treinável salvo com o modelo (estatísticas móveis, normalização)"""

    def __init__(self, data, name: str = "", dtype=None):
        super().__init__(np.array(data, dtype=dtype), requires_grad=False)
        self.name = name


def _as_tensor(value, like: Tensor) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=like.dtype), dtype=like.dtype)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Somar o gradiente sobre os eixos expandidos por broadcasting"""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_axis(x: Tensor, axis: int) -> int:
    if not -x.ndim <= axis < x.ndim:
        raise ShapeMismatch(f"Eixo {axis} inválido para tensor de {x.ndim} dimensões")
    return axis % x.ndim


# aritmética

def add(a: Tensor, b) -> Tensor:
    b = _as_tensor(b, a)
    try:
        data = a.data + b.data
    except ValueError as e:
        raise ShapeMismatch(f"Soma com formas incompatíveis {a.shape} e {b.shape}") from e
    return Tensor.from_op(data, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a: Tensor, b) -> Tensor:
    b = _as_tensor(b, a)
    try:
        data = a.data - b.data
    except ValueError as e:
        raise ShapeMismatch(f"Subtração com formas incompatíveis {a.shape} e {b.shape}") from e
    return Tensor.from_op(data, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a: Tensor, b) -> Tensor:
    b = _as_tensor(b, a)
    try:
        data = a.data * b.data
    except ValueError as e:
        raise ShapeMismatch(f"Produto com formas incompatíveis {a.shape} e {b.shape}") from e
    return Tensor.from_op(
        data, (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Produto matricial com broadcasting nos eixos iniciais"""
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeMismatch(f"matmul com formas incompatíveis {a.shape} e {b.shape}")
    try:
        data = np.matmul(a.data, b.data)
    except ValueError as e:
        raise ShapeMismatch(f"matmul com formas incompatíveis {a.shape} e {b.shape}") from e

    def backward(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return Tensor.from_op(data, (a, b), backward)


# forma

def reshape(x: Tensor, shape: Tuple[int, ...]) -> Tensor:
    try:
        data = x.data.reshape(shape)
    except ValueError as e:
        raise ShapeMismatch(f"Não é possível mudar {x.shape} para {shape}") from e
    return Tensor.from_op(data, (x,), lambda g: (g.reshape(x.shape),))


def transpose(x: Tensor, axes: Optional[Sequence[int]] = None) -> Tensor:
    if axes is None:
        axes = tuple(reversed(range(x.ndim)))
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return Tensor.from_op(np.transpose(x.data, axes), (x,), lambda g: (np.transpose(g, inverse),))


def getitem(x: Tensor, index) -> Tensor:
    def backward(g):
        grad = np.zeros_like(x.data)
        np.add.at(grad, index, g)
        return (grad,)

    return Tensor.from_op(x.data[index], (x,), backward)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    if not tensors:
        raise ShapeMismatch("concat sem tensores")
    axis = _check_axis(tensors[0], axis)
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as e:
        raise ShapeMismatch(f"concat com formas incompatíveis: {[t.shape for t in tensors]}") from e
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return Tensor.from_op(data, tuple(tensors), lambda g: tuple(np.split(g, bounds, axis=axis)))


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ShapeMismatch("stack sem tensores")
    try:
        data = np.stack([t.data for t in tensors], axis=axis)
    except ValueError as e:
        raise ShapeMismatch(f"stack com formas incompatíveis: {[t.shape for t in tensors]}") from e
    axis = axis % data.ndim
    return Tensor.from_op(
        data, tuple(tensors),
        lambda g: tuple(np.take(g, i, axis=axis) for i in range(len(tensors))),
    )


# reduções

def tensor_sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    data = x.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).astype(x.dtype),)

    return Tensor.from_op(np.asarray(data, dtype=x.dtype), (x,), backward)


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    if axis is None:
        count = x.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        count = int(np.prod([x.shape[a] for a in axes]))
    return mul(tensor_sum(x, axis, keepdims), 1.0 / count)


# ativações

def sigmoid(x: Tensor) -> Tensor:
    y = expit(x.data)
    return Tensor.from_op(y, (x,), lambda g: (g * y * (1.0 - y),))


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return Tensor.from_op(y, (x,), lambda g: (g * (1.0 - y * y),))


_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def gelu(x: Tensor) -> Tensor:
    """GELU exata x * Phi(x) com Phi via erf"""
    cdf = 0.5 * (1.0 + erf(x.data * _INV_SQRT2))
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * x.data * x.data)
    return Tensor.from_op(x.data * cdf, (x,), lambda g: (g * (cdf + x.data * pdf),))


def swish(x: Tensor) -> Tensor:
    s = expit(x.data)
    return Tensor.from_op(x.data * s, (x,), lambda g: (g * (s + x.data * s * (1.0 - s)),))


def glu(x: Tensor, axis: int = -1) -> Tensor:
    """a * sigmoid(b), com a e b as duas metades do eixo"""
    axis = _check_axis(x, axis)
    if x.shape[axis] % 2:
        raise ShapeMismatch(f"GLU exige eixo de tamanho par, recebido {x.shape[axis]}")
    a, b = np.split(x.data, 2, axis=axis)
    s = expit(b)

    def backward(g):
        return (np.concatenate([g * s, g * a * s * (1.0 - s)], axis=axis),)

    return Tensor.from_op(a * s, (x,), backward)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    axis = _check_axis(x, axis)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return Tensor.from_op(y, (x,), backward)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    axis = _check_axis(x, axis)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    y = shifted - log_norm
    probs = np.exp(y)

    def backward(g):
        return (g - probs * g.sum(axis=axis, keepdims=True),)

    return Tensor.from_op(y, (x,), backward)


# normalizações

def _normalize_backward(dxhat: np.ndarray, xhat: np.ndarray, inv_std: np.ndarray, axes, count: int) -> np.ndarray:
    return inv_std / count * (
        count * dxhat
        - dxhat.sum(axis=axes, keepdims=True)
        - xhat * (dxhat * xhat).sum(axis=axes, keepdims=True)
    )


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Padronização no último eixo seguida de afim"""
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ShapeMismatch(f"layer_norm: gamma/beta {gamma.shape}/{beta.shape} para dimensão {d}")
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv_std
    y = xhat * gamma.data + beta.data
    lead = tuple(range(x.ndim - 1))

    def backward(g):
        dx = _normalize_backward(g * gamma.data, xhat, inv_std, -1, d)
        return dx, (g * xhat).sum(axis=lead), g.sum(axis=lead)

    return Tensor.from_op(y, (x, gamma, beta), backward)


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: Tensor,
    running_var: Tensor,
    training: bool,
    momentum: float = 0.1,
    eps: float = 1e-5,
) -> Tensor:
    """
    Normalização em lote sobre todos os eixos exceto o último

    Em treino usa os momentos do lote e atualiza as estatísticas móveis
    (variância não viesada); em avaliação usa as estatísticas móveis.
    """
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ShapeMismatch(f"batch_norm: gamma/beta {gamma.shape}/{beta.shape} para dimensão {d}")
    axes = tuple(range(x.ndim - 1))
    count = x.size // d

    if training:
        if count < 2:
            raise BatchTooSmall(f"batch_norm em treino exige pelo menos 2 amostras, recebido {count}")
        mu = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        running_mean.data[...] = (1.0 - momentum) * running_mean.data + momentum * mu
        running_var.data[...] = (1.0 - momentum) * running_var.data + momentum * var * (count / (count - 1))
    else:
        mu = running_mean.data
        var = running_var.data

    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv_std
    y = xhat * gamma.data + beta.data

    def backward(g):
        dxhat = g * gamma.data
        if training:
            dx = _normalize_backward(dxhat, xhat, inv_std, axes, count)
        else:
            dx = dxhat * inv_std
        return dx, (g * xhat).sum(axis=axes), g.sum(axis=axes)

    return Tensor.from_op(y.astype(x.dtype, copy=False), (x, gamma, beta), backward)


def dropout(x: Tensor, p: float, training: bool, rng: np.random.Generator) -> Tensor:
    """Dropout invertido; identidade em avaliação ou com p = 0"""
    if not 0.0 <= p < 1.0:
        raise InvalidProbability(f"Probabilidade de dropout deve estar em [0, 1), recebido {p}")
    if not training or p == 0.0:
        return x
    mask = (rng.random(x.shape) >= p).astype(x.dtype) / x.dtype.type(1.0 - p)
    return Tensor.from_op(x.data * mask, (x,), lambda g: (g * mask,))


def depthwise_conv1d(x: Tensor, kernel: Tensor) -> Tensor:
    """
    Convolução 1-D por canal ao longo de T, padding "same" com zeros

    Args:
        x: (..., T, c)
        kernel: (k, c), k ímpar
    """
    k, c = kernel.shape
    if k % 2 == 0:
        raise EvenKernel(f"Kernel deve ter tamanho ímpar, recebido {k}")
    if x.ndim < 2 or x.shape[-1] != c:
        raise ShapeMismatch(f"depthwise_conv1d: entrada {x.shape} e kernel {kernel.shape}")

    T = x.shape[-2]
    pad = k // 2
    widths = [(0, 0)] * (x.ndim - 2) + [(pad, pad), (0, 0)]
    padded = np.pad(x.data, widths)
    out = np.zeros_like(x.data)
    for j in range(k):
        out += padded[..., j:j + T, :] * kernel.data[j]

    def backward(g):
        g_padded = np.zeros_like(padded)
        g_kernel = np.zeros_like(kernel.data)
        lead = tuple(range(x.ndim - 1))
        for j in range(k):
            g_padded[..., j:j + T, :] += g * kernel.data[j]
            g_kernel[j] = (g * padded[..., j:j + T, :]).sum(axis=lead)
        return g_padded[..., pad:pad + T, :], g_kernel

    return Tensor.from_op(out, (x, kernel), backward)
