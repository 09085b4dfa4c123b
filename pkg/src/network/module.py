"""
Contêiner de parâmetros e camadas básicas
"""

import math
from typing import Dict, Iterator, List, Tuple

import numpy as np

from errors import ShapeMismatch
from network.tensor import (
    DEFAULT_DTYPE, Buffer, Parameter, Tensor, batch_norm, dropout, layer_norm,
)


class Module:
    """
    Base das camadas

    Parâmetros e buffers são descobertos pelos atributos, na ordem de
    definição; atributos iniciados por "_" ficam de fora.
    """

    def __init__(self):
        self.training = True

    def _children(self) -> Iterator[Tuple[str, object]]:
        for name, value in vars(self).items():
            if name.startswith('_'):
                continue
            if isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    yield f"{name}.{i}", item
            else:
                yield name, value

    def _named(self, kind, prefix: str = "") -> List[Tuple[str, Tensor]]:
        found = []
        for name, value in self._children():
            full = f"{prefix}{name}"
            if isinstance(value, kind):
                value.name = full
                found.append((full, value))
            elif isinstance(value, Module):
                found.extend(value._named(kind, f"{full}."))
        return found

    def named_parameters(self) -> List[Tuple[str, Parameter]]:
        return self._named(Parameter)

    def named_buffers(self) -> List[Tuple[str, Buffer]]:
        return self._named(Buffer)

    def parameters(self) -> List[Parameter]:
        return [p for _, p in self.named_parameters()]

    def modules(self) -> Iterator['Module']:
        yield self
        for _, value in self._children():
            if isinstance(value, Module):
                yield from value.modules()

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def train(self, mode: bool = True) -> 'Module':
        for module in self.modules():
            module.training = mode
        return self

    def eval(self) -> 'Module':
        return self.train(False)

    def cast(self, dtype) -> 'Module':
        """Converter parâmetros e buffers (float64 para verificação)"""
        for _, tensor in self.named_parameters() + self.named_buffers():
            tensor.data = tensor.data.astype(dtype)
            tensor.grad = None
        return self

    @property
    def dtype(self):
        params = self.parameters()
        return params[0].dtype if params else DEFAULT_DTYPE

    def state_dict(self) -> Dict[str, np.ndarray]:
        """Parâmetros e buffers por nome"""
        return {name: t.data for name, t in self.named_parameters() + self.named_buffers()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        own = dict(self.named_parameters() + self.named_buffers())
        missing = sorted(set(own) - set(state))
        unexpected = sorted(set(state) - set(own))
        if missing or unexpected:
            raise ShapeMismatch(f"Estado incompatível: faltando {missing}, sobrando {unexpected}")
        for name, tensor in own.items():
            value = np.asarray(state[name])
            if value.shape != tensor.shape:
                raise ShapeMismatch(f"{name}: forma {value.shape}, esperado {tensor.shape}")
            tensor.data = value.astype(value.dtype, copy=True)
            tensor.grad = None

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


class Linear(Module):
    """x @ w + b, com w armazenado como (entrada, saída)"""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, bias: bool = True, dtype=DEFAULT_DTYPE):
        super().__init__()
        bound = 1.0 / math.sqrt(in_dim)
        self.w = Parameter(rng.uniform(-bound, bound, size=(in_dim, out_dim)), dtype=dtype)
        self.b = Parameter(np.zeros(out_dim), decay=False, dtype=dtype) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        out = x @ self.w
        return out + self.b if self.b is not None else out


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5, dtype=DEFAULT_DTYPE):
        super().__init__()
        self.gamma = Parameter(np.ones(dim), decay=False, dtype=dtype)
        self.beta = Parameter(np.zeros(dim), decay=False, dtype=dtype)
        self._eps = eps

    def forward(self, x: Tensor) -> Tensor:
        return layer_norm(x, self.gamma, self.beta, self._eps)


class BatchNorm(Module):
    """Normalização em lote com estatísticas móveis (momento 0.1)"""

    def __init__(self, dim: int, momentum: float = 0.1, eps: float = 1e-5, dtype=DEFAULT_DTYPE):
        super().__init__()
        self.gamma = Parameter(np.ones(dim), decay=False, dtype=dtype)
        self.beta = Parameter(np.zeros(dim), decay=False, dtype=dtype)
        self.running_mean = Buffer(np.zeros(dim), dtype=dtype)
        self.running_var = Buffer(np.ones(dim), dtype=dtype)
        self._momentum = momentum
        self._eps = eps

    def forward(self, x: Tensor) -> Tensor:
        return batch_norm(
            x, self.gamma, self.beta, self.running_mean, self.running_var,
            training=self.training, momentum=self._momentum, eps=self._eps,
        )


class Dropout(Module):
    def __init__(self, p: float, rng: np.random.Generator):
        super().__init__()
        self.p = p
        self._rng = rng

    def forward(self, x: Tensor) -> Tensor:
        return dropout(x, self.p, self.training, self._rng)
