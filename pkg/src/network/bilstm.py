"""
BiLSTM multicamada e projeção linear dos estados
"""

import math
from typing import Optional, Tuple

import numpy as np

from config import BiLSTMConfig
from errors import ShapeMismatch
from network.module import Dropout, Linear, Module
from network.tensor import DEFAULT_DTYPE, Parameter, Tensor, concat, sigmoid, stack, tanh


class LSTMDirection(Module):
    """Pesos de uma direção de uma camada (portas na ordem i, f, g, o)"""

    def __init__(self, in_dim: int, hidden_dim: int, rng: np.random.Generator, dtype=DEFAULT_DTYPE):
        super().__init__()
        H = hidden_dim
        bound = 1.0 / math.sqrt(H)
        self.w_ih = Parameter(rng.uniform(-bound, bound, size=(4 * H, in_dim)), dtype=dtype)
        self.w_hh = Parameter(rng.uniform(-bound, bound, size=(4 * H, H)), dtype=dtype)
        b_ih = np.zeros(4 * H)
        b_ih[H:2 * H] = 1.0  # porta de esquecimento começa aberta
        self.b_ih = Parameter(b_ih, decay=False, dtype=dtype)
        self.b_hh = Parameter(np.zeros(4 * H), decay=False, dtype=dtype)

    @property
    def hidden_dim(self) -> int:
        return self.w_hh.shape[1]

    @property
    def in_dim(self) -> int:
        return self.w_ih.shape[1]


def _gates_step(gates: Tensor, c_prev: Tensor, H: int) -> Tuple[Tensor, Tensor]:
    i = sigmoid(gates[..., 0:H])
    f = sigmoid(gates[..., H:2 * H])
    g = tanh(gates[..., 2 * H:3 * H])
    o = sigmoid(gates[..., 3 * H:4 * H])
    c_t = f * c_prev + i * g
    h_t = o * tanh(c_t)
    return h_t, c_t


def lstm_cell_step(x_t: Tensor, h_prev: Tensor, c_prev: Tensor, params: LSTMDirection) -> Tuple[Tensor, Tensor]:
    """
    Um passo da LSTM

    Args:
        x_t: (n, entrada)
        h_prev, c_prev: (n, H)

    Returns:
        (h_t, c_t)
    """
    H = params.hidden_dim
    if x_t.shape[-1] != params.in_dim or h_prev.shape[-1] != H or c_prev.shape != h_prev.shape:
        raise ShapeMismatch(
            f"lstm_cell_step: x {x_t.shape}, h {h_prev.shape}, c {c_prev.shape} "
            f"para entrada {params.in_dim} e H={H}"
        )
    gates = x_t @ params.w_ih.transpose() + params.b_ih + h_prev @ params.w_hh.transpose() + params.b_hh
    return _gates_step(gates, c_prev, H)


def run_direction(x: Tensor, params: LSTMDirection, reverse: bool) -> Tensor:
    n, T, _ = x.shape
    H = params.hidden_dim
    # projeção da entrada de todos os passos de uma vez
    x_proj = x @ params.w_ih.transpose() + params.b_ih + params.b_hh
    w_hh_t = params.w_hh.transpose()

    h = Tensor(np.zeros((n, H), dtype=x.dtype))
    c = Tensor(np.zeros((n, H), dtype=x.dtype))
    outputs = [None] * T
    steps = range(T - 1, -1, -1) if reverse else range(T)
    for t in steps:
        gates = x_proj[:, t, :] + h @ w_hh_t
        h, c = _gates_step(gates, c, H)
        outputs[t] = h
    return stack(outputs, axis=1)


class BiLSTMLayer(Module):
    def __init__(self, in_dim: int, hidden_dim: int, rng: np.random.Generator, dtype=DEFAULT_DTYPE):
        super().__init__()
        self.fwd = LSTMDirection(in_dim, hidden_dim, rng, dtype)
        self.bwd = LSTMDirection(in_dim, hidden_dim, rng, dtype)


class BiLSTM(Module):
    """L camadas bidirecionais; saída (n, T, 2H)"""

    def __init__(self, config: BiLSTMConfig, rng: np.random.Generator, dtype=DEFAULT_DTYPE):
        super().__init__()
        self.config = config
        self.layers = [
            BiLSTMLayer(config.input_dim if layer == 0 else 2 * config.hidden_dim, config.hidden_dim, rng, dtype)
            for layer in range(config.num_layers)
        ]
        self.between = Dropout(config.dropout, rng)

    def forward(self, x: Tensor) -> Tensor:
        return bilstm_forward(x, self.config, self)


def bilstm_forward(x: Tensor, config: BiLSTMConfig, params: BiLSTM) -> Tensor:
    """
    Passo direto da BiLSTM

    Cada camada percorre a sequência da esquerda para a direita e da direita
    para a esquerda, a partir de estados nulos; as saídas são concatenadas por
    passo. Dropout entre camadas somente em treino.
    """
    if x.ndim != 3 or x.shape[1] < 1 or x.shape[2] != config.input_dim:
        raise ShapeMismatch(f"BiLSTM espera (n, T, {config.input_dim}), recebido {x.shape}")

    out = x
    for index, layer in enumerate(params.layers):
        if index > 0:
            out = params.between(out)
        out = concat([run_direction(out, layer.fwd, reverse=False), run_direction(out, layer.bwd, reverse=True)], axis=-1)
    return out


def project_states(h: Tensor, w: Tensor, b: Optional[Tensor]) -> Tensor:
    """Mapa afim por passo de tempo: (n, T, 2H) -> (n, T, 2H)"""
    if h.shape[-1] != w.shape[0]:
        raise ShapeMismatch(f"Projeção: estados {h.shape} e pesos {w.shape}")
    out = h @ w
    return out + b if b is not None else out


class StateProjection(Linear):
    def forward(self, h: Tensor) -> Tensor:
        return project_states(h, self.w, self.b)
