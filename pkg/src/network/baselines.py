"""
Baselines de sanidade: classe majoritária e LSTM unidirecional
"""

from typing import Union

import numpy as np

from config import BiLCNetConfig
from errors import EmptySplit, ShapeMismatch
from models.record import NUM_CLASSES
from network.bilcnet import InputNormalizer
from network.bilstm import LSTMDirection, run_direction
from network.module import Dropout, Linear, Module
from network.tensor import DEFAULT_DTYPE, Tensor


class MajorityBaseline:
    """Prevê sempre o rótulo mais frequente do treino (empate: menor índice)"""

    def __init__(self):
        self.label: int = 0

    def fit(self, labels: np.ndarray) -> 'MajorityBaseline':
        if len(labels) == 0:
            raise EmptySplit("Baseline majoritário sem rótulos de treino")
        counts = np.bincount(np.asarray(labels, dtype=np.int64), minlength=NUM_CLASSES)
        self.label = int(np.argmax(counts))
        return self

    def predict(self, n: int) -> np.ndarray:
        return np.full(n, self.label, dtype=np.int64)


class LSTMBaseline(Module):
    """L camadas LSTM da esquerda para a direita; último estado -> Linear -> 4 logits"""

    def __init__(self, config: BiLCNetConfig, seed: int = 0, dtype=DEFAULT_DTYPE):
        super().__init__()
        self.config = config
        self._rng = np.random.default_rng(seed)
        lstm = config.bilstm
        self.norm = InputNormalizer(lstm.input_dim, dtype)
        self.layers = [
            LSTMDirection(lstm.input_dim if i == 0 else lstm.hidden_dim, lstm.hidden_dim, self._rng, dtype)
            for i in range(lstm.num_layers)
        ]
        self.between = Dropout(lstm.dropout, self._rng)
        self.out = Linear(lstm.hidden_dim, config.num_classes, self._rng, dtype=dtype)

    def reseed(self, seed: int) -> None:
        self._rng = np.random.default_rng(seed)
        self.between._rng = self._rng

    def as_tensor(self, x: Union[np.ndarray, Tensor]) -> Tensor:
        if isinstance(x, Tensor):
            return x
        return Tensor(np.asarray(x, dtype=self.dtype))

    def forward(self, x: Union[np.ndarray, Tensor]) -> Tensor:
        x = self.as_tensor(x)
        if x.ndim != 3 or x.shape[-1] != self.config.input_dim:
            raise ShapeMismatch(f"LSTM espera (n, T, {self.config.input_dim}), recebido {x.shape}")
        h = x
        for index, layer in enumerate(self.layers):
            if index > 0:
                h = self.between(h)
            h = run_direction(h, layer, reverse=False)
        return self.out(h[:, -1, :])
