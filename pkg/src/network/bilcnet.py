"""
BiLCNet: BiLSTM -> projeção -> Conformer -> pooling por atenção -> classificador
"""

from typing import Tuple, Union

import numpy as np
from loguru import logger

from config import BiLCNetConfig
from errors import ShapeMismatch
from models.record import TrafficLabel
from network.bilstm import BiLSTM, StateProjection
from network.conformer import ConformerStack
from network.module import BatchNorm, Dropout, Linear, Module
from network.tensor import DEFAULT_DTYPE, Buffer, Tensor, gelu, no_grad, softmax


class InputNormalizer(Module):
    """Estatísticas de normalização do treino, salvas com o modelo"""

    def __init__(self, dim: int, dtype=DEFAULT_DTYPE):
        super().__init__()
        self.mean = Buffer(np.zeros(dim), dtype=dtype)
        self.sigma = Buffer(np.ones(dim), dtype=dtype)

    def set_stats(self, means: np.ndarray, sigmas: np.ndarray) -> None:
        if means.shape != self.mean.shape or sigmas.shape != self.sigma.shape:
            raise ShapeMismatch(f"Estatísticas {means.shape} para {self.mean.shape[0]} features")
        self.mean.data = np.asarray(means, dtype=self.mean.dtype).copy()
        self.sigma.data = np.asarray(sigmas, dtype=self.sigma.dtype).copy()

    def apply(self, x: np.ndarray) -> np.ndarray:
        return ((x - self.mean.data) / self.sigma.data).astype(self.mean.dtype)


class AttentionPool(Module):
    """Pontuação escalar por passo (2H -> 1) e média ponderada por softmax em T"""

    def __init__(self, dim: int, rng: np.random.Generator, dtype=DEFAULT_DTYPE):
        super().__init__()
        self.score = Linear(dim, 1, rng, dtype=dtype)

    def forward(self, h: Tensor) -> Tensor:
        return attention_pool(h, self.score.w, self.score.b)


def attention_pool_with_weights(h: Tensor, pool_w: Tensor, pool_b: Tensor) -> Tuple[Tensor, Tensor]:
    """
    Returns:
        (h_p (n, 2H), pesos (n, T))
    """
    if h.ndim != 3 or pool_w.shape != (h.shape[-1], 1) or pool_b.shape != (1,):
        raise ShapeMismatch(f"attention_pool: estados {h.shape}, w {pool_w.shape}, b {pool_b.shape}")
    scores = h @ pool_w + pool_b  # (n, T, 1)
    weights = softmax(scores, axis=1)
    pooled = (weights * h).sum(axis=1)
    return pooled, weights.reshape(h.shape[0], h.shape[1])


def attention_pool(h: Tensor, pool_w: Tensor, pool_b: Tensor) -> Tensor:
    return attention_pool_with_weights(h, pool_w, pool_b)[0]


class ClassifierHead(Module):
    """Linear -> BatchNorm -> GELU -> Dropout -> Linear (logits)"""

    def __init__(self, in_dim: int, hidden: int, num_classes: int, p: float,
                 rng: np.random.Generator, dtype=DEFAULT_DTYPE):
        super().__init__()
        self.fc1 = Linear(in_dim, hidden, rng, dtype=dtype)
        self.bn = BatchNorm(hidden, dtype=dtype)
        self.drop = Dropout(p, rng)
        self.fc2 = Linear(hidden, num_classes, rng, dtype=dtype)

    def forward(self, h_p: Tensor) -> Tensor:
        return classifier_head(h_p, self)


def classifier_head(h_p: Tensor, params: ClassifierHead) -> Tensor:
    """Modo (treino/avaliação) vem de params.training"""
    return params.fc2(params.drop(gelu(params.bn(params.fc1(h_p)))))


class BiLCNet(Module):
    """Classificador BiLSTM-Conformer"""

    def __init__(self, config: BiLCNetConfig, seed: int = 0, dtype=DEFAULT_DTYPE):
        super().__init__()
        self.config = config
        self._rng = np.random.default_rng(seed)
        rng = self._rng
        d = config.pool_dim

        self.norm = InputNormalizer(config.input_dim, dtype)
        self.bilstm = BiLSTM(config.bilstm, rng, dtype)
        self.projection = StateProjection(d, d, rng, dtype=dtype)
        self.conformer = ConformerStack(config.conformer, rng, dtype)
        self.pool = AttentionPool(d, rng, dtype)
        self.head = ClassifierHead(d, config.classifier_hidden, config.num_classes, config.dropout, rng, dtype)

        names = [name for name, _ in self.named_parameters()]
        if len(names) != len(set(names)):
            raise ValueError("Nomes de parâmetros duplicados")
        logger.debug("BiLCNet construído com {} parâmetros", self.num_parameters())

    def reseed(self, seed: int) -> None:
        """Novo gerador para todas as camadas de dropout"""
        self._rng = np.random.default_rng(seed)
        for module in self.modules():
            if isinstance(module, Dropout):
                module._rng = self._rng

    def as_tensor(self, x: Union[np.ndarray, Tensor]) -> Tensor:
        if isinstance(x, Tensor):
            return x
        return Tensor(np.asarray(x, dtype=self.dtype))

    def forward(self, x: Union[np.ndarray, Tensor]) -> Tensor:
        return forward(self.as_tensor(x), self)

    def zero_output_layer(self) -> None:
        """Zerar a última camada do classificador (logits constantes)"""
        self.head.fc2.w.data[...] = 0.0
        self.head.fc2.b.data[...] = 0.0


def forward(x: Tensor, params: BiLCNet) -> Tensor:
    """(n, 10, D) já normalizado -> logits (n, 4)"""
    if x.ndim != 3 or x.shape[-1] != params.config.input_dim:
        raise ShapeMismatch(f"BiLCNet espera (n, T, {params.config.input_dim}), recebido {x.shape}")
    h = params.bilstm(x)
    h = params.projection(h)
    h = params.conformer(h)
    return params.head(params.pool(h))


def probabilities(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def predict(x: Union[np.ndarray, Tensor], params: Module) -> Tuple[np.ndarray, np.ndarray]:
    """
    Rótulos e probabilidades em modo de avaliação

    Empates no argmax ficam com o menor índice de classe.
    """
    was_training = params.training
    params.eval()
    try:
        with no_grad():
            logits = params(x).data.astype(np.float64)
    finally:
        params.train(was_training)
    probs = probabilities(logits)
    return np.argmax(logits, axis=-1), probs


def predict_label(x: np.ndarray, params: Module) -> Tuple[TrafficLabel, np.ndarray]:
    """Uma amostra (10 x D) -> (rótulo, 4 probabilidades)"""
    labels, probs = predict(x[None, ...], params)
    return TrafficLabel(int(labels[0])), probs[0]
