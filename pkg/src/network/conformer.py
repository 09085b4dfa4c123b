"""
Blocos Conformer: FFN -> Conv -> MHSA -> FFN com conexões residuais
"""

import math
from typing import List, Sequence, Tuple

import numpy as np

from config import ConformerConfig
from errors import ShapeMismatch
from network.module import BatchNorm, Dropout, LayerNorm, Linear, Module
from network.tensor import DEFAULT_DTYPE, Parameter, Tensor, depthwise_conv1d, gelu, glu, softmax, swish


class FeedForward(Module):
    """LayerNorm -> Linear d->rd -> GELU -> Linear rd->d"""

    def __init__(self, config: ConformerConfig, rng: np.random.Generator, dtype=DEFAULT_DTYPE):
        super().__init__()
        d = config.model_dim
        self.norm = LayerNorm(d, dtype=dtype)
        self.up = Linear(d, config.ffn_expansion * d, rng, dtype=dtype)
        self.down = Linear(config.ffn_expansion * d, d, rng, dtype=dtype)
        self.drop = Dropout(config.dropout, rng)

    @property
    def output_layer(self) -> Linear:
        return self.down

    def forward(self, x: Tensor) -> Tensor:
        return self.drop(self.down(self.drop(gelu(self.up(self.norm(x))))))


class ConvModule(Module):
    """LayerNorm -> pointwise d->2d -> GLU -> depthwise k -> BatchNorm -> Swish -> pointwise d->d"""

    def __init__(self, config: ConformerConfig, rng: np.random.Generator, dtype=DEFAULT_DTYPE):
        super().__init__()
        d, k = config.model_dim, config.conv_kernel
        self.norm = LayerNorm(d, dtype=dtype)
        self.pointwise_in = Linear(d, 2 * d, rng, dtype=dtype)
        bound = 1.0 / math.sqrt(k)
        self.depthwise = Parameter(rng.uniform(-bound, bound, size=(k, d)), dtype=dtype)
        self.batch_norm = BatchNorm(d, dtype=dtype)
        self.pointwise_out = Linear(d, d, rng, dtype=dtype)
        self.drop = Dropout(config.dropout, rng)

    @property
    def output_layer(self) -> Linear:
        return self.pointwise_out

    def forward(self, x: Tensor) -> Tensor:
        return conv_module(x, self)


def conv_module(x: Tensor, params: ConvModule) -> Tensor:
    """Módulo de convolução; preserva a forma (n, T, d)"""
    d = params.norm.gamma.shape[0]
    if x.ndim != 3 or x.shape[-1] != d:
        raise ShapeMismatch(f"conv_module espera (n, T, {d}), recebido {x.shape}")
    h = glu(params.pointwise_in(params.norm(x)), axis=-1)
    h = depthwise_conv1d(h, params.depthwise)
    h = swish(params.batch_norm(h))
    return params.drop(params.pointwise_out(h))


class MultiHeadSelfAttention(Module):
    """Atenção multi-cabeça sem máscara e sem codificação posicional"""

    def __init__(self, config: ConformerConfig, rng: np.random.Generator, dtype=DEFAULT_DTYPE):
        super().__init__()
        d = config.model_dim
        self.num_heads = config.num_heads
        self.norm = LayerNorm(d, dtype=dtype)
        self.w_q = Linear(d, d, rng, dtype=dtype)
        self.w_k = Linear(d, d, rng, dtype=dtype)
        self.w_v = Linear(d, d, rng, dtype=dtype)
        self.w_o = Linear(d, d, rng, dtype=dtype)
        self.drop = Dropout(config.dropout, rng)

    @property
    def output_layer(self) -> Linear:
        return self.w_o

    def forward(self, x: Tensor) -> Tensor:
        return self.drop(mhsa(self.norm(x), self))


def _split_heads(x: Tensor, heads: int) -> Tensor:
    n, T, d = x.shape
    return x.reshape(n, T, heads, d // heads).transpose(0, 2, 1, 3)


def mhsa_with_weights(x: Tensor, params: MultiHeadSelfAttention) -> Tuple[Tensor, Tensor]:
    """
    Atenção de produto escalar por cabeça

    Returns:
        (saída (n, T, d), pesos (n, h, T, T))
    """
    if x.ndim != 3:
        raise ShapeMismatch(f"mhsa espera (n, T, d), recebido {x.shape}")
    n, T, d = x.shape
    heads = params.num_heads
    if d % heads or params.w_q.w.shape[0] != d:
        raise ShapeMismatch(f"mhsa: dimensão {d} incompatível com {heads} cabeças / pesos {params.w_q.w.shape}")

    q = _split_heads(params.w_q(x), heads)
    k = _split_heads(params.w_k(x), heads)
    v = _split_heads(params.w_v(x), heads)

    scores = (q @ k.transpose(0, 1, 3, 2)) * (1.0 / math.sqrt(d // heads))
    weights = softmax(scores, axis=-1)
    context = (weights @ v).transpose(0, 2, 1, 3).reshape(n, T, d)
    return params.w_o(context), weights


def mhsa(x: Tensor, params: MultiHeadSelfAttention) -> Tensor:
    return mhsa_with_weights(x, params)[0]


class ConformerBlock(Module):
    def __init__(self, config: ConformerConfig, rng: np.random.Generator, dtype=DEFAULT_DTYPE):
        super().__init__()
        self.block_order = config.block_order
        self.ffn1 = FeedForward(config, rng, dtype)
        self.conv = ConvModule(config, rng, dtype)
        self.mhsa = MultiHeadSelfAttention(config, rng, dtype)
        self.ffn2 = FeedForward(config, rng, dtype)

    def output_layers(self) -> List[Linear]:
        return [self.ffn1.output_layer, self.conv.output_layer, self.mhsa.output_layer, self.ffn2.output_layer]

    def forward(self, x: Tensor) -> Tensor:
        return conformer_block(x, self)


def conformer_block(x: Tensor, params: ConformerBlock) -> Tensor:
    """
    h1 = x + FFN(x)/2
    h2 = h1 + Conv(h1)      (ou MHSA em "mhsa_first")
    h3 = h2 + MHSA(h2)      (ou Conv em "mhsa_first")
    out = h3 + FFN(h3)/2

    As normalizações de camada ficam dentro de cada ramo.
    """
    h = x + params.ffn1(x) * 0.5
    if params.block_order == "mhsa_first":
        h = h + params.mhsa(h)
        h = h + params.conv(h)
    else:
        h = h + params.conv(h)
        h = h + params.mhsa(h)
    return h + params.ffn2(h) * 0.5


class ConformerStack(Module):
    def __init__(self, config: ConformerConfig, rng: np.random.Generator, dtype=DEFAULT_DTYPE):
        super().__init__()
        self.blocks = [ConformerBlock(config, rng, dtype) for _ in range(config.num_blocks)]

    def forward(self, x: Tensor) -> Tensor:
        return conformer_stack(x, self.blocks)


def conformer_stack(x: Tensor, blocks: Sequence[ConformerBlock]) -> Tensor:
    if not blocks:
        raise ShapeMismatch("Pilha Conformer precisa de pelo menos um bloco")
    for block in blocks:
        x = block(x)
    return x
