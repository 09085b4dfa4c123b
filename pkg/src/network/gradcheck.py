"""
Verificação de gradientes por diferenças finitas centrais

No caminho float32 o gradiente analítico vem do backward em float32 e a
diferença central vem de uma cópia float64 da mesma verificação, avaliada
exatamente no mesmo ponto.
"""

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from algorithms.training import cross_entropy
from config import BiLCNetConfig, ConformerConfig
from network.bilcnet import AttentionPool, BiLCNet, ClassifierHead, attention_pool
from network.bilstm import LSTMDirection, lstm_cell_step
from network.conformer import ConformerBlock, ConvModule, MultiHeadSelfAttention, conv_module, mhsa
from network.module import Linear
from network.tensor import (
    Buffer, Tensor, batch_norm, depthwise_conv1d, gelu, layer_norm, matmul, no_grad, softmax,
)

STEP_F32 = 1e-3
STEP_F64 = 1e-6
DENOMINATOR_FLOOR = 1e-8
# tensores com até esta quantidade de elementos têm todas as coordenadas verificadas
FULL_CHECK_SIZE = 16
ROUNDOFF_MARGIN = 64.0
ANALYTIC_MARGIN = 64.0
TRUNCATION_MARGIN = 10.0

NamedTensors = Sequence[Tuple[str, Tensor]]
Check = Tuple[Callable[[], Tensor], NamedTensors]


@dataclass
class GradCheckReport:
    name: str
    max_rel_err: float
    passed: bool
    tol: float
    worst_tensor: str = ""

    def to_dict(self) -> Dict:
        return {
            'name': self.name,
            'max_rel_err': self.max_rel_err,
            'passed': self.passed,
            'tol': self.tol,
            'worst_tensor': self.worst_tensor,
        }


def noise_floor(analytic_dtype, reference_dtype, step: float, scale: float, magnitude: float) -> float:
    """
    Discrepância explicável por arredondamento e truncamento

    Args:
        scale: maior coordenada de gradiente analítico da verificação
        magnitude: soma dos módulos dos termos da saída ponderada
    """
    roundoff = ROUNDOFF_MARGIN * np.finfo(reference_dtype).eps * max(magnitude, 1.0) / step
    analytic = ANALYTIC_MARGIN * np.finfo(analytic_dtype).eps * scale
    truncation = TRUNCATION_MARGIN * step ** 2 * scale
    return float(roundoff + analytic + truncation)


def _rel_err(analytic: float, numeric: float, noise: float) -> float:
    excess = abs(analytic - numeric) - noise
    if excess <= 0.0:
        return 0.0
    return excess / max(abs(analytic), abs(numeric), DENOMINATOR_FLOOR)


def _check_vectors(rng: np.random.Generator, analytic: np.ndarray, directions: int, coordinates: int,
                   full_size: int) -> List[np.ndarray]:
    """Todas as coordenadas de tensores pequenos; direções aleatórias e maiores coordenadas nos demais"""
    size, shape = analytic.size, analytic.shape
    vectors = []
    if size <= full_size:
        indices = np.arange(size)
    else:
        for _ in range(directions):
            u = rng.standard_normal(shape)
            norm = np.linalg.norm(u)
            vectors.append(u / norm if norm > 0 else u)
        indices = np.argsort(-np.abs(analytic).reshape(-1), kind='stable')[:coordinates]
    for index in indices:
        e = np.zeros(size)
        e[index] = 1.0
        vectors.append(e.reshape(shape))
    return vectors


def _bind_shadow(inputs: NamedTensors, shadow_inputs: NamedTensors) -> None:
    """Copiar os valores verificados para a cópia float64"""
    if [n for n, _ in inputs] != [n for n, _ in shadow_inputs]:
        raise ValueError("Cópia de verificação com tensores diferentes")
    for (name, tensor), (_, twin) in zip(inputs, shadow_inputs):
        if twin.shape != tensor.shape:
            raise ValueError(f"Cópia de verificação com forma diferente em {name}")
        twin.data = tensor.data.astype(twin.dtype)


def grad_check(
    name: str,
    forward: Callable[[], Tensor],
    inputs: NamedTensors,
    seed: int = 0,
    tol: Optional[float] = None,
    directions: int = 4,
    coordinates: int = 4,
    full_size: int = FULL_CHECK_SIZE,
    shadow: Optional[Check] = None,
) -> GradCheckReport:
    """
    Comparar gradientes analíticos e numéricos

    A saída é reduzida a escalar com pesos aleatórios fixos. Cada tensor
    verificado recebe derivadas direcionais (ver `_check_vectors`); a parte da
    discrepância acima de `noise_floor` é medida relativamente a
    max(|a|, |n|, 1e-8).

    Falhas são reportadas, nunca lançadas.
    """
    rng = np.random.default_rng(seed)
    dtype = inputs[0][1].dtype
    if tol is None:
        tol = 1e-6 if dtype == np.float64 else 1e-3

    for _, tensor in inputs:
        tensor.grad = None
    output = forward()
    weights = rng.standard_normal(output.shape).astype(output.dtype)
    output.backward(weights)
    weights64 = weights.astype(np.float64)

    reference_forward, reference_inputs = forward, inputs
    if shadow is not None:
        reference_forward, reference_inputs = shadow
        _bind_shadow(inputs, reference_inputs)
    reference_dtype = reference_inputs[0][1].dtype
    step = STEP_F64 if reference_dtype == np.float64 else STEP_F32

    def weighted_output() -> np.ndarray:
        with no_grad():
            return reference_forward().data.astype(np.float64) * weights64

    analytics = [
        tensor.grad.astype(np.float64) if tensor.grad is not None else np.zeros(tensor.shape)
        for _, tensor in inputs
    ]
    scale = max([float(np.abs(a).max()) for a in analytics if a.size] + [DENOMINATOR_FLOOR])
    noise = noise_floor(dtype, reference_dtype, step, scale, float(np.abs(weighted_output()).sum()))

    worst, worst_name = 0.0, ""
    for (tensor_name, _), (_, target), analytic in zip(inputs, reference_inputs, analytics):
        original = target.data.copy()
        for u in _check_vectors(rng, analytic, directions, coordinates, full_size):
            target.data = (original + step * u).astype(reference_dtype)
            plus = float(weighted_output().sum())
            target.data = (original - step * u).astype(reference_dtype)
            minus = float(weighted_output().sum())
            target.data = original.copy()
            numeric = (plus - minus) / (2.0 * step)
            err = _rel_err(float((analytic * u).sum()), numeric, noise)
            if err > worst:
                worst, worst_name = err, tensor_name

    report = GradCheckReport(name=name, max_rel_err=worst, passed=bool(worst < tol), tol=tol, worst_tensor=worst_name)
    logger.debug("gradcheck {}: {:.3e} ({})", name, worst, "ok" if report.passed else "FALHOU")
    return report

def _param(rng: np.random.Generator, *shape, dtype=np.float64) -> Tensor:
    return Tensor(rng.standard_normal(shape).astype(dtype), requires_grad=True)


def _module_inputs(module, x: Tensor) -> List[Tuple[str, Tensor]]:
    return [('x', x)] + list(module.named_parameters())


def _tiny_conformer() -> ConformerConfig:
    return ConformerConfig(model_dim=8, num_blocks=1, num_heads=2, ffn_expansion=2, conv_kernel=3, dropout=0.0)


# cada construtor devolve (forward, tensores verificados)

def build_matmul(rng, dtype):
    a, b = _param(rng, 3, 4, dtype=dtype), _param(rng, 4, 2, dtype=dtype)
    return (lambda: matmul(a, b)), [('a', a), ('b', b)]


def build_linear(rng, dtype):
    layer = Linear(5, 3, rng, dtype=dtype)
    x = _param(rng, 4, 5, dtype=dtype)
    return (lambda: layer(x)), _module_inputs(layer, x)


def build_softmax(rng, dtype):
    x = _param(rng, 3, 5, dtype=dtype)
    return (lambda: softmax(x, axis=-1)), [('x', x)]


def build_layer_norm(rng, dtype):
    x, gamma, beta = _param(rng, 2, 8, dtype=dtype), _param(rng, 8, dtype=dtype), _param(rng, 8, dtype=dtype)
    return (lambda: layer_norm(x, gamma, beta)), [('x', x), ('gamma', gamma), ('beta', beta)]


def build_gelu(rng, dtype):
    x = _param(rng, 10, dtype=dtype)
    return (lambda: gelu(x)), [('x', x)]


def build_batch_norm(rng, dtype):
    x, gamma, beta = _param(rng, 6, 4, dtype=dtype), _param(rng, 4, dtype=dtype), _param(rng, 4, dtype=dtype)
    running_mean = Buffer(np.zeros(4), dtype=dtype)
    running_var = Buffer(np.ones(4), dtype=dtype)
    return (
        lambda: batch_norm(x, gamma, beta, running_mean, running_var, training=True)
    ), [('x', x), ('gamma', gamma), ('beta', beta)]


def build_depthwise_conv(rng, dtype):
    x, kernel = _param(rng, 10, 4, dtype=dtype), _param(rng, 3, 4, dtype=dtype)
    return (lambda: depthwise_conv1d(x, kernel)), [('x', x), ('kernel', kernel)]


def build_lstm_cell(rng, dtype):
    params = LSTMDirection(3, 4, rng, dtype=dtype)
    xs = [_param(rng, 2, 3, dtype=dtype) for _ in range(3)]

    def forward():
        h = Tensor(np.zeros((2, 4), dtype=dtype))
        c = Tensor(np.zeros((2, 4), dtype=dtype))
        for x_t in xs:
            h, c = lstm_cell_step(x_t, h, c, params)
        return h

    return forward, [(f'x{t}', x) for t, x in enumerate(xs)] + list(params.named_parameters())


def build_mhsa(rng, dtype):
    module = MultiHeadSelfAttention(_tiny_conformer(), rng, dtype=dtype)
    x = _param(rng, 2, 4, 8, dtype=dtype)
    return (lambda: mhsa(x, module)), _module_inputs(module, x)


def build_conv_module(rng, dtype):
    module = ConvModule(_tiny_conformer(), rng, dtype=dtype)
    x = _param(rng, 2, 4, 8, dtype=dtype)
    return (lambda: conv_module(x, module)), _module_inputs(module, x)


def build_conformer_block(rng, dtype):
    module = ConformerBlock(_tiny_conformer(), rng, dtype=dtype)
    x = _param(rng, 2, 4, 8, dtype=dtype)
    return (lambda: module(x)), _module_inputs(module, x)


def build_attention_pool(rng, dtype):
    module = AttentionPool(8, rng, dtype=dtype)
    h = _param(rng, 3, 5, 8, dtype=dtype)
    return (lambda: attention_pool(h, module.score.w, module.score.b)), _module_inputs(module, h)


def build_classifier_head(rng, dtype):
    module = ClassifierHead(8, 6, 4, 0.0, rng, dtype=dtype)
    h = _param(rng, 5, 8, dtype=dtype)
    return (lambda: module(h)), _module_inputs(module, h)


def build_cross_entropy(rng, dtype):
    logits = _param(rng, 3, 4, dtype=dtype)
    labels = rng.integers(0, 4, size=3)
    return (lambda: cross_entropy(logits, labels)), [('logits', logits)]


def build_bilcnet(rng, dtype):
    model = BiLCNet(BiLCNetConfig.tiny(input_dim=8), seed=int(rng.integers(0, 2 ** 31)), dtype=dtype)
    x = _param(rng, 3, 10, 8, dtype=dtype)
    labels = rng.integers(0, 4, size=3)
    return (lambda: cross_entropy(model(x), labels)), _module_inputs(model, x)


CHECKS: Dict[str, Callable] = {
    'matmul': build_matmul,
    'linear': build_linear,
    'softmax': build_softmax,
    'layer_norm': build_layer_norm,
    'gelu': build_gelu,
    'batch_norm': build_batch_norm,
    'depthwise_conv1d': build_depthwise_conv,
    'lstm_cell': build_lstm_cell,
    'mhsa': build_mhsa,
    'conv_module': build_conv_module,
    'conformer_block': build_conformer_block,
    'attention_pool': build_attention_pool,
    'classifier_head': build_classifier_head,
    'cross_entropy': build_cross_entropy,
    'bilcnet': build_bilcnet,
}


def run_check(name: str, seed: int = 0, tol: Optional[float] = None, dtype=np.float64) -> GradCheckReport:
    forward, inputs = CHECKS[name](np.random.default_rng(seed), dtype)
    shadow = None
    if np.dtype(dtype) != np.float64:
        shadow = CHECKS[name](np.random.default_rng(seed), np.float64)
    return grad_check(name, forward, inputs, seed=seed, tol=tol, shadow=shadow)


def run_suite(seed: int = 0, tol: float = 1e-5, dtype=np.float64) -> List[GradCheckReport]:
    """Todas as verificações (primitivas, blocos e modelo completo)"""
    return [run_check(name, seed=seed, tol=tol, dtype=dtype) for name in CHECKS]


def format_table(reports: Sequence[GradCheckReport]) -> str:
    width = max(len(r.name) for r in reports)
    lines = [f"{'verificação'.ljust(width)}  erro relativo máx.  situação"]
    for r in reports:
        status = "ok" if r.passed else "FALHOU"
        lines.append(f"{r.name.ljust(width)}  {r.max_rel_err:18.3e}  {status}")
    return "\n".join(lines)
