"""
Treino do BiLCNet: entropia cruzada, AdamW e laço de épocas com parada antecipada
"""

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from config import TrainConfig
from errors import EmptySplit, IoFailure, LabelOutOfRange, ShapeMismatch
from models.dataset import FrameDataset
from models.record import NUM_CLASSES
from network.module import Module
from network.tensor import Parameter, Tensor, no_grad


def cross_entropy(logits: Tensor, labels: Sequence[int]) -> Tensor:
    """
    Média de -log softmax(logits)[rótulo] via log-sum-exp

    O backward produz (softmax - onehot) / n.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeMismatch(f"cross_entropy: logits {logits.shape} e rótulos {labels.shape}")
    n, classes = logits.shape
    if n == 0:
        raise ShapeMismatch("cross_entropy sem amostras")
    if labels.min() < 0 or labels.max() >= classes:
        raise LabelOutOfRange(f"Rótulos devem estar em [0, {classes}), recebido {sorted(set(labels.tolist()))}")

    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_norm
    rows = np.arange(n)
    loss = -log_probs[rows, labels].mean()

    def backward(g):
        grad = np.exp(log_probs)
        grad[rows, labels] -= 1.0
        return (grad * (g / n),)

    return Tensor.from_op(np.asarray(loss, dtype=logits.dtype), (logits,), backward)


@dataclass
class OptimizerState:
    """Momentos por parâmetro e contador de passos"""
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def adamw_step(
    params: Sequence[Parameter],
    state: OptimizerState,
    config: TrainConfig,
    lr: Optional[float] = None,
) -> None:
    """
    Um passo AdamW com decaimento desacoplado

    Gradiente ausente conta como zero. O decaimento só atinge parâmetros
    com decay=True (vieses e normalizações ficam de fora).
    """
    lr = config.lr if lr is None else lr
    beta1, beta2 = config.betas
    state.t += 1
    correction1 = 1.0 - beta1 ** state.t
    correction2 = 1.0 - beta2 ** state.t

    for p in params:
        grad = p.grad if p.grad is not None else np.zeros_like(p.data)
        if grad.shape != p.shape:
            raise ShapeMismatch(f"{p.name}: gradiente {grad.shape} para parâmetro {p.shape}")
        m = state.m.get(p.name)
        if m is None:
            m = state.m[p.name] = np.zeros_like(p.data)
            state.v[p.name] = np.zeros_like(p.data)
        v = state.v[p.name]

        m *= beta1
        m += (1.0 - beta1) * grad
        v *= beta2
        v += (1.0 - beta2) * grad * grad

        update = (m / correction1) / (np.sqrt(v / correction2) + config.eps)
        decay = lr * config.weight_decay * p.data if p.decay else 0.0
        p.data = (p.data - lr * update - decay).astype(p.dtype, copy=False)


class AdamW:
    def __init__(self, params: Sequence[Parameter], config: TrainConfig):
        names = [p.name for p in params]
        if len(set(names)) != len(names) or any(not name for name in names):
            raise ValueError("AdamW exige parâmetros com nomes únicos")
        self.params = list(params)
        self.config = config
        self.state = OptimizerState()

    def step(self, lr: Optional[float] = None) -> None:
        adamw_step(self.params, self.state, self.config, lr)


def clip_grad_norm(params: Sequence[Parameter], max_norm: float) -> float:
    """Recorte pela norma global; max_norm = 0 desliga. Retorna a norma antes do recorte"""
    total = math.sqrt(sum(float((p.grad.astype(np.float64) ** 2).sum()) for p in params if p.grad is not None))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / (total + 1e-12)
        for p in params:
            if p.grad is not None:
                p.grad = (p.grad * scale).astype(p.dtype)
    return total


def learning_rate(config: TrainConfig, epoch: int) -> float:
    """Taxa da época (0-indexada): constante ou cosseno de lr até 0"""
    if config.lr_schedule == "cosine":
        return config.lr * 0.5 * (1.0 + math.cos(math.pi * epoch / config.max_epochs))
    return config.lr


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float

    def to_dict(self) -> Dict:
        return asdict(self)


class History:
    """Trajetória por época; somente acréscimo, opcionalmente espelhada em JSONL"""

    def __init__(self, path: Optional[Union[str, Path]] = None):
        self.records: List[EpochRecord] = []
        self.path = Path(path) if path is not None else None
        if self.path is not None:
            try:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                self.path.write_text("", encoding='utf-8')
            except OSError as e:
                raise IoFailure(f"Falha ao criar histórico {self.path}: {e}") from e

    def append(self, record: EpochRecord) -> None:
        self.records.append(record)
        if self.path is not None:
            with self.path.open('a', encoding='utf-8') as handle:
                handle.write(json.dumps(record.to_dict()) + "\n")

    def __len__(self) -> int:
        return len(self.records)

    def to_dicts(self) -> List[Dict]:
        return [r.to_dict() for r in self.records]


def read_history(path: Union[str, Path]) -> List[EpochRecord]:
    path = Path(path)
    try:
        lines = path.read_text(encoding='utf-8').splitlines()
    except OSError as e:
        raise IoFailure(f"Não foi possível ler o histórico {path}: {e}") from e
    return [EpochRecord(**json.loads(line)) for line in lines if line.strip()]


@dataclass
class TrainingCounters:
    """Amostras que passaram pelo backward e amostras só avaliadas"""
    backward_samples: int = 0
    eval_samples: int = 0


@dataclass
class FitResult:
    best_state: Dict[str, np.ndarray]
    history: History
    best_epoch: int
    best_val_acc: float
    counters: TrainingCounters


def make_batches(order: np.ndarray, batch_size: int) -> List[np.ndarray]:
    """Lotes em ordem; um lote final de 1 amostra é fundido ao anterior (batch norm)"""
    batches = [order[i:i + batch_size] for i in range(0, len(order), batch_size)]
    if len(batches) > 1 and len(batches[-1]) == 1:
        batches[-2] = np.concatenate([batches[-2], batches[-1]])
        batches.pop()
    return batches


def evaluate_split(model: Module, x: np.ndarray, labels: np.ndarray, batch_size: int = 256) -> Tuple[float, float, np.ndarray]:
    """
    Perda, acurácia e predições em modo de avaliação, sem gradientes

    Returns:
        (perda média, acurácia, predições)
    """
    was_training = model.training
    model.eval()
    total_loss = 0.0
    predictions = []
    try:
        with no_grad():
            for start in range(0, len(x), batch_size):
                xb, yb = x[start:start + batch_size], labels[start:start + batch_size]
                logits = model(xb)
                total_loss += float(cross_entropy(logits, yb).data) * len(xb)
                predictions.append(np.argmax(logits.data, axis=1))
    finally:
        model.train(was_training)
    preds = np.concatenate(predictions) if predictions else np.zeros(0, dtype=np.int64)
    n = max(len(x), 1)
    return total_loss / n, float((preds == labels).mean()) if len(x) else 0.0, preds


def fit(
    model: Module,
    train: FrameDataset,
    val: FrameDataset,
    config: TrainConfig,
    history_path: Optional[Union[str, Path]] = None,
) -> FitResult:
    """
    Treinar com parada antecipada pela acurácia de validação

    Args:
        model: BiLCNet ou baseline (entradas já normalizadas)
        train, val: Conjuntos disjuntos, normalizados com estatísticas do treino
        config: Hiperparâmetros
        history_path: JSONL opcional com uma linha por época

    Returns:
        FitResult; o modelo termina carregado com os melhores parâmetros
    """
    if len(train) == 0 or len(val) == 0:
        raise EmptySplit(f"Treino ({len(train)}) e validação ({len(val)}) não podem ser vazios")
    if train.labels.max() >= NUM_CLASSES or val.labels.max() >= NUM_CLASSES:
        raise LabelOutOfRange("Rótulo fora das 4 classes")

    rng = np.random.default_rng(config.seed)
    if hasattr(model, 'reseed'):
        model.reseed(config.seed)
    params = model.parameters()
    optimizer = AdamW(params, config)
    history = History(history_path)
    counters = TrainingCounters()

    best_state = {k: v.copy() for k, v in model.state_dict().items()}
    best_acc, best_epoch, stale = -1.0, 0, 0

    for epoch in range(config.max_epochs):
        lr = learning_rate(config, epoch)
        model.train()
        loss_sum, correct = 0.0, 0

        for batch in make_batches(rng.permutation(len(train)), config.batch_size):
            model.zero_grad()
            logits = model(train.x[batch])
            labels = train.labels[batch]
            loss = cross_entropy(logits, labels)
            loss.backward()
            clip_grad_norm(params, config.grad_clip)
            optimizer.step(lr)

            counters.backward_samples += len(batch)
            loss_sum += float(loss.data) * len(batch)
            correct += int((np.argmax(logits.data, axis=1) == labels).sum())

        val_loss, val_acc, _ = evaluate_split(model, val.x, val.labels)
        counters.eval_samples += len(val)

        record = EpochRecord(
            epoch=epoch + 1,
            train_loss=loss_sum / len(train),
            train_acc=correct / len(train),
            val_loss=val_loss,
            val_acc=val_acc,
        )
        history.append(record)
        logger.info("época {:>3}  perda {:.4f}  acc {:.4f}  | val perda {:.4f}  acc {:.4f}  lr {:.2e}",
                    record.epoch, record.train_loss, record.train_acc, val_loss, val_acc, lr)

        if val_acc > best_acc:
            best_acc, best_epoch, stale = val_acc, record.epoch, 0
            best_state = {k: v.copy() for k, v in model.state_dict().items()}
        else:
            stale += 1
            if stale >= config.early_stop_patience:
                logger.info("Parada antecipada na época {} (melhor: {})", record.epoch, best_epoch)
                break

    model.load_state_dict(best_state)
    model.zero_grad()
    return FitResult(
        best_state=best_state,
        history=history,
        best_epoch=best_epoch,
        best_val_acc=best_acc,
        counters=counters,
    )
