"""
Avaliação: divisão temporal, folds leave-one-gain-out e métricas macro
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Sequence, Tuple, Union

import numpy as np

from errors import (
    EmptyMatrix, IoFailure, LabelOutOfRange, LengthMismatch, MissingGain, SessionTooShort, WrongFoldCount,
)
from models.dataset import FrameDataset
from models.record import GAIN_LEVELS, NUM_CLASSES, GainLevel, TrafficLabel

SPLIT_GUARD = 1e-9


@dataclass
class SplitIndices:
    """Índices de treino, validação e teste (ordem temporal preservada)"""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def apply(self, dataset: FrameDataset) -> Tuple[FrameDataset, FrameDataset, FrameDataset]:
        return dataset.subset(self.train), dataset.subset(self.val), dataset.subset(self.test)


def split_counts(n: int, train_frac: float) -> Tuple[int, int, int]:
    n_train = int(math.floor(train_frac * n + SPLIT_GUARD))
    n_val = int(math.floor(0.5 * (1.0 - train_frac) * n + SPLIT_GUARD))
    return n_train, n_val, n - n_train - n_val


def temporal_split(dataset: FrameDataset, train_frac: float = 0.8) -> SplitIndices:
    """
    Dividir cada sessão no tempo: primeiros quadros para treino, seguintes
    para validação, restante para teste

    Raises:
        SessionTooShort: alguma parte ficaria vazia em alguma sessão
    """
    if not 0.0 < train_frac < 1.0:
        raise ValueError(f"train_frac deve estar em (0, 1), recebido {train_frac}")

    train, val, test = [], [], []
    for session in dataset.session_ids():
        indices = np.flatnonzero(dataset.sessions == session)
        indices = indices[np.argsort(dataset.frames[indices], kind='stable')]
        n_train, n_val, n_test = split_counts(len(indices), train_frac)
        if min(n_train, n_val, n_test) <= 0:
            raise SessionTooShort(
                f"Sessão {session} com {len(indices)} quadros não comporta treino/validação/teste "
                f"({n_train}/{n_val}/{n_test})"
            )
        train.append(indices[:n_train])
        val.append(indices[n_train:n_train + n_val])
        test.append(indices[n_train + n_val:])

    if not train:
        raise SessionTooShort("Dataset sem sessões")
    return SplitIndices(np.concatenate(train), np.concatenate(val), np.concatenate(test))


@dataclass
class ZeroShotFold:
    held_out_gain: GainLevel
    train: np.ndarray
    test: np.ndarray


def zero_shot_folds(dataset: FrameDataset) -> List[ZeroShotFold]:
    """Um fold por ganho: treina nos outros 10, testa no ganho retirado"""
    present = set(np.unique(dataset.gains).tolist())
    missing = [GAIN_LEVELS[i] for i in range(len(GAIN_LEVELS)) if i not in present]
    if missing:
        raise MissingGain(missing)

    folds = []
    for index, gain_db in enumerate(GAIN_LEVELS):
        held_out = dataset.gains == index
        folds.append(ZeroShotFold(
            held_out_gain=GainLevel(gain_db),
            train=np.flatnonzero(~held_out),
            test=np.flatnonzero(held_out),
        ))
    return folds


def fold_train_val(dataset: FrameDataset, fold: ZeroShotFold, train_frac: float) -> Tuple[np.ndarray, np.ndarray]:
    """Validação do fold = cauda temporal das sessões de treino"""
    split = temporal_split(dataset.subset(fold.train), train_frac)
    tail = np.sort(np.concatenate([split.val, split.test]))
    return fold.train[split.train], fold.train[tail]


@dataclass
class ConfusionMatrix:
    """Linhas = classe verdadeira, colunas = classe prevista"""

    counts: np.ndarray = field(default_factory=lambda: np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_dict(self) -> Dict:
        return {'counts': self.counts.tolist(), 'total': self.total}


def confusion(labels: Sequence[int], predictions: Sequence[int]) -> ConfusionMatrix:
    labels = np.asarray(labels, dtype=np.int64)
    predictions = np.asarray(predictions, dtype=np.int64)
    if labels.shape != predictions.shape:
        raise LengthMismatch(f"{len(labels)} rótulos para {len(predictions)} predições")
    for name, values in (('rótulos', labels), ('predições', predictions)):
        if values.size and (values.min() < 0 or values.max() >= NUM_CLASSES):
            raise LabelOutOfRange(f"{name} fora de [0, {NUM_CLASSES})")
    counts = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
    np.add.at(counts, (labels, predictions), 1)
    return ConfusionMatrix(counts)


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float

    def to_dict(self) -> Dict:
        return {'precision': self.precision, 'recall': self.recall, 'f1': self.f1}


def _ratio(num: float, den: float) -> float:
    return float(num) / float(den) if den else 0.0


def macro_average(per_class: Sequence[ClassMetrics]) -> Dict[str, float]:
    """Média não ponderada sobre as classes"""
    n = len(per_class)
    return {
        'macro_precision': sum(c.precision for c in per_class) / n,
        'macro_recall': sum(c.recall for c in per_class) / n,
        'macro_f1': sum(c.f1 for c in per_class) / n,
    }


@dataclass
class MetricsReport:
    per_class: List[ClassMetrics]
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    confusion: ConfusionMatrix

    @property
    def overall(self) -> Dict[str, float]:
        return {
            'accuracy': self.accuracy,
            'macro_precision': self.macro_precision,
            'macro_recall': self.macro_recall,
            'macro_f1': self.macro_f1,
        }

    def to_dict(self) -> Dict:
        return {
            'confusion': self.confusion.to_dict(),
            'per_class': {
                TrafficLabel(i).wire_name: c.to_dict() for i, c in enumerate(self.per_class)
            },
            'overall': self.overall,
        }

    def format_overall(self) -> str:
        return (f"AC {self.accuracy:.2%}  PR {self.macro_precision:.2%}  "
                f"RC {self.macro_recall:.2%}  F1 {self.macro_f1:.2%}")


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    """Precisão, revocação e F1 por classe (0/0 -> 0) e agregados macro"""
    if cm.total == 0:
        raise EmptyMatrix("Matriz de confusão vazia")

    counts = cm.counts
    per_class = []
    for c in range(NUM_CLASSES):
        tp = counts[c, c]
        precision = _ratio(tp, counts[:, c].sum())
        recall = _ratio(tp, counts[c, :].sum())
        f1 = _ratio(2 * precision * recall, precision + recall)
        per_class.append(ClassMetrics(precision, recall, f1))

    macro = macro_average(per_class)
    return MetricsReport(
        per_class=per_class,
        accuracy=_ratio(np.trace(counts), cm.total),
        confusion=cm,
        **macro,
    )


@dataclass
class ZeroShotReport:
    per_gain: Dict[int, float]
    mean: float

    def to_dict(self) -> Dict:
        return {
            'per_gain': {str(gain): acc for gain, acc in self.per_gain.items()},
            'mean': self.mean,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'ZeroShotReport':
        return zero_shot_report({int(k): v for k, v in data['per_gain'].items()})


def zero_shot_report(per_fold: Union[Mapping[int, float], Sequence[float]]) -> ZeroShotReport:
    """
    Acurácia por ganho e média simples dos 11 folds

    Args:
        per_fold: ganho (dB) -> acurácia, ou 11 acurácias na ordem dos ganhos
    """
    if isinstance(per_fold, Mapping):
        per_gain = {int(g): float(a) for g, a in per_fold.items()}
    else:
        values = list(per_fold)
        if len(values) != len(GAIN_LEVELS):
            raise WrongFoldCount(f"Esperado {len(GAIN_LEVELS)} folds, recebido {len(values)}")
        per_gain = {g: float(a) for g, a in zip(GAIN_LEVELS, values)}

    if sorted(per_gain) != list(GAIN_LEVELS):
        raise WrongFoldCount(f"Folds devem cobrir {list(GAIN_LEVELS)}, recebido {sorted(per_gain)}")

    ordered = {g: per_gain[g] for g in GAIN_LEVELS}
    return ZeroShotReport(per_gain=ordered, mean=sum(ordered.values()) / len(ordered))


def write_report(data: Dict, path: Union[str, Path]) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(data, indent=2) + "\n", encoding='utf-8')
    except OSError as e:
        raise IoFailure(f"Falha ao gravar relatório {path}: {e}") from e


def read_report(path: Union[str, Path]) -> Dict:
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding='utf-8'))
    except OSError as e:
        raise IoFailure(f"Não foi possível ler o relatório {path}: {e}") from e
