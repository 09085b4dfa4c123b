"""
Normalização por feature com estatísticas do conjunto de treino
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from errors import EmptyInput, IoFailure, SchemaMismatch

SIGMA_FLOOR = 1e-6


@dataclass
class NormalizationStats:
    """Média e desvio por feature, calculados sobre as linhas de treino"""

    means: np.ndarray
    sigmas: np.ndarray
    feature_names: List[str] = field(default_factory=list)
    schema_version: int = 1
    train_frac: Optional[float] = None

    @property
    def D(self) -> int:
        return self.means.shape[0]

    def apply(self, x: np.ndarray) -> np.ndarray:
        """(x - média) / sigma ao longo do último eixo"""
        if x.shape[-1] != self.D:
            raise SchemaMismatch(f"Dados com {x.shape[-1]} features, estatísticas com {self.D}")
        return ((x - self.means) / self.sigmas).astype(x.dtype, copy=False)

    def to_dict(self) -> Dict:
        return {
            'schema_version': self.schema_version,
            'train_frac': self.train_frac,
            'feature_names': list(self.feature_names),
            'means': [float(v) for v in self.means],
            'sigmas': [float(v) for v in self.sigmas],
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'NormalizationStats':
        means = np.asarray(data['means'], dtype=np.float64)
        sigmas = np.asarray(data['sigmas'], dtype=np.float64)
        if means.shape != sigmas.shape:
            raise SchemaMismatch("Médias e desvios com tamanhos diferentes")
        return cls(
            means=means,
            sigmas=sigmas,
            feature_names=list(data.get('feature_names', [])),
            schema_version=data.get('schema_version', 1),
            train_frac=data.get('train_frac'),
        )


def normalize_dataset(
    x_train: np.ndarray,
    feature_names: Optional[List[str]] = None,
    schema_version: int = 1,
    train_frac: Optional[float] = None,
) -> Tuple[NormalizationStats, Callable[[np.ndarray], np.ndarray]]:
    """
    Calcular estatísticas sobre as linhas de treino

    Args:
        x_train: Matrizes de treino (n x T x D) ou linhas (m x D)

    Returns:
        (estatísticas, transformação); sigma tem piso de 1e-6
    """
    if x_train.size == 0 or x_train.shape[0] == 0:
        raise EmptyInput("Normalização exige pelo menos uma matriz de treino")

    rows = x_train.reshape(-1, x_train.shape[-1]).astype(np.float64)
    means = rows.mean(axis=0)
    sigmas = np.maximum(rows.std(axis=0), SIGMA_FLOOR)

    stats = NormalizationStats(
        means=means,
        sigmas=sigmas,
        feature_names=list(feature_names or []),
        schema_version=schema_version,
        train_frac=train_frac,
    )
    return stats, stats.apply


def write_stats(stats: NormalizationStats, path: Union[str, Path]) -> None:
    path = Path(path)
    try:
        path.write_text(json.dumps(stats.to_dict(), indent=2) + "\n", encoding='utf-8')
    except OSError as e:
        raise IoFailure(f"Falha ao gravar estatísticas {path}: {e}") from e


def read_stats(path: Union[str, Path]) -> NormalizationStats:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding='utf-8'))
    except OSError as e:
        raise IoFailure(f"Não foi possível ler {path}: {e}") from e
    return NormalizationStats.from_dict(data)


def stats_path_for(dataset_path: Union[str, Path]) -> Path:
    """Arquivo lateral de estatísticas: <dataset>.stats.json"""
    dataset_path = Path(dataset_path)
    return dataset_path.with_suffix(".stats.json")
