"""
Amostras (Channel Feature Matrix) e arquivo de dataset BLCD
"""

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Union

import numpy as np

from errors import BadMagic, IoFailure, ShapeMismatch, VersionMismatch
from models.feature_schema import FRAME_ROWS
from models.record import GAIN_LEVELS, GainLevel, TrafficLabel

DATASET_MAGIC = b"BLCD"
DATASET_VERSION = 1
_HEADER = struct.Struct("<4sIIII")


@dataclass
class ChannelFeatureMatrix:
    """Amostra de um quadro de rádio: 10 linhas (subquadros) x D features"""

    rows: np.ndarray
    label: TrafficLabel
    gain: GainLevel
    frame: int
    session: int

    def __post_init__(self):
        if self.rows.ndim != 2 or self.rows.shape[0] != FRAME_ROWS:
            raise ShapeMismatch(f"Matriz deve ter {FRAME_ROWS} linhas, recebido {self.rows.shape}")

    @property
    def D(self) -> int:
        return self.rows.shape[1]


def record_dtype(T: int, D: int) -> np.dtype:
    """Layout little-endian de uma amostra no arquivo"""
    return np.dtype([
        ('label', '<u1'),
        ('gain_index', '<u1'),
        ('reserved', '<u2'),
        ('session', '<u4'),
        ('x', '<f4', (T, D)),
    ])


class FrameDataset:
    """Conjunto de amostras ordenadas por (sessão, quadro)"""

    def __init__(self, x: np.ndarray, labels: np.ndarray, gains: np.ndarray,
                 sessions: np.ndarray, frames: np.ndarray):
        n = x.shape[0]
        if x.ndim != 3:
            raise ShapeMismatch(f"Dataset deve ser n x T x D, recebido {x.shape}")
        for name, arr in (('labels', labels), ('gains', gains), ('sessions', sessions), ('frames', frames)):
            if arr.shape != (n,):
                raise ShapeMismatch(f"{name} deve ter {n} entradas, recebido {arr.shape}")
        self.x = np.ascontiguousarray(x, dtype=np.float32)
        self.labels = labels.astype(np.int64)
        self.gains = gains.astype(np.int64)  # índice do ganho (0-10)
        self.sessions = sessions.astype(np.int64)
        self.frames = frames.astype(np.int64)

    def __len__(self) -> int:
        return self.x.shape[0]

    @property
    def T(self) -> int:
        return self.x.shape[1]

    @property
    def D(self) -> int:
        return self.x.shape[2]

    @property
    def gains_db(self) -> np.ndarray:
        return np.asarray(GAIN_LEVELS, dtype=np.int64)[self.gains]

    def subset(self, indices: Sequence[int]) -> 'FrameDataset':
        idx = np.asarray(indices, dtype=np.int64)
        return FrameDataset(self.x[idx], self.labels[idx], self.gains[idx], self.sessions[idx], self.frames[idx])

    def with_features(self, x: np.ndarray) -> 'FrameDataset':
        """Mesmo conjunto com outra matriz de features (ex.: normalizada)"""
        return FrameDataset(x, self.labels, self.gains, self.sessions, self.frames)

    def session_ids(self) -> List[int]:
        """Sessões na ordem de primeira aparição"""
        _, first = np.unique(self.sessions, return_index=True)
        return [int(self.sessions[i]) for i in sorted(first)]

    def summary(self) -> Dict:
        return {
            'samples': len(self),
            'T': self.T,
            'D': self.D,
            'sessions': len(self.session_ids()),
            'per_label': {label.wire_name: int((self.labels == label).sum()) for label in TrafficLabel},
        }

    @classmethod
    def from_matrices(cls, matrices: Sequence[ChannelFeatureMatrix]) -> 'FrameDataset':
        if not matrices:
            raise ShapeMismatch("Nenhuma amostra para montar o dataset")
        return cls(
            x=np.stack([m.rows for m in matrices]).astype(np.float32),
            labels=np.array([int(m.label) for m in matrices]),
            gains=np.array([m.gain.index for m in matrices]),
            sessions=np.array([m.session for m in matrices]),
            frames=np.array([m.frame for m in matrices]),
        )


def _frames_from_order(sessions: np.ndarray) -> np.ndarray:
    """Índice do quadro = ordem da amostra dentro da sessão"""
    frames = np.zeros(len(sessions), dtype=np.int64)
    seen: Dict[int, int] = {}
    for i, s in enumerate(sessions.tolist()):
        frames[i] = seen.get(s, 0)
        seen[s] = frames[i] + 1
    return frames


def write_dataset(dataset: FrameDataset, path: Union[str, Path]) -> None:
    """Gravar dataset no formato BLCD"""
    path = Path(path)
    records = np.zeros(len(dataset), dtype=record_dtype(dataset.T, dataset.D))
    records['label'] = dataset.labels
    records['gain_index'] = dataset.gains
    records['session'] = dataset.sessions
    records['x'] = dataset.x

    header = _HEADER.pack(DATASET_MAGIC, DATASET_VERSION, len(dataset), dataset.T, dataset.D)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(header + records.tobytes())
    except OSError as e:
        raise IoFailure(f"Falha ao gravar dataset {path}: {e}") from e


def read_dataset(path: Union[str, Path]) -> FrameDataset:
    """Ler dataset BLCD"""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise IoFailure(f"Não foi possível ler o dataset {path}: {e}") from e

    if len(blob) < _HEADER.size or blob[:4] != DATASET_MAGIC:
        raise BadMagic(f"{path} não é um arquivo BLCD")
    _, version, n, T, D = _HEADER.unpack_from(blob)
    if version != DATASET_VERSION:
        raise VersionMismatch(f"Versão de dataset {version} não suportada (esperado {DATASET_VERSION})")

    dtype = record_dtype(T, D)
    expected = _HEADER.size + n * dtype.itemsize
    if len(blob) != expected:
        raise IoFailure(f"{path}: tamanho {len(blob)} bytes, esperado {expected}")

    records = np.frombuffer(blob, dtype=dtype, count=n, offset=_HEADER.size)
    sessions = records['session'].astype(np.int64)
    return FrameDataset(
        x=records['x'].copy(),
        labels=records['label'],
        gains=records['gain_index'],
        sessions=sessions,
        frames=_frames_from_order(sessions),
    )
