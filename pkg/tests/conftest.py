"""
Fixtures compartilhadas dos testes
"""

import sys
from pathlib import Path

import numpy as np
import pytest

# Adicionar src ao path
sys.path.append(str(Path(__file__).parent.parent / "src"))

from models.dataset import FrameDataset  # noqa: E402
from models.record import GAIN_LEVELS, NUM_CLASSES  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_dataset(frames_per_session: int = 10, T: int = 4, D: int = 8, seed: int = 0,
                 separable: bool = True) -> FrameDataset:
    """Dataset artificial: uma sessão por (rótulo, ganho), classes separáveis pela média"""
    gen = np.random.default_rng(seed)
    xs, labels, gains, sessions, frames = [], [], [], [], []
    session = 0
    for label in range(NUM_CLASSES):
        for gain in range(len(GAIN_LEVELS)):
            for frame in range(frames_per_session):
                x = gen.normal(size=(T, D))
                if separable:
                    x[:, label % D] += 3.0
                xs.append(x)
                labels.append(label)
                gains.append(gain)
                sessions.append(session)
                frames.append(frame)
            session += 1
    return FrameDataset(
        x=np.asarray(xs, dtype=np.float32),
        labels=np.asarray(labels, dtype=np.int64),
        gains=np.asarray(gains, dtype=np.int64),
        sessions=np.asarray(sessions, dtype=np.int64),
        frames=np.asarray(frames, dtype=np.int64),
    )


@pytest.fixture
def small_dataset():
    return make_dataset()
