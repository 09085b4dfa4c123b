"""
Pré-processamento: registros ordenados -> Channel Feature Matrices 10 x D
"""

from collections import defaultdict
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed
from loguru import logger

from algorithms.feature_engineering import FrameAggregates, RollingWindow, derived_descriptors
from errors import EmptyInput, InvariantViolation
from models.dataset import ChannelFeatureMatrix, FrameDataset
from models.feature_schema import DEFAULT_WINDOW, FRAME_ROWS, FeatureSchema, Reduction
from models.record import OPTIONAL_FIELDS, GainLevel, PhysicalChannelRecord, TrafficLabel
from models.session import LoadReport
from parsers.session_parser import SessionParseResult, list_session_files, read_session


def _canonical_key(rec: PhysicalChannelRecord) -> Tuple:
    """Ordem total dos registros de um subquadro, independente da ordem no arquivo"""
    values = tuple(-1 if getattr(rec, name) is None else getattr(rec, name) for name in OPTIONAL_FIELDS)
    return (rec.slot, rec.chan.value, values)


def _reduce(records: List[PhysicalChannelRecord], field: Optional[str], reduction: Reduction) -> float:
    if reduction == Reduction.PRESENT_FLAG:
        return 1.0
    if field is None:
        return float(len(records))

    values = [getattr(rec, field) for rec in records if getattr(rec, field) is not None]
    if reduction == Reduction.COUNT:
        return float(len(values))
    if not values:
        return 0.0
    if reduction == Reduction.FIRST:
        return float(values[0])
    if reduction == Reduction.SUM:
        return float(sum(values))
    if reduction == Reduction.MAX:
        return float(max(values))
    return float(sum(values)) / len(values)


def _fill_subframe(out: np.ndarray, records: Iterable[PhysicalChannelRecord], schema: FeatureSchema) -> None:
    by_channel: Dict = defaultdict(list)
    for rec in sorted(records, key=_canonical_key):
        by_channel[rec.chan].append(rec)

    for i, slot in enumerate(schema.slots):
        channel_records = by_channel.get(slot.channel)
        if not channel_records or slot.is_reserved:
            continue
        out[i] = _reduce(channel_records, slot.field, slot.reduction)


def build_subframe_vector(records: Sequence[PhysicalChannelRecord], schema: FeatureSchema) -> np.ndarray:
    """
    Vetor de features de um subquadro

    Args:
        records: Registros de um mesmo (quadro, subquadro)
        schema: Esquema de features

    Returns:
        Vetor de comprimento D; canais ausentes e descritores derivados ficam em 0
    """
    schema.ensure_valid()
    vector = np.zeros(schema.D, dtype=np.float64)
    _fill_subframe(vector, records, schema)
    return vector


def _build_rows(records: Sequence[PhysicalChannelRecord], schema: FeatureSchema) -> np.ndarray:
    rows = np.zeros((FRAME_ROWS, schema.D), dtype=np.float64)
    by_subframe: Dict[int, List[PhysicalChannelRecord]] = defaultdict(list)
    for rec in records:
        by_subframe[rec.subframe].append(rec)
    for t, subframe_records in by_subframe.items():
        _fill_subframe(rows[t], subframe_records, schema)
    return rows


def build_frame_matrix(
    records: Sequence[PhysicalChannelRecord],
    schema: FeatureSchema,
    label: TrafficLabel,
    gain: GainLevel,
    frame: Optional[int] = None,
    session: int = 0,
) -> ChannelFeatureMatrix:
    """Empilhar os 10 subquadros de um quadro; subquadros vazios viram linhas nulas"""
    schema.ensure_valid()
    frames = {rec.frame for rec in records}
    if len(frames) > 1:
        raise InvariantViolation(f"Registros de quadros diferentes: {sorted(frames)}")
    if frame is None:
        frame = frames.pop() if frames else 0

    return ChannelFeatureMatrix(
        rows=_build_rows(records, schema),
        label=label,
        gain=gain,
        frame=frame,
        session=session,
    )


def augment_features(
    matrix: ChannelFeatureMatrix,
    window_stats: Dict[str, float],
    schema: FeatureSchema,
) -> ChannelFeatureMatrix:
    """Preencher os descritores derivados, repetidos nas 10 linhas"""
    rows = matrix.rows.copy()
    for name in schema.derived_slots:
        rows[:, schema.derived_index(name)] = window_stats.get(name, 0.0)
    return ChannelFeatureMatrix(
        rows=rows,
        label=matrix.label,
        gain=matrix.gain,
        frame=matrix.frame,
        session=matrix.session,
    )


def preprocess_session(
    parsed: SessionParseResult,
    schema: FeatureSchema,
    window: int = DEFAULT_WINDOW,
    session: int = 0,
) -> List[ChannelFeatureMatrix]:
    """
    Converter uma sessão em matrizes, uma por quadro, na ordem temporal

    Com frames no cabeçalho, todo quadro em [0, frames) gera uma amostra;
    sem ele, a faixa vai do menor ao maior quadro observado.
    """
    schema.ensure_valid()
    header = parsed.header

    by_frame: Dict[int, List[PhysicalChannelRecord]] = defaultdict(list)
    for rec in parsed.records:
        by_frame[rec.frame].append(rec)

    if header.frames is not None:
        frame_range = range(header.frames)
    elif by_frame:
        frame_range = range(min(by_frame), max(by_frame) + 1)
    else:
        frame_range = range(0)

    rolling = RollingWindow(window)
    matrices = []
    for frame in frame_range:
        records = by_frame.get(frame, [])
        aggregates = FrameAggregates.from_records(records)
        stats = derived_descriptors(aggregates, rolling.push(aggregates))
        matrix = build_frame_matrix(records, schema, header.label, header.gain, frame=frame, session=session)
        matrices.append(augment_features(matrix, stats, schema))
    return matrices


def _process_file(path: Path, session: int, schema: FeatureSchema, window: int) -> Tuple[List[ChannelFeatureMatrix], LoadReport]:
    parsed = read_session(path)
    for warning in parsed.warnings:
        logger.warning("{}: {}", path.name, warning)
    return preprocess_session(parsed, schema, window, session), parsed.report


def preprocess_directory(
    in_dir: Union[str, Path],
    schema: FeatureSchema,
    window: int = DEFAULT_WINDOW,
    n_jobs: int = 1,
) -> Tuple[FrameDataset, List[LoadReport]]:
    """
    Processar todas as sessões de um diretório

    O ordinal da sessão é a posição do arquivo na listagem ordenada.
    """
    files = list_session_files(in_dir)
    if not files:
        raise EmptyInput(f"Nenhum arquivo de sessão em {in_dir}")

    results = Parallel(n_jobs=n_jobs)(
        delayed(_process_file)(path, ordinal, schema, window)
        for ordinal, path in enumerate(files)
    )

    matrices = [m for session_matrices, _ in results for m in session_matrices]
    reports = [report for _, report in results]
    if not matrices:
        raise EmptyInput(f"Nenhum quadro produzido a partir de {in_dir}")

    dataset = FrameDataset.from_matrices(matrices)
    dropped = sum(r.dropped_count for r in reports)
    logger.info("{} sessões, {} amostras ({} x {}), {} registros descartados",
                len(files), len(dataset), dataset.T, dataset.D, dropped)
    return dataset, reports
