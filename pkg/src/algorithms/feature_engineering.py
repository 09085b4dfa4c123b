"""
Descritores estatísticos derivados: ERR, EFF_PDSCH, MVI e janelas móveis
"""

from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Dict, Iterable, List, Sequence

import numpy as np

from errors import InvariantViolation, NegativeInput
from models.feature_schema import DEFAULT_WINDOW, ROLLING_DIRECTIONS, ROLLING_FIELDS
from models.record import ChannelKind, Direction, PhysicalChannelRecord


@dataclass(frozen=True)
class HarqWindowStats:
    """Contagem de eventos HARQ em uma janela"""

    n_succ: int
    n_total: int
    direction: Direction

    def validate(self) -> List[str]:
        errors = []
        if self.n_succ < 0 or self.n_total < 0:
            errors.append("Contagens HARQ devem ser não negativas")
        if self.n_succ > self.n_total:
            errors.append(f"n_succ={self.n_succ} maior que n_total={self.n_total}")
        return errors


def compute_err(stats: HarqWindowStats) -> float:
    """Taxa de erro HARQ: 1 - sucessos/total, 0 sem eventos"""
    errors = stats.validate()
    if errors:
        raise InvariantViolation("; ".join(errors))
    if stats.n_total == 0:
        return 0.0
    return 1.0 - stats.n_succ / stats.n_total


def compute_pdsch_eff(tb_sum: float, prb_sum: float) -> float:
    """Bytes de transport block por PRB no PDSCH, 0 sem PRBs"""
    if tb_sum < 0 or prb_sum < 0:
        raise NegativeInput(f"Agregados negativos: tb_sum={tb_sum}, prb_sum={prb_sum}")
    if prb_sum == 0:
        return 0.0
    return float(tb_sum) / float(prb_sum)


def compute_mvi(mod_orders: Sequence[int]) -> float:
    """Coeficiente de variação (desvio populacional) da ordem de modulação"""
    if len(mod_orders) == 0:
        return 0.0
    values = np.asarray(mod_orders, dtype=np.float64)
    mean = values.mean()
    if mean == 0:
        return 0.0
    sigma = values.std()
    if sigma == 0:
        return 0.0
    return float(sigma / mean)


@dataclass
class FrameAggregates:
    """Agregados de um quadro usados pelos descritores derivados"""

    harq_ul: HarqWindowStats
    harq_dl: HarqWindowStats
    pdsch_tb_sum: float = 0.0
    pdsch_prb_sum: float = 0.0
    mod_orders_ul: List[int] = field(default_factory=list)
    mod_orders_dl: List[int] = field(default_factory=list)
    # valores individuais por (direção, campo) para as janelas móveis
    values: Dict[str, List[float]] = field(default_factory=dict)

    @classmethod
    def from_records(cls, records: Iterable[PhysicalChannelRecord]) -> 'FrameAggregates':
        succ = {Direction.UL: 0, Direction.DL: 0}
        total = {Direction.UL: 0, Direction.DL: 0}
        tb_sum = 0.0
        prb_sum = 0.0
        mod_orders = {Direction.UL: [], Direction.DL: []}
        values = {f"{d}_{name}": [] for d in ROLLING_DIRECTIONS for name in ROLLING_FIELDS}

        for rec in records:
            if rec.chan not in (ChannelKind.PUSCH, ChannelKind.PDSCH):
                continue
            if rec.crc_ok is not None:
                total[rec.dir] += 1
                succ[rec.dir] += int(rec.crc_ok)
            if rec.mod_order is not None:
                mod_orders[rec.dir].append(rec.mod_order)
            if rec.chan == ChannelKind.PDSCH:
                tb_sum += rec.tb_len or 0
                prb_sum += rec.prb or 0
            prefix = 'ul' if rec.dir == Direction.UL else 'dl'
            for name in ROLLING_FIELDS:
                value = getattr(rec, name)
                if value is not None:
                    values[f"{prefix}_{name}"].append(float(value))

        return cls(
            harq_ul=HarqWindowStats(succ[Direction.UL], total[Direction.UL], Direction.UL),
            harq_dl=HarqWindowStats(succ[Direction.DL], total[Direction.DL], Direction.DL),
            pdsch_tb_sum=tb_sum,
            pdsch_prb_sum=prb_sum,
            mod_orders_ul=mod_orders[Direction.UL],
            mod_orders_dl=mod_orders[Direction.DL],
            values=values,
        )

    @classmethod
    def empty(cls) -> 'FrameAggregates':
        return cls.from_records([])


class RollingWindow:
    """
    Janela dos W quadros mais recentes (quadro atual incluído)

    No início da sessão a janela é truncada aos quadros disponíveis.
    """

    def __init__(self, window: int = DEFAULT_WINDOW):
        if window < 1:
            raise ValueError("Janela deve ter pelo menos 1 quadro")
        self.window = window
        self._frames: Deque[Dict[str, List[float]]] = deque(maxlen=window)

    def push(self, aggregates: FrameAggregates) -> Dict[str, float]:
        """Adicionar quadro e retornar médias e desvios populacionais"""
        self._frames.append(aggregates.values)
        result = {}
        for direction in ROLLING_DIRECTIONS:
            for name in ROLLING_FIELDS:
                key = f"{direction}_{name}"
                pooled = [v for frame in self._frames for v in frame.get(key, [])]
                if pooled:
                    arr = np.asarray(pooled, dtype=np.float64)
                    mean, std = float(arr.mean()), float(arr.std())
                else:
                    mean, std = 0.0, 0.0
                result[f"roll_{key}_mean"] = mean
                result[f"roll_{key}_std"] = std
        return result


def derived_descriptors(aggregates: FrameAggregates, rolling: Dict[str, float]) -> Dict[str, float]:
    """Todos os descritores derivados de um quadro, por nome"""
    descriptors = {
        'ERR_ul': compute_err(aggregates.harq_ul),
        'ERR_dl': compute_err(aggregates.harq_dl),
        'EFF_PDSCH': compute_pdsch_eff(aggregates.pdsch_tb_sum, aggregates.pdsch_prb_sum),
        'MVI_dl': compute_mvi(aggregates.mod_orders_dl),
        'MVI_ul': compute_mvi(aggregates.mod_orders_ul),
    }
    descriptors.update(rolling)
    return descriptors
