"""
Modelo de registro de canal físico para BiLCNet
"""

import json
import math
from dataclasses import dataclass, fields
from enum import Enum, IntEnum
from typing import Any, Dict, List, Optional, Tuple

from errors import MalformedLine, RangeViolation, UnknownChannel


class ChannelKind(str, Enum):
    """Canais físicos do 5G"""
    PDCCH = "PDCCH"
    PDSCH = "PDSCH"
    PBCH = "PBCH"
    PUCCH = "PUCCH"
    PUSCH = "PUSCH"
    PRACH = "PRACH"

    @property
    def direction(self) -> 'Direction':
        return Direction.UL if self in UPLINK_CHANNELS else Direction.DL

    @property
    def is_pipeline_channel(self) -> bool:
        """Somente os quatro canais principais entram no pipeline"""
        return self in PIPELINE_CHANNELS


class Direction(str, Enum):
    UL = "UL"
    DL = "DL"


UPLINK_CHANNELS = frozenset({ChannelKind.PUCCH, ChannelKind.PUSCH, ChannelKind.PRACH})
PIPELINE_CHANNELS = (ChannelKind.PUCCH, ChannelKind.PUSCH, ChannelKind.PDSCH, ChannelKind.PDCCH)


class TrafficLabel(IntEnum):
    """Padrões de comportamento do usuário (códigos fixos)"""
    CALL = 0
    MEETING = 1
    UPLOAD = 2
    DOWNLOAD = 3

    @property
    def wire_name(self) -> str:
        return self.name.lower()

    @classmethod
    def from_wire(cls, name: str) -> 'TrafficLabel':
        try:
            return cls[name.upper()]
        except (KeyError, AttributeError):
            raise MalformedLine(f"Rótulo de tráfego desconhecido: {name!r}")


NUM_CLASSES = len(TrafficLabel)

# 64 dB a 84 dB em passos de 2 dB
GAIN_LEVELS: Tuple[int, ...] = tuple(range(64, 85, 2))


@dataclass(frozen=True, order=True)
class GainLevel:
    """Nível de ganho de transmissão da rede de acesso"""

    gain_db: int

    def __post_init__(self):
        if isinstance(self.gain_db, bool) or self.gain_db not in GAIN_LEVELS:
            raise RangeViolation(f"Ganho deve estar em {GAIN_LEVELS}, recebido {self.gain_db!r}")

    @property
    def index(self) -> int:
        """Posição do ganho na grade (0-10)"""
        return GAIN_LEVELS.index(self.gain_db)

    @classmethod
    def from_index(cls, index: int) -> 'GainLevel':
        if not 0 <= index < len(GAIN_LEVELS):
            raise RangeViolation(f"Índice de ganho fora do intervalo: {index}")
        return cls(GAIN_LEVELS[index])

    def __str__(self) -> str:
        return f"{self.gain_db} dB"


def mod_order_for_mcs(mcs: int) -> int:
    """Ordem de modulação coerente com o índice MCS"""
    if mcs <= 9:
        return 2
    if mcs <= 16:
        return 4
    if mcs <= 27:
        return 6
    return 8


# Ordem canônica dos campos opcionais no formato de linha
OPTIONAL_FIELDS: Tuple[str, ...] = (
    'mcs', 'mod_order', 'harq_id', 'crc_ok', 'tb_len', 'prb', 'symb_start',
    'symb_len', 'snr', 'epre', 'cce_index', 'aggregation_level', 'pucch_format',
)

_SHARED_FIELDS = frozenset({
    'mcs', 'mod_order', 'harq_id', 'crc_ok', 'tb_len', 'prb',
    'symb_start', 'symb_len', 'snr', 'epre',
})

# Campos com significado em cada canal
CHANNEL_FIELDS: Dict[ChannelKind, frozenset] = {
    ChannelKind.PUSCH: _SHARED_FIELDS,
    ChannelKind.PDSCH: _SHARED_FIELDS,
    ChannelKind.PDCCH: frozenset({'cce_index', 'aggregation_level', 'snr', 'epre'}),
    ChannelKind.PUCCH: frozenset({'pucch_format', 'harq_id', 'prb', 'snr', 'epre'}),
    ChannelKind.PBCH: frozenset({'snr', 'epre'}),
    ChannelKind.PRACH: frozenset({'snr', 'epre'}),
}

_INT_RANGES: Dict[str, Tuple[int, Optional[int]]] = {
    'frame': (0, None),
    'subframe': (0, 9),
    'slot': (0, 1),
    'mcs': (0, 28),
    'harq_id': (0, 15),
    'tb_len': (0, None),
    'prb': (0, None),
    'symb_start': (0, 13),
    'symb_len': (1, 14),
    'cce_index': (0, None),
    'pucch_format': (0, 4),
}
_INT_SETS: Dict[str, frozenset] = {
    'aggregation_level': frozenset({1, 2, 4, 8, 16}),
    'mod_order': frozenset({2, 4, 6, 8}),
}
_REAL_FIELDS = frozenset({'snr', 'epre'})
_BOOL_FIELDS = frozenset({'crc_ok'})


@dataclass(frozen=True)
class PhysicalChannelRecord:
    """Observação de um canal físico em um subquadro"""

    frame: int
    subframe: int
    slot: int
    chan: ChannelKind
    dir: Direction
    mcs: Optional[int] = None
    mod_order: Optional[int] = None
    harq_id: Optional[int] = None
    crc_ok: Optional[bool] = None
    tb_len: Optional[int] = None
    prb: Optional[int] = None
    symb_start: Optional[int] = None
    symb_len: Optional[int] = None
    snr: Optional[float] = None  # dB
    epre: Optional[float] = None  # dBm
    cce_index: Optional[int] = None
    aggregation_level: Optional[int] = None
    pucch_format: Optional[int] = None

    def __post_init__(self):
        # reais sempre como float para que a forma canônica seja estável
        for name in _REAL_FIELDS:
            value = getattr(self, name)
            if value is not None and not isinstance(value, bool) and isinstance(value, int):
                object.__setattr__(self, name, float(value))

    def present_fields(self) -> List[str]:
        """Campos opcionais presentes, na ordem canônica"""
        return [name for name in OPTIONAL_FIELDS if getattr(self, name) is not None]

    def validate(self) -> List[str]:
        """Validar registro e retornar lista de erros"""
        errors = []

        for name, (low, high) in _INT_RANGES.items():
            value = getattr(self, name)
            if value is None:
                continue
            if value < low or (high is not None and value > high):
                bound = f"[{low}, {high}]" if high is not None else f">= {low}"
                errors.append(f"{name}={value} fora do intervalo {bound}")

        for name, allowed in _INT_SETS.items():
            value = getattr(self, name)
            if value is not None and value not in allowed:
                errors.append(f"{name}={value} deve ser um de {sorted(allowed)}")

        for name in _REAL_FIELDS:
            value = getattr(self, name)
            if value is not None and not math.isfinite(value):
                errors.append(f"{name} deve ser finito")

        if self.dir != self.chan.direction:
            errors.append(f"Canal {self.chan.value} exige direção {self.chan.direction.value}")

        allowed_fields = CHANNEL_FIELDS[self.chan]
        for name in self.present_fields():
            if name not in allowed_fields:
                errors.append(f"Campo {name} não se aplica ao canal {self.chan.value}")

        return errors

    def to_dict(self) -> Dict[str, Any]:
        """Converter registro para dicionário na ordem canônica"""
        data: Dict[str, Any] = {
            'type': 'rec',
            'frame': self.frame,
            'subframe': self.subframe,
            'slot': self.slot,
            'chan': self.chan.value,
            'dir': self.dir.value,
        }
        for name in self.present_fields():
            data[name] = getattr(self, name)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'PhysicalChannelRecord':
        """Criar registro a partir de dicionário já decodificado"""
        for key in ('frame', 'subframe', 'slot', 'chan', 'dir'):
            if key not in data:
                raise MalformedLine(f"Campo obrigatório ausente: {key}")

        chan_name = data['chan']
        if not isinstance(chan_name, str):
            raise MalformedLine("Campo chan deve ser texto")
        try:
            chan = ChannelKind(chan_name)
        except ValueError:
            raise UnknownChannel(f"Canal desconhecido: {chan_name!r}")

        try:
            direction = Direction(data['dir'])
        except ValueError:
            raise RangeViolation(f"Direção inválida: {data['dir']!r}")

        values: Dict[str, Any] = {'chan': chan, 'dir': direction}
        for key in ('frame', 'subframe', 'slot'):
            values[key] = _as_int(key, data[key])
        for key in OPTIONAL_FIELDS:
            raw = data.get(key)
            if raw is None:
                continue
            if key in _BOOL_FIELDS:
                if not isinstance(raw, bool):
                    raise MalformedLine(f"Campo {key} deve ser booleano")
                values[key] = raw
            elif key in _REAL_FIELDS:
                if isinstance(raw, bool) or not isinstance(raw, (int, float)):
                    raise MalformedLine(f"Campo {key} deve ser numérico")
                values[key] = float(raw)
            else:
                values[key] = _as_int(key, raw)

        record = cls(**values)
        errors = record.validate()
        if errors:
            raise RangeViolation("; ".join(errors))
        return record

    def __str__(self) -> str:
        return f"Record({self.chan.value}, frame={self.frame}, subframe={self.subframe})"


def _as_int(key: str, value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise MalformedLine(f"Campo {key} deve ser inteiro, recebido {value!r}")
    return value


def parse_record(line: str) -> PhysicalChannelRecord:
    """
    Parsear uma linha do formato de registro

    Args:
        line: Uma linha JSON com "type":"rec"

    Returns:
        PhysicalChannelRecord validado; chaves desconhecidas são ignoradas
    """
    try:
        data = json.loads(line)
    except (json.JSONDecodeError, TypeError) as e:
        raise MalformedLine(f"Linha não é JSON válido: {e}")

    if not isinstance(data, dict):
        raise MalformedLine("Linha deve conter um objeto JSON")
    if data.get('type') != 'rec':
        raise MalformedLine(f"Tipo de linha inesperado: {data.get('type')!r}")

    return PhysicalChannelRecord.from_dict(data)


def serialize_record(rec: PhysicalChannelRecord) -> str:
    """Emitir a forma canônica (ordem fixa, campos ausentes omitidos)"""
    return json.dumps(rec.to_dict(), separators=(',', ':'))


def record_field_names() -> List[str]:
    """Nomes de todos os campos do registro"""
    return [f.name for f in fields(PhysicalChannelRecord)]
