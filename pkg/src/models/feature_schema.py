"""
Esquema de features por subquadro para BiLCNet
Define a ordem fixa das colunas da Channel Feature Matrix
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

from errors import SchemaMismatch
from models.record import CHANNEL_FIELDS, PIPELINE_CHANNELS, ChannelKind

FRAME_ROWS = 10  # subquadros por quadro de rádio
DEFAULT_WINDOW = 10
RESERVED = "reserved"


class Reduction(str, Enum):
    """Redução aplicada aos registros de um canal dentro do subquadro"""
    FIRST = "first"
    SUM = "sum"
    MEAN = "mean"
    MAX = "max"
    COUNT = "count"
    PRESENT_FLAG = "present_flag"


@dataclass(frozen=True)
class FeatureSlot:
    """
    Coluna do bloco de canais

    field None significa o registro inteiro (contagem ou presença);
    RESERVED é uma coluna constante 0.
    """

    channel: ChannelKind
    field: Optional[str]
    reduction: Reduction

    @property
    def name(self) -> str:
        target = self.field if self.field is not None else "rec"
        return f"{self.channel.value}.{target}.{self.reduction.value}"

    @property
    def is_reserved(self) -> bool:
        return self.field == RESERVED

    def validate(self) -> List[str]:
        errors = []
        if not self.channel.is_pipeline_channel:
            errors.append(f"{self.name}: canal fora do pipeline")
        if self.field is None:
            if self.reduction not in (Reduction.COUNT, Reduction.PRESENT_FLAG):
                errors.append(f"{self.name}: redução {self.reduction.value} exige um campo")
        elif self.field != RESERVED and self.field not in CHANNEL_FIELDS[self.channel]:
            errors.append(f"{self.name}: campo {self.field} não existe no canal {self.channel.value}")
        return errors

    def to_dict(self) -> Dict:
        return {
            'channel': self.channel.value,
            'field': self.field,
            'reduction': self.reduction.value,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'FeatureSlot':
        return cls(
            channel=ChannelKind(data['channel']),
            field=data.get('field'),
            reduction=Reduction(data['reduction']),
        )


ROLLING_FIELDS: Tuple[str, ...] = ('tb_len', 'prb', 'snr', 'mcs')
ROLLING_DIRECTIONS: Tuple[str, ...] = ('ul', 'dl')


def rolling_slot_names() -> List[str]:
    """Nomes das 16 médias/desvios móveis, direção > campo > estatística"""
    return [
        f"roll_{direction}_{name}_{stat}"
        for direction in ROLLING_DIRECTIONS
        for name in ROLLING_FIELDS
        for stat in ('mean', 'std')
    ]


DERIVED_SLOTS: Tuple[str, ...] = ('ERR_ul', 'ERR_dl', 'EFF_PDSCH', 'MVI_dl', 'MVI_ul') + tuple(rolling_slot_names())


@dataclass
class FeatureSchema:
    """Layout versionado do vetor de features de um subquadro"""

    version: int
    slots: List[FeatureSlot] = field(default_factory=list)
    derived_slots: List[str] = field(default_factory=list)

    @property
    def channel_width(self) -> int:
        return len(self.slots)

    @property
    def D(self) -> int:
        return len(self.slots) + len(self.derived_slots)

    def feature_names(self) -> List[str]:
        return [slot.name for slot in self.slots] + list(self.derived_slots)

    def derived_index(self, name: str) -> int:
        """Coluna de um descritor derivado"""
        try:
            return self.channel_width + self.derived_slots.index(name)
        except ValueError:
            raise SchemaMismatch(f"Descritor derivado desconhecido: {name}")

    def slots_for(self, channel: ChannelKind) -> List[Tuple[int, FeatureSlot]]:
        return [(i, slot) for i, slot in enumerate(self.slots) if slot.channel == channel]

    def validate(self) -> List[str]:
        """Validar esquema e retornar lista de erros"""
        errors = []
        for slot in self.slots:
            errors.extend(slot.validate())

        unknown = [name for name in self.derived_slots if name not in DERIVED_SLOTS]
        if unknown:
            errors.append(f"Descritores derivados desconhecidos: {unknown}")

        names = [slot.name for slot in self.slots if not slot.is_reserved]
        if len(names) != len(set(names)):
            errors.append("Colunas duplicadas no esquema")
        return errors

    def ensure_valid(self) -> 'FeatureSchema':
        errors = self.validate()
        if errors:
            raise SchemaMismatch("; ".join(errors))
        return self

    def to_dict(self) -> Dict:
        return {
            'version': self.version,
            'slots': [slot.to_dict() for slot in self.slots],
            'derived_slots': list(self.derived_slots),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'FeatureSchema':
        schema = cls(
            version=data['version'],
            slots=[FeatureSlot.from_dict(s) for s in data.get('slots', [])],
            derived_slots=list(data.get('derived_slots', [])),
        )
        return schema.ensure_valid()


def create_default_schema() -> FeatureSchema:
    """
    Esquema versão 1 (D = 61)

    Bloco de canais com 40 colunas seguido de 21 descritores derivados.
    """
    slots: List[FeatureSlot] = []

    for chan in PIPELINE_CHANNELS:
        slots.extend([
            FeatureSlot(chan, None, Reduction.PRESENT_FLAG),
            FeatureSlot(chan, None, Reduction.COUNT),
            FeatureSlot(chan, 'epre', Reduction.MEAN),
            FeatureSlot(chan, 'snr', Reduction.MEAN),
        ])

    for chan in (ChannelKind.PUSCH, ChannelKind.PDSCH):
        slots.extend([
            FeatureSlot(chan, 'mcs', Reduction.MEAN),
            FeatureSlot(chan, 'mod_order', Reduction.MEAN),
            FeatureSlot(chan, 'tb_len', Reduction.SUM),
            FeatureSlot(chan, 'prb', Reduction.SUM),
            FeatureSlot(chan, 'symb_start', Reduction.FIRST),
            FeatureSlot(chan, 'symb_len', Reduction.MEAN),
            FeatureSlot(chan, 'crc_ok', Reduction.MEAN),
            FeatureSlot(chan, 'harq_id', Reduction.COUNT),
        ])

    slots.extend([
        FeatureSlot(ChannelKind.PDCCH, 'cce_index', Reduction.MEAN),
        FeatureSlot(ChannelKind.PDCCH, 'aggregation_level', Reduction.MEAN),
        FeatureSlot(ChannelKind.PDCCH, 'aggregation_level', Reduction.COUNT),  # DCIs
        FeatureSlot(ChannelKind.PDCCH, RESERVED, Reduction.FIRST),
        FeatureSlot(ChannelKind.PUCCH, 'pucch_format', Reduction.FIRST),
        FeatureSlot(ChannelKind.PUCCH, 'harq_id', Reduction.COUNT),
        FeatureSlot(ChannelKind.PUCCH, RESERVED, Reduction.FIRST),
        FeatureSlot(ChannelKind.PUCCH, RESERVED, Reduction.FIRST),
    ])

    return FeatureSchema(version=1, slots=slots, derived_slots=list(DERIVED_SLOTS)).ensure_valid()


DEFAULT_SCHEMA_VERSION = 1


def schema_for_version(version: int) -> FeatureSchema:
    """Esquema registrado para uma versão"""
    if version == DEFAULT_SCHEMA_VERSION:
        return create_default_schema()
    raise SchemaMismatch(f"Versão de esquema desconhecida: {version}")
