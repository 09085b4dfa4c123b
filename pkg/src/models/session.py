"""
Modelo de sessão de captura para BiLCNet
"""

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from errors import MalformedLine, MissingHeader, RangeViolation
from models.record import GainLevel, TrafficLabel

SCHEMA_VERSION = 1
MAX_SEED = 2 ** 64 - 1


@dataclass(frozen=True)
class SessionHeader:
    """Cabeçalho de uma sessão (primeira linha do arquivo)"""

    label: TrafficLabel
    gain: GainLevel
    seed: int
    schema_version: int = SCHEMA_VERSION
    frames: Optional[int] = None  # quantidade de quadros da sessão

    def validate(self) -> List[str]:
        """Validar cabeçalho e retornar lista de erros"""
        errors = []

        if not 0 <= self.seed <= MAX_SEED:
            errors.append("Semente deve ser um inteiro sem sinal de 64 bits")

        if self.schema_version != SCHEMA_VERSION:
            errors.append(f"Versão de esquema não suportada: {self.schema_version}")

        if self.frames is not None and self.frames < 1:
            errors.append("Quantidade de quadros deve ser positiva")

        return errors

    def to_dict(self) -> Dict:
        """Converter cabeçalho para dicionário na ordem do formato"""
        data = {
            'type': 'session',
            'label': self.label.wire_name,
            'gain_db': self.gain.gain_db,
            'seed': self.seed,
            'schema_version': self.schema_version,
        }
        if self.frames is not None:
            data['frames'] = self.frames
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> 'SessionHeader':
        """Criar cabeçalho a partir de dicionário"""
        if data.get('type') != 'session':
            raise MissingHeader("Primeira linha não é um cabeçalho de sessão")

        for key in ('label', 'gain_db', 'seed', 'schema_version'):
            if key not in data:
                raise MalformedLine(f"Cabeçalho sem o campo {key}")
            if key != 'label' and (isinstance(data[key], bool) or not isinstance(data[key], int)):
                raise MalformedLine(f"Campo {key} do cabeçalho deve ser inteiro")

        frames = data.get('frames')
        if frames is not None and (isinstance(frames, bool) or not isinstance(frames, int)):
            raise MalformedLine("Campo frames do cabeçalho deve ser inteiro")

        header = cls(
            label=TrafficLabel.from_wire(data['label']),
            gain=GainLevel(data['gain_db']),
            seed=data['seed'],
            schema_version=data['schema_version'],
            frames=frames,
        )
        errors = header.validate()
        if errors:
            raise RangeViolation("; ".join(errors))
        return header


def parse_header(line: str) -> SessionHeader:
    """Parsear a linha de cabeçalho"""
    try:
        data = json.loads(line)
    except json.JSONDecodeError as e:
        raise MissingHeader(f"Cabeçalho ilegível: {e}")
    if not isinstance(data, dict):
        raise MissingHeader("Cabeçalho deve ser um objeto JSON")
    return SessionHeader.from_dict(data)


def serialize_header(header: SessionHeader) -> str:
    return json.dumps(header.to_dict(), separators=(',', ':'))


@dataclass
class LoadReport:
    """Relatório de carga de um arquivo de sessão"""

    path: str
    record_count: int = 0
    dropped_count: int = 0
    dropped_by_channel: Dict[str, int] = field(default_factory=dict)

    def count_dropped(self, channel: str) -> None:
        self.dropped_count += 1
        self.dropped_by_channel[channel] = self.dropped_by_channel.get(channel, 0) + 1

    def to_dict(self) -> Dict:
        return {
            'path': self.path,
            'record_count': self.record_count,
            'dropped_count': self.dropped_count,
            'dropped_by_channel': dict(sorted(self.dropped_by_channel.items())),
        }
