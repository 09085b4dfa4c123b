"""
Parser de arquivos de sessão (JSON por linha) para BiLCNet
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Union

from loguru import logger

from errors import InvalidEncoding, IoFailure, MissingHeader, RecordError
from models.record import PhysicalChannelRecord, parse_record
from models.session import LoadReport, SessionHeader, parse_header

SESSION_SUFFIX = ".jsonl"


@dataclass
class SessionParseResult:
    """Resultado da leitura de um arquivo de sessão"""
    header: SessionHeader
    records: List[PhysicalChannelRecord]
    report: LoadReport
    warnings: List[str] = field(default_factory=list)


def _decode_lines(raw: bytes, path: Path) -> List[str]:
    lines = []
    for line_number, chunk in enumerate(raw.splitlines(), start=1):
        try:
            lines.append(chunk.decode('utf-8'))
        except UnicodeDecodeError as e:
            raise InvalidEncoding(
                f"Byte inválido na coluna {e.start + 1}: não é UTF-8", path=str(path), line=line_number
            ) from e
    return lines


def read_session(path: Union[str, Path]) -> SessionParseResult:
    """
    Ler arquivo de sessão preservando a ordem dos registros

    Args:
        path: Caminho do arquivo .jsonl

    Returns:
        SessionParseResult; PBCH/PRACH são contados e descartados
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise IoFailure(f"Não foi possível ler {path}: {e}") from e
    lines = _decode_lines(raw, path)

    if not lines or not lines[0].strip():
        raise MissingHeader("Arquivo de sessão vazio ou sem cabeçalho", path=str(path), line=1)

    try:
        header = parse_header(lines[0])
    except RecordError as e:
        raise e.with_location(str(path), 1)

    report = LoadReport(path=str(path))
    records: List[PhysicalChannelRecord] = []
    warnings: List[str] = []

    for line_number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            record = parse_record(line)
        except RecordError as e:
            raise e.with_location(str(path), line_number)

        if not record.chan.is_pipeline_channel:
            report.count_dropped(record.chan.value)
            continue

        if header.frames is not None and record.frame >= header.frames:
            warnings.append(f"Linha {line_number}: quadro {record.frame} além do declarado no cabeçalho")

        records.append(record)

    report.record_count = len(records)

    if report.dropped_count:
        logger.debug("{}: {} registros descartados ({})", path.name, report.dropped_count, report.dropped_by_channel)
    logger.debug("{}: {} registros lidos", path.name, report.record_count)

    return SessionParseResult(header=header, records=records, report=report, warnings=warnings)


def list_session_files(directory: Union[str, Path]) -> List[Path]:
    """Listar arquivos de sessão de um diretório em ordem estável"""
    directory = Path(directory)
    if not directory.is_dir():
        raise IoFailure(f"Diretório de sessões não encontrado: {directory}")
    return sorted(p for p in directory.iterdir() if p.suffix == SESSION_SUFFIX)
