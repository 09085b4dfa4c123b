"""
Exceções do BiLCNet
"""

from typing import Optional


class BiLCNetError(Exception):
    """Erro base de todo o pipeline"""


# Ingestão de registros

class RecordError(BiLCNetError, ValueError):
    """Erro de leitura de um registro; pode carregar arquivo e linha"""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        super().__init__(message)
        self.message = message
        self.path = path
        self.line = line

    def with_location(self, path: str, line: int) -> 'RecordError':
        """Anotar o erro com arquivo e número da linha"""
        self.path = path
        self.line = line
        return self

    def __str__(self) -> str:
        if self.path is not None and self.line is not None:
            return f"{self.path}:{self.line}: {self.message}"
        return self.message


class MalformedLine(RecordError):
    """Linha que não é um objeto JSON de registro válido"""


class RangeViolation(RecordError):
    """Campo fora do intervalo permitido"""


class UnknownChannel(RecordError):
    """Canal físico desconhecido"""


class MissingHeader(RecordError):
    """Arquivo de sessão sem cabeçalho na primeira linha"""


class InvalidEncoding(RecordError):
    """Linha de sessão que não é UTF-8 válido"""


# Pré-processamento

class SchemaMismatch(BiLCNetError, ValueError):
    pass


class InvariantViolation(BiLCNetError, ValueError):
    pass


class NegativeInput(BiLCNetError, ValueError):
    pass


class EmptyInput(BiLCNetError, ValueError):
    pass


# Núcleo numérico

class ShapeMismatch(BiLCNetError, ValueError):
    pass


class BatchTooSmall(BiLCNetError, ValueError):
    pass


class InvalidProbability(BiLCNetError, ValueError):
    pass


class EvenKernel(BiLCNetError, ValueError):
    pass


# Treino e avaliação

class LabelOutOfRange(BiLCNetError, ValueError):
    pass


class EmptySplit(BiLCNetError, ValueError):
    pass


class SessionTooShort(BiLCNetError, ValueError):
    pass


class MissingGain(BiLCNetError, ValueError):
    """Algum nível de ganho não aparece no conjunto de dados"""

    def __init__(self, gains):
        self.gains = sorted(gains)
        listed = ", ".join(f"{g} dB" for g in self.gains)
        super().__init__(f"Ganho ausente no conjunto de dados: {listed}")


class LengthMismatch(BiLCNetError, ValueError):
    pass


class EmptyMatrix(BiLCNetError, ValueError):
    pass


class WrongFoldCount(BiLCNetError, ValueError):
    pass


# Arquivos binários

class BadMagic(BiLCNetError, ValueError):
    pass


class VersionMismatch(BiLCNetError, ValueError):
    pass


class ChecksumMismatch(BiLCNetError, ValueError):
    pass


class IoFailure(BiLCNetError, OSError):
    pass
