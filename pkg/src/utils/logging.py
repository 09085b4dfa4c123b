"""
Configuração dos sinks do loguru
"""

import os
import sys
from pathlib import Path
from typing import List, Optional, Union

from dotenv import load_dotenv
from loguru import logger

LOG_LEVEL_ENV = "BILCNET_LOG_LEVEL"
DEFAULT_LEVEL = "INFO"

CONSOLE_FORMAT = "<green>{time:HH:mm:ss}</green> | <level>{level: <7}</level> | {message}"
FILE_FORMAT = "{time:YYYY-MM-DD HH:mm:ss.SSS} | {level: <7} | {name}:{function}:{line} | {message}"


def resolve_level(level: Optional[str] = None) -> str:
    """Flag da linha de comando, depois BILCNET_LOG_LEVEL (.env aceito), depois INFO"""
    if level:
        return level.upper()
    load_dotenv()
    return os.getenv(LOG_LEVEL_ENV, DEFAULT_LEVEL).upper()


def configure_logging(level: Optional[str] = None, log_file: Optional[Union[str, Path]] = None) -> List[int]:
    """
    Substituir o sink padrão por stderr compacto e, opcionalmente, arquivo

    Returns:
        Identificadores dos sinks instalados
    """
    resolved = resolve_level(level)
    logger.remove()
    handlers = [logger.add(sys.stderr, level=resolved, format=CONSOLE_FORMAT)]
    if log_file is not None:
        handlers.append(logger.add(str(log_file), level=resolved, format=FILE_FORMAT, encoding='utf-8'))
    return handlers


def add_file_sink(log_file: Union[str, Path], level: Optional[str] = None) -> int:
    """Sink adicional para o run.log de uma execução"""
    return logger.add(str(log_file), level=resolve_level(level), format=FILE_FORMAT, encoding='utf-8')
