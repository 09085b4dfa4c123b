"""
Arquivo de modelo BLCM

magic "BLCM" | u32 versão | u32 tamanho da config | config JSON canônico |
registros {u16 nome, nome, u8 dtype, u8 rank, u32 dims, dados} em ordem de nome |
u32 CRC32 de tudo que vem depois do magic
"""

import json
import struct
import zlib
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np
from pydantic import ValidationError

from config import BiLCNetConfig, canonical_json
from errors import BadMagic, ChecksumMismatch, IoFailure, ShapeMismatch, VersionMismatch
from network.bilcnet import BiLCNet

MODEL_MAGIC = b"BLCM"
MODEL_VERSION = 1

_DTYPE_CODES = {np.dtype('<f4'): 0, np.dtype('<f8'): 1}
_CODE_DTYPES = {code: dtype for dtype, code in _DTYPE_CODES.items()}


def encode_state(config: BiLCNetConfig, state: Dict[str, np.ndarray]) -> bytes:
    """Montar o conteúdo binário do arquivo de modelo"""
    config_blob = canonical_json(config.model_dump(mode='json')).encode('utf-8')
    body = bytearray(struct.pack("<II", MODEL_VERSION, len(config_blob)))
    body += config_blob

    for name in sorted(state):
        array = np.asarray(state[name])
        dtype = array.dtype.newbyteorder('<')
        if dtype not in _DTYPE_CODES:
            raise ShapeMismatch(f"{name}: tipo {array.dtype} não suportado")
        encoded = name.encode('utf-8')
        body += struct.pack("<H", len(encoded)) + encoded
        body += struct.pack("<BB", _DTYPE_CODES[dtype], array.ndim)
        body += struct.pack(f"<{array.ndim}I", *array.shape)
        body += np.ascontiguousarray(array, dtype=dtype).tobytes()

    crc = zlib.crc32(bytes(body)) & 0xFFFFFFFF
    return MODEL_MAGIC + bytes(body) + struct.pack("<I", crc)


def decode_state(blob: bytes) -> Tuple[BiLCNetConfig, Dict[str, np.ndarray]]:
    """Validar magic, CRC e versão, nessa ordem, e decodificar"""
    if len(blob) < len(MODEL_MAGIC) or blob[:4] != MODEL_MAGIC:
        raise BadMagic("Arquivo não é um modelo BLCM")
    if len(blob) < 4 + 8 + 4:
        raise ChecksumMismatch("Arquivo de modelo truncado")

    body, (stored_crc,) = blob[4:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) & 0xFFFFFFFF != stored_crc:
        raise ChecksumMismatch("CRC32 do modelo não confere (arquivo corrompido ou truncado)")

    version, config_len = struct.unpack_from("<II", body, 0)
    if version != MODEL_VERSION:
        raise VersionMismatch(f"Versão de modelo {version} não suportada (esperado {MODEL_VERSION})")

    offset = 8
    try:
        config = BiLCNetConfig.model_validate(json.loads(body[offset:offset + config_len].decode("utf-8")))
    except ValidationError as e:
        raise VersionMismatch(f"Configuração do modelo incompatível: {e}") from e
    offset += config_len

    state: Dict[str, np.ndarray] = {}
    while offset < len(body):
        (name_len,) = struct.unpack_from("<H", body, offset)
        offset += 2
        name = body[offset:offset + name_len].decode('utf-8')
        offset += name_len
        code, rank = struct.unpack_from("<BB", body, offset)
        offset += 2
        shape = struct.unpack_from(f"<{rank}I", body, offset)
        offset += 4 * rank
        dtype = _CODE_DTYPES.get(code)
        if dtype is None:
            raise VersionMismatch(f"{name}: código de tipo desconhecido {code}")
        count = int(np.prod(shape)) if rank else 1
        array = np.frombuffer(body, dtype=dtype, count=count, offset=offset).reshape(shape)
        offset += count * dtype.itemsize
        state[name] = array.copy()

    return config, state


def save_model(model: BiLCNet, path: Union[str, Path]) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(encode_state(model.config, model.state_dict()))
    except OSError as e:
        raise IoFailure(f"Falha ao gravar o modelo {path}: {e}") from e


def load_model(path: Union[str, Path]) -> Tuple[BiLCNet, BiLCNetConfig]:
    """Reconstruir o modelo com parâmetros idênticos bit a bit"""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise IoFailure(f"Não foi possível ler o modelo {path}: {e}") from e

    config, state = decode_state(blob)
    model = BiLCNet(config)
    model.load_state_dict(state)
    model.eval()
    return model, config
