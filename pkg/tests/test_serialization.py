"""
Testes do arquivo de modelo BLCM
"""

import struct
import zlib

import numpy as np
import pytest

from config import BiLCNetConfig, BiLSTMConfig, ConformerConfig
from errors import BadMagic, ChecksumMismatch, IoFailure, VersionMismatch
from network.bilcnet import BiLCNet, predict
from network.serialization import MODEL_MAGIC, decode_state, encode_state, load_model, save_model


@pytest.fixture
def model():
    config = BiLCNetConfig(
        bilstm=BiLSTMConfig(input_dim=6, hidden_dim=4, num_layers=1, dropout=0.0),
        conformer=ConformerConfig(model_dim=8, num_blocks=1, num_heads=2, ffn_expansion=2),
        classifier_hidden=8,
    )
    model = BiLCNet(config, seed=5)
    model.norm.set_stats(np.arange(6, dtype=np.float64), np.full(6, 2.0))
    return model


def _rewrite_crc(blob: bytes) -> bytes:
    body = blob[4:-4]
    return blob[:4] + body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


class TestModelFile:
    def test_roundtrip_gives_identical_logits(self, model, tmp_path, rng):
        x = rng.standard_normal((4, 10, 6))
        _, expected = predict(x, model)

        path = tmp_path / "m.blcm"
        save_model(model, path)
        loaded, config = load_model(path)

        assert config == model.config
        assert not loaded.training
        _, probs = predict(x, loaded)
        np.testing.assert_array_equal(probs, expected)
        for name, value in model.state_dict().items():
            np.testing.assert_array_equal(loaded.state_dict()[name], value, err_msg=name)

    def test_normalization_stats_travel_with_model(self, model, tmp_path):
        path = tmp_path / "m.blcm"
        save_model(model, path)
        loaded, _ = load_model(path)
        np.testing.assert_array_equal(loaded.norm.mean.data, np.arange(6))
        np.testing.assert_array_equal(loaded.norm.sigma.data, np.full(6, 2.0))

    def test_encoding_is_deterministic(self, model):
        assert encode_state(model.config, model.state_dict()) == encode_state(model.config, model.state_dict())

    def test_bad_magic(self, model):
        blob = encode_state(model.config, model.state_dict())
        with pytest.raises(BadMagic):
            decode_state(b"XXXX" + blob[4:])

    def test_truncated_file(self, model):
        blob = encode_state(model.config, model.state_dict())
        with pytest.raises(ChecksumMismatch):
            decode_state(blob[:-10])

    def test_flipped_byte(self, model):
        blob = bytearray(encode_state(model.config, model.state_dict()))
        blob[len(blob) // 2] ^= 0xFF
        with pytest.raises(ChecksumMismatch):
            decode_state(bytes(blob))

    def test_version_checked_after_checksum(self, model):
        blob = bytearray(encode_state(model.config, model.state_dict()))
        blob[4] = 9
        with pytest.raises(ChecksumMismatch):
            decode_state(bytes(blob))
        with pytest.raises(VersionMismatch):
            decode_state(_rewrite_crc(bytes(blob)))

    def test_magic_prefix(self, model):
        assert encode_state(model.config, model.state_dict()).startswith(MODEL_MAGIC)

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoFailure):
            load_model(tmp_path / "nada.blcm")
