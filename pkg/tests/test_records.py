"""
Testes do formato de registro, cabeçalho de sessão e parser de arquivos
"""

import json

import numpy as np
import pytest

from errors import InvalidEncoding, IoFailure, MalformedLine, MissingHeader, RangeViolation, UnknownChannel
from models.record import (
    CHANNEL_FIELDS, GAIN_LEVELS, ChannelKind, Direction, GainLevel, PhysicalChannelRecord, TrafficLabel,
    mod_order_for_mcs, parse_record, serialize_record,
)
from models.session import SessionHeader, parse_header, serialize_header
from parsers.session_parser import list_session_files, read_session


def _random_record(gen: np.random.Generator) -> PhysicalChannelRecord:
    chan = [ChannelKind.PUSCH, ChannelKind.PDSCH, ChannelKind.PDCCH, ChannelKind.PUCCH][gen.integers(4)]
    values = {
        'frame': int(gen.integers(0, 10_000)),
        'subframe': int(gen.integers(0, 10)),
        'slot': int(gen.integers(0, 2)),
        'chan': chan,
        'dir': chan.direction,
    }
    candidates = {
        'mcs': lambda: int(gen.integers(0, 29)),
        'mod_order': lambda: int(gen.choice([2, 4, 6, 8])),
        'harq_id': lambda: int(gen.integers(0, 16)),
        'crc_ok': lambda: bool(gen.integers(2)),
        'tb_len': lambda: int(gen.integers(0, 100_000)),
        'prb': lambda: int(gen.integers(0, 274)),
        'symb_start': lambda: int(gen.integers(0, 14)),
        'symb_len': lambda: int(gen.integers(1, 15)),
        'snr': lambda: float(gen.normal(10, 5)),
        'epre': lambda: float(gen.normal(-100, 5)),
        'cce_index': lambda: int(gen.integers(0, 100)),
        'aggregation_level': lambda: int(gen.choice([1, 2, 4, 8, 16])),
        'pucch_format': lambda: int(gen.integers(0, 5)),
    }
    for name in CHANNEL_FIELDS[chan]:
        if gen.random() < 0.7:
            values[name] = candidates[name]()
    return PhysicalChannelRecord(**values)


class TestRecordFormat:
    def test_roundtrip_random_records(self):
        gen = np.random.default_rng(7)
        for _ in range(10_000):
            rec = _random_record(gen)
            line = serialize_record(rec)
            assert parse_record(line) == rec
            assert serialize_record(parse_record(line)) == line

    def test_canonical_form_orders_keys_and_omits_absent(self):
        line = '{"snr":12.5,"dir":"UL","type":"rec","frame":3,"chan":"PUSCH","slot":0,"subframe":4,"mcs":10}'
        rec = parse_record(line)
        assert serialize_record(rec) == (
            '{"type":"rec","frame":3,"subframe":4,"slot":0,"chan":"PUSCH","dir":"UL","mcs":10,"snr":12.5}'
        )
        assert rec.tb_len is None

    def test_unknown_keys_are_ignored(self):
        rec = parse_record('{"type":"rec","frame":0,"subframe":0,"slot":0,"chan":"PDCCH","dir":"DL","rnti":17}')
        assert rec.chan == ChannelKind.PDCCH

    def test_integer_snr_becomes_float(self):
        rec = parse_record('{"type":"rec","frame":0,"subframe":0,"slot":0,"chan":"PDSCH","dir":"DL","snr":3}')
        assert isinstance(rec.snr, float)
        assert '"snr":3.0' in serialize_record(rec)

    @pytest.mark.parametrize("line, error", [
        ('not json', MalformedLine),
        ('[1, 2]', MalformedLine),
        ('{"type":"session"}', MalformedLine),
        ('{"type":"rec","frame":0,"subframe":0,"slot":0,"chan":"PXXCH","dir":"DL"}', UnknownChannel),
        ('{"type":"rec","frame":0,"subframe":10,"slot":0,"chan":"PDSCH","dir":"DL"}', RangeViolation),
        ('{"type":"rec","frame":0,"subframe":0,"slot":0,"chan":"PDSCH","dir":"DL","mcs":29}', RangeViolation),
        ('{"type":"rec","frame":0,"subframe":0,"slot":0,"chan":"PDSCH","dir":"DL","mod_order":3}', RangeViolation),
        ('{"type":"rec","frame":0,"subframe":0,"slot":0,"chan":"PDSCH","dir":"UL"}', RangeViolation),
        ('{"type":"rec","frame":0,"subframe":0,"slot":0,"chan":"PDCCH","dir":"DL","tb_len":10}', RangeViolation),
        ('{"type":"rec","frame":0,"subframe":0,"slot":0,"chan":"PDSCH","dir":"DL","crc_ok":1}', MalformedLine),
        ('{"type":"rec","frame":"0","subframe":0,"slot":0,"chan":"PDSCH","dir":"DL"}', MalformedLine),
        ('{"type":"rec","subframe":0,"slot":0,"chan":"PDSCH","dir":"DL"}', MalformedLine),
    ])
    def test_invalid_lines(self, line, error):
        with pytest.raises(error):
            parse_record(line)

    def test_channel_directions(self):
        assert ChannelKind.PUSCH.direction == Direction.UL
        assert ChannelKind.PUCCH.direction == Direction.UL
        assert ChannelKind.PDCCH.direction == Direction.DL
        assert not ChannelKind.PBCH.is_pipeline_channel
        assert ChannelKind.PDSCH.is_pipeline_channel


class TestLabelsAndGains:
    def test_label_codes_are_fixed(self):
        assert [int(label) for label in TrafficLabel] == [0, 1, 2, 3]
        assert TrafficLabel.from_wire("meeting") == TrafficLabel.MEETING
        with pytest.raises(MalformedLine):
            TrafficLabel.from_wire("gaming")

    def test_gain_grid(self):
        assert GAIN_LEVELS == (64, 66, 68, 70, 72, 74, 76, 78, 80, 82, 84)
        assert GainLevel(70).index == 3
        assert GainLevel.from_index(10).gain_db == 84
        assert str(GainLevel(64)) == "64 dB"
        for bad in (65, 86, True):
            with pytest.raises(RangeViolation):
                GainLevel(bad)

    def test_mod_order_for_mcs(self):
        assert [mod_order_for_mcs(m) for m in (0, 9, 10, 16, 17, 27, 28)] == [2, 2, 4, 4, 6, 6, 8]


class TestSessionHeader:
    def test_roundtrip(self):
        header = SessionHeader(TrafficLabel.UPLOAD, GainLevel(72), seed=2 ** 63, frames=50)
        assert parse_header(serialize_header(header)) == header

    def test_record_line_is_not_a_header(self):
        with pytest.raises(MissingHeader):
            parse_header('{"type":"rec","frame":0,"subframe":0,"slot":0,"chan":"PDSCH","dir":"DL"}')

    def test_unsupported_schema_version(self):
        line = json.dumps({'type': 'session', 'label': 'call', 'gain_db': 64, 'seed': 1, 'schema_version': 2})
        with pytest.raises(RangeViolation):
            parse_header(line)


def _write_session(path, lines):
    header = serialize_header(SessionHeader(TrafficLabel.CALL, GainLevel(64), seed=1, frames=2))
    path.write_text("\n".join([header] + lines) + "\n", encoding='utf-8')


class TestSessionParser:
    def test_drops_broadcast_and_random_access(self, tmp_path):
        path = tmp_path / "call_64.jsonl"
        _write_session(path, [
            '{"type":"rec","frame":0,"subframe":0,"slot":0,"chan":"PBCH","dir":"DL"}',
            '{"type":"rec","frame":0,"subframe":1,"slot":0,"chan":"PUSCH","dir":"UL","tb_len":100}',
            '{"type":"rec","frame":0,"subframe":2,"slot":0,"chan":"PRACH","dir":"UL"}',
            '{"type":"rec","frame":1,"subframe":0,"slot":0,"chan":"PDSCH","dir":"DL","tb_len":200}',
        ])
        result = read_session(path)
        assert [r.chan for r in result.records] == [ChannelKind.PUSCH, ChannelKind.PDSCH]
        assert result.report.dropped_count == 2
        assert result.report.dropped_by_channel == {'PBCH': 1, 'PRACH': 1}
        assert result.header.frames == 2

    def test_error_names_file_and_line(self, tmp_path):
        path = tmp_path / "call_64.jsonl"
        _write_session(path, [
            '{"type":"rec","frame":0,"subframe":1,"slot":0,"chan":"PUSCH","dir":"UL"}',
            '{"type":"rec","frame":0,"subframe":1,"slot":0,"chan":"PUSCH","dir":"UL","mcs":99}',
        ])
        with pytest.raises(RangeViolation) as info:
            read_session(path)
        assert info.value.line == 3
        assert str(info.value).startswith(f"{path}:3:")

    def test_missing_header(self, tmp_path):
        path = tmp_path / "x.jsonl"
        path.write_text('{"type":"rec","frame":0,"subframe":0,"slot":0,"chan":"PDSCH","dir":"DL"}\n')
        with pytest.raises(MissingHeader) as info:
            read_session(path)
        assert info.value.line == 1

    def test_invalid_utf8_names_file_and_line(self, tmp_path):
        path = tmp_path / "call_64.jsonl"
        _write_session(path, ['{"type":"rec","frame":0,"subframe":1,"slot":0,"chan":"PUSCH","dir":"UL"}'])
        path.write_bytes(path.read_bytes() + b'{"type":"rec","chan":"\xff\xfe"}\n')
        with pytest.raises(InvalidEncoding) as info:
            read_session(path)
        assert info.value.path == str(path)
        assert info.value.line == 3
        assert str(info.value).startswith(f"{path}:3:")

    def test_invalid_utf8_header_is_not_missing_header(self, tmp_path):
        path = tmp_path / "x.jsonl"
        path.write_bytes(b"\xc3\x28\n")
        with pytest.raises(InvalidEncoding) as info:
            read_session(path)
        assert not isinstance(info.value, MissingHeader)
        assert info.value.line == 1

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoFailure):
            read_session(tmp_path / "nada.jsonl")

    def test_listing_is_sorted_and_filtered(self, tmp_path):
        for name in ("b.jsonl", "a.jsonl", "manifest.json"):
            (tmp_path / name).write_text("")
        assert [p.name for p in list_session_files(tmp_path)] == ["a.jsonl", "b.jsonl"]
