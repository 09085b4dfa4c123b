"""
Testes do esquema de features, descritores derivados, pré-processamento,
arquivo BLCD e normalização
"""

import numpy as np
import pytest

from algorithms.feature_engineering import (
    FrameAggregates, HarqWindowStats, RollingWindow, compute_err, compute_mvi, compute_pdsch_eff,
    derived_descriptors,
)
from algorithms.normalization import (
    SIGMA_FLOOR, NormalizationStats, normalize_dataset, read_stats, stats_path_for, write_stats,
)
from algorithms.preprocessing import (
    augment_features, build_frame_matrix, build_subframe_vector, preprocess_directory, preprocess_session,
)
from errors import (
    BadMagic, EmptyInput, InvariantViolation, IoFailure, NegativeInput, SchemaMismatch, VersionMismatch,
)
from models.dataset import FrameDataset, read_dataset, write_dataset
from models.feature_schema import (
    DERIVED_SLOTS, FeatureSchema, FeatureSlot, Reduction, create_default_schema, schema_for_version,
)
from models.record import ChannelKind, Direction, GainLevel, PhysicalChannelRecord, TrafficLabel
from models.session import SessionHeader, LoadReport
from parsers.session_parser import SessionParseResult
from simulation.traffic_generator import generate_dataset

from conftest import make_dataset


def pdsch(frame=0, subframe=0, **values):
    return PhysicalChannelRecord(frame, subframe, 0, ChannelKind.PDSCH, Direction.DL, **values)


def pusch(frame=0, subframe=0, **values):
    return PhysicalChannelRecord(frame, subframe, 0, ChannelKind.PUSCH, Direction.UL, **values)


def pdcch(frame=0, subframe=0, **values):
    return PhysicalChannelRecord(frame, subframe, 0, ChannelKind.PDCCH, Direction.DL, **values)


@pytest.fixture(scope="module")
def schema():
    return create_default_schema()


def col(schema, name):
    return schema.feature_names().index(name)


class TestFeatureSchema:
    def test_default_layout(self, schema):
        assert schema.D == 61
        assert schema.channel_width == 40
        names = schema.feature_names()
        assert names[:4] == ["PUCCH.rec.present_flag", "PUCCH.rec.count", "PUCCH.epre.mean", "PUCCH.snr.mean"]
        assert names[40:45] == ["ERR_ul", "ERR_dl", "EFF_PDSCH", "MVI_dl", "MVI_ul"]
        assert names[-1] == "roll_dl_mcs_std"
        assert len(DERIVED_SLOTS) == 21

    def test_roundtrip_dict(self, schema):
        assert FeatureSchema.from_dict(schema.to_dict()) == schema

    def test_invalid_slot(self):
        bad = FeatureSchema(version=9, slots=[FeatureSlot(ChannelKind.PDCCH, 'tb_len', Reduction.SUM)])
        assert bad.validate()
        with pytest.raises(SchemaMismatch):
            bad.ensure_valid()

    def test_unknown_version(self):
        with pytest.raises(SchemaMismatch):
            schema_for_version(2)


class TestDerivedDescriptors:
    def test_err(self):
        assert compute_err(HarqWindowStats(3, 4, Direction.DL)) == pytest.approx(0.25)
        assert compute_err(HarqWindowStats(0, 0, Direction.UL)) == 0.0
        with pytest.raises(InvariantViolation):
            compute_err(HarqWindowStats(5, 4, Direction.UL))

    def test_eff(self):
        assert compute_pdsch_eff(1000, 10) == 100.0
        assert compute_pdsch_eff(1000, 0) == 0.0
        with pytest.raises(NegativeInput):
            compute_pdsch_eff(-1, 10)

    def test_mvi(self):
        assert compute_mvi([]) == 0.0
        assert compute_mvi([4, 4, 4]) == 0.0
        assert compute_mvi([2, 6]) == pytest.approx(0.5)

    def test_frame_aggregates(self):
        agg = FrameAggregates.from_records([
            pdsch(crc_ok=True, tb_len=300, prb=3, mod_order=2, mcs=5, snr=10.0),
            pdsch(subframe=1, crc_ok=False, tb_len=100, prb=1, mod_order=6, mcs=20, snr=12.0),
            pusch(crc_ok=True, tb_len=50, prb=2, mod_order=4),
            pdcch(aggregation_level=4),
        ])
        descriptors = derived_descriptors(agg, {})
        assert descriptors['ERR_dl'] == pytest.approx(0.5)
        assert descriptors['ERR_ul'] == 0.0
        assert descriptors['EFF_PDSCH'] == pytest.approx(100.0)
        assert descriptors['MVI_dl'] == pytest.approx(0.5)
        assert descriptors['MVI_ul'] == 0.0
        assert agg.values['dl_tb_len'] == [300.0, 100.0]

    def test_rolling_window_truncates_and_slides(self):
        window = RollingWindow(2)
        first = window.push(FrameAggregates.from_records([pdsch(tb_len=10)]))
        assert first['roll_dl_tb_len_mean'] == 10.0
        assert first['roll_dl_tb_len_std'] == 0.0
        second = window.push(FrameAggregates.from_records([pdsch(tb_len=30)]))
        assert second['roll_dl_tb_len_mean'] == 20.0
        assert second['roll_dl_tb_len_std'] == pytest.approx(10.0)
        third = window.push(FrameAggregates.empty())
        assert third['roll_dl_tb_len_mean'] == 30.0
        assert third['roll_ul_snr_mean'] == 0.0
        with pytest.raises(ValueError):
            RollingWindow(0)


class TestSubframeVector:
    def test_empty_subframe_is_zero(self, schema):
        assert not build_subframe_vector([], schema).any()

    def test_reductions(self, schema):
        vector = build_subframe_vector([
            pdsch(tb_len=100, prb=4, mcs=10, snr=8.0, harq_id=1, symb_start=2),
            pdsch(tb_len=50, prb=2, mcs=20, snr=12.0, harq_id=2, symb_start=1),
            pdcch(aggregation_level=8, cce_index=16),
        ], schema)
        assert vector[col(schema, "PDSCH.rec.present_flag")] == 1.0
        assert vector[col(schema, "PDSCH.rec.count")] == 2.0
        assert vector[col(schema, "PDSCH.tb_len.sum")] == 150.0
        assert vector[col(schema, "PDSCH.prb.sum")] == 6.0
        assert vector[col(schema, "PDSCH.mcs.mean")] == 15.0
        assert vector[col(schema, "PDSCH.snr.mean")] == 10.0
        assert vector[col(schema, "PDSCH.harq_id.count")] == 2.0
        assert vector[col(schema, "PDCCH.aggregation_level.count")] == 1.0
        assert vector[col(schema, "PUSCH.rec.present_flag")] == 0.0
        assert not vector[schema.channel_width:].any()

    def test_independent_of_record_order(self, schema):
        records = [
            pdsch(tb_len=100, symb_start=2, mcs=3),
            pdsch(tb_len=50, symb_start=1, mcs=7),
            pusch(tb_len=20, symb_start=0),
        ]
        forward = build_subframe_vector(records, schema)
        backward = build_subframe_vector(records[::-1], schema)
        np.testing.assert_array_equal(forward, backward)


class TestFrameMatrix:
    def test_rows_follow_subframes(self, schema):
        matrix = build_frame_matrix(
            [pdsch(subframe=3, tb_len=10), pusch(subframe=7, tb_len=5)],
            schema, TrafficLabel.CALL, GainLevel(64),
        )
        assert matrix.rows.shape == (10, 61)
        assert matrix.rows[3, col(schema, "PDSCH.tb_len.sum")] == 10.0
        assert matrix.rows[7, col(schema, "PUSCH.tb_len.sum")] == 5.0
        assert not matrix.rows[0].any()

    def test_rejects_mixed_frames(self, schema):
        with pytest.raises(InvariantViolation):
            build_frame_matrix([pdsch(frame=0), pdsch(frame=1)], schema, TrafficLabel.CALL, GainLevel(64))

    def test_augment_broadcasts(self, schema):
        matrix = build_frame_matrix([pdsch(tb_len=10)], schema, TrafficLabel.CALL, GainLevel(64))
        augmented = augment_features(matrix, {'ERR_dl': 0.25, 'roll_ul_prb_std': 3.0}, schema)
        assert np.all(augmented.rows[:, schema.derived_index('ERR_dl')] == 0.25)
        assert np.all(augmented.rows[:, schema.derived_index('roll_ul_prb_std')] == 3.0)
        assert np.all(augmented.rows[:, schema.derived_index('MVI_dl')] == 0.0)
        np.testing.assert_array_equal(augmented.rows[:, :40], matrix.rows[:, :40])


def _parsed(records, frames=None):
    header = SessionHeader(TrafficLabel.MEETING, GainLevel(66), seed=0, frames=frames)
    return SessionParseResult(header=header, records=records, report=LoadReport(path="mem"))


class TestPreprocessSession:
    def test_declared_frames_include_empty_ones(self, schema):
        matrices = preprocess_session(_parsed([pdsch(frame=1, tb_len=10)], frames=3), schema)
        assert [m.frame for m in matrices] == [0, 1, 2]
        assert not matrices[0].rows.any()

    def test_window_uses_recent_frames(self, schema):
        records = [pdsch(frame=f, tb_len=10 * (f + 1)) for f in range(4)]
        matrices = preprocess_session(_parsed(records), schema, window=2)
        column = schema.derived_index('roll_dl_tb_len_mean')
        assert [m.rows[0, column] for m in matrices] == [10.0, 15.0, 25.0, 35.0]

    def test_directory_pipeline(self, schema, tmp_path):
        generate_dataset(tmp_path / "sessions", frames_per_session=3, seed=0)
        dataset, reports = preprocess_directory(tmp_path / "sessions", schema)
        assert len(dataset) == 44 * 3
        assert (dataset.T, dataset.D) == (10, 61)
        assert len(reports) == 44
        assert len(dataset.session_ids()) == 44
        assert set(dataset.labels.tolist()) == {0, 1, 2, 3}

    def test_parallel_matches_serial(self, schema, tmp_path):
        generate_dataset(tmp_path / "sessions", frames_per_session=2, seed=3)
        serial, _ = preprocess_directory(tmp_path / "sessions", schema, n_jobs=1)
        parallel, _ = preprocess_directory(tmp_path / "sessions", schema, n_jobs=2)
        np.testing.assert_array_equal(serial.x, parallel.x)
        np.testing.assert_array_equal(serial.labels, parallel.labels)

    def test_empty_directory(self, schema, tmp_path):
        with pytest.raises(EmptyInput):
            preprocess_directory(tmp_path, schema)


class TestDatasetFile:
    def test_roundtrip(self, tmp_path):
        dataset = make_dataset(frames_per_session=3)
        path = tmp_path / "d.blcd"
        write_dataset(dataset, path)
        loaded = read_dataset(path)
        np.testing.assert_array_equal(loaded.x, dataset.x)
        np.testing.assert_array_equal(loaded.labels, dataset.labels)
        np.testing.assert_array_equal(loaded.gains, dataset.gains)
        np.testing.assert_array_equal(loaded.sessions, dataset.sessions)
        np.testing.assert_array_equal(loaded.frames, dataset.frames)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "d.blcd"
        path.write_bytes(b"XXXX" + bytes(16))
        with pytest.raises(BadMagic):
            read_dataset(path)

    def test_version_and_truncation(self, tmp_path):
        path = tmp_path / "d.blcd"
        write_dataset(make_dataset(frames_per_session=1), path)
        blob = bytearray(path.read_bytes())

        path.write_bytes(bytes(blob[:-3]))
        with pytest.raises(IoFailure):
            read_dataset(path)

        blob[4] = 2
        path.write_bytes(bytes(blob))
        with pytest.raises(VersionMismatch):
            read_dataset(path)


class TestNormalization:
    def test_stats_on_train_rows(self, rng):
        x = rng.normal(5.0, 2.0, size=(50, 10, 3))
        x[:, :, 2] = 7.0
        stats, transform = normalize_dataset(x)
        z = transform(x)
        np.testing.assert_allclose(z[:, :, :2].reshape(-1, 2).mean(axis=0), 0.0, atol=1e-9)
        np.testing.assert_allclose(z[:, :, :2].reshape(-1, 2).std(axis=0), 1.0, atol=1e-9)
        assert stats.sigmas[2] == SIGMA_FLOOR
        assert np.all(z[:, :, 2] == 0.0)

    def test_dimension_mismatch(self, rng):
        stats, _ = normalize_dataset(rng.normal(size=(4, 10, 3)))
        with pytest.raises(SchemaMismatch):
            stats.apply(np.zeros((1, 10, 4)))

    def test_empty(self):
        with pytest.raises(EmptyInput):
            normalize_dataset(np.zeros((0, 10, 3)))

    def test_sidecar_roundtrip(self, rng, tmp_path):
        stats, _ = normalize_dataset(rng.normal(size=(4, 10, 3)), ['a', 'b', 'c'], 1, 0.8)
        path = stats_path_for(tmp_path / "d.blcd")
        assert path.name == "d.stats.json"
        write_stats(stats, path)
        loaded = read_stats(path)
        np.testing.assert_array_equal(loaded.means, stats.means)
        np.testing.assert_array_equal(loaded.sigmas, stats.sigmas)
        assert loaded.feature_names == ['a', 'b', 'c']
        assert loaded.train_frac == 0.8
        assert isinstance(loaded, NormalizationStats)

    def test_float32_input_keeps_dtype(self):
        dataset = make_dataset(frames_per_session=2)
        stats, transform = normalize_dataset(dataset.x)
        assert transform(dataset.x).dtype == np.float32
        assert isinstance(dataset, FrameDataset)
