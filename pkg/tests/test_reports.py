"""
Testes das figuras e da configuração de logs
"""

import pytest
from loguru import logger

from algorithms.evaluation import zero_shot_report
from algorithms.training import EpochRecord
from errors import EmptyInput
from reports.plots import create_history_figure, create_zero_shot_figure, history_frame, write_figure
from utils.logging import LOG_LEVEL_ENV, configure_logging, resolve_level


def _records(n):
    return [EpochRecord(e, 1.0 / e, 0.5 + 0.01 * e, 1.1 / e, 0.45 + 0.01 * e) for e in range(1, n + 1)]


class TestPlots:
    def test_history_frame_is_long_format(self):
        df = history_frame({'bilcnet': _records(3), 'lstm': _records(2)})
        assert len(df) == 5
        assert set(df['model']) == {'bilcnet', 'lstm'}
        assert {'epoch', 'train_acc', 'val_loss'} <= set(df.columns)

    def test_empty_history(self):
        with pytest.raises(EmptyInput):
            history_frame({'bilcnet': []})

    def test_history_figure_traces(self):
        fig = create_history_figure({'bilcnet': _records(3)})
        # treino e validação, acurácia e perda
        assert len(fig.data) == 4

    def test_zero_shot_figure(self, tmp_path):
        report = zero_shot_report([0.9] * 11)
        fig = create_zero_shot_figure(report)
        assert list(fig.data[0].x) == [f"{g} dB" for g in report.per_gain]
        assert tuple(fig.layout.yaxis.range) == (0.5, 1.0)
        write_figure(fig, tmp_path / "sub" / "z.html")
        assert (tmp_path / "sub" / "z.html").exists()


class TestLogging:
    def test_flag_wins(self, monkeypatch):
        monkeypatch.setenv(LOG_LEVEL_ENV, "ERROR")
        assert resolve_level("debug") == "DEBUG"

    def test_environment_then_default(self, monkeypatch):
        monkeypatch.setenv(LOG_LEVEL_ENV, "warning")
        assert resolve_level() == "WARNING"
        monkeypatch.delenv(LOG_LEVEL_ENV)
        assert resolve_level() == "INFO"

    def test_file_sink(self, tmp_path):
        log_file = tmp_path / "run.log"
        handlers = configure_logging("INFO", log_file)
        logger.debug("oculto")
        logger.info("visível")
        for handler in handlers:
            logger.remove(handler)
        text = log_file.read_text(encoding='utf-8')
        assert "visível" in text
        assert "oculto" not in text
