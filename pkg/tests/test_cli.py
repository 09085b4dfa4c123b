"""
Testes de ponta a ponta da linha de comando
"""

import json

import numpy as np
import pytest

from algorithms.evaluation import write_report, zero_shot_report
from algorithms.normalization import read_stats, stats_path_for
from algorithms.training import read_history
from cli import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_VERIFICATION, main
from models.dataset import read_dataset, write_dataset
from network import gradcheck
from network.tensor import Tensor

from conftest import make_dataset

SMALL_MODEL = [
    "--set", "model.bilstm.hidden_dim=4",
    "--set", "model.bilstm.num_layers=1",
    "--set", "model.conformer.num_blocks=1",
    "--set", "model.conformer.num_heads=2",
    "--set", "model.classifier_hidden=8",
    "--set", "train.batch_size=64",
]


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Sessões sintéticas curtas já pré-processadas"""
    root = tmp_path_factory.mktemp("cli")
    runs = ["--runs-root", str(root / "runs")]
    assert main(["gen", "--out", str(root / "sessions"), "--frames", "10", "--seed", "0", *runs]) == EXIT_OK
    assert main(["preprocess", "--in", str(root / "sessions"), "--out", str(root / "data.blcd"), *runs]) == EXIT_OK
    return root


def _train(workspace, name, *extra):
    model = workspace / f"{name}.blcm"
    code = main([
        "train", "--data", str(workspace / "data.blcd"), "--out", str(model),
        "--runs-root", str(workspace / "runs"), "--epochs", "1", *SMALL_MODEL, *extra,
    ])
    return code, model


class TestPipeline:
    def test_gen_and_preprocess(self, workspace):
        assert (workspace / "sessions" / "manifest.json").exists()
        dataset = read_dataset(workspace / "data.blcd")
        assert len(dataset) == 44 * 10
        assert dataset.T == 10
        assert dataset.D == 61
        stats = read_stats(stats_path_for(workspace / "data.blcd"))
        assert len(stats.means) == 61

    def test_train_writes_model_history_and_run_dir(self, workspace):
        code, model = _train(workspace, "a")
        assert code == EXIT_OK
        assert model.exists()
        assert len(read_history(model.with_suffix(".history.jsonl"))) == 1
        run_dirs = list((workspace / "runs").iterdir())
        assert run_dirs
        assert all((d / "config.json").exists() for d in run_dirs)
        assert any((d / "run.log").exists() and (d / "history.jsonl").exists() for d in run_dirs)

    def test_train_is_deterministic(self, workspace):
        _, first = _train(workspace, "b", "--seed", "3")
        _, second = _train(workspace, "c", "--seed", "3")
        assert first.read_bytes() == second.read_bytes()

    def test_eval_report(self, workspace, capsys):
        _, model = _train(workspace, "d")
        report_path = workspace / "report.json"
        code = main(["eval", "--data", str(workspace / "data.blcd"), "--model", str(model),
                     "--report", str(report_path)])
        assert code == EXIT_OK
        report = json.loads(report_path.read_text())
        assert set(report) == {'confusion', 'per_class', 'overall'}
        assert report['confusion']['total'] == 44
        assert "teste:" in capsys.readouterr().out

    def test_gen_and_preprocess_save_effective_config(self, workspace):
        gen_dir = next((workspace / "runs").glob("*-gen-seed0"))
        saved = json.loads((gen_dir / "config.json").read_text())
        assert saved["generate"] == {"frames_per_session": 10, "seed": 0}
        assert (gen_dir / "run.log").exists()

        prep_dir = next((workspace / "runs").glob("*-preprocess-seed*"))
        saved = json.loads((prep_dir / "config.json").read_text())
        assert saved["schema"] == {"version": 1, "window": 10}
        assert saved["split"] == {"train_frac": 0.8}

    def test_preprocess_reads_window_from_config(self, workspace, tmp_path):
        config = tmp_path / "c.json"
        config.write_text(json.dumps({"schema": {"window": 3}}))
        code = main(["preprocess", "--in", str(workspace / "sessions"), "--out", str(tmp_path / "w.blcd"),
                     "--config", str(config), "--runs-root", str(tmp_path / "runs")])
        assert code == EXIT_OK
        run_dir = next((tmp_path / "runs").glob("*-preprocess-seed*"))
        assert json.loads((run_dir / "config.json").read_text())["schema"]["window"] == 3

    def test_plot_history(self, workspace):
        _, model = _train(workspace, "e")
        out = workspace / "historico.html"
        code = main(["plot", "--history", str(model.with_suffix(".history.jsonl")), "--out", str(out)])
        assert code == EXIT_OK
        assert "plotly" in out.read_text()


class TestExitCodes:
    def test_missing_model(self, workspace, tmp_path):
        code = main(["eval", "--data", str(workspace / "data.blcd"), "--model", str(tmp_path / "nada.blcm"),
                     "--report", str(tmp_path / "r.json")])
        assert code == EXIT_RUNTIME

    def test_missing_required_flag(self):
        assert main(["train", "--data", "x.blcd"]) == EXIT_USAGE

    def test_unknown_command(self):
        assert main(["voar"]) == EXIT_USAGE

    def test_help(self):
        assert main(["--help"]) == EXIT_OK

    def test_invalid_override(self, workspace, tmp_path):
        code = main(["train", "--data", str(workspace / "data.blcd"), "--out", str(tmp_path / "m.blcm"),
                     "--set", "train.nada=1"])
        assert code == EXIT_RUNTIME

    def test_zeroshot_with_missing_gain(self, tmp_path):
        dataset = make_dataset(frames_per_session=10)
        data_path = tmp_path / "parcial.blcd"
        write_dataset(dataset.subset(np.flatnonzero(dataset.gains != 3)), data_path)
        code = main(["zeroshot", "--data", str(data_path), "--report", str(tmp_path / "z.json"),
                     "--runs-root", str(tmp_path / "runs"), "--epochs", "1"])
        assert code == EXIT_RUNTIME
        assert not (tmp_path / "z.json").exists()

    @pytest.mark.parametrize("argv", [
        ["gen", "--frames", "0"],
        ["gen", "--frames", "-5"],
        ["gen", "--frames", "dez"],
        ["preprocess", "--in", "x", "--window", "0"],
        ["preprocess", "--in", "x", "--train-frac", "1.0"],
    ])
    def test_invalid_numeric_flags(self, tmp_path, argv):
        assert main([*argv, "--out", str(tmp_path / "saida")]) == EXIT_USAGE
        assert not (tmp_path / "saida").exists()

    def test_plot_needs_exactly_one_source(self, tmp_path):
        assert main(["plot", "--out", str(tmp_path / "f.html")]) == EXIT_USAGE


class TestGradcheck:
    def test_passes(self, capsys):
        assert main(["gradcheck"]) == EXIT_OK
        out = capsys.readouterr().out
        for name in gradcheck.CHECKS:
            assert name in out

    def test_broken_check_fails(self, monkeypatch):
        def broken(rng, dtype):
            x = Tensor(rng.standard_normal(4), requires_grad=True, dtype=dtype)
            return (lambda: Tensor.from_op(x.data ** 2, (x,), lambda g: (g * x.data,))), [('x', x)]

        monkeypatch.setitem(gradcheck.CHECKS, 'quebrado', broken)
        assert main(["gradcheck"]) == EXIT_VERIFICATION


def test_plot_zero_shot(tmp_path):
    report = tmp_path / "z.json"
    write_report(zero_shot_report([0.8] * 11).to_dict(), report)
    out = tmp_path / "z.html"
    assert main(["plot", "--zeroshot", str(report), "--out", str(out)]) == EXIT_OK
    assert out.exists()


@pytest.mark.slow
def test_acceptance_on_generated_data(tmp_path):
    """Configuração padrão sobre o conjunto sintético completo"""
    sessions, data = tmp_path / "sessions", tmp_path / "data.blcd"
    runs = ["--runs-root", str(tmp_path / "runs")]
    assert main(["gen", "--out", str(sessions), "--seed", "0", *runs]) == EXIT_OK
    assert main(["preprocess", "--in", str(sessions), "--out", str(data), *runs]) == EXIT_OK

    compare = tmp_path / "compare.json"
    assert main(["compare", "--data", str(data), "--report", str(compare),
                 "--runs-root", str(tmp_path / "runs")]) == EXIT_OK
    results = json.loads(compare.read_text())
    assert results['bilcnet']['metrics']['overall']['accuracy'] >= 0.90
    assert results['margin_over_majority'] >= 0.30

    zeroshot = tmp_path / "zeroshot.json"
    assert main(["zeroshot", "--data", str(data), "--report", str(zeroshot),
                 "--runs-root", str(tmp_path / "runs"), "--jobs", "-1"]) == EXIT_OK
    assert json.loads(zeroshot.read_text())['mean'] >= 0.70
