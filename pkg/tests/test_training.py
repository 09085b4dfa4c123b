"""
Testes de perda, AdamW, laço de treino e orquestração de experimentos
"""

import math

import numpy as np
import pytest

from algorithms.experiments import compare_models, evaluate_on, train_bilcnet
from algorithms.training import (
    AdamW, EpochRecord, History, OptimizerState, adamw_step, clip_grad_norm, cross_entropy, fit, learning_rate, make_batches,
    read_history,
)
from config import BiLCNetConfig, BiLSTMConfig, ConformerConfig, RunConfig, TrainConfig
from errors import EmptySplit, LabelOutOfRange, SchemaMismatch, ShapeMismatch
from network.bilcnet import BiLCNet
from network.tensor import Parameter, Tensor

from conftest import make_dataset


def small_model_config(input_dim=8):
    return BiLCNetConfig(
        bilstm=BiLSTMConfig(input_dim=input_dim, hidden_dim=4, num_layers=1, dropout=0.0),
        conformer=ConformerConfig(model_dim=8, num_blocks=1, num_heads=2, ffn_expansion=2, dropout=0.0),
        classifier_hidden=8,
        dropout=0.0,
    )


def small_run_config(epochs=3, **train):
    return RunConfig(
        model=small_model_config(),
        train=TrainConfig(batch_size=32, max_epochs=epochs, early_stop_patience=epochs, lr=5e-3, **train),
    )


class TestCrossEntropy:
    def test_uniform_logits(self):
        loss = cross_entropy(Tensor(np.zeros((3, 4)), dtype=np.float64), [0, 2, 3])
        assert float(loss.data) == pytest.approx(math.log(4), abs=1e-12)

    def test_gradient(self):
        logits = Tensor(np.array([[1.0, 2.0, 0.0, -1.0], [0.5, 0.5, 0.5, 0.5]]), requires_grad=True, dtype=np.float64)
        cross_entropy(logits, [1, 3]).backward()
        probs = np.exp(logits.data) / np.exp(logits.data).sum(axis=1, keepdims=True)
        onehot = np.eye(4)[[1, 3]]
        np.testing.assert_allclose(logits.grad, (probs - onehot) / 2)

    def test_large_logits_are_stable(self):
        loss = cross_entropy(Tensor(np.array([[1000.0, 0.0, 0.0, 0.0]]), dtype=np.float64), [0])
        assert float(loss.data) == pytest.approx(0.0, abs=1e-12)

    def test_errors(self):
        with pytest.raises(LabelOutOfRange):
            cross_entropy(Tensor(np.zeros((2, 4))), [0, 4])
        with pytest.raises(ShapeMismatch):
            cross_entropy(Tensor(np.zeros((2, 4))), [0])


class TestAdamW:
    def test_first_step_moves_by_lr(self):
        p = Parameter(np.array([1.0, -1.0]), name="w", dtype=np.float64)
        p.grad = np.array([0.3, -2.0])
        config = TrainConfig(lr=0.1, weight_decay=0.0)
        adamw_step([p], OptimizerState(), config)
        np.testing.assert_allclose(p.data, [0.9, -0.9], atol=1e-6)

    def test_decay_only_on_weights(self):
        w = Parameter(np.array([2.0]), name="w", dtype=np.float64)
        b = Parameter(np.array([2.0]), name="b", decay=False, dtype=np.float64)
        config = TrainConfig(lr=0.1, weight_decay=0.5)
        adamw_step([w, b], OptimizerState(), config)
        assert w.data[0] == pytest.approx(2.0 - 0.1 * 0.5 * 2.0)
        assert b.data[0] == 2.0

    def test_requires_unique_names(self):
        with pytest.raises(ValueError):
            AdamW([Parameter(np.zeros(1), name="a"), Parameter(np.zeros(1), name="a")], TrainConfig())

    def test_step_counter(self):
        p = Parameter(np.zeros(2), name="w")
        optimizer = AdamW([p], TrainConfig())
        p.grad = np.ones(2, dtype=np.float32)
        optimizer.step()
        optimizer.step()
        assert optimizer.state.t == 2


class TestHelpers:
    def test_clip_grad_norm(self):
        a, b = Parameter(np.zeros(2), name="a"), Parameter(np.zeros(1), name="b")
        a.grad, b.grad = np.array([3.0, 0.0], dtype=np.float32), np.array([4.0], dtype=np.float32)
        assert clip_grad_norm([a, b], 1.0) == pytest.approx(5.0)
        np.testing.assert_allclose(a.grad, [0.6, 0.0], rtol=1e-5)
        np.testing.assert_allclose(b.grad, [0.8], rtol=1e-5)

    def test_clip_disabled(self):
        a = Parameter(np.zeros(1), name="a")
        a.grad = np.array([10.0], dtype=np.float32)
        clip_grad_norm([a], 0.0)
        assert a.grad[0] == 10.0

    def test_learning_rate_schedules(self):
        assert learning_rate(TrainConfig(lr=0.01), 7) == 0.01
        cosine = TrainConfig(lr=0.01, max_epochs=10, lr_schedule="cosine")
        assert learning_rate(cosine, 0) == pytest.approx(0.01)
        assert learning_rate(cosine, 5) == pytest.approx(0.005)

    def test_make_batches_merges_singleton(self):
        batches = make_batches(np.arange(9), 4)
        assert [len(b) for b in batches] == [4, 5]
        assert [len(b) for b in make_batches(np.arange(8), 4)] == [4, 4]
        assert [len(b) for b in make_batches(np.arange(1), 4)] == [1]

    def test_history_file(self, tmp_path):
        path = tmp_path / "h.jsonl"
        path.write_text("lixo\n")
        history = History(path)
        assert path.read_text() == ""
        history.append(EpochRecord(1, 1.0, 0.5, 1.1, 0.4))
        history.append(EpochRecord(2, 0.9, 0.6, 1.0, 0.5))
        assert [r.epoch for r in read_history(path)] == [1, 2]


def _split(dataset):
    train = dataset.subset(np.flatnonzero(dataset.frames < 8))
    val = dataset.subset(np.flatnonzero(dataset.frames >= 8))
    return train, val


class TestFit:
    def test_history_and_counters(self, tmp_path):
        dataset = make_dataset()
        train, val = _split(dataset)
        model = BiLCNet(small_model_config(), seed=0)
        config = TrainConfig(batch_size=32, max_epochs=2, early_stop_patience=2)
        result = fit(model, train, val, config, history_path=tmp_path / "h.jsonl")
        assert len(result.history) == 2
        assert len(read_history(tmp_path / "h.jsonl")) == 2
        assert result.counters.backward_samples == 2 * len(train)
        assert result.counters.eval_samples == 2 * len(val)
        assert 1 <= result.best_epoch <= 2

    def test_deterministic_for_seed(self, tmp_path):
        dataset = make_dataset()
        train, val = _split(dataset)
        config = TrainConfig(batch_size=32, max_epochs=2, early_stop_patience=2, seed=7)
        fit(BiLCNet(small_model_config(), seed=1), train, val, config, tmp_path / "a.jsonl")
        fit(BiLCNet(small_model_config(), seed=1), train, val, config, tmp_path / "b.jsonl")
        assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()

    def test_early_stopping_keeps_best(self):
        dataset = make_dataset(separable=False)
        train, val = _split(dataset)
        model = BiLCNet(small_model_config(), seed=0)
        config = TrainConfig(batch_size=32, max_epochs=20, early_stop_patience=1, lr=1e-2)
        result = fit(model, train, val, config)
        assert len(result.history) <= result.best_epoch + 1
        accs = [r.val_acc for r in result.history.records]
        assert result.best_val_acc == max(accs)
        assert result.best_epoch == accs.index(max(accs)) + 1

    def test_learns_separable_data(self):
        dataset = make_dataset(frames_per_session=10)
        train, val = _split(dataset)
        model = BiLCNet(small_model_config(), seed=0)
        config = TrainConfig(batch_size=32, max_epochs=15, early_stop_patience=15, lr=1e-2)
        result = fit(model, train, val, config)
        assert result.best_val_acc > 0.5

    def test_empty_split(self):
        dataset = make_dataset(frames_per_session=1)
        with pytest.raises(EmptySplit):
            fit(BiLCNet(small_model_config(), seed=0), dataset, dataset.subset([]), TrainConfig())


class TestExperiments:
    def test_train_bilcnet_sets_normalization(self):
        dataset = make_dataset()
        outcome = train_bilcnet(dataset, small_run_config(epochs=1))
        train_rows = dataset.x[outcome.split.train].reshape(-1, dataset.D)
        np.testing.assert_allclose(outcome.model.norm.mean.data, train_rows.mean(axis=0), rtol=1e-5, atol=1e-6)
        assert len(outcome.fit.history) == 1

    def test_evaluate_on_checks_width(self):
        dataset = make_dataset()
        model = BiLCNet(small_model_config(input_dim=5), seed=0)
        with pytest.raises(SchemaMismatch):
            evaluate_on(model, dataset, np.arange(4))

    def test_normalization_ignores_test_rows(self):
        dataset = make_dataset()
        perturbed = make_dataset()
        first = train_bilcnet(dataset, small_run_config(epochs=1))
        perturbed.x[first.split.test] += 100.0
        second = train_bilcnet(perturbed, small_run_config(epochs=1))
        np.testing.assert_array_equal(first.stats.means, second.stats.means)
        np.testing.assert_array_equal(first.stats.sigmas, second.stats.sigmas)

    def test_compare_models(self, tmp_path):
        results = compare_models(make_dataset(), small_run_config(epochs=2), history_dir=tmp_path)
        assert set(results) == {'bilcnet', 'lstm', 'majority', 'margin_over_majority'}
        assert (tmp_path / "bilcnet_history.jsonl").exists()
        assert results['majority']['metrics']['overall']['accuracy'] == pytest.approx(0.25)


@pytest.mark.slow
def test_default_model_overfits_small_subset():
    """64 amostras, modelo padrão, 100% de acurácia de treino em até 200 épocas"""
    dataset = make_dataset(frames_per_session=2, T=10, D=61, seed=3, separable=False).subset(np.arange(64))
    model = BiLCNet(BiLCNetConfig(), seed=0)
    config = TrainConfig(batch_size=64, max_epochs=200, early_stop_patience=200, weight_decay=0.0)
    # validação = próprio treino
    result = fit(model, dataset, dataset, config)
    assert result.best_val_acc == 1.0
