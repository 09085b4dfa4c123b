"""
Protocolos de experimento: treino multi-cenário, avaliação, zero-shot e comparação
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from joblib import Parallel, delayed
from loguru import logger

from algorithms.evaluation import (
    MetricsReport, SplitIndices, ZeroShotFold, ZeroShotReport, confusion, fold_train_val, metrics,
    temporal_split, zero_shot_folds, zero_shot_report,
)
from algorithms.normalization import NormalizationStats, normalize_dataset
from algorithms.training import FitResult, evaluate_split, fit
from config import BiLCNetConfig, RunConfig
from errors import InvariantViolation, SchemaMismatch
from models.dataset import FrameDataset
from models.feature_schema import schema_for_version
from models.record import GAIN_LEVELS
from network.baselines import LSTMBaseline, MajorityBaseline
from network.bilcnet import BiLCNet
from network.module import Module


@dataclass
class TrainOutcome:
    model: Module
    fit: FitResult
    split: SplitIndices
    stats: NormalizationStats


def model_config_for(dataset: FrameDataset, run_config: RunConfig) -> BiLCNetConfig:
    """Configuração do modelo com D do dataset e o esquema da execução"""
    config = run_config.model.with_input_dim(dataset.D)
    return config.model_copy(update={
        'schema_version': run_config.schema_.version,
        'window': run_config.schema_.window,
    })


def _feature_names(dataset: FrameDataset, version: int) -> List[str]:
    try:
        names = schema_for_version(version).feature_names()
    except SchemaMismatch:
        return []
    return names if len(names) == dataset.D else []


def train_model(
    model: Module,
    dataset: FrameDataset,
    train_idx: np.ndarray,
    val_idx: np.ndarray,
    run_config: RunConfig,
    history_path: Optional[Union[str, Path]] = None,
) -> Tuple[FitResult, NormalizationStats]:
    """Normalizar com as linhas de treino, guardar as estatísticas no modelo e treinar"""
    train = dataset.subset(train_idx)
    val = dataset.subset(val_idx)
    stats, transform = normalize_dataset(
        train.x,
        feature_names=_feature_names(dataset, run_config.schema_.version),
        schema_version=run_config.schema_.version,
        train_frac=run_config.split.train_frac,
    )
    model.norm.set_stats(stats.means, stats.sigmas)
    result = fit(
        model,
        train.with_features(transform(train.x)),
        val.with_features(transform(val.x)),
        run_config.train,
        history_path=history_path,
    )
    return result, stats


def train_bilcnet(
    dataset: FrameDataset,
    run_config: RunConfig,
    history_path: Optional[Union[str, Path]] = None,
) -> TrainOutcome:
    """Divisão temporal por sessão e treino do BiLCNet"""
    split = temporal_split(dataset, run_config.split.train_frac)
    model = BiLCNet(model_config_for(dataset, run_config), seed=run_config.train.seed)
    logger.info("BiLCNet com {} parâmetros; treino {} / validação {} / teste {}",
                model.num_parameters(), len(split.train), len(split.val), len(split.test))
    result, stats = train_model(model, dataset, split.train, split.val, run_config, history_path)
    return TrainOutcome(model=model, fit=result, split=split, stats=stats)


def evaluate_on(model: Module, dataset: FrameDataset, indices: np.ndarray) -> MetricsReport:
    """Métricas nas amostras indicadas, normalizadas com as estatísticas do modelo"""
    if model.norm.mean.shape[0] != dataset.D:
        raise SchemaMismatch(f"Modelo espera D={model.norm.mean.shape[0]}, dataset tem D={dataset.D}")
    subset = dataset.subset(indices)
    _, _, predictions = evaluate_split(model, model.norm.apply(subset.x), subset.labels)
    return metrics(confusion(subset.labels, predictions))


def verify_folds(dataset: FrameDataset, folds: List[ZeroShotFold]) -> None:
    """Nenhuma amostra de treino com o ganho retirado; testes particionam o dataset"""
    if len(folds) != len(GAIN_LEVELS):
        raise InvariantViolation(f"{len(folds)} folds, esperado {len(GAIN_LEVELS)}")
    for fold in folds:
        if np.any(dataset.gains[fold.train] == fold.held_out_gain.index):
            raise InvariantViolation(f"Fold {fold.held_out_gain}: treino contém o ganho retirado")
    tests = np.concatenate([fold.test for fold in folds])
    if len(tests) != len(dataset) or len(np.unique(tests)) != len(dataset):
        raise InvariantViolation("Conjuntos de teste não particionam o dataset")


def fold_seed(root_seed: int, fold: ZeroShotFold) -> int:
    """Semente do fold derivada da raiz; independe da ordem de execução"""
    return int(np.random.SeedSequence([root_seed, fold.held_out_gain.gain_db]).generate_state(1)[0])


def run_zero_shot_fold(dataset: FrameDataset, fold: ZeroShotFold, run_config: RunConfig) -> float:
    """Treinar sem o ganho do fold e medir a acurácia nele"""
    seed = fold_seed(run_config.train.seed, fold)
    fold_config = run_config.model_copy(update={'train': run_config.train.model_copy(update={'seed': seed})})
    train_idx, val_idx = fold_train_val(dataset, fold, run_config.split.train_frac)

    model = BiLCNet(model_config_for(dataset, fold_config), seed=seed)
    train_model(model, dataset, train_idx, val_idx, fold_config)
    accuracy = evaluate_on(model, dataset, fold.test).accuracy
    logger.info("Zero-shot {}: acurácia {:.2%}", fold.held_out_gain, accuracy)
    return accuracy


def run_zero_shot(dataset: FrameDataset, run_config: RunConfig, n_jobs: Optional[int] = None) -> ZeroShotReport:
    """Os 11 folds leave-one-gain-out; execução paralela e serial dão o mesmo relatório"""
    folds = zero_shot_folds(dataset)
    verify_folds(dataset, folds)
    accuracies = Parallel(n_jobs=n_jobs or run_config.n_jobs)(
        delayed(run_zero_shot_fold)(dataset, fold, run_config) for fold in folds
    )
    return zero_shot_report({fold.held_out_gain.gain_db: acc for fold, acc in zip(folds, accuracies)})


def compare_models(
    dataset: FrameDataset,
    run_config: RunConfig,
    history_dir: Optional[Union[str, Path]] = None,
) -> Dict:
    """BiLCNet, LSTM e classe majoritária na mesma divisão temporal"""
    split = temporal_split(dataset, run_config.split.train_frac)
    history_dir = Path(history_dir) if history_dir is not None else None
    results: Dict[str, Dict] = {}

    for name, model in (
        ('bilcnet', BiLCNet(model_config_for(dataset, run_config), seed=run_config.train.seed)),
        ('lstm', LSTMBaseline(model_config_for(dataset, run_config), seed=run_config.train.seed)),
    ):
        history_path = history_dir / f"{name}_history.jsonl" if history_dir is not None else None
        fit_result, _ = train_model(model, dataset, split.train, split.val, run_config, history_path)
        report = evaluate_on(model, dataset, split.test)
        results[name] = {
            'metrics': report.to_dict(),
            'history': fit_result.history.to_dicts(),
            'parameters': model.num_parameters(),
        }
        logger.info("{}: {}", name, report.format_overall())

    majority = MajorityBaseline().fit(dataset.labels[split.train])
    test_labels = dataset.labels[split.test]
    majority_report = metrics(confusion(test_labels, majority.predict(len(test_labels))))
    results['majority'] = {'metrics': majority_report.to_dict(), 'label': majority.label}

    results['margin_over_majority'] = (
        results['bilcnet']['metrics']['overall']['accuracy'] - majority_report.accuracy
    )
    return results
