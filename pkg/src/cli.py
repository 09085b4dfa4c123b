"""
Linha de comando do BiLCNet

Subcomandos: gen, preprocess, train, eval, zeroshot, gradcheck, compare, plot.
Códigos de saída: 0 sucesso, 1 erro de execução/dados, 2 uso incorreto,
3 falha de verificação.
"""

import argparse
import json
from pathlib import Path
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from algorithms import experiments
from algorithms.evaluation import ZeroShotReport, read_report, temporal_split, write_report
from algorithms.normalization import normalize_dataset, read_stats, stats_path_for, write_stats
from algorithms.preprocessing import preprocess_directory
from algorithms.training import read_history
from config import RunConfig, TrainConfig
from errors import BiLCNetError, SchemaMismatch, SessionTooShort
from models.dataset import read_dataset, write_dataset
from models.feature_schema import DEFAULT_SCHEMA_VERSION, DEFAULT_WINDOW, schema_for_version
from network import gradcheck
from network.serialization import load_model, save_model
from reports.plots import create_history_figure, create_zero_shot_figure, write_figure
from simulation.traffic_generator import MANIFEST_NAME, generate_dataset
from utils.logging import add_file_sink, configure_logging

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_VERIFICATION = 3


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"inteiro inválido: {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"deve ser positivo: {value}")
    return value


def _fraction(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"número inválido: {text!r}")
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"deve estar em (0, 1): {value}")
    return value


def _load_run_config(args: argparse.Namespace, extra: Sequence[str] = ()) -> RunConfig:
    """Arquivo de configuração, --set e as flags dedicadas (--epochs, --seed, --runs-root)"""
    overrides = list(getattr(args, 'overrides', None) or [])
    overrides.extend(extra)
    if getattr(args, 'seed', None) is not None:
        overrides.append(f"train.seed={args.seed}")
    if getattr(args, 'runs_root', None) is not None:
        overrides.append(f"paths.runs_root={json.dumps(str(args.runs_root))}")
    config = RunConfig.load(getattr(args, 'config', None), overrides)

    epochs = getattr(args, 'epochs', None)
    if epochs is not None:
        train = TrainConfig.model_validate({
            **config.train.model_dump(),
            'max_epochs': epochs,
            'early_stop_patience': min(config.train.early_stop_patience, epochs),
        })
        config = config.model_copy(update={'train': train})
    return config


def _start_run(config: RunConfig, command: Optional[str] = None) -> Path:
    run_dir = config.create_run_dir(command=command)
    add_file_sink(run_dir / "run.log")
    logger.info("Execução em {}", run_dir)
    return run_dir


def _given(pairs: Sequence[Tuple[str, Any]]) -> List[str]:
    """Sobrescritas apenas para as flags informadas"""
    return [f"{key}={json.dumps(value)}" for key, value in pairs if value is not None]


def cmd_gen(args: argparse.Namespace) -> int:
    config = _load_run_config(args, _given([
        ('generate.frames_per_session', args.frames),
        ('generate.seed', args.data_seed),
    ]))
    _start_run(config, 'gen')
    generate_dataset(args.out, config.generate.frames_per_session, config.generate.seed, n_jobs=args.jobs)
    print(Path(args.out) / MANIFEST_NAME)
    return EXIT_OK


def cmd_preprocess(args: argparse.Namespace) -> int:
    config = _load_run_config(args, _given([
        ('schema.version', args.schema_version),
        ('schema.window', args.window),
        ('split.train_frac', args.train_frac),
    ]))
    _start_run(config, 'preprocess')
    schema = schema_for_version(config.schema_.version)
    dataset, _ = preprocess_directory(args.in_dir, schema, window=config.schema_.window, n_jobs=args.jobs)
    write_dataset(dataset, args.out)

    try:
        train_rows = dataset.x[temporal_split(dataset, config.split.train_frac).train]
        train_frac = config.split.train_frac
    except SessionTooShort as e:
        logger.warning("{}; estatísticas calculadas sobre todas as amostras", e)
        train_rows, train_frac = dataset.x, None
    stats, _ = normalize_dataset(train_rows, schema.feature_names(), schema.version, train_frac)
    write_stats(stats, stats_path_for(args.out))

    print(f"{len(dataset)} amostras, T={dataset.T}, D={dataset.D}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    config = _load_run_config(args)
    run_dir = _start_run(config)
    dataset = read_dataset(args.data)

    history_path = Path(args.history) if args.history else Path(args.out).with_suffix(".history.jsonl")
    outcome = experiments.train_bilcnet(dataset, config, history_path=history_path)
    save_model(outcome.model, args.out)
    (run_dir / "history.jsonl").write_text(history_path.read_text(encoding='utf-8'), encoding='utf-8')

    report = experiments.evaluate_on(outcome.model, dataset, outcome.split.val)
    logger.info("Melhor época {} de {}", outcome.fit.best_epoch, len(outcome.fit.history))
    print(f"validação: {report.format_overall()}")
    return EXIT_OK


def _check_sidecar(data_path: Path, schema_version: int) -> None:
    sidecar = stats_path_for(data_path)
    if not sidecar.exists():
        return
    stats = read_stats(sidecar)
    if stats.schema_version != schema_version:
        raise SchemaMismatch(
            f"Dataset com esquema v{stats.schema_version}, modelo treinado com v{schema_version}"
        )


def cmd_eval(args: argparse.Namespace) -> int:
    model, model_config = load_model(args.model)
    dataset = read_dataset(args.data)
    _check_sidecar(Path(args.data), model_config.schema_version)

    train_frac = RunConfig.load(args.config).split.train_frac if args.config else args.train_frac
    split = temporal_split(dataset, train_frac)
    report = experiments.evaluate_on(model, dataset, split.test)
    write_report(report.to_dict(), args.report)
    print(f"teste: {report.format_overall()}")
    return EXIT_OK


def cmd_zeroshot(args: argparse.Namespace) -> int:
    config = _load_run_config(args)
    run_dir = _start_run(config)
    dataset = read_dataset(args.data)

    report = experiments.run_zero_shot(dataset, config, n_jobs=args.jobs)
    write_report(report.to_dict(), args.report)
    write_report(report.to_dict(), run_dir / "zeroshot.json")
    for gain, accuracy in report.per_gain.items():
        print(f"{gain:>3} dB  {accuracy:.2%}")
    print(f"média   {report.mean:.2%}")
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    config = _load_run_config(args)
    run_dir = _start_run(config)
    dataset = read_dataset(args.data)

    results = experiments.compare_models(dataset, config, history_dir=run_dir)
    write_report(results, args.report)
    for name in ('bilcnet', 'lstm', 'majority'):
        print(f"{name:<9} acurácia {results[name]['metrics']['overall']['accuracy']:.2%}")
    print(f"margem sobre a classe majoritária: {results['margin_over_majority']:+.2%}")
    return EXIT_OK


def cmd_gradcheck(args: argparse.Namespace) -> int:
    reports = gradcheck.run_suite(seed=args.seed, tol=args.tol, dtype=np.float64)
    print(gradcheck.format_table(reports))
    failed = [r.name for r in reports if not r.passed]
    if failed:
        logger.error("Verificação de gradiente falhou: {}", ", ".join(failed))
        return EXIT_VERIFICATION
    return EXIT_OK


def cmd_plot(args: argparse.Namespace) -> int:
    if bool(args.history) == bool(args.zeroshot):
        logger.error("Informe --history ou --zeroshot (apenas um)")
        return EXIT_USAGE
    if args.zeroshot:
        fig = create_zero_shot_figure(ZeroShotReport.from_dict(read_report(args.zeroshot)))
    else:
        fig = create_history_figure({Path(p).stem: read_history(p) for p in args.history})
    write_figure(fig, args.out)
    print(args.out)
    return EXIT_OK


def _add_config_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--config', help="Configuração JSON")
    parser.add_argument('--set', dest='overrides', action='append', default=[], metavar='CHAVE=VALOR',
                        help="Sobrescrita pontilhada, ex.: train.lr=0.0005")
    parser.add_argument('--runs-root', help="Diretório das execuções")


def _add_run_options(parser: argparse.ArgumentParser) -> None:
    _add_config_options(parser)
    parser.add_argument('--epochs', type=_positive_int, help="Máximo de épocas")
    parser.add_argument('--seed', type=int, help="Semente raiz")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='bilcnet', description="Classificação de tráfego 5G a partir de canais físicos")
    parser.add_argument('--log-level', help="Nível de log (padrão: BILCNET_LOG_LEVEL ou INFO)")
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('gen', help="Gerar sessões sintéticas")
    p.add_argument('--out', required=True)
    p.add_argument('--frames', type=_positive_int, help="Quadros por sessão (padrão: 200)")
    p.add_argument('--seed', dest='data_seed', type=int, help="Semente raiz do gerador (padrão: 0)")
    p.add_argument('--jobs', type=int, default=1)
    _add_config_options(p)
    p.set_defaults(handler=cmd_gen)

    p = sub.add_parser('preprocess', help="Sessões -> dataset BLCD")
    p.add_argument('--in', dest='in_dir', required=True)
    p.add_argument('--out', required=True)
    p.add_argument('--window', type=_positive_int, help=f"Quadros da janela móvel (padrão: {DEFAULT_WINDOW})")
    p.add_argument('--schema-version', type=int, help=f"Versão do esquema (padrão: {DEFAULT_SCHEMA_VERSION})")
    p.add_argument('--train-frac', type=_fraction, help="Fração temporal de treino (padrão: 0.8)")
    p.add_argument('--jobs', type=int, default=1)
    _add_config_options(p)
    p.set_defaults(handler=cmd_preprocess)

    p = sub.add_parser('train', help="Treinar o BiLCNet")
    p.add_argument('--data', required=True)
    p.add_argument('--out', required=True)
    p.add_argument('--history', help="JSONL do histórico (padrão: <out>.history.jsonl)")
    _add_run_options(p)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser('eval', help="Avaliar no conjunto de teste")
    p.add_argument('--data', required=True)
    p.add_argument('--model', required=True)
    p.add_argument('--report', required=True)
    p.add_argument('--config')
    p.add_argument('--train-frac', type=_fraction, default=0.8)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser('zeroshot', help="Avaliação leave-one-gain-out")
    p.add_argument('--data', required=True)
    p.add_argument('--report', required=True)
    p.add_argument('--jobs', type=int)
    _add_run_options(p)
    p.set_defaults(handler=cmd_zeroshot)

    p = sub.add_parser('compare', help="BiLCNet contra LSTM e classe majoritária")
    p.add_argument('--data', required=True)
    p.add_argument('--report', required=True)
    _add_run_options(p)
    p.set_defaults(handler=cmd_compare)

    p = sub.add_parser('gradcheck', help="Verificação de gradientes por diferenças finitas")
    p.add_argument('--tol', type=float, default=1e-5)
    p.add_argument('--seed', type=int, default=0)
    p.set_defaults(handler=cmd_gradcheck)

    p = sub.add_parser('plot', help="Figuras HTML de histórico ou zero-shot")
    p.add_argument('--history', action='append', default=[])
    p.add_argument('--zeroshot')
    p.add_argument('--out', required=True)
    p.set_defaults(handler=cmd_plot)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    configure_logging(args.log_level)
    try:
        return args.handler(args)
    except (BiLCNetError, OSError) as e:
        logger.error("{}", e)
        return EXIT_RUNTIME
