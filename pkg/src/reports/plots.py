"""
Figuras de relatório (plotly): trajetórias de treino e acurácia zero-shot por ganho
"""

from pathlib import Path
from typing import Dict, List, Union

import pandas as pd
import plotly.graph_objects as go
from plotly.subplots import make_subplots

from algorithms.evaluation import ZeroShotReport
from algorithms.training import EpochRecord
from errors import EmptyInput, IoFailure


def history_frame(histories: Dict[str, List[EpochRecord]]) -> pd.DataFrame:
    """Históricos em formato longo: modelo, época e as quatro métricas"""
    rows = [
        {'model': name, **record.to_dict()}
        for name, records in histories.items()
        for record in records
    ]
    if not rows:
        raise EmptyInput("Nenhuma época para plotar")
    return pd.DataFrame(rows)


def create_history_figure(histories: Dict[str, List[EpochRecord]]) -> go.Figure:
    """Acurácia e perda de treino/validação por época"""
    df = history_frame(histories)
    fig = make_subplots(rows=1, cols=2, subplot_titles=("Acurácia", "Perda"))

    for name, group in df.groupby('model', sort=False):
        for split, dash in (('train', 'solid'), ('val', 'dash')):
            fig.add_trace(
                go.Scatter(x=group['epoch'], y=group[f'{split}_acc'], mode='lines+markers',
                           name=f"{name} {split}", line=dict(dash=dash), legendgroup=name),
                row=1, col=1,
            )
            fig.add_trace(
                go.Scatter(x=group['epoch'], y=group[f'{split}_loss'], mode='lines+markers',
                           name=f"{name} {split}", line=dict(dash=dash), legendgroup=name, showlegend=False),
                row=1, col=2,
            )

    fig.update_xaxes(title_text="Época")
    fig.update_layout(title="Trajetória de treino", template="plotly_white", height=450)
    return fig


def create_zero_shot_figure(report: ZeroShotReport) -> go.Figure:
    """Barras de acurácia por ganho retirado, eixo y de 0.5 a 1 e linha da média"""
    df = pd.DataFrame({
        'gain': [f"{gain} dB" for gain in report.per_gain],
        'accuracy': list(report.per_gain.values()),
    })
    fig = go.Figure(go.Bar(x=df['gain'], y=df['accuracy'], text=df['accuracy'].map(lambda v: f"{v:.1%}"),
                           textposition='outside', marker_color='steelblue'))
    fig.add_hline(y=report.mean, line_dash='dash', line_color='firebrick',
                  annotation_text=f"média {report.mean:.1%}")
    fig.update_layout(
        title="Acurácia zero-shot por ganho de transmissão",
        xaxis_title="Ganho retirado do treino",
        yaxis=dict(title="Acurácia", range=[0.5, 1.0]),
        template="plotly_white",
        height=450,
    )
    return fig


def write_figure(fig: go.Figure, path: Union[str, Path]) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.write_html(str(path), include_plotlyjs='cdn')
    except OSError as e:
        raise IoFailure(f"Falha ao gravar figura {path}: {e}") from e
