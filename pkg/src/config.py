"""
Configuração do BiLCNet (pydantic)

Todos os campos têm padrão; chaves desconhecidas são rejeitadas.
"""

import json
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from errors import BiLCNetError


class ConfigError(BiLCNetError, ValueError):
    """Configuração inválida"""


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class BiLSTMConfig(_Section):
    input_dim: int = Field(61, ge=1)
    hidden_dim: int = Field(64, ge=1)
    num_layers: int = Field(2, ge=1)
    dropout: float = Field(0.1, ge=0.0, lt=1.0)


class ConformerConfig(_Section):
    model_dim: int = Field(128, ge=1)
    num_blocks: int = Field(2, ge=1)
    num_heads: int = Field(4, ge=1)
    ffn_expansion: int = Field(4, ge=1)
    conv_kernel: int = Field(3, ge=1)
    dropout: float = Field(0.1, ge=0.0, lt=1.0)
    block_order: Literal["conv_first", "mhsa_first"] = "conv_first"

    @model_validator(mode="after")
    def _check_shapes(self) -> 'ConformerConfig':
        if self.model_dim % self.num_heads:
            raise ValueError(f"model_dim {self.model_dim} não é divisível por num_heads {self.num_heads}")
        if self.conv_kernel % 2 == 0:
            raise ValueError(f"conv_kernel deve ser ímpar, recebido {self.conv_kernel}")
        return self


class BiLCNetConfig(_Section):
    bilstm: BiLSTMConfig = Field(default_factory=BiLSTMConfig)
    conformer: ConformerConfig = Field(default_factory=ConformerConfig)
    classifier_hidden: int = Field(128, ge=1)
    num_classes: int = 4
    dropout: float = Field(0.1, ge=0.0, lt=1.0)
    schema_version: int = 1
    window: int = Field(10, ge=1)

    @model_validator(mode="before")
    @classmethod
    def _derive_model_dim(cls, data: Any) -> Any:
        # model_dim acompanha 2H quando não informado
        if isinstance(data, dict):
            bilstm = data.get('bilstm') or {}
            conformer = data.get('conformer')
            hidden = bilstm.get('hidden_dim') if isinstance(bilstm, dict) else getattr(bilstm, 'hidden_dim', None)
            if hidden is not None and isinstance(conformer, dict) and 'model_dim' not in conformer:
                data = {**data, 'conformer': {**conformer, 'model_dim': 2 * hidden}}
            elif hidden is not None and conformer is None:
                data = {**data, 'conformer': {'model_dim': 2 * hidden}}
        return data

    @model_validator(mode="after")
    def _check_dims(self) -> 'BiLCNetConfig':
        if self.conformer.model_dim != 2 * self.bilstm.hidden_dim:
            raise ValueError(
                f"conformer.model_dim ({self.conformer.model_dim}) deve ser 2 x bilstm.hidden_dim "
                f"({2 * self.bilstm.hidden_dim})"
            )
        if self.num_classes != 4:
            raise ValueError("num_classes deve ser 4")
        return self

    @property
    def pool_dim(self) -> int:
        return 2 * self.bilstm.hidden_dim

    @property
    def input_dim(self) -> int:
        return self.bilstm.input_dim

    def with_input_dim(self, input_dim: int) -> 'BiLCNetConfig':
        return self.model_copy(update={'bilstm': self.bilstm.model_copy(update={'input_dim': input_dim})})

    @classmethod
    def tiny(cls, input_dim: int = 8) -> 'BiLCNetConfig':
        """Configuração mínima para verificação de gradientes"""
        return cls(
            bilstm=BiLSTMConfig(input_dim=input_dim, hidden_dim=4, num_layers=1, dropout=0.0),
            conformer=ConformerConfig(model_dim=8, num_blocks=1, num_heads=2, ffn_expansion=2, dropout=0.0),
            classifier_hidden=8,
            dropout=0.0,
        )


class TrainConfig(_Section):
    batch_size: int = Field(64, ge=1)
    max_epochs: int = Field(25, ge=1)
    early_stop_patience: int = Field(5, ge=1)
    lr: float = Field(1e-3, gt=0.0)
    betas: Tuple[float, float] = (0.9, 0.999)
    eps: float = Field(1e-8, gt=0.0)
    weight_decay: float = Field(1e-2, ge=0.0)
    seed: int = Field(0, ge=0)
    lr_schedule: Literal["none", "cosine"] = "none"
    grad_clip: float = Field(5.0, ge=0.0)

    @field_validator('betas')
    @classmethod
    def _check_betas(cls, value: Tuple[float, float]) -> Tuple[float, float]:
        if not all(0.0 <= b < 1.0 for b in value):
            raise ValueError("betas devem estar em [0, 1)")
        return value

    @model_validator(mode="after")
    def _check_patience(self) -> 'TrainConfig':
        if self.early_stop_patience > self.max_epochs:
            raise ValueError("early_stop_patience não pode exceder max_epochs")
        return self


class SchemaConfig(_Section):
    version: int = 1
    window: int = Field(10, ge=1)


class SplitConfig(_Section):
    train_frac: float = Field(0.8, gt=0.0, lt=1.0)


class GenerateConfig(_Section):
    frames_per_session: int = Field(200, ge=1)
    seed: int = Field(0, ge=0)


class PathsConfig(_Section):
    runs_root: str = "runs"


class RunConfig(_Section):
    """Configuração completa de uma execução"""

    model: BiLCNetConfig = Field(default_factory=BiLCNetConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    schema_: SchemaConfig = Field(default_factory=SchemaConfig, alias='schema')
    split: SplitConfig = Field(default_factory=SplitConfig)
    generate: GenerateConfig = Field(default_factory=GenerateConfig)
    paths: PathsConfig = Field(default_factory=PathsConfig)
    n_jobs: int = Field(1, ge=1)

    model_config = ConfigDict(extra="forbid", populate_by_name=True, protected_namespaces=())

    @classmethod
    def load(cls, path: Optional[Union[str, Path]] = None, overrides: Sequence[str] = ()) -> 'RunConfig':
        """
        Carregar JSON (opcional) e aplicar sobrescritas "chave.pontilhada=valor"

        Raises:
            ConfigError: arquivo ilegível, chave desconhecida ou valor inválido
        """
        data: Dict[str, Any] = {}
        if path is not None:
            try:
                data = json.loads(Path(path).read_text(encoding='utf-8'))
            except OSError as e:
                raise ConfigError(f"Não foi possível ler a configuração {path}: {e}") from e
            except json.JSONDecodeError as e:
                raise ConfigError(f"Configuração {path} não é JSON válido: {e}") from e
            if not isinstance(data, dict):
                raise ConfigError("Configuração deve ser um objeto JSON")

        for item in overrides:
            apply_override(data, item)

        try:
            return cls.model_validate(data)
        except ValidationError as e:
            raise ConfigError(f"Configuração inválida: {e}") from e

    def to_dict(self) -> Dict:
        return self.model_dump(mode='json', by_alias=True)

    def canonical_json(self) -> str:
        return canonical_json(self.to_dict())

    def create_run_dir(self, now: Optional[datetime] = None, command: Optional[str] = None) -> Path:
        """
        Diretório <runs_root>/<AAAAmmdd-HHMMSS>[-<comando>]-seed<seed> com config.json

        gen usa a semente do gerador; os demais comandos, a de treino.
        """
        stamp = (now or datetime.now()).strftime("%Y%m%d-%H%M%S")
        seed = self.generate.seed if command == 'gen' else self.train.seed
        name = f"{stamp}-{command}-seed{seed}" if command else f"{stamp}-seed{seed}"
        run_dir = Path(self.paths.runs_root) / name
        run_dir.mkdir(parents=True, exist_ok=True)
        (run_dir / "config.json").write_text(self.canonical_json() + "\n", encoding='utf-8')
        return run_dir


def canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, indent=2)


def apply_override(data: Dict[str, Any], item: str) -> None:
    """Aplicar "a.b.c=valor"; o valor é lido como JSON e, se falhar, como texto"""
    if '=' not in item:
        raise ConfigError(f"Sobrescrita deve ter a forma chave=valor: {item!r}")
    key, raw = item.split('=', 1)
    parts = [p for p in key.strip().split('.') if p]
    if not parts:
        raise ConfigError(f"Chave vazia em {item!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw

    node = data
    for part in parts[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ConfigError(f"{key}: {part} não é uma seção")
        node = child
    node[parts[-1]] = value
