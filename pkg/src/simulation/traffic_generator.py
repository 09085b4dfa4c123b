"""
Gerador de sessões sintéticas de canais físicos para BiLCNet
Simula os quatro padrões de comportamento sob os 11 níveis de ganho
"""

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
from joblib import Parallel, delayed
from loguru import logger

from errors import IoFailure, RangeViolation
from models.record import (
    GAIN_LEVELS, ChannelKind, Direction, GainLevel, PhysicalChannelRecord,
    TrafficLabel, mod_order_for_mcs, serialize_record,
)
from models.session import SessionHeader, serialize_header

MASK64 = 2 ** 64 - 1
MANIFEST_NAME = "manifest.json"
HARQ_FEEDBACK_DELAY = 2  # subquadros entre PDSCH e o ACK/NACK no PUCCH
MAX_PRB = 273


@dataclass(frozen=True)
class TrafficProfile:
    """Parâmetros estatísticos de um padrão de tráfego"""

    label: TrafficLabel
    ul_activity: float
    dl_activity: float
    tb_len_log_mean_ul: float
    tb_len_log_mean_dl: float
    tb_len_log_sd_ul: float
    tb_len_log_sd_dl: float
    prb_mean_ul: float
    prb_mean_dl: float
    burstiness: float = 0.0
    periodicity_ms: Optional[int] = None

    @property
    def persistence(self) -> float:
        """Correlação entre subquadros consecutivos da cadeia de Markov"""
        return self.burstiness / (1.0 + self.burstiness)

    def validate(self) -> List[str]:
        """Validar perfil e retornar lista de erros"""
        errors = []
        for name in ('ul_activity', 'dl_activity'):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                errors.append(f"{name} deve estar em [0, 1]")
        for name in ('tb_len_log_mean_ul', 'tb_len_log_mean_dl', 'tb_len_log_sd_ul', 'tb_len_log_sd_dl'):
            if not math.isfinite(getattr(self, name)):
                errors.append(f"{name} deve ser finito")
        if self.burstiness < 0:
            errors.append("burstiness deve ser >= 0")
        if self.periodicity_ms is not None and self.periodicity_ms <= 0:
            errors.append("periodicity_ms deve ser positivo")
        return errors


@dataclass(frozen=True)
class ChannelQualityModel:
    """Qualidade de canal em função do ganho de transmissão"""

    gain: GainLevel
    snr_mean: float
    snr_sd: float
    bler_base: float
    epre_mean: float

    @classmethod
    def for_gain(cls, gain: GainLevel) -> 'ChannelQualityModel':
        offset = gain.gain_db - GAIN_LEVELS[0]
        return cls(
            gain=gain,
            snr_mean=0.9 * offset + 3.0,
            snr_sd=2.0,
            bler_base=0.30 - 0.0125 * offset,
            epre_mean=-110.0 + offset,
        )

    def bler(self, snr: float) -> float:
        """Taxa de falha HARQ ajustada pela SNR instantânea"""
        adjusted = self.bler_base * 2.0 ** (-(snr - self.snr_mean) / self.snr_sd)
        return float(min(0.5, max(1e-3, adjusted)))


def create_default_profiles() -> Dict[TrafficLabel, TrafficProfile]:
    """Criar perfis padrão dos quatro comportamentos"""
    profiles = [
        # voz: pacotes pequenos a cada 20 ms nos dois sentidos
        TrafficProfile(
            label=TrafficLabel.CALL,
            ul_activity=0.03,
            dl_activity=0.03,
            tb_len_log_mean_ul=math.log(60),
            tb_len_log_mean_dl=math.log(60),
            tb_len_log_sd_ul=0.3,
            tb_len_log_sd_dl=0.3,
            prb_mean_ul=4.0,
            prb_mean_dl=4.0,
            burstiness=0.0,
            periodicity_ms=20,
        ),
        TrafficProfile(
            label=TrafficLabel.MEETING,
            ul_activity=0.45,
            dl_activity=0.55,
            tb_len_log_mean_ul=math.log(1500),
            tb_len_log_mean_dl=math.log(2500),
            tb_len_log_sd_ul=0.6,
            tb_len_log_sd_dl=0.6,
            prb_mean_ul=24.0,
            prb_mean_dl=30.0,
            burstiness=3.0,
        ),
        TrafficProfile(
            label=TrafficLabel.UPLOAD,
            ul_activity=0.90,
            dl_activity=0.08,
            tb_len_log_mean_ul=math.log(9000),
            tb_len_log_mean_dl=math.log(80),
            tb_len_log_sd_ul=0.4,
            tb_len_log_sd_dl=0.3,
            prb_mean_ul=90.0,
            prb_mean_dl=4.0,
            burstiness=6.0,
        ),
        TrafficProfile(
            label=TrafficLabel.DOWNLOAD,
            ul_activity=0.08,
            dl_activity=0.92,
            tb_len_log_mean_ul=math.log(80),
            tb_len_log_mean_dl=math.log(12000),
            tb_len_log_sd_ul=0.3,
            tb_len_log_sd_dl=0.4,
            prb_mean_ul=4.0,
            prb_mean_dl=100.0,
            burstiness=6.0,
        ),
    ]
    return {profile.label: profile for profile in profiles}


DEFAULT_PROFILES = create_default_profiles()


def derive_session_seed(root_seed: int, label: TrafficLabel, gain: GainLevel) -> int:
    """Semente da sessão: raiz XOR hash estável de (rótulo, ganho)"""
    digest = hashlib.blake2b(f"{label.wire_name}:{gain.gain_db}".encode('utf-8'), digest_size=8).digest()
    return (root_seed ^ int.from_bytes(digest, 'little')) & MASK64


def session_file_name(label: TrafficLabel, gain: GainLevel) -> str:
    return f"{label.wire_name}_{gain.gain_db}.jsonl"


class TrafficGenerator:
    """Gerador de uma sessão condicionada a rótulo e ganho"""

    def __init__(self, profile: TrafficProfile, quality: ChannelQualityModel, seed: int):
        errors = profile.validate()
        if errors:
            raise ValueError("; ".join(errors))
        self.profile = profile
        self.quality = quality
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self._harq_counter = {Direction.UL: 0, Direction.DL: 0}
        self._active = {Direction.UL: False, Direction.DL: False}
        self._pending_feedback: Dict[int, List[int]] = {}

    def _next_harq_id(self, direction: Direction) -> int:
        harq_id = self._harq_counter[direction] % 16
        self._harq_counter[direction] += 1
        return harq_id

    def _step_activity(self, direction: Direction, absolute_subframe: int) -> bool:
        """Cadeia de Markov de dois estados com probabilidade estacionária igual à atividade"""
        activity = self.profile.ul_activity if direction == Direction.UL else self.profile.dl_activity
        rho = self.profile.persistence
        if self._active[direction]:
            p = activity + (1.0 - activity) * rho
        else:
            p = activity * (1.0 - rho)
        active = bool(self.rng.random() < p)
        self._active[direction] = active

        period = self.profile.periodicity_ms
        if period:
            # UL e DL defasados de meio período
            phase = 0 if direction == Direction.UL else period // 2
            if absolute_subframe % period == phase:
                return True
        return active

    def _draw_snr(self) -> float:
        return float(self.rng.normal(self.quality.snr_mean, self.quality.snr_sd))

    def _draw_epre(self) -> float:
        return round(float(self.rng.normal(self.quality.epre_mean, 1.0)), 1)

    def _shared_record(self, chan: ChannelKind, frame: int, subframe: int) -> PhysicalChannelRecord:
        """Registro PUSCH/PDSCH com todos os campos de dados"""
        uplink = chan == ChannelKind.PUSCH
        p = self.profile
        snr = self._draw_snr()
        mcs = int(np.clip(round(1.3 * snr + self.rng.normal(0.0, 1.0)), 0, 28))
        mod_order = mod_order_for_mcs(mcs)

        prb_mean = p.prb_mean_ul if uplink else p.prb_mean_dl
        prb = int(np.clip(round(self.rng.normal(prb_mean, 0.15 * prb_mean + 0.5)), 1, MAX_PRB))

        log_mean = p.tb_len_log_mean_ul if uplink else p.tb_len_log_mean_dl
        log_sd = p.tb_len_log_sd_ul if uplink else p.tb_len_log_sd_dl
        tb_len = max(1, int(round(math.exp(self.rng.normal(log_mean, log_sd)) * mod_order / 4)))

        crc_ok = bool(self.rng.random() >= self.quality.bler(snr))

        if uplink:
            symb_start = 0
            symb_len = 13 if self.rng.random() < 0.1 else 14  # último símbolo reservado ao SRS
        else:
            symb_start = 2 if self.rng.random() < 0.3 else 1
            symb_len = 14 - symb_start

        direction = Direction.UL if uplink else Direction.DL
        return PhysicalChannelRecord(
            frame=frame,
            subframe=subframe,
            slot=int(self.rng.integers(0, 2)),
            chan=chan,
            dir=direction,
            mcs=mcs,
            mod_order=mod_order,
            harq_id=self._next_harq_id(direction),
            crc_ok=crc_ok,
            tb_len=tb_len,
            prb=prb,
            symb_start=symb_start,
            symb_len=symb_len,
            snr=round(snr, 1),
            epre=self._draw_epre(),
        )

    def _control_record(self, grant: PhysicalChannelRecord) -> PhysicalChannelRecord:
        """DCI no PDCCH que acompanha cada concessão"""
        snr = self._draw_snr()
        if snr < 2:
            level = 16
        elif snr < 6:
            level = 8
        elif snr < 10:
            level = 4
        elif snr < 15:
            level = 2
        else:
            level = 1
        cce_index = int(self.rng.integers(0, max(1, 32 // level))) * level
        return PhysicalChannelRecord(
            frame=grant.frame,
            subframe=grant.subframe,
            slot=grant.slot,
            chan=ChannelKind.PDCCH,
            dir=Direction.DL,
            cce_index=cce_index,
            aggregation_level=level,
            snr=round(snr, 1),
            epre=self._draw_epre(),
        )

    def _feedback_record(self, frame: int, subframe: int, harq_id: int) -> PhysicalChannelRecord:
        """ACK/NACK do HARQ de downlink no PUCCH"""
        return PhysicalChannelRecord(
            frame=frame,
            subframe=subframe,
            slot=1,
            chan=ChannelKind.PUCCH,
            dir=Direction.UL,
            pucch_format=1,
            harq_id=harq_id,
            prb=1,
            snr=round(self._draw_snr(), 1),
            epre=self._draw_epre(),
        )

    def subframe_records(self, frame: int, subframe: int) -> List[PhysicalChannelRecord]:
        """Registros de um subquadro, em ordem PDCCH, PDSCH, PUSCH, PUCCH"""
        absolute = frame * 10 + subframe
        grants = []

        dl_active = self._step_activity(Direction.DL, absolute)
        ul_active = self._step_activity(Direction.UL, absolute)

        if dl_active:
            pdsch = self._shared_record(ChannelKind.PDSCH, frame, subframe)
            grants.append(pdsch)
            self._pending_feedback.setdefault(absolute + HARQ_FEEDBACK_DELAY, []).append(pdsch.harq_id)
        if ul_active:
            grants.append(self._shared_record(ChannelKind.PUSCH, frame, subframe))

        control = [self._control_record(grant) for grant in grants]
        feedback = [
            self._feedback_record(frame, subframe, harq_id)
            for harq_id in self._pending_feedback.pop(absolute, [])
        ]
        return control + grants + feedback

    def generate(self, frames: int) -> str:
        """Gerar o conteúdo completo do arquivo de sessão"""
        if frames < 1:
            raise RangeViolation(f"Quantidade de quadros deve ser positiva: {frames}")

        header = SessionHeader(
            label=self.profile.label,
            gain=self.quality.gain,
            seed=self.seed,
            frames=frames,
        )
        lines = [serialize_header(header)]
        for frame in range(frames):
            for subframe in range(10):
                lines.extend(serialize_record(rec) for rec in self.subframe_records(frame, subframe))
        return "\n".join(lines) + "\n"


def generate_session(
    label: TrafficLabel,
    gain: GainLevel,
    frames: int,
    seed: int,
    profiles: Optional[Dict[TrafficLabel, TrafficProfile]] = None,
) -> str:
    """
    Gerar uma sessão sintética determinística

    Args:
        label: Comportamento do usuário
        gain: Nível de ganho
        frames: Quantidade de quadros de 10 ms
        seed: Semente de 64 bits da sessão

    Returns:
        Conteúdo do arquivo de sessão (cabeçalho + registros)
    """
    profile = (profiles or DEFAULT_PROFILES)[label]
    generator = TrafficGenerator(profile, ChannelQualityModel.for_gain(gain), seed & MASK64)
    return generator.generate(frames)


def _write_session(out_dir: Path, label: TrafficLabel, gain: GainLevel, frames: int, root_seed: int) -> Dict:
    content = generate_session(label, gain, frames, derive_session_seed(root_seed, label, gain))
    name = session_file_name(label, gain)
    (out_dir / name).write_text(content, encoding='utf-8')
    return {
        'file': name,
        'label': label.wire_name,
        'gain_db': gain.gain_db,
        'records': content.count("\n") - 1,
    }


def generate_dataset(
    out_dir: Union[str, Path],
    frames_per_session: int,
    seed: int,
    n_jobs: int = 1,
) -> Dict:
    """
    Gerar as 44 sessões (4 rótulos x 11 ganhos) e o manifesto

    Returns:
        Manifesto {"root_seed", "sessions": [...]} também gravado em manifest.json
    """
    if frames_per_session < 1:
        raise RangeViolation(f"Quantidade de quadros deve ser positiva: {frames_per_session}")
    out_dir = Path(out_dir)
    grid = [(label, GainLevel(g)) for label in TrafficLabel for g in GAIN_LEVELS]

    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        sessions = Parallel(n_jobs=n_jobs)(
            delayed(_write_session)(out_dir, label, gain, frames_per_session, seed)
            for label, gain in grid
        )
        manifest = {'root_seed': seed, 'sessions': sessions}
        (out_dir / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2) + "\n", encoding='utf-8')
    except OSError as e:
        raise IoFailure(f"Falha ao gravar o conjunto sintético em {out_dir}: {e}") from e

    total = sum(s['records'] for s in sessions)
    logger.info("{} sessões geradas em {} ({} registros)", len(sessions), out_dir, total)
    return manifest
