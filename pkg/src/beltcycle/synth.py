"""Synthetic conveyor-belt simulator producing labeled sensor datasets.

The simulator walks a mode script per duty cycle. A normal cycle's moving
part is Operational-Active-Operational or Operational-Active (flanked by
Idle spacers either side); abnormal cycles draw their moving part from a
catalog of deviating scripts. Dwell times are lognormal per mode; sensor
values are Gaussian per mode, with a per-month additive offset and
multiplicative scale applied to the two pressures (seasonal/wear drift).
Generation is deterministic given the config seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .datamodel import MOVING_MODES, CycleClass, CycleEvent, OperationMode, SensorRecord
from .ingest import Dataset

#: Minutes of silence inserted between consecutive synthetic months.
MONTH_GAP_MINUTES = 1440

#: Moving-mode scripts of normal cycles (Idle flanks are implicit).
NORMAL_SCRIPTS = (
    (OperationMode.OPERATIONAL, OperationMode.ACTIVE, OperationMode.OPERATIONAL),
    (OperationMode.OPERATIONAL, OperationMode.ACTIVE),
)

#: Catalog of deviating moving-mode scripts. Each run-length-compressed
#: cycle sequence (with its two Idle flanks) stays within 15 entries, the
#: longest transition count seen in practice.
ABNORMAL_SCRIPTS = (
    (OperationMode.OPERATIONAL,),
    (OperationMode.ACTIVE,),
    (OperationMode.ACTIVE, OperationMode.OPERATIONAL),
    (OperationMode.OPERATIONAL, OperationMode.ACTIVE, OperationMode.OPERATIONAL,
     OperationMode.ACTIVE, OperationMode.OPERATIONAL),
    (OperationMode.OPERATIONAL, OperationMode.ACTIVE, OperationMode.OPERATIONAL,
     OperationMode.ACTIVE),
    (OperationMode.OPERATIONAL, OperationMode.ACTIVE, OperationMode.OPERATIONAL,
     OperationMode.ACTIVE, OperationMode.OPERATIONAL, OperationMode.ACTIVE,
     OperationMode.OPERATIONAL),
)


@dataclass(frozen=True)
class EmissionParams:
    """Gaussian mean/sigma of the three sensed variables in one mode."""

    speed_mean: float
    speed_sigma: float
    hp_mean: float
    hp_sigma: float
    lp_mean: float
    lp_sigma: float


@dataclass(frozen=True)
class DwellParams:
    """Lognormal dwell time: duration = round(median * exp(sigma * z)) minutes."""

    median_minutes: float
    sigma: float


@dataclass(frozen=True)
class MonthSpec:
    """One synthetic month: tag plus its pressure drift."""

    tag: str
    pressure_offset: float = 0.0
    pressure_scale: float = 1.0


@dataclass
class GeneratorConfig:
    seed: int = 0
    n_cycles: int = 100
    p_abnormal: float = 0.177
    months: list[MonthSpec] = field(default_factory=lambda: list(_DEFAULT_MONTHS))
    emissions: dict[OperationMode, EmissionParams] = field(
        default_factory=lambda: dict(_DEFAULT_EMISSIONS)
    )
    dwell: dict[OperationMode, DwellParams] = field(default_factory=lambda: dict(_DEFAULT_DWELL))
    min_normal_cycle_minutes: int = 14
    inter_cycle_idle_minutes: tuple[int, int] = (4, 30)
    p_off_between_cycles: float = 0.10

    def validate(self) -> None:
        if self.n_cycles <= 0:
            raise ValueError("n_cycles must be positive")
        if not 0.0 <= self.p_abnormal <= 1.0:
            raise ValueError("p_abnormal must lie in [0, 1]")
        if not 0.0 <= self.p_off_between_cycles <= 1.0:
            raise ValueError("p_off_between_cycles must lie in [0, 1]")
        if self.min_normal_cycle_minutes < 14:
            raise ValueError("min_normal_cycle_minutes must be >= 14")
        if not self.months:
            raise ValueError("at least one month is required")
        lo, hi = self.inter_cycle_idle_minutes
        if lo < 2 or hi < lo:
            raise ValueError("inter_cycle_idle_minutes must satisfy 2 <= lo <= hi")
        for mode in (OperationMode.OPERATIONAL, OperationMode.ACTIVE, OperationMode.OFF):
            if mode not in self.dwell:
                raise ValueError(f"missing dwell parameters for {mode.display_name}")
        for mode in (OperationMode.OFF, OperationMode.IDLE, OperationMode.OPERATIONAL,
                     OperationMode.ACTIVE):
            if mode not in self.emissions:
                raise ValueError(f"missing emission parameters for {mode.display_name}")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "n_cycles": self.n_cycles,
            "p_abnormal": self.p_abnormal,
            "months": [
                {"tag": m.tag, "pressure_offset": m.pressure_offset,
                 "pressure_scale": m.pressure_scale}
                for m in self.months
            ],
            "emissions": {
                mode.display_name: [e.speed_mean, e.speed_sigma, e.hp_mean, e.hp_sigma,
                                    e.lp_mean, e.lp_sigma]
                for mode, e in sorted(self.emissions.items())
            },
            "dwell": {
                mode.display_name: [d.median_minutes, d.sigma]
                for mode, d in sorted(self.dwell.items())
            },
            "min_normal_cycle_minutes": self.min_normal_cycle_minutes,
            "inter_cycle_idle_minutes": list(self.inter_cycle_idle_minutes),
            "p_off_between_cycles": self.p_off_between_cycles,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GeneratorConfig":
        return cls(
            seed=data["seed"],
            n_cycles=data["n_cycles"],
            p_abnormal=data["p_abnormal"],
            months=[MonthSpec(m["tag"], m["pressure_offset"], m["pressure_scale"])
                    for m in data["months"]],
            emissions={OperationMode.from_string(k): EmissionParams(*v)
                       for k, v in data["emissions"].items()},
            dwell={OperationMode.from_string(k): DwellParams(*v)
                   for k, v in data["dwell"].items()},
            min_normal_cycle_minutes=data["min_normal_cycle_minutes"],
            inter_cycle_idle_minutes=tuple(data["inter_cycle_idle_minutes"]),
            p_off_between_cycles=data["p_off_between_cycles"],
        )


# Defaults are chosen so the four modes are well separated (speed splits
# static from moving, high/differential pressure orders Idle < Operational
# < Active) and a shallow tree reaches near-perfect mode accuracy; they are
# conventions of this simulator, not measured plant values.
_DEFAULT_EMISSIONS = {
    OperationMode.OFF: EmissionParams(0.0, 0.05, 0.5, 0.2, 0.3, 0.1),
    OperationMode.IDLE: EmissionParams(0.3, 0.2, 32.0, 2.5, 6.0, 0.8),
    OperationMode.OPERATIONAL: EmissionParams(45.0, 1.0, 95.0, 4.0, 8.0, 1.0),
    OperationMode.ACTIVE: EmissionParams(45.0, 1.2, 165.0, 7.0, 9.5, 1.2),
}

_DEFAULT_DWELL = {
    OperationMode.OFF: DwellParams(45.0, 0.6),
    OperationMode.OPERATIONAL: DwellParams(4.0, 0.45),
    OperationMode.ACTIVE: DwellParams(14.0, 0.4),
}

_DEFAULT_MONTHS = (
    MonthSpec("2021-06", 0.0, 1.0),
    MonthSpec("2021-10", 3.0, 1.04),
    MonthSpec("2022-01", -4.0, 0.95),
    MonthSpec("2022-04", 2.0, 1.02),
)


def default_config(seed: int = 0, n_cycles: int = 100, **overrides) -> GeneratorConfig:
    """Four mildly drifting months; suitable for leave-one-month-out runs."""
    return GeneratorConfig(seed=seed, n_cycles=n_cycles, **overrides)


def drifted_year_config(seed: int = 0, cycles_per_month: int = 30) -> GeneratorConfig:
    """Twelve months with progressive pressure drift.

    The first four months drift mildly (training regime); the remaining
    eight drift strongly in both offset and scale, emulating a machine
    aging for a year after model training.
    """
    offsets = [0.0, 6.0, 12.0, 18.0, 30.0, 40.0, 50.0, 60.0, 65.0, 70.0, 75.0, 80.0]
    scales = [1.0, 1.03, 1.06, 1.09, 1.15, 1.20, 1.25, 1.30, 1.35, 1.40, 1.45, 1.50]
    months = [MonthSpec(f"y1-{i + 1:02d}", offsets[i], scales[i]) for i in range(12)]
    return GeneratorConfig(
        seed=seed,
        n_cycles=12 * cycles_per_month,
        p_abnormal=0.2,
        months=months,
    )


def noiseless_config(seed: int = 0, n_cycles: int = 20, **overrides) -> GeneratorConfig:
    """All emission sigmas zero and static speeds exactly zero (for oracles)."""
    emissions = {
        OperationMode.OFF: EmissionParams(0.0, 0.0, 0.0, 0.0, 0.0, 0.0),
        OperationMode.IDLE: EmissionParams(0.0, 0.0, 32.0, 0.0, 6.0, 0.0),
        OperationMode.OPERATIONAL: EmissionParams(45.0, 0.0, 95.0, 0.0, 8.0, 0.0),
        OperationMode.ACTIVE: EmissionParams(45.0, 0.0, 165.0, 0.0, 9.5, 0.0),
    }
    months = [MonthSpec(m.tag, 0.0, 1.0) for m in _DEFAULT_MONTHS]
    return GeneratorConfig(seed=seed, n_cycles=n_cycles, emissions=emissions,
                           months=months, **overrides)


def _sample_dwell(rng: np.random.Generator, params: DwellParams, minimum: int = 1) -> int:
    raw = params.median_minutes * math.exp(params.sigma * rng.standard_normal())
    return max(minimum, int(round(raw)))


class _Emitter:
    """Accumulates the label/sensor stream for one dataset."""

    def __init__(self, config: GeneratorConfig, rng: np.random.Generator):
        self.config = config
        self.rng = rng
        self.timestamp = 0
        self.records: list[SensorRecord] = []

    def emit(self, mode: OperationMode, minutes: int, month: MonthSpec) -> tuple[int, int]:
        """Append `minutes` records in `mode`; returns (first_ts, last_ts)."""
        e = self.config.emissions[mode]
        z = self.rng.standard_normal((minutes, 3))
        speed = np.maximum(e.speed_mean + e.speed_sigma * z[:, 0], 0.0)
        hp = e.hp_mean + e.hp_sigma * z[:, 1]
        lp = e.lp_mean + e.lp_sigma * z[:, 2]
        if mode is not OperationMode.OFF:
            # Drift models oil viscosity/wear; it only shows while pumps run.
            hp = hp * month.pressure_scale + month.pressure_offset
            lp = lp * month.pressure_scale + month.pressure_offset
        hp = np.maximum(hp, 0.0)
        lp = np.maximum(lp, 0.0)
        first = self.timestamp
        for i in range(minutes):
            self.records.append(
                SensorRecord(self.timestamp, month.tag, float(speed[i]), float(hp[i]),
                             float(lp[i]), mode)
            )
            self.timestamp += 1
        return first, self.timestamp - 1


def _emit_spacer(em: _Emitter, month: MonthSpec) -> None:
    """Idle filler between cycles, optionally with an Off block inside.

    The Off block is always sandwiched between Idle minutes so every cycle
    is flanked by Idle on both sides.
    """
    cfg = em.config
    lo, hi = cfg.inter_cycle_idle_minutes
    total_idle = int(em.rng.integers(lo, hi + 1))
    if em.rng.random() < cfg.p_off_between_cycles:
        head = max(1, total_idle // 2)
        tail = max(1, total_idle - head)
        off_minutes = _sample_dwell(em.rng, cfg.dwell[OperationMode.OFF])
        em.emit(OperationMode.IDLE, head, month)
        em.emit(OperationMode.OFF, off_minutes, month)
        em.emit(OperationMode.IDLE, tail, month)
    else:
        em.emit(OperationMode.IDLE, total_idle, month)


def _draw_cycle_script(
    em: _Emitter,
) -> tuple[CycleClass, tuple[OperationMode, ...], list[int]]:
    cfg = em.config
    rng = em.rng
    abnormal = rng.random() < cfg.p_abnormal
    if abnormal:
        script = ABNORMAL_SCRIPTS[int(rng.integers(len(ABNORMAL_SCRIPTS)))]
        minimum = 2 if len(script) == 1 else 1
        dwells = [_sample_dwell(rng, cfg.dwell[mode], minimum) for mode in script]
        return CycleClass.ABNORMAL, script, dwells
    script = NORMAL_SCRIPTS[int(rng.integers(len(NORMAL_SCRIPTS)))]
    dwells = [_sample_dwell(rng, cfg.dwell[mode]) for mode in script]
    deficit = cfg.min_normal_cycle_minutes - sum(dwells)
    if deficit > 0:
        # Stretch the loaded segment so normal cycles keep their minimum span.
        active_pos = script.index(OperationMode.ACTIVE)
        dwells[active_pos] += deficit
    return CycleClass.NORMAL, script, dwells


def generate_dataset(config: GeneratorConfig) -> Dataset:
    """Simulate the configured cycles and return a fully labeled dataset.

    Reference cycle onsets/offsets are the first/last minute spent in a
    moving mode. Deterministic: the same config (seed included) yields a
    bit-identical dataset.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    em = _Emitter(config, rng)
    events: list[CycleEvent] = []

    n_months = len(config.months)
    base, extra = divmod(config.n_cycles, n_months)
    cycles_per_month = [base + (1 if i < extra else 0) for i in range(n_months)]

    for mi, month in enumerate(config.months):
        if mi > 0:
            em.timestamp += MONTH_GAP_MINUTES
        _emit_spacer(em, month)
        for _ in range(cycles_per_month[mi]):
            cls, script, dwells = _draw_cycle_script(em)
            onset: int | None = None
            offset = 0
            for mode, minutes in zip(script, dwells):
                first, last = em.emit(mode, minutes, month)
                if onset is None:
                    onset = first
                offset = last
            assert onset is not None and all(m in MOVING_MODES for m in script)
            events.append(CycleEvent(onset, offset, cls))
            _emit_spacer(em, month)

    provenance = {"kind": "synthetic", "config": config.to_dict()}
    return Dataset(records=em.records, reference_cycles=events, provenance=provenance)
