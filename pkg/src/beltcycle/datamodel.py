"""Shared domain types for conveyor-belt duty-cycle monitoring.

All types are immutable value records; they can be shared freely between
threads. Timestamps are integer epoch minutes throughout (the sensing chain
emits one averaged record per minute); time tolerances are converted to
seconds only at the evaluation boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum


class DataFormatError(ValueError):
    """Raised when externally supplied data violates a format contract."""


class OperationMode(IntEnum):
    """Per-minute machine state.

    PAD never occurs in a ground-truth label series; it only fills unused
    slots of fixed-width transition encodings.
    """

    OFF = 0
    IDLE = 1
    OPERATIONAL = 2
    ACTIVE = 3
    PAD = 4

    @property
    def display_name(self) -> str:
        return self.name.capitalize()

    @classmethod
    def from_string(cls, text: str) -> "OperationMode":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise DataFormatError(f"unknown operation mode {text!r}") from None


#: Modes in which the belt is stationary.
STATIC_MODES = frozenset({OperationMode.OFF, OperationMode.IDLE})
#: Modes in which the belt is moving (with or without load).
MOVING_MODES = frozenset({OperationMode.OPERATIONAL, OperationMode.ACTIVE})
#: The four modes that can occur in a label series (PAD excluded).
REAL_MODES = (
    OperationMode.OFF,
    OperationMode.IDLE,
    OperationMode.OPERATIONAL,
    OperationMode.ACTIVE,
)


class CycleClass(IntEnum):
    NORMAL = 0
    ABNORMAL = 1

    @property
    def display_name(self) -> str:
        return self.name.capitalize()

    @classmethod
    def from_string(cls, text: str) -> "CycleClass":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise DataFormatError(f"unknown cycle class {text!r}") from None


@dataclass(frozen=True)
class SensorRecord:
    """One 1-minute averaged reading from the conveyor's three sensors.

    month_tag groups records into evaluation folds; it is stored explicitly
    so synthetic datasets can define arbitrary "months".
    """

    timestamp: int
    month_tag: str
    speed: float
    high_pressure: float
    low_pressure: float
    mode_label: OperationMode | None = None


@dataclass(frozen=True)
class CycleEvent:
    """A duty cycle, either annotated (reference) or detected (predicted).

    onset is the timestamp of the first moving minute, offset the timestamp
    of the last one, so a valid cycle spans at least two minutes.
    """

    onset: int
    offset: int
    cycle_class: CycleClass

    def __post_init__(self) -> None:
        if self.onset >= self.offset:
            raise ValueError(
                f"cycle onset must precede offset, got [{self.onset}, {self.offset}]"
            )

    @property
    def duration_minutes(self) -> int:
        return self.offset - self.onset


@dataclass(frozen=True)
class Violation:
    """One invariant violation found while validating a series."""

    index: int
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_series(records: list[SensorRecord]) -> ValidationReport:
    """Check a sensor series against its invariants.

    Violations are data, not faults: every problem is reported with the
    index of the offending record, and an empty report means the series
    is well formed. Checked invariants: non-negative speed and pressures,
    strictly increasing timestamps with 1-minute spacing (gaps permitted
    only where the month tag changes), and no PAD ground-truth labels.
    """
    violations: list[Violation] = []
    for i, rec in enumerate(records):
        if rec.speed < 0:
            violations.append(Violation(i, "negative speed"))
        if rec.high_pressure < 0:
            violations.append(Violation(i, "negative high pressure"))
        if rec.low_pressure < 0:
            violations.append(Violation(i, "negative low pressure"))
        if rec.mode_label is OperationMode.PAD:
            violations.append(Violation(i, "pad label in ground-truth series"))
        if i > 0:
            prev = records[i - 1]
            if rec.timestamp <= prev.timestamp:
                violations.append(Violation(i, "non-increasing timestamp"))
            elif rec.month_tag == prev.month_tag and rec.timestamp != prev.timestamp + 1:
                violations.append(Violation(i, "timestamp gap within month"))
    return ValidationReport(tuple(violations))
