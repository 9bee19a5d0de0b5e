"""Causal 12-feature extraction from the three sensed variables.

Feature order: speed, high pressure, low pressure, differential pressure,
followed by the trailing 3-sample moving average of those four, then the
trailing 5-sample moving average. Windows are partial at the start of a
series (mean over the samples available so far), so every input record
yields exactly one feature vector.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .datamodel import SensorRecord

N_FEATURES = 12
_WINDOWS = (3, 5)

FEATURE_NAMES = [
    "speed", "high_pressure", "low_pressure", "differential_pressure",
    "speed_ma3", "high_pressure_ma3", "low_pressure_ma3", "differential_pressure_ma3",
    "speed_ma5", "high_pressure_ma5", "low_pressure_ma5", "differential_pressure_ma5",
]


def base_features(record: SensorRecord) -> np.ndarray:
    """The four instantaneous features: speed, hp, lp, hp - lp.

    Differential pressure is passed through unclamped; a negative value
    simply means the return line reads above the drive line.
    """
    return np.array(
        [record.speed, record.high_pressure, record.low_pressure,
         record.high_pressure - record.low_pressure],
        dtype=np.float64,
    )


class FeatureState:
    """Ring buffer of recent base-feature vectors for streaming extraction.

    Single-owner mutable state: use one instance per series.
    """

    def __init__(self) -> None:
        self._buffer: deque[np.ndarray] = deque(maxlen=max(_WINDOWS))

    def step(self, record: SensorRecord) -> np.ndarray:
        """Consume one record, return its 12-element feature vector."""
        base = base_features(record)
        self._buffer.append(base)
        stacked = np.stack(self._buffer)
        parts = [base]
        for k in _WINDOWS:
            parts.append(stacked[-k:].mean(axis=0))
        return np.concatenate(parts)


def extract_series(records: list[SensorRecord]) -> np.ndarray:
    """Feature matrix (n, 12) for a whole series; equals folding `step`."""
    n = len(records)
    out = np.empty((n, N_FEATURES), dtype=np.float64)
    state = FeatureState()
    for i, rec in enumerate(records):
        out[i] = state.step(rec)
    return out
