"""Duty-cycle detection and classification pipelines.

All three approaches share the front end: per-minute features feed a mode
classifier, predictions pass through a centered median filter, and the
filtered label stream is run-length compressed.

* Approach 1 detects cycles as maximal runs of moving modes in the
  compressed predictions and classifies each run group against the normal
  cycle grammar.
* Approach 2 detects cycle boundaries with a fixed speed threshold and
  applies the same grammar to the predicted modes inside each cycle (plus
  one flanking sample on each side).
* Approach 3 detects boundaries like Approach 2 but classifies the cycle
  with a second model fed a fixed-width encoding of the compressed mode
  sequence.

The normal grammar accepts exactly Idle-Operational-Active-Operational-
Idle and Idle-Operational-Active-Idle; every other flanked sequence is
abnormal. A cycle whose grammar input cannot be formed (missing flank,
encoder overflow) falls back to Abnormal: more structure than any normal
cycle is itself anomalous. Cycles still open when a series ends are
reported as pending, never emitted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .datamodel import (
    MOVING_MODES,
    CycleClass,
    CycleEvent,
    OperationMode,
    SensorRecord,
)
from .features import FeatureState, extract_series

DEFAULT_SPEED_THRESHOLD_RPM = 5.0
DEFAULT_MEDIAN_WINDOW = 3
DEFAULT_ENCODER_SLOTS = 20

#: The two compressed mode sequences (flanks included) of a normal cycle.
NORMAL_PATTERNS = (
    (OperationMode.IDLE, OperationMode.OPERATIONAL, OperationMode.ACTIVE,
     OperationMode.OPERATIONAL, OperationMode.IDLE),
    (OperationMode.IDLE, OperationMode.OPERATIONAL, OperationMode.ACTIVE,
     OperationMode.IDLE),
)

_MOVING_CODES = frozenset(int(m) for m in MOVING_MODES)


@dataclass
class PipelineConfig:
    approach: int
    mode_model: object
    duty_model: object | None = None
    speed_threshold: float = DEFAULT_SPEED_THRESHOLD_RPM
    median_window: int = DEFAULT_MEDIAN_WINDOW
    encoder_slots: int = DEFAULT_ENCODER_SLOTS

    def __post_init__(self) -> None:
        if self.approach not in (1, 2, 3):
            raise ValueError(f"approach must be 1, 2 or 3, got {self.approach}")
        if self.median_window % 2 != 1 or self.median_window < 1:
            raise ValueError("median_window must be a positive odd integer")
        if self.encoder_slots < 16:
            raise ValueError("encoder_slots must be at least 16")
        if self.approach == 3 and self.duty_model is None:
            raise ValueError("approach 3 requires a duty-cycle model")


@dataclass(frozen=True)
class Run:
    """One maximal run of equal labels; start/end are inclusive timestamps."""

    mode: OperationMode
    start: int
    end: int


@dataclass
class PipelineResult:
    events: list[CycleEvent]
    timestamps: np.ndarray
    raw_labels: np.ndarray
    filtered_labels: np.ndarray
    pending_onsets: list[int] = field(default_factory=list)
    dropped_short: int = 0


def median_filter(labels, window: int = DEFAULT_MEDIAN_WINDOW) -> list[OperationMode]:
    """Centered median over ordinal codes, edges padded by replication."""
    codes = np.asarray([int(x) for x in labels], dtype=np.int64)
    return [OperationMode(c) for c in _median_filter_codes(codes, window)]


def _median_filter_codes(codes: np.ndarray, window: int) -> np.ndarray:
    if window % 2 != 1 or window < 1:
        raise ValueError("window must be a positive odd integer")
    if len(codes) == 0 or window == 1:
        return codes.copy()
    half = window // 2
    padded = np.concatenate([np.repeat(codes[:1], half), codes, np.repeat(codes[-1:], half)])
    windows = np.lib.stride_tricks.sliding_window_view(padded, window)
    return np.sort(windows, axis=1)[:, half]


def compress_runs(labels, timestamps) -> list[Run]:
    """Merge adjacent equal labels, preserving run boundary timestamps."""
    if len(labels) == 0:
        raise ValueError("cannot compress an empty label sequence")
    if len(labels) != len(timestamps):
        raise ValueError("labels and timestamps must have equal length")
    runs: list[Run] = []
    start = timestamps[0]
    current = OperationMode(int(labels[0]))
    for i in range(1, len(labels)):
        mode = OperationMode(int(labels[i]))
        if mode != current:
            runs.append(Run(current, int(start), int(timestamps[i - 1])))
            current = mode
            start = timestamps[i]
    runs.append(Run(current, int(start), int(timestamps[-1])))
    return runs


def detect_cycles_threshold(
    records: list[SensorRecord], threshold: float = DEFAULT_SPEED_THRESHOLD_RPM
) -> list[tuple[int, int]]:
    """Candidate cycles: maximal runs of samples with speed above threshold.

    Returns inclusive (onset, offset) timestamp pairs; a single sample run
    yields onset == offset. Pressure values play no part.
    """
    speeds = np.array([r.speed for r in records])
    ts = np.array([r.timestamp for r in records])
    return [(int(ts[a]), int(ts[b])) for a, b in _threshold_index_runs(speeds, threshold)]


def _threshold_index_runs(speeds: np.ndarray, threshold: float) -> list[tuple[int, int]]:
    above = speeds > threshold
    out: list[tuple[int, int]] = []
    start = None
    for i, flag in enumerate(above):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            out.append((start, i - 1))
            start = None
    if start is not None:
        out.append((start, len(speeds) - 1))
    return out


def detect_cycles_modes(runs: list[Run]) -> list[tuple[int, int]]:
    """Cycles as maximal groups of consecutive moving-mode runs."""
    return [
        (runs[i0].start, runs[i1].end) for i0, i1 in _moving_group_indices(runs)
    ]


def _moving_group_indices(runs: list[Run]) -> list[tuple[int, int]]:
    groups: list[tuple[int, int]] = []
    start = None
    for i, run in enumerate(runs):
        if run.mode in MOVING_MODES:
            if start is None:
                start = i
        else:
            if start is not None:
                groups.append((start, i - 1))
                start = None
    if start is not None:
        groups.append((start, len(runs) - 1))
    return groups


def classify_cycle_pattern(sequence) -> CycleClass:
    """Grammar check on a compressed mode sequence flanked by static modes."""
    modes = tuple(OperationMode(int(m)) for m in sequence)
    if len(modes) < 2 or modes[0] in MOVING_MODES or modes[-1] in MOVING_MODES:
        raise ValueError(
            "cycle sequence must start and end with a static mode: "
            + "-".join(m.display_name for m in modes)
        )
    return CycleClass.NORMAL if modes in NORMAL_PATTERNS else CycleClass.ABNORMAL


def encode_transitions(sequence, slots: int = DEFAULT_ENCODER_SLOTS) -> np.ndarray:
    """Fixed-width ordinal encoding of a compressed sequence, Pad-filled."""
    modes = [int(m) for m in sequence]
    if len(modes) > slots:
        raise ValueError(f"{len(modes)} transitions exceed the {slots} encoder slots")
    out = np.full(slots, int(OperationMode.PAD), dtype=np.int64)
    out[: len(modes)] = modes
    return out


def _splice(
    left: int | None, interior: tuple[int, ...], right: int | None
) -> tuple[int, ...] | None:
    """Compressed cycle sequence with its flanking samples merged in.

    Returns None when a flank is missing (series boundary); a flank equal
    to the adjacent interior label merges with it, which then fails the
    static-flank requirement downstream, as it should.
    """
    if left is None or right is None:
        return None
    seq = [left]
    for code in interior:
        if code != seq[-1]:
            seq.append(code)
    if right != seq[-1]:
        seq.append(right)
    return tuple(seq)


def _compress_codes(codes) -> tuple[int, ...]:
    out: list[int] = []
    for c in codes:
        c = int(c)
        if not out or c != out[-1]:
            out.append(c)
    return tuple(out)


def _classify_spliced(config: PipelineConfig, seq: tuple[int, ...] | None) -> CycleClass:
    """Shared fallback behavior of approaches 2 and 3."""
    if seq is None:
        return CycleClass.ABNORMAL
    if config.approach == 2:
        try:
            return classify_cycle_pattern(seq)
        except ValueError:
            return CycleClass.ABNORMAL
    try:
        vec = encode_transitions(seq, config.encoder_slots)
    except ValueError:
        return CycleClass.ABNORMAL
    probs = config.duty_model.predict_proba(vec.astype(np.float64)[None, :])[0]
    return CycleClass(int(np.argmax(probs)))


def predict_mode_labels(model, records: list[SensorRecord]) -> np.ndarray:
    """Per-minute mode predictions (ordinal codes) for one series."""
    X = extract_series(records)
    return np.argmax(model.predict_proba(X), axis=1)


def split_contiguous(records: list[SensorRecord]) -> list[list[SensorRecord]]:
    """Split a series at timestamp gaps (month boundaries)."""
    segments: list[list[SensorRecord]] = []
    current: list[SensorRecord] = []
    for rec in records:
        if current and rec.timestamp != current[-1].timestamp + 1:
            segments.append(current)
            current = []
        current.append(rec)
    if current:
        segments.append(current)
    return segments


def _run_segment(config: PipelineConfig, records: list[SensorRecord]) -> PipelineResult:
    ts = np.array([r.timestamp for r in records], dtype=np.int64)
    raw = predict_mode_labels(config.mode_model, records)
    filt = _median_filter_codes(raw, config.median_window)
    result = PipelineResult(events=[], timestamps=ts, raw_labels=raw, filtered_labels=filt)

    if config.approach == 1:
        runs = compress_runs(filt, ts)
        for i0, i1 in _moving_group_indices(runs):
            if i1 == len(runs) - 1:
                result.pending_onsets.append(runs[i0].start)
                continue
            onset, offset = runs[i0].start, runs[i1].end
            if onset >= offset:
                result.dropped_short += 1
                continue
            if i0 == 0:
                cls = CycleClass.ABNORMAL
            else:
                seq = (
                    (int(runs[i0 - 1].mode),)
                    + tuple(int(r.mode) for r in runs[i0:i1 + 1])
                    + (int(runs[i1 + 1].mode),)
                )
                try:
                    cls = classify_cycle_pattern(seq)
                except ValueError:
                    cls = CycleClass.ABNORMAL
            result.events.append(CycleEvent(onset, offset, cls))
        return result

    speeds = np.array([r.speed for r in records])
    for a, b in _threshold_index_runs(speeds, config.speed_threshold):
        if b == len(records) - 1:
            result.pending_onsets.append(int(ts[a]))
            continue
        if a == b:
            result.dropped_short += 1
            continue
        left = int(filt[a - 1]) if a > 0 else None
        right = int(filt[b + 1])
        seq = _splice(left, _compress_codes(filt[a:b + 1]), right)
        cls = _classify_spliced(config, seq)
        result.events.append(CycleEvent(int(ts[a]), int(ts[b]), cls))
    return result


def run_approach(config: PipelineConfig, records: list[SensorRecord]) -> list[CycleEvent]:
    """Predicted duty-cycle events for a series (month gaps handled)."""
    return run_approach_detailed(config, records).events


def run_approach_detailed(
    config: PipelineConfig, records: list[SensorRecord]
) -> PipelineResult:
    partial = [_run_segment(config, seg) for seg in split_contiguous(records)]
    if not partial:
        return PipelineResult([], np.empty(0, np.int64), np.empty(0, np.int64),
                              np.empty(0, np.int64))
    merged = PipelineResult(
        events=[e for p in partial for e in p.events],
        timestamps=np.concatenate([p.timestamps for p in partial]),
        raw_labels=np.concatenate([p.raw_labels for p in partial]),
        filtered_labels=np.concatenate([p.filtered_labels for p in partial]),
        pending_onsets=[o for p in partial for o in p.pending_onsets],
        dropped_short=sum(p.dropped_short for p in partial),
    )
    return merged


def cycle_training_encodings(
    config: PipelineConfig, records: list[SensorRecord]
) -> tuple[np.ndarray, list[tuple[int, int]]]:
    """Encoder vectors for every closed threshold-detected cycle in a series.

    Used to build the duty-classifier training set from predicted mode
    labels. Cycles that overflow the encoder are skipped (at inference
    they fall back to Abnormal without consulting the model). Returns the
    matrix plus the (onset, offset) pair per row.
    """
    vectors: list[np.ndarray] = []
    spans: list[tuple[int, int]] = []
    for seg in split_contiguous(records):
        ts = np.array([r.timestamp for r in seg], dtype=np.int64)
        raw = predict_mode_labels(config.mode_model, seg)
        filt = _median_filter_codes(raw, config.median_window)
        speeds = np.array([r.speed for r in seg])
        for a, b in _threshold_index_runs(speeds, config.speed_threshold):
            if b == len(seg) - 1 or a == b:
                continue
            left = int(filt[a - 1]) if a > 0 else None
            right = int(filt[b + 1])
            seq = _splice(left, _compress_codes(filt[a:b + 1]), right)
            if seq is None or len(seq) > config.encoder_slots:
                continue
            vectors.append(encode_transitions(seq, config.encoder_slots))
            spans.append((int(ts[a]), int(ts[b])))
    matrix = np.stack(vectors) if vectors else np.empty((0, config.encoder_slots), np.int64)
    return matrix, spans
