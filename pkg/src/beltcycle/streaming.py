"""Streaming execution of the duty-cycle pipelines.

Consumes one record at a time with ring buffers only, so memory use is
independent of input length, and emits events as their cycles close. The
event stream is identical to the batch pipeline run on the same records;
the centered median filter just delays per-minute output by half a window.
A cycle still open when the stream ends (or at a timestamp gap) is
reported as pending, never emitted.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .datamodel import MOVING_MODES, CycleClass, CycleEvent, OperationMode, SensorRecord
from .features import FeatureState
from .pipeline import PipelineConfig, _classify_spliced, _splice, classify_cycle_pattern


@dataclass
class StreamStep:
    """Output of one push/finish call."""

    rows: list[tuple[int, int, int]] = field(default_factory=list)  # ts, raw, filtered
    events: list[CycleEvent] = field(default_factory=list)


class _ThresholdCycleTracker:
    """Approach 2/3 cycle state over the filtered label stream."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.cap = config.encoder_slots + 1
        self.prev_label: int | None = None
        self.inside = False
        self.onset = 0
        self.last_above = 0
        self.left: int | None = None
        self.interior: list[int] = []
        self.overflow = False
        self.count = 0
        self.dropped_short = 0

    def feed(self, ts: int, label: int, speed: float) -> list[CycleEvent]:
        events: list[CycleEvent] = []
        if speed > self.config.speed_threshold:
            if not self.inside:
                self.inside = True
                self.onset = ts
                self.left = self.prev_label
                self.interior = [label]
                self.overflow = False
                self.count = 1
            else:
                self.count += 1
                if label != self.interior[-1]:
                    if len(self.interior) >= self.cap:
                        self.overflow = True
                    else:
                        self.interior.append(label)
            self.last_above = ts
        elif self.inside:
            self.inside = False
            if self.count == 1:
                self.dropped_short += 1
            else:
                if self.overflow:
                    cls = CycleClass.ABNORMAL
                else:
                    seq = _splice(self.left, tuple(self.interior), label)
                    cls = _classify_spliced(self.config, seq)
                events.append(CycleEvent(self.onset, self.last_above, cls))
        self.prev_label = label
        return events

    def pending_onset(self) -> int | None:
        return self.onset if self.inside else None


class _ModeCycleTracker:
    """Approach 1 cycle state over the filtered label stream.

    A cycle (maximal group of moving runs) closes the moment the first
    static label after it arrives, which is when its right flank becomes
    known; that mirrors the batch run-length grouping exactly.
    """

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.cap = config.encoder_slots + 1
        self.run_mode: int | None = None
        self.run_start = 0
        self.prev_ts = 0
        self.last_static: int | None = None
        self.group_modes: list[int] = []
        self.group_onset = 0
        self.group_end = 0
        self.group_left: int | None = None
        self.overflow = False
        self.dropped_short = 0

    def _emit_cycle(self, right: int) -> list[CycleEvent]:
        events: list[CycleEvent] = []
        if self.group_onset >= self.group_end:
            self.dropped_short += 1
        elif self.group_left is None or self.overflow:
            events.append(CycleEvent(self.group_onset, self.group_end, CycleClass.ABNORMAL))
        else:
            seq = (self.group_left,) + tuple(self.group_modes) + (right,)
            try:
                cls = classify_cycle_pattern(seq)
            except ValueError:
                cls = CycleClass.ABNORMAL
            events.append(CycleEvent(self.group_onset, self.group_end, cls))
        self.group_modes = []
        return events

    def feed(self, ts: int, label: int, speed: float) -> list[CycleEvent]:
        events: list[CycleEvent] = []
        if self.run_mode is None:
            self.run_mode = label
            self.run_start = ts
        elif label != self.run_mode:
            closed_mode, closed_start, closed_end = self.run_mode, self.run_start, self.prev_ts
            if OperationMode(closed_mode) in MOVING_MODES:
                if not self.group_modes:
                    self.group_onset = closed_start
                    self.group_left = self.last_static
                    self.overflow = False
                if len(self.group_modes) >= self.cap:
                    self.overflow = True
                else:
                    self.group_modes.append(closed_mode)
                self.group_end = closed_end
                if OperationMode(label) not in MOVING_MODES:
                    events.extend(self._emit_cycle(label))
            else:
                self.last_static = closed_mode
            self.run_mode = label
            self.run_start = ts
        self.prev_ts = ts
        return events

    def pending_onset(self) -> int | None:
        """Onset of the cycle left open at stream end, if any."""
        if self.run_mode is not None and OperationMode(self.run_mode) in MOVING_MODES:
            return self.group_onset if self.group_modes else self.run_start
        return None


class StreamingPipeline:
    def __init__(self, config: PipelineConfig):
        self.config = config
        self.dropped_short = 0
        self.pending_onsets: list[int] = []
        self._prev_ts: int | None = None
        self._begin_segment()

    def _begin_segment(self) -> None:
        self._features = FeatureState()
        half = self.config.median_window // 2
        self._half = half
        self._filter: deque[int] = deque(maxlen=self.config.median_window)
        self._meta: deque[tuple[int, int, float]] = deque()  # ts, raw, speed
        if self.config.approach == 1:
            self._tracker = _ModeCycleTracker(self.config)
        else:
            self._tracker = _ThresholdCycleTracker(self.config)
        self._last_label: int | None = None

    def _emit_filtered(self, step: StreamStep) -> None:
        filt = int(np.sort(np.array(self._filter))[self._half])
        ts, raw, speed = self._meta.popleft()
        step.rows.append((ts, raw, filt))
        step.events.extend(self._tracker.feed(ts, filt, speed))

    def _finish_segment(self, step: StreamStep) -> None:
        if self._last_label is None:
            return
        for _ in range(self._half):
            self._filter.append(self._last_label)
            if len(self._filter) == self.config.median_window:
                self._emit_filtered(step)
        pending = self._tracker.pending_onset()
        if pending is not None:
            self.pending_onsets.append(pending)
        self.dropped_short += self._tracker.dropped_short

    def push(self, record: SensorRecord) -> StreamStep:
        step = StreamStep()
        if self._prev_ts is not None and record.timestamp != self._prev_ts + 1:
            self._finish_segment(step)
            self._begin_segment()
        self._prev_ts = record.timestamp

        vec = self._features.step(record)
        probs = self.config.mode_model.predict_proba(vec[None, :])[0]
        raw = int(np.argmax(probs))
        if self._last_label is None:
            for _ in range(self._half):
                self._filter.append(raw)
        self._last_label = raw
        self._filter.append(raw)
        self._meta.append((record.timestamp, raw, record.speed))
        if len(self._filter) == self.config.median_window:
            self._emit_filtered(step)
        return step

    def finish(self) -> StreamStep:
        """Flush the filter and report any still-open cycle as pending."""
        step = StreamStep()
        self._finish_segment(step)
        self._begin_segment()
        self._prev_ts = None
        return step
