"""CSV ingestion and serialization of sensor series and cycle annotations.

File formats (UTF-8, LF line endings, '.' decimal separator):

* ``sensors.csv`` with header
  ``timestamp_min,month,speed_rpm,high_pressure_bar,low_pressure_bar[,mode]``;
  the trailing ``mode`` column is optional and holds ground-truth operation
  mode names (empty cell = unlabeled row).
* ``events.csv`` with header ``onset_min,offset_min,class`` where class is
  ``normal`` or ``abnormal`` (case-insensitive).
* ``provenance.json`` describing where a dataset came from.

Floats are written with ``repr`` so that parse(write(d)) == d exactly.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from .datamodel import (
    CycleClass,
    CycleEvent,
    DataFormatError,
    OperationMode,
    SensorRecord,
    validate_series,
)

SENSOR_COLUMNS = ["timestamp_min", "month", "speed_rpm", "high_pressure_bar", "low_pressure_bar"]
MODE_COLUMN = "mode"
EVENT_COLUMNS = ["onset_min", "offset_min", "class"]

SENSORS_FILENAME = "sensors.csv"
EVENTS_FILENAME = "events.csv"
PROVENANCE_FILENAME = "provenance.json"


@dataclass
class Dataset:
    """A sensor series plus its reference duty-cycle annotations.

    provenance is a JSON-serializable dict, either
    ``{"kind": "synthetic", "config": {...}}`` or
    ``{"kind": "ingested", "sensors": path, "events": path}``.
    """

    records: list[SensorRecord]
    reference_cycles: list[CycleEvent]
    provenance: dict = field(default_factory=dict)

    @property
    def months(self) -> list[str]:
        seen: dict[str, None] = {}
        for rec in self.records:
            seen.setdefault(rec.month_tag, None)
        return list(seen)

    def records_by_month(self) -> dict[str, list[SensorRecord]]:
        out: dict[str, list[SensorRecord]] = {}
        for rec in self.records:
            out.setdefault(rec.month_tag, []).append(rec)
        return out

    def cycles_by_month(self) -> dict[str, list[CycleEvent]]:
        """Assign each reference cycle to the month containing its onset."""
        spans: dict[str, tuple[int, int]] = {}
        for rec in self.records:
            lo, hi = spans.get(rec.month_tag, (rec.timestamp, rec.timestamp))
            spans[rec.month_tag] = (min(lo, rec.timestamp), max(hi, rec.timestamp))
        out = {tag: [] for tag in spans}
        for ev in self.reference_cycles:
            for tag, (lo, hi) in spans.items():
                if lo <= ev.onset <= hi:
                    out[tag].append(ev)
                    break
        return out


def _parse_float(text: str, what: str, line: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise DataFormatError(f"line {line}: malformed {what} {text!r}") from None


def _parse_int(text: str, what: str, line: int) -> int:
    try:
        return int(text)
    except ValueError:
        raise DataFormatError(f"line {line}: malformed {what} {text!r}") from None


def iter_sensor_csv(path: str | Path) -> Iterator[SensorRecord]:
    """Yield records one at a time (row-level checks only; bounded memory)."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file, expected a header row") from None
        if header[: len(SENSOR_COLUMNS)] != SENSOR_COLUMNS or len(header) > len(SENSOR_COLUMNS) + 1:
            raise DataFormatError(f"{path}: unexpected header {header!r}")
        has_mode = len(header) == len(SENSOR_COLUMNS) + 1
        if has_mode and header[-1] != MODE_COLUMN:
            raise DataFormatError(f"{path}: unexpected header {header!r}")
        expected_len = len(header)
        for line, row in enumerate(reader, start=2):
            if len(row) != expected_len:
                raise DataFormatError(f"line {line}: expected {expected_len} fields, got {len(row)}")
            ts = _parse_int(row[0], "timestamp", line)
            speed = _parse_float(row[2], "speed", line)
            hp = _parse_float(row[3], "high pressure", line)
            lp = _parse_float(row[4], "low pressure", line)
            if speed < 0:
                raise DataFormatError(f"line {line}: negative speed {speed!r}")
            if hp < 0 or lp < 0:
                raise DataFormatError(f"line {line}: negative pressure")
            mode = None
            if has_mode and row[5] != "":
                mode = OperationMode.from_string(row[5])
                if mode is OperationMode.PAD:
                    raise DataFormatError(f"line {line}: pad is not a valid ground-truth mode")
            yield SensorRecord(ts, row[1], speed, hp, lp, mode)


def parse_sensor_csv(path: str | Path) -> list[SensorRecord]:
    """Parse a whole sensor file and enforce series-level invariants."""
    records = list(iter_sensor_csv(path))
    report = validate_series(records)
    if not report.ok:
        first = report.violations[0]
        raise DataFormatError(
            f"{path}: {len(report.violations)} invariant violation(s), "
            f"first at record {first.index}: {first.message}"
        )
    return records


def parse_events_csv(path: str | Path) -> list[CycleEvent]:
    path = Path(path)
    events: list[CycleEvent] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file, expected a header row") from None
        if header != EVENT_COLUMNS:
            raise DataFormatError(f"{path}: unexpected header {header!r}")
        for line, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise DataFormatError(f"line {line}: expected 3 fields, got {len(row)}")
            onset = _parse_int(row[0], "onset", line)
            offset = _parse_int(row[1], "offset", line)
            if onset >= offset:
                raise DataFormatError(f"line {line}: onset >= offset ({onset} >= {offset})")
            cls = CycleClass.from_string(row[2])
            event = CycleEvent(onset, offset, cls)
            if events and event.onset <= events[-1].offset:
                raise DataFormatError(f"line {line}: overlapping reference cycles")
            events.append(event)
    return events


def write_sensor_csv(records: list[SensorRecord], path: str | Path) -> None:
    path = Path(path)
    with_mode = any(rec.mode_label is not None for rec in records)
    header = SENSOR_COLUMNS + [MODE_COLUMN] if with_mode else SENSOR_COLUMNS
    lines = [",".join(header)]
    for rec in records:
        cells = [str(rec.timestamp), rec.month_tag, repr(rec.speed), repr(rec.high_pressure), repr(rec.low_pressure)]
        if with_mode:
            cells.append("" if rec.mode_label is None else rec.mode_label.display_name)
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_events_csv(events: list[CycleEvent], path: str | Path) -> None:
    path = Path(path)
    lines = [",".join(EVENT_COLUMNS)]
    for ev in events:
        lines.append(f"{ev.onset},{ev.offset},{ev.cycle_class.name.lower()}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_dataset(dataset: Dataset, directory: str | Path) -> dict[str, Path]:
    """Write sensors.csv, events.csv and provenance.json into a directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {
        "sensors": directory / SENSORS_FILENAME,
        "events": directory / EVENTS_FILENAME,
        "provenance": directory / PROVENANCE_FILENAME,
    }
    write_sensor_csv(dataset.records, paths["sensors"])
    write_events_csv(dataset.reference_cycles, paths["events"])
    paths["provenance"].write_text(
        json.dumps(dataset.provenance, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return paths


def read_dataset(directory: str | Path) -> Dataset:
    """Inverse of write_dataset; checks the cross-file invariants."""
    directory = Path(directory)
    records = parse_sensor_csv(directory / SENSORS_FILENAME)
    events = parse_events_csv(directory / EVENTS_FILENAME)
    prov_path = directory / PROVENANCE_FILENAME
    provenance = json.loads(prov_path.read_text(encoding="utf-8")) if prov_path.exists() else {}
    if records and events:
        lo = records[0].timestamp
        hi = records[-1].timestamp
        for ev in events:
            if ev.onset < lo or ev.offset > hi:
                raise DataFormatError(
                    f"reference cycle [{ev.onset}, {ev.offset}] outside record span [{lo}, {hi}]"
                )
    elif events:
        raise DataFormatError("events present but sensor series is empty")
    return Dataset(records=records, reference_cycles=events, provenance=provenance)
