"""Telemetry types, CSV ingestion, mode segmentation and temperature scaling.

Readings arrive as 15-minute rows of inside/outside temperature, an AC flag
and a setpoint.  The AC flag in real building data is unreliable, so mode
segments are recovered from the temperature curve itself: a heating episode
starts where the smoothed inside temperature climbs steeply while below the
lower setpoint and ends when it first gets close to that setpoint; passive
episodes run from the post-heating peak to the next heating onset.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

TEMP_MIN = -40.0
TEMP_MAX = 60.0
CSV_COLUMNS = ("timestamp", "inside_temp", "outside_temp", "ac_status", "setpoint")
_AC_TRUE = {"1", "on", "true"}
_AC_FALSE = {"0", "off", "false"}


class ParseError(ValueError):
    """Malformed CSV content; ``line`` is the 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class OrderingError(ValueError):
    """Timestamps that do not strictly increase."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class OperationMode(str, Enum):
    ACTIVE_HEATING = "active_heating"
    ACTIVE_COOLING = "active_cooling"
    PASSIVE_HEATING = "passive_heating"
    PASSIVE_COOLING = "passive_cooling"

    @property
    def is_passive(self) -> bool:
        return self in (OperationMode.PASSIVE_HEATING, OperationMode.PASSIVE_COOLING)


def _check_temp(value: float, name: str) -> None:
    if not math.isfinite(value):
        raise ValueError(f"{name} is not finite: {value!r}")
    if not TEMP_MIN <= value <= TEMP_MAX:
        raise ValueError(f"{name} {value} outside sanity bound [{TEMP_MIN}, {TEMP_MAX}]")


@dataclass(frozen=True)
class Reading:
    timestamp: int  # minutes since epoch
    inside_temp: float
    outside_temp: float
    ac_on: bool
    setpoint: float

    def __post_init__(self):
        _check_temp(self.inside_temp, "inside_temp")
        _check_temp(self.outside_temp, "outside_temp")
        _check_temp(self.setpoint, "setpoint")


@dataclass(frozen=True)
class SeriesFrame:
    readings: tuple[Reading, ...]
    step_minutes: int = 15

    def __post_init__(self):
        object.__setattr__(self, "readings", tuple(self.readings))
        if self.step_minutes <= 0:
            raise ValueError("step_minutes must be positive")
        for a, b in zip(self.readings, self.readings[1:]):
            if b.timestamp - a.timestamp != self.step_minutes:
                raise ValueError(
                    f"gap between {a.timestamp} and {b.timestamp} is not {self.step_minutes} min"
                )

    def __len__(self) -> int:
        return len(self.readings)

    @property
    def inside(self) -> np.ndarray:
        return np.array([r.inside_temp for r in self.readings], dtype=float)

    @property
    def outside(self) -> np.ndarray:
        return np.array([r.outside_temp for r in self.readings], dtype=float)

    @property
    def ac_on(self) -> np.ndarray:
        return np.array([r.ac_on for r in self.readings], dtype=bool)

    @property
    def timestamps(self) -> np.ndarray:
        return np.array([r.timestamp for r in self.readings], dtype=np.int64)


@dataclass(frozen=True)
class ModeSegment:
    mode: OperationMode
    inside: tuple[float, ...]
    outside: tuple[float, ...]
    start_timestamp: int = 0
    step_minutes: int = 15

    def __post_init__(self):
        object.__setattr__(self, "mode", OperationMode(self.mode))
        object.__setattr__(self, "inside", tuple(float(v) for v in self.inside))
        object.__setattr__(self, "outside", tuple(float(v) for v in self.outside))
        if len(self.inside) != len(self.outside):
            raise ValueError("inside and outside lengths differ")
        if len(self.inside) < 2:
            raise ValueError("a segment needs at least 2 points")
        if self.step_minutes <= 0:
            raise ValueError("step_minutes must be positive")
        if not all(math.isfinite(v) for v in self.inside + self.outside):
            raise ValueError("segment contains non-finite temperatures")
        if self.mode is OperationMode.ACTIVE_HEATING:
            running_max = np.maximum.accumulate(np.asarray(self.inside))
            if np.any(np.asarray(self.inside) < running_max - 0.5):
                raise ValueError("active heating segment dips more than 0.5 degC")
        if self.mode is OperationMode.PASSIVE_COOLING and self.inside[-1] < TEMP_MIN:
            raise ValueError("passive cooling segment ends below sanity bound")

    def __len__(self) -> int:
        return len(self.inside)

    @property
    def inside_array(self) -> np.ndarray:
        return np.asarray(self.inside, dtype=float)

    @property
    def outside_array(self) -> np.ndarray:
        return np.asarray(self.outside, dtype=float)


@dataclass(frozen=True)
class SetpointBand:
    lower: float = 19.0
    upper: float = 20.0

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError(f"band lower {self.lower} must be below upper {self.upper}")

    def contains(self, temp: float) -> bool:
        return self.lower <= temp <= self.upper


@dataclass(frozen=True)
class NormalizationScale:
    divisor: float = 20.0

    def __post_init__(self):
        if not (math.isfinite(self.divisor) and self.divisor > 0):
            raise ValueError(f"normalisation divisor must be positive, got {self.divisor}")


@dataclass(frozen=True)
class SegmentationConfig:
    min_segment_len: int = 4
    arrival_margin: float = 0.25  # heating ends at band.lower - arrival_margin
    slope_threshold: float = 0.2  # degC per step on the smoothed curve
    smooth_window: int = 3


# --------------------------------------------------------------------------- CSV


def _parse_timestamp(text: str) -> int:
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    seconds = dt.timestamp()
    if seconds % 60:
        raise ValueError(f"timestamp {text!r} is not on a whole minute")
    return int(seconds // 60)


def _parse_ac(text: str) -> bool:
    key = text.strip().lower()
    if key in _AC_TRUE:
        return True
    if key in _AC_FALSE:
        return False
    raise ValueError(f"unrecognised ac_status {text!r}")


def parse_readings(text: str, step_minutes: int = 15) -> list[SeriesFrame]:
    """Parse a telemetry CSV document into gap-free frames.

    Rows keep their order; a timestamp jump other than ``step_minutes`` starts
    a new frame.  Gaps are never interpolated.
    """
    lines = text.splitlines()
    if not any(line.strip() for line in lines):
        return []
    reader = csv.reader(io.StringIO(text))
    header = None
    header_line = 0
    for row in reader:
        header_line = reader.line_num
        if row and any(c.strip() for c in row):
            header = [c.strip().lower() for c in row]
            break
    if header is None:
        return []
    if tuple(header) != CSV_COLUMNS:
        raise ParseError(header_line, f"expected header {','.join(CSV_COLUMNS)}, got {','.join(header)}")

    frames: list[SeriesFrame] = []
    current: list[Reading] = []
    prev_ts: int | None = None
    for row in reader:
        line = reader.line_num
        if not row or not any(c.strip() for c in row):
            continue
        if len(row) != len(CSV_COLUMNS):
            raise ParseError(line, f"expected {len(CSV_COLUMNS)} fields, got {len(row)}")
        try:
            ts = _parse_timestamp(row[0])
            reading = Reading(
                timestamp=ts,
                inside_temp=float(row[1]),
                outside_temp=float(row[2]),
                ac_on=_parse_ac(row[3]),
                setpoint=float(row[4]),
            )
        except ValueError as exc:
            raise ParseError(line, str(exc)) from exc
        if ts % step_minutes:
            raise ParseError(line, f"timestamp {ts} is not a multiple of {step_minutes} minutes")
        if prev_ts is not None and ts <= prev_ts:
            raise OrderingError(line, f"timestamp {ts} does not follow {prev_ts}")
        if prev_ts is not None and ts - prev_ts != step_minutes:
            frames.append(SeriesFrame(tuple(current), step_minutes))
            current = []
        current.append(reading)
        prev_ts = ts
    if current:
        frames.append(SeriesFrame(tuple(current), step_minutes))
    return frames


def format_readings(frames: Iterable[SeriesFrame]) -> str:
    """Serialise frames back to CSV with integer epoch-minute timestamps."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for frame in frames:
        for r in frame.readings:
            writer.writerow(
                [r.timestamp, repr(r.inside_temp), repr(r.outside_temp), int(r.ac_on), repr(r.setpoint)]
            )
    return out.getvalue()


# ------------------------------------------------------------------ segmentation


def median_smooth(values: np.ndarray, window: int = 3) -> np.ndarray:
    """Centred running median; the ``window // 2`` edge points keep their raw values."""
    values = np.asarray(values, dtype=float)
    half = window // 2
    if window < 2 or len(values) < window:
        return values.copy()
    out = values.copy()
    windows = np.lib.stride_tricks.sliding_window_view(values, window)
    out[half : len(values) - half] = np.median(windows, axis=1)
    return out


def _heating_spans(inside: np.ndarray, smooth: np.ndarray, band: SetpointBand, cfg: SegmentationConfig):
    """Yield (onset, end, run_end) for each heating onset.

    ``end`` is None when the curve never arrives near the lower setpoint;
    ``run_end`` is the last index of the rising run, where a passive episode
    may start.
    """
    n = len(inside)
    slope = np.diff(smooth)
    target = band.lower - cfg.arrival_margin
    k = 0
    while k < n - 2:
        if slope[k] >= cfg.slope_threshold and slope[k + 1] >= cfg.slope_threshold and inside[k] < band.lower:
            arrived = np.nonzero(inside[k:] >= target)[0]
            end = k + int(arrived[0]) if arrived.size else None
            m = max(k + 1, end if end is not None else k + 1)
            while m < n - 1 and slope[m] > 0:
                m += 1
            yield k, end, m
            k = m
        else:
            k += 1


def segment_modes(
    frame: SeriesFrame,
    band: SetpointBand = SetpointBand(),
    cfg: SegmentationConfig = SegmentationConfig(),
) -> list[ModeSegment]:
    """Split a frame into active-heating and passive episodes.

    Consecutive segments may share their boundary reading (the reading at
    which the heater switches on closes the passive episode and opens the
    heating one); their step intervals never overlap.
    """
    n = len(frame)
    if n < cfg.min_segment_len:
        return []
    inside = frame.inside
    outside = frame.outside
    ts = frame.timestamps
    smooth = median_smooth(inside, cfg.smooth_window)

    spans = list(_heating_spans(inside, smooth, band, cfg))
    segments: list[tuple[int, int, OperationMode]] = []

    passive_from = 0
    for onset, end, run_end in spans:
        segments.extend(_passive_span(smooth, inside, outside, passive_from, onset, cfg))
        if end is not None and end - onset + 1 >= cfg.min_segment_len:
            segments.append((onset, end, OperationMode.ACTIVE_HEATING))
        passive_from = run_end
    segments.extend(_passive_span(smooth, inside, outside, passive_from, n - 1, cfg))

    segments.sort(key=lambda s: s[0])
    return [
        ModeSegment(
            mode=mode,
            inside=inside[a : b + 1],
            outside=outside[a : b + 1],
            start_timestamp=int(ts[a]),
            step_minutes=frame.step_minutes,
        )
        for a, b, mode in segments
    ]


def _passive_span(smooth, inside, outside, lo: int, hi: int, cfg: SegmentationConfig):
    if hi - lo + 1 < cfg.min_segment_len:
        return []
    start = lo + int(np.argmax(smooth[lo : hi + 1]))
    if hi - start + 1 < cfg.min_segment_len or inside[hi] >= inside[start]:
        return []
    gap = float(np.mean(inside[start : hi + 1] - outside[start : hi + 1]))
    mode = OperationMode.PASSIVE_COOLING if gap > 0 else OperationMode.PASSIVE_HEATING
    return [(start, hi, mode)]


# ----------------------------------------------------------------- normalisation


def normalize(segment: ModeSegment, scale: NormalizationScale) -> ModeSegment:
    d = scale.divisor
    return replace(segment, inside=[v / d for v in segment.inside], outside=[v / d for v in segment.outside])


def denormalize(segment: ModeSegment, scale: NormalizationScale) -> ModeSegment:
    d = scale.divisor
    return replace(segment, inside=[v * d for v in segment.inside], outside=[v * d for v in segment.outside])


# ------------------------------------------------------------------ JSON archive


def segment_to_dict(segment: ModeSegment) -> dict:
    return {
        "mode": segment.mode.value,
        "inside": list(segment.inside),
        "outside": list(segment.outside),
        "start_timestamp": segment.start_timestamp,
        "step_minutes": segment.step_minutes,
    }


def segment_from_dict(data: dict) -> ModeSegment:
    return ModeSegment(
        mode=OperationMode(data["mode"]),
        inside=data["inside"],
        outside=data["outside"],
        start_timestamp=int(data.get("start_timestamp", 0)),
        step_minutes=int(data.get("step_minutes", 15)),
    )


def dump_segments(segments: Sequence[ModeSegment]) -> str:
    return json.dumps([segment_to_dict(s) for s in segments], indent=1)


def load_segments(text: str) -> list[ModeSegment]:
    data = json.loads(text)
    if not isinstance(data, list):
        raise ValueError("segment archive must be a JSON array")
    return [segment_from_dict(d) for d in data]


def group_by_mode(segments: Iterable[ModeSegment]) -> dict[OperationMode, list[ModeSegment]]:
    groups: dict[OperationMode, list[ModeSegment]] = {}
    for seg in segments:
        groups.setdefault(seg.mode, []).append(seg)
    return groups
