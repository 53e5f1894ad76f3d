"""Day simulations under static and optimised setpoints, plus heating-time accounting.

The room always evolves by the noiseless physics oracle; forecasting models
only decide when to switch the plant on.  A model that forecasts badly
therefore shows up as comfort violations in the optimised trace.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data_model import SetpointBand
from .setpoint_optimizer import SwitchPlan, UnoccupiedPeriod, find_switch_on, predict_passive
from .thermal_oracle import DAY_STEPS, STEP_MINUTES, RoomPhysics, active_step, passive_step

log = logging.getLogger(__name__)

COMFORT_TOLERANCE = 0.5


@dataclass(frozen=True)
class ScheduleEntry:
    day: str
    intervals: tuple[tuple[int, int], ...] = ()  # (start minute, end minute) within the day

    def __post_init__(self):
        ivs = tuple((int(a), int(b)) for a, b in self.intervals)
        object.__setattr__(self, "intervals", ivs)
        prev_end = 0
        for a, b in ivs:
            if not 0 <= a < b <= 1440:
                raise ValueError(f"interval ({a}, {b}) is outside the day or empty")
            if a < prev_end:
                raise ValueError("intervals must be sorted and non-overlapping")
            prev_end = b

    def occupancy(self, n_steps: int = DAY_STEPS, step_minutes: int = STEP_MINUTES) -> np.ndarray:
        starts = np.arange(n_steps) * step_minutes
        occ = np.zeros(n_steps, dtype=bool)
        for a, b in self.intervals:
            occ |= (starts >= a) & (starts < b)
        return occ


def load_schedule(text: str) -> list[ScheduleEntry]:
    data = json.loads(text)
    return [ScheduleEntry(d["day"], tuple(tuple(iv) for iv in d.get("intervals", ()))) for d in data]


def dump_schedule(schedule: Sequence[ScheduleEntry]) -> str:
    return json.dumps([{"day": e.day, "intervals": [list(iv) for iv in e.intervals]} for e in schedule], indent=1)


def lecture_week() -> list[ScheduleEntry]:
    """Five-day teaching week with afternoon gaps on Wednesday and Thursday."""
    h = 60
    return [
        ScheduleEntry("Monday", ((9 * h, 17 * h),)),
        ScheduleEntry("Tuesday", ((8 * h, 18 * h),)),
        ScheduleEntry("Wednesday", ((8 * h, 11 * h), (15 * h, 19 * h))),
        ScheduleEntry("Thursday", ((9 * h, 12 * h), (16 * h, 20 * h))),
        ScheduleEntry("Friday", ((10 * h, 16 * h),)),
    ]


@dataclass(frozen=True)
class TraceRecord:
    timestamp: int
    inside: float
    ac_on: bool
    occupied: bool
    band_lower: float
    band_upper: float


@dataclass(frozen=True)
class SimulationTrace:
    records: tuple[TraceRecord, ...]
    step_minutes: int = STEP_MINUTES
    plans: tuple[SwitchPlan, ...] = ()

    @property
    def inside(self) -> np.ndarray:
        return np.array([r.inside for r in self.records])

    @property
    def ac_on(self) -> np.ndarray:
        return np.array([r.ac_on for r in self.records], dtype=bool)

    @property
    def occupied(self) -> np.ndarray:
        return np.array([r.occupied for r in self.records], dtype=bool)

    @property
    def timestamps(self) -> np.ndarray:
        return np.array([r.timestamp for r in self.records])

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["timestamp", "inside", "ac_on", "occupied", "band_lower", "band_upper"])
        for r in self.records:
            w.writerow([r.timestamp, f"{r.inside:.6f}", int(r.ac_on), int(r.occupied),
                        f"{r.band_lower:.6f}", f"{r.band_upper:.6f}"])
        return out.getvalue()


def heating_minutes(trace: SimulationTrace) -> int:
    return trace.step_minutes * int(np.count_nonzero(trace.ac_on))


def comfort_violations(trace: SimulationTrace, band: SetpointBand, tolerance: float = COMFORT_TOLERANCE) -> int:
    t = trace.inside
    bad = (t < band.lower - tolerance) | (t > band.upper + tolerance)
    return int(np.count_nonzero(bad & trace.occupied))


def reduction_percent(baseline_minutes: float, optimized_minutes: float) -> float | None:
    """Percentage cut in heating time; ``None`` when the baseline never heats."""
    if baseline_minutes <= 0:
        return None
    return (baseline_minutes - optimized_minutes) / baseline_minutes * 100.0


def _advance(t: float, ac: bool, t_out: float, physics: RoomPhysics, dt: int) -> float:
    return active_step(t, physics, dt) if ac else passive_step(t, t_out, physics, dt)


def simulate_static(
    physics: RoomPhysics,
    band: SetpointBand,
    outside: Sequence[float],
    initial_inside: float,
    occupancy: Sequence[bool] | None = None,
    start_timestamp: int = 0,
    step_minutes: int = STEP_MINUTES,
) -> SimulationTrace:
    """Bang-bang thermostat on ``band`` around the clock."""
    outside = np.asarray(outside, dtype=float)
    occ = np.zeros(len(outside), bool) if occupancy is None else np.asarray(occupancy, bool)
    t, ac = float(initial_inside), False
    records = []
    for k, t_out in enumerate(outside):
        if t < band.lower:
            ac = True
        elif t >= band.upper:
            ac = False
        records.append(TraceRecord(start_timestamp + k * step_minutes, t, ac, bool(occ[k]), band.lower, band.upper))
        t = _advance(t, ac, t_out, physics, step_minutes)
    return SimulationTrace(tuple(records), step_minutes)


def _windows(occ: np.ndarray) -> list[tuple[int, int]]:
    """Maximal unoccupied runs ``[a, b)``."""
    out, k, n = [], 0, len(occ)
    while k < n:
        if occ[k]:
            k += 1
            continue
        a = k
        while k < n and not occ[k]:
            k += 1
        out.append((a, k))
    return out


def simulate_optimized(
    physics: RoomPhysics,
    band: SetpointBand,
    schedule_day: ScheduleEntry | Sequence[bool],
    passive_model,
    active_model,
    outside: Sequence[float],
    initial_inside: float,
    start_timestamp: int = 0,
    step_minutes: int = STEP_MINUTES,
) -> SimulationTrace:
    """Bang-bang while occupied; plan-driven pre-heating before each occupied block.

    Unoccupied windows followed by occupancy keep the plant off until the
    plan's switch index, then heat (capped at ``band.upper``) until occupancy.
    The window after the last occupancy of the day stays off.  Infeasible
    plans heat from the start of their window.
    """
    outside = np.asarray(outside, dtype=float)
    n = len(outside)
    if isinstance(schedule_day, ScheduleEntry):
        occ = schedule_day.occupancy(n, step_minutes)
    else:
        occ = np.asarray(schedule_day, dtype=bool)
    if len(occ) != n:
        raise ValueError("occupancy and outside profile lengths differ")
    windows = {a: b for a, b in _windows(occ)}

    t, ac = float(initial_inside), False
    records, plans = [], []
    switch_at, lower, heat_window = None, band.lower, False
    for k in range(n):
        if k in windows:
            b = windows[k]
            heat_window = b < n
            if heat_window:
                period = UnoccupiedPeriod(k, b, t, outside[k : b + 1], band)
                plan = find_switch_on(passive_model, active_model, period)
                plans.append(plan)
                switch_at, lower = plan.switch_index, plan.min_passive_temp
            else:
                period = UnoccupiedPeriod(k, b, t, np.append(outside[k:b], outside[b - 1]), band)
                lower = min(float(np.min(predict_passive(passive_model, period))), band.lower, t)
                switch_at = None
        if occ[k]:
            if t < band.lower:
                ac = True
            elif t >= band.upper:
                ac = False
            lo = band.lower
        elif heat_window and k >= switch_at:
            ac = t < band.upper
            lo = band.lower
        else:
            ac = False
            lo = lower
        records.append(TraceRecord(start_timestamp + k * step_minutes, t, ac, bool(occ[k]), lo, band.upper))
        t = _advance(t, ac, outside[k], physics, step_minutes)
    return SimulationTrace(tuple(records), step_minutes, tuple(plans))


# ------------------------------------------------------------------- reporting


@dataclass
class DayEnergy:
    day: str
    baseline_minutes: float
    optimized_minutes: float
    reduction_percent: float | None
    comfort_violations: int = 0
    error: str | None = None


@dataclass
class EnergyReport:
    days: list[DayEnergy]
    traces: dict[str, tuple[SimulationTrace, SimulationTrace]] = field(default_factory=dict, repr=False)

    @classmethod
    def from_minutes(cls, days: Sequence[str], baseline: Sequence[float], optimized: Sequence[float]) -> "EnergyReport":
        return cls([DayEnergy(d, b, o, reduction_percent(b, o)) for d, b, o in zip(days, baseline, optimized)])

    def _ok(self) -> list[DayEnergy]:
        return [d for d in self.days if d.error is None]

    def _mean(self, attr: str) -> float:
        vals = [getattr(d, attr) for d in self._ok()]
        return float(np.mean(vals)) if vals else math.nan

    @property
    def average_baseline(self) -> float:
        return self._mean("baseline_minutes")

    @property
    def average_optimized(self) -> float:
        return self._mean("optimized_minutes")

    @property
    def average_reduction(self) -> float | None:
        """Reduction of the average minutes, as in the weekly Average row."""
        if math.isnan(self.average_baseline):
            return None
        return reduction_percent(self.average_baseline, self.average_optimized)

    @property
    def mean_daily_reduction(self) -> float | None:
        vals = [d.reduction_percent for d in self._ok() if d.reduction_percent is not None]
        return float(np.mean(vals)) if vals else None

    @property
    def total_violations(self) -> int:
        return sum(d.comfort_violations for d in self._ok())

    def to_csv(self) -> str:
        def pct(v):
            return "n/a" if v is None else f"{v:.2f}"

        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["day", "baseline_minutes", "optimized_minutes", "heating_reduction_percent", "comfort_violations"])
        for d in self.days:
            if d.error is not None:
                w.writerow([d.day, "error", "error", d.error, ""])
                continue
            w.writerow([d.day, f"{d.baseline_minutes:.1f}", f"{d.optimized_minutes:.1f}",
                        pct(d.reduction_percent), d.comfort_violations])
        w.writerow(["Average", f"{self.average_baseline:.1f}", f"{self.average_optimized:.1f}",
                    pct(self.average_reduction), self.total_violations])
        return out.getvalue()


def weekly_report(
    schedule: Sequence[ScheduleEntry],
    physics: RoomPhysics,
    band: SetpointBand,
    passive_model,
    active_model,
    outside_by_day: Sequence[Sequence[float]],
    initial_inside: float = 19.5,
    step_minutes: int = STEP_MINUTES,
) -> EnergyReport:
    """Paired static/optimised simulation of each schedule day."""
    if not schedule:
        raise ValueError("schedule has no days")
    if len(outside_by_day) < len(schedule):
        raise ValueError("need one outside profile per schedule day")
    physics = physics.noiseless()
    days, traces = [], {}
    for i, (entry, outside) in enumerate(zip(schedule, outside_by_day)):
        start = i * len(outside) * step_minutes
        try:
            occ = entry.occupancy(len(outside), step_minutes)
            base = simulate_static(physics, band, outside, initial_inside, occ, start, step_minutes)
            opt = simulate_optimized(physics, band, entry, passive_model, active_model, outside,
                                     initial_inside, start, step_minutes)
        except Exception as exc:  # one bad day must not sink the week
            log.warning("simulation of %s failed: %s", entry.day, exc)
            days.append(DayEnergy(entry.day, math.nan, math.nan, None, 0, f"{type(exc).__name__}: {exc}"))
            continue
        b, o = heating_minutes(base), heating_minutes(opt)
        days.append(DayEnergy(entry.day, b, o, reduction_percent(b, o), comfort_violations(opt, band)))
        traces[entry.day] = (base, opt)
    return EnergyReport(days, traces)
