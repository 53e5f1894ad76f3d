"""Latest switch-on time for an unoccupied period.

The passive model forecasts the whole period with the HVAC off.  Candidate
switch points are then tried from the end of the period backwards; for each,
the active model forecasts from the passive temperature at that point to the
end of the period.  The first candidate that lands inside the setpoint band
is the latest (cheapest) one.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Sequence

import numpy as np

from .data_model import SetpointBand


@dataclass(frozen=True)
class UnoccupiedPeriod:
    start_index: int
    end_index: int  # exclusive; the first occupied step
    start_inside: float
    outside_path: tuple[float, ...]  # outside at start_index .. end_index
    band: SetpointBand = SetpointBand()

    def __post_init__(self):
        object.__setattr__(self, "outside_path", tuple(float(v) for v in self.outside_path))
        if not self.start_index < self.end_index:
            raise ValueError("start_index must precede end_index")
        if len(self.outside_path) != self.length + 1:
            raise ValueError(
                f"outside_path has {len(self.outside_path)} values, period needs {self.length + 1}"
            )

    @property
    def length(self) -> int:
        return self.end_index - self.start_index


@dataclass(frozen=True)
class SwitchPlan:
    start_index: int
    end_index: int
    start_inside: float
    switch_index: int
    passive_trajectory: tuple[float, ...]  # predicted temperature after each passive step
    active_trajectory: tuple[float, ...]  # predicted temperature after each step from switch_index
    min_passive_temp: float
    feasible: bool

    @property
    def predicted_end(self) -> float:
        if self.active_trajectory:
            return self.active_trajectory[-1]
        return self.passive_trajectory[-1] if self.passive_trajectory else self.start_inside

    def to_dict(self, day_start: int | None = None, step_minutes: int = 15) -> dict:
        out = {
            "start_index": self.start_index,
            "end_index": self.end_index,
            "switch_index": self.switch_index,
            "feasible": self.feasible,
            "dynamic_lower_setpoint": self.min_passive_temp,
            "predicted_end": self.predicted_end,
            "passive_trajectory": list(self.passive_trajectory),
            "active_trajectory": list(self.active_trajectory),
        }
        if day_start is not None:
            minutes = day_start + self.switch_index * step_minutes
            out["switch_time"] = datetime.fromtimestamp(minutes * 60, tz=timezone.utc).isoformat()
        return out


def predict_passive(model, period: UnoccupiedPeriod) -> np.ndarray:
    mode = getattr(model, "mode", None)
    if mode is not None and not mode.is_passive:
        raise ValueError(f"passive forecast requested from a {mode.value} model")
    pred = np.asarray(model.predict(period.start_inside, period.outside_path), dtype=float)
    if len(pred) != period.length:
        raise ValueError(f"passive model returned {len(pred)} values for a {period.length}-step period")
    return pred


def find_switch_on(passive_model, active_model, period: UnoccupiedPeriod) -> SwitchPlan:
    band = period.band
    h = period.length
    passive = predict_passive(passive_model, period)
    temps = np.concatenate([[period.start_inside], passive])  # temperature at start + k

    def plan(rel_switch: int, active: np.ndarray, feasible: bool) -> SwitchPlan:
        p = SwitchPlan(
            start_index=period.start_index,
            end_index=period.end_index,
            start_inside=period.start_inside,
            switch_index=period.start_index + rel_switch,
            passive_trajectory=tuple(float(v) for v in passive),
            active_trajectory=tuple(float(v) for v in active),
            min_passive_temp=0.0,
            feasible=feasible,
        )
        return _with_setpoint(p, band)

    if band.contains(temps[h]):
        return plan(h, np.empty(0), True)
    active = np.empty(0)
    for s in range(h - 1, -1, -1):
        active = np.asarray(active_model.predict(temps[s], period.outside_path[s:]), dtype=float)
        if band.contains(active[-1]):
            return plan(s, active, True)
    return plan(0, active, False)


def derive_dynamic_setpoint(plan: SwitchPlan, band: SetpointBand) -> float:
    """Lowest temperature the room is allowed to reach before the switch-on point."""
    if not plan.passive_trajectory:
        raise ValueError("plan has an empty passive trajectory")
    rel = plan.switch_index - plan.start_index
    before = (plan.start_inside,) + plan.passive_trajectory[:rel]
    return min(min(before), band.lower)


def _with_setpoint(plan: SwitchPlan, band: SetpointBand) -> SwitchPlan:
    return SwitchPlan(
        plan.start_index, plan.end_index, plan.start_inside, plan.switch_index,
        plan.passive_trajectory, plan.active_trajectory, derive_dynamic_setpoint(plan, band), plan.feasible,
    )


def plans_to_json(plans: Sequence[tuple[str, int, SwitchPlan]], step_minutes: int = 15) -> str:
    """``plans`` holds ``(day, day_start_minutes, plan)`` triples."""
    return json.dumps(
        [dict(day=day, **p.to_dict(start, step_minutes)) for day, start, p in plans], indent=1
    )
