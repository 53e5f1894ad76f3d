"""First-order thermal room model used as ground truth and data generator.

Passive steps relax the inside temperature toward the outside temperature,
active steps relax it toward a fixed plant temperature; both are exact
solutions of Newton's law of cooling over one step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

from .data_model import (
    ModeSegment,
    OperationMode,
    Reading,
    SeriesFrame,
    SetpointBand,
)

DAY_STEPS = 96
STEP_MINUTES = 15


@dataclass(frozen=True)
class RoomPhysics:
    tau_passive: float = 1200.0  # minutes
    tau_active: float = 240.0  # minutes
    plant_temp: float = 28.0  # degC the heater drives toward
    noise_std: float = 0.05  # degC, observation noise of generated readings

    def __post_init__(self):
        if not self.tau_passive > 0:
            raise ValueError("tau_passive must be positive")
        if not self.tau_active > 0:
            raise ValueError("tau_active must be positive")
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")

    def noiseless(self) -> "RoomPhysics":
        return RoomPhysics(self.tau_passive, self.tau_active, self.plant_temp, 0.0)


def passive_step(
    t_in: float,
    t_out: float,
    physics: RoomPhysics,
    dt: float = STEP_MINUTES,
    rng: np.random.Generator | None = None,
) -> float:
    if dt <= 0:
        raise ValueError("dt must be positive")
    value = t_out + (t_in - t_out) * math.exp(-dt / physics.tau_passive)
    if rng is not None and physics.noise_std > 0:
        value += rng.normal(0.0, physics.noise_std)
    return value


def active_step(
    t_in: float,
    physics: RoomPhysics,
    dt: float = STEP_MINUTES,
    rng: np.random.Generator | None = None,
) -> float:
    if dt <= 0:
        raise ValueError("dt must be positive")
    value = physics.plant_temp + (t_in - physics.plant_temp) * math.exp(-dt / physics.tau_active)
    if rng is not None and physics.noise_std > 0:
        value += rng.normal(0.0, physics.noise_std)
    return value


# ------------------------------------------------------------------ controllers


class Controller(Protocol):
    def __call__(self, step: int, inside: float, occupied: bool, ac_prev: bool) -> bool: ...


def always_off(step: int, inside: float, occupied: bool, ac_prev: bool) -> bool:
    return False


@dataclass(frozen=True)
class BangBang:
    """Static thermostat: on below ``band.lower``, off at or above ``band.upper``."""

    band: SetpointBand

    def __call__(self, step, inside, occupied, ac_prev):
        if inside < self.band.lower:
            return True
        if inside >= self.band.upper:
            return False
        return ac_prev


@dataclass(frozen=True)
class OperatingHours:
    """Thermostat that runs only between ``on_step`` (inclusive) and ``off_step``.

    Mirrors a building whose plant is switched off overnight; used to
    synthesise telemetry with long passive-cooling nights and morning
    heating ramps.
    """

    band: SetpointBand
    on_step: int
    off_step: int

    def __call__(self, step, inside, occupied, ac_prev):
        if not self.on_step <= step < self.off_step:
            return False
        return BangBang(self.band)(step, inside, occupied, ac_prev)


@dataclass(frozen=True)
class FixedSchedule:
    on_steps: frozenset[int] = field(default_factory=frozenset)

    def __call__(self, step, inside, occupied, ac_prev):
        return step in self.on_steps


# ------------------------------------------------------------------- scenarios


@dataclass(frozen=True)
class DayScenario:
    physics: RoomPhysics
    outside_profile: tuple[float, ...]
    band: SetpointBand = SetpointBand()
    occupancy: tuple[bool, ...] | None = None
    seed: int = 0
    initial_inside: float | None = None
    start_timestamp: int = 0
    step_minutes: int = STEP_MINUTES

    def __post_init__(self):
        object.__setattr__(self, "outside_profile", tuple(float(v) for v in self.outside_profile))
        occ = self.occupancy
        if occ is None:
            occ = (False,) * len(self.outside_profile)
        object.__setattr__(self, "occupancy", tuple(bool(v) for v in occ))
        if len(self.occupancy) != len(self.outside_profile):
            raise ValueError("occupancy and outside_profile lengths differ")
        if len(self.outside_profile) == 0:
            raise ValueError("empty outside profile")


def mode_label(ac_on: bool, inside: float, outside: float) -> OperationMode:
    if ac_on:
        return OperationMode.ACTIVE_HEATING
    return OperationMode.PASSIVE_COOLING if inside >= outside else OperationMode.PASSIVE_HEATING


def generate_day(scenario: DayScenario, controller: Controller = always_off):
    """Simulate one day and return ``(frame, labels)``.

    The latent temperature evolves without noise; readings add Gaussian
    observation noise and the controller acts on the noisy reading, as a real
    thermostat would.  ``labels[k]`` is the mode during step ``k -> k+1``.
    """
    frame, labels, _ = _run_day(scenario, controller)
    return frame, labels


def _run_day(scenario: DayScenario, controller: Controller):
    physics = scenario.physics
    rng = np.random.default_rng(scenario.seed)
    dt = scenario.step_minutes
    outside = scenario.outside_profile
    latent = outside[0] if scenario.initial_inside is None else scenario.initial_inside
    ac = False
    readings = []
    labels = []
    for k, t_out in enumerate(outside):
        observed = latent + (rng.normal(0.0, physics.noise_std) if physics.noise_std > 0 else 0.0)
        ac = bool(controller(k, observed, scenario.occupancy[k], ac))
        readings.append(
            Reading(
                timestamp=scenario.start_timestamp + k * dt,
                inside_temp=observed,
                outside_temp=t_out,
                ac_on=ac,
                setpoint=scenario.band.lower,
            )
        )
        labels.append(mode_label(ac, latent, t_out))
        latent = active_step(latent, physics, dt) if ac else passive_step(latent, t_out, physics, dt)
    return SeriesFrame(tuple(readings), dt), labels, latent


def winter_outside_profile(
    rng: np.random.Generator,
    n: int = DAY_STEPS,
    mean: float = 10.0,
    amplitude: float = 4.0,
    jitter: float = 0.1,
    step_minutes: int = STEP_MINUTES,
) -> np.ndarray:
    """Diurnal outside temperature: minimum near 05:00, maximum near 15:00."""
    hours = np.arange(n) * step_minutes / 60.0
    profile = mean - amplitude * np.cos(2 * np.pi * (hours - 5.0) / 24.0)
    return profile + rng.normal(0.0, jitter, size=n)


def generate_telemetry(
    n_days: int,
    physics: RoomPhysics = RoomPhysics(),
    band: SetpointBand = SetpointBand(),
    seed: int = 0,
    start_timestamp: int = 0,
):
    """Multi-day telemetry with an overnight-off plant, as one continuous frame.

    Each day the plant switches on between 06:00 and 08:00 and off between
    17:00 and 19:00 (drawn per day).  Returns ``(frame, labels, day_params)``.
    """
    rng = np.random.default_rng(seed)
    readings: list[Reading] = []
    labels: list[OperationMode] = []
    day_params = []
    inside = 19.5
    for day in range(n_days):
        mean = rng.uniform(7.0, 13.0)
        outside = winter_outside_profile(rng, mean=mean)
        on_step = int(rng.integers(24, 33))
        off_step = int(rng.integers(68, 77))
        scenario = DayScenario(
            physics=physics,
            outside_profile=outside,
            band=band,
            seed=int(rng.integers(2**32)),
            initial_inside=inside,
            start_timestamp=start_timestamp + day * DAY_STEPS * STEP_MINUTES,
        )
        frame, day_labels, inside = _run_day(scenario, OperatingHours(band, on_step, off_step))
        readings.extend(frame.readings)
        labels.extend(day_labels)
        day_params.append({"day": day, "on_step": on_step, "off_step": off_step, "outside_mean": mean})
    return SeriesFrame(tuple(readings), STEP_MINUTES), labels, day_params


def _check_range(name: str, bounds: tuple[int, int]) -> tuple[int, int]:
    lo, hi = int(bounds[0]), int(bounds[1])
    if lo > hi:
        raise ValueError(f"{name} length range {bounds} is inverted")
    if lo < 2:
        raise ValueError(f"{name} segments need at least 2 points")
    return lo, hi


def generate_corpus(
    n_cooling: int = 68,
    n_heating: int = 112,
    cooling_len: tuple[int, int] = (21, 51),
    heating_len: tuple[int, int] = (6, 6),
    physics: RoomPhysics = RoomPhysics(),
    seed: int = 0,
    band: SetpointBand = SetpointBand(),
    arrival_margin: float = 0.25,
    step_minutes: int = STEP_MINUTES,
) -> list[ModeSegment]:
    """Synthetic per-mode corpus shaped like the lecture-theatre series.

    Cooling episodes start between 19.5 and 21.5 degC and decay toward a
    diurnal outside profile.  Heating episodes are cropped so that the last
    point is the first one at or above ``band.lower - arrival_margin``,
    the same truncation rule ``segment_modes`` applies.
    """
    if n_cooling < 0 or n_heating < 0:
        raise ValueError("segment counts must be non-negative")
    c_lo, c_hi = _check_range("cooling", cooling_len)
    h_lo, h_hi = _check_range("heating", heating_len)
    rng = np.random.default_rng(seed)
    dt = step_minutes
    decay_a = math.exp(-dt / physics.tau_active)
    target = band.lower - arrival_margin
    segments: list[ModeSegment] = []

    for i in range(n_cooling):
        length = int(rng.integers(c_lo, c_hi + 1))
        outside = _segment_outside(rng, length, step_minutes)
        latent = np.empty(length)
        latent[0] = rng.uniform(19.5, 21.5)
        for k in range(1, length):
            latent[k] = passive_step(latent[k - 1], outside[k - 1], physics, dt)
        segments.append(
            ModeSegment(
                OperationMode.PASSIVE_COOLING,
                _observe(rng, latent, physics.noise_std),
                outside,
                start_timestamp=i * 1440,
                step_minutes=dt,
            )
        )

    for i in range(n_heating):
        length = int(rng.integers(h_lo, h_hi + 1))
        outside = _segment_outside(rng, length, step_minutes)
        rise = (physics.plant_temp - target) * (1.0 - decay_a)
        t_end = target + rng.uniform(0.25, 0.75) * rise
        k = np.arange(length)
        # exact active trajectory whose final point is t_end
        latent = physics.plant_temp - (physics.plant_temp - t_end) * decay_a ** (k - (length - 1))
        segments.append(
            ModeSegment(
                OperationMode.ACTIVE_HEATING,
                _observe(rng, latent, physics.noise_std),
                outside,
                start_timestamp=(n_cooling + i) * 1440,
                step_minutes=dt,
            )
        )
    return segments


def _segment_outside(rng: np.random.Generator, length: int, step_minutes: int) -> np.ndarray:
    offset = int(rng.integers(0, DAY_STEPS))
    full = winter_outside_profile(rng, n=offset + length, mean=rng.uniform(7.0, 13.0), step_minutes=step_minutes)
    return full[offset:]


def _observe(rng: np.random.Generator, latent: np.ndarray, noise_std: float) -> np.ndarray:
    if noise_std > 0:
        return latent + rng.normal(0.0, noise_std, size=len(latent))
    return np.asarray(latent, dtype=float).copy()


def simulate_trajectory(
    start: float,
    outside: Sequence[float],
    physics: RoomPhysics,
    ac_on: Sequence[bool] | Callable[[int], bool],
    dt: float = STEP_MINUTES,
) -> np.ndarray:
    """Noiseless temperatures after each of ``len(outside)`` steps."""
    decide = ac_on if callable(ac_on) else (lambda k: bool(ac_on[k]))
    out = np.empty(len(outside))
    t = start
    for k, t_out in enumerate(outside):
        t = active_step(t, physics, dt) if decide(k) else passive_step(t, t_out, physics, dt)
        out[k] = t
    return out
