import csv
import io
import math

import numpy as np
import pytest

from hvacopt.baselines import DecayModel
from hvacopt.data_model import SetpointBand
from hvacopt.hvac_simulator import (
    EnergyReport,
    ScheduleEntry,
    comfort_violations,
    dump_schedule,
    heating_minutes,
    lecture_week,
    load_schedule,
    reduction_percent,
    simulate_optimized,
    simulate_static,
    weekly_report,
)
from hvacopt.thermal_oracle import RoomPhysics, active_step, passive_step, winter_outside_profile

PH = RoomPhysics(noise_std=0.0)
BAND = SetpointBand(19.0, 20.0)
ORACLE = (DecayModel.passive_from_physics(PH), DecayModel.active_from_physics(PH))
WEDNESDAY = ScheduleEntry("Wednesday", ((8 * 60, 11 * 60), (15 * 60, 19 * 60)))


def outside(seed=0):
    return winter_outside_profile(np.random.default_rng(seed))


def test_schedule_validation_and_json():
    with pytest.raises(ValueError):
        ScheduleEntry("Monday", ((600, 500),))
    with pytest.raises(ValueError):
        ScheduleEntry("Monday", ((0, 600), (500, 700)))
    with pytest.raises(ValueError):
        ScheduleEntry("Monday", ((0, 1500),))
    week = lecture_week()
    assert len(week) == 5
    assert load_schedule(dump_schedule(week)) == week
    occ = ScheduleEntry("x", ((60, 90),)).occupancy()
    assert occ.sum() == 2 and occ[4] and occ[5] and not occ[6]


def test_static_warm_day_never_heats():
    trace = simulate_static(PH, BAND, [21.0] * 96, 19.5)
    assert heating_minutes(trace) == 0
    assert len(trace.records) == 96


def test_static_oscillates_inside_band():
    out = outside(1)
    trace = simulate_static(PH, BAND, out, 19.5)
    eps = max(active_step(BAND.lower, PH) - BAND.lower, max(BAND.upper - passive_step(BAND.upper, o, PH) for o in out))
    t = trace.inside[8:]
    assert t.min() >= BAND.lower - eps - 1e-12 and t.max() <= BAND.upper + eps + 1e-12


def test_static_minutes_match_independent_resimulation():
    out = outside(2)
    t, on, count = 17.0, False, 0
    for o in out:
        on = True if t < 19.0 else (False if t >= 20.0 else on)
        count += on
        t = 28 + (t - 28) * math.exp(-15 / PH.tau_active) if on else o + (t - o) * math.exp(-15 / PH.tau_passive)
    assert heating_minutes(simulate_static(PH, BAND, out, 17.0)) == 15 * count


def test_heating_minutes_arithmetic_and_recount():
    trace = simulate_static(PH, BAND, outside(3), 19.5)
    rows = list(csv.DictReader(io.StringIO(trace.to_csv())))
    assert heating_minutes(trace) == 15 * sum(int(r["ac_on"]) for r in rows)
    assert list(rows[0]) == ["timestamp", "inside", "ac_on", "occupied", "band_lower", "band_upper"]
    warm = simulate_static(PH, BAND, [25.0] * 96, 19.5)
    assert heating_minutes(warm) == 0


def test_twenty_on_steps_is_300_minutes():
    from hvacopt.hvac_simulator import SimulationTrace, TraceRecord

    recs = tuple(TraceRecord(15 * k, 19.0, k < 20, False, 19.0, 20.0) for k in range(96))
    assert heating_minutes(SimulationTrace(recs)) == 300


def test_reduction_percent_examples():
    assert round(reduction_percent(252, 202), 2) == 19.84
    assert round(reduction_percent(359, 283), 2) == 21.17
    assert reduction_percent(300, 300) == 0.0
    assert reduction_percent(300, 0) == 100.0
    assert reduction_percent(0, 0) is None


def test_never_occupied_day_never_heats():
    trace = simulate_optimized(PH, BAND, ScheduleEntry("Sunday"), *ORACLE, outside(4), 19.5)
    assert heating_minutes(trace) == 0


def test_midday_gap_saves_heating():
    out = outside(5)
    occ = WEDNESDAY.occupancy()
    base = simulate_static(PH, BAND, out, 19.5, occ)
    opt = simulate_optimized(PH, BAND, WEDNESDAY, *ORACLE, out, 19.5)
    assert heating_minutes(opt) < heating_minutes(base)
    np.testing.assert_array_equal(base.timestamps, opt.timestamps)


@pytest.mark.parametrize("seed", range(5))
def test_oracle_arrives_in_band_at_every_occupancy_start(seed):
    for entry in lecture_week():
        trace = simulate_optimized(PH, BAND, entry, *ORACLE, outside(seed), 19.5)
        occ = trace.occupied
        starts = [k for k in range(len(occ)) if occ[k] and (k == 0 or not occ[k - 1])]
        for k in starts:
            assert BAND.contains(trace.inside[k]), (entry.day, k, trace.inside[k])
        assert comfort_violations(trace, BAND) == 0


def test_evening_window_stays_off():
    trace = simulate_optimized(PH, BAND, WEDNESDAY, *ORACLE, outside(6), 19.5)
    assert not trace.ac_on[19 * 4 :].any()
    assert trace.records[-1].band_lower < BAND.lower  # relaxed setpoint recorded


def test_infeasible_window_heats_from_start():
    class Hopeless:
        def predict(self, start, path):
            return np.full(len(path) - 1, 0.0)

    entry = ScheduleEntry("Monday", ((10 * 60, 12 * 60),))
    trace = simulate_optimized(PH, BAND, entry, *ORACLE[:1], Hopeless(), outside(7), 15.0)
    assert trace.ac_on[0] and not trace.plans[0].feasible


def test_model_error_shows_up_as_violations():
    lazy_active = DecayModel(35.0, "fitted_constant", 28.0)  # believes heating is far faster than it is
    entry = ScheduleEntry("Monday", ((9 * 60, 17 * 60),))
    trace = simulate_optimized(PH, BAND, entry, ORACLE[0], lazy_active, outside(8), 19.5)
    assert comfort_violations(trace, BAND) > 0


def test_weekly_report_oracle_dominance():
    week = lecture_week()
    outs = [outside(s) for s in range(len(week))]
    rep = weekly_report(week, PH, BAND, *ORACLE, outs)
    assert len(rep.days) == 5 and rep.total_violations == 0
    for d in rep.days:
        assert d.optimized_minutes <= d.baseline_minutes
        assert d.reduction_percent is not None and d.reduction_percent > 0
    lines = rep.to_csv().splitlines()
    assert lines[0].startswith("day,baseline_minutes,optimized_minutes")
    assert lines[-1].startswith("Average,")


def test_single_day_report_averages_equal_the_day():
    rep = weekly_report([WEDNESDAY], PH, BAND, *ORACLE, [outside(9)])
    (d,) = rep.days
    assert rep.average_baseline == d.baseline_minutes
    assert rep.average_optimized == d.optimized_minutes
    assert rep.average_reduction == pytest.approx(d.reduction_percent)


def test_average_row_uses_mean_minutes():
    days = ["Mon", "Tue", "Wed", "Thu", "Fri"]
    rep = EnergyReport.from_minutes(days, [359, 434, 563, 652, 548], [283, 400, 450, 500, 470])
    assert rep.average_baseline == pytest.approx(511.2)
    assert rep.average_reduction == pytest.approx((511.2 - rep.average_optimized) / 511.2 * 100)


def test_failed_day_is_recorded():
    class Broken:
        def predict(self, start, path):
            raise RuntimeError("no forecast")

    rep = weekly_report(lecture_week()[:2], PH, BAND, Broken(), ORACLE[1], [outside(1), outside(2)])
    assert all(d.error and "no forecast" in d.error for d in rep.days)
    assert math.isnan(rep.average_baseline) and rep.average_reduction is None
    assert "error" in rep.to_csv()


def test_weekly_report_input_checks():
    with pytest.raises(ValueError):
        weekly_report([], PH, BAND, *ORACLE, [])
    with pytest.raises(ValueError):
        weekly_report(lecture_week(), PH, BAND, *ORACLE, [outside()])
