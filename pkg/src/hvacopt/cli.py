"""``hvacopt`` command line: the synthetic-data pipeline stage by stage.

Artifacts live under ``<out_dir>/{data,models,reports}``.  Stdout carries one
JSON summary line per stage; logs go to stderr.  Exit codes: 0 ok, 2 usage,
3 missing input file, 4 invalid data or config.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import persistence
from .baselines import (
    AsymptoteMode,
    DecayModel,
    FfnnCandidate,
    PersistenceModel,
    fit_decay,
    fit_mlr,
    grid_search_cv,
)
from .data_model import (
    OperationMode,
    ParseError,
    OrderingError,
    SegmentationConfig,
    dump_segments,
    format_readings,
    group_by_mode,
    load_segments,
    parse_readings,
    segment_modes,
)
from .evaluation import evaluate_models, significance, split_segments
from .hvac_simulator import dump_schedule, lecture_week, load_schedule, simulate_optimized, simulate_static, weekly_report
from .rnn.model import NetworkConfig
from .rnn.training import best_trial, search_hyperparameters, train_global
from .setpoint_optimizer import plans_to_json
from .thermal_oracle import DAY_STEPS, STEP_MINUTES, generate_corpus, generate_telemetry, winter_outside_profile

log = logging.getLogger("hvacopt")

EXIT_USAGE, EXIT_IO, EXIT_DATA = 2, 3, 4
STAGES = ("generate", "ingest", "segment", "tune", "train", "evaluate", "optimize", "simulate", "report")
MODEL_KINDS = ("persistence", "mlr", "ffnn", "decay", "rnn")
# modes the winter schedule needs: the room cools with the plant off and heats with it on
PASSIVE_MODE, ACTIVE_MODE = OperationMode.PASSIVE_COOLING, OperationMode.ACTIVE_HEATING


class MissingInput(Exception):
    def __init__(self, path: Path, hint: str = ""):
        self.path = path
        super().__init__(f"missing file {path}" + (f" ({hint})" if hint else ""))


class Workspace:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.data = self.root / "data"
        self.models = self.root / "models"
        self.reports = self.root / "reports"

    def model_path(self, kind: str, mode: OperationMode) -> Path:
        return self.models / f"{kind}_{mode.value}.json"

    def require(self, path: Path, hint: str = "") -> Path:
        if not path.is_file():
            raise MissingInput(path, hint)
        return path


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _json(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


# ----------------------------------------------------------------------- stages


def stage_generate(cfg, ws, args):
    g = cfg.generate
    frame, _, day_params = generate_telemetry(g.telemetry_days, cfg.physics, cfg.band, cfg.seeds.data)
    corpus = generate_corpus(g.n_cooling, g.n_heating, g.cooling_len, g.heating_len, cfg.physics,
                             cfg.seeds.data, cfg.band)
    write_atomic(ws.data / "telemetry.csv", format_readings([frame]))
    write_atomic(ws.data / "corpus.json", dump_segments(corpus))
    write_atomic(ws.data / "telemetry_days.json", _json(day_params))
    return {"readings": len(frame), "corpus_segments": len(corpus)}


def stage_ingest(cfg, ws, args):
    src = Path(args.input) if getattr(args, "input", None) else ws.data / "telemetry.csv"
    ws.require(src, "run `generate` first or pass --input")
    frames = parse_readings(src.read_text())
    if not frames:
        raise ValueError(f"{src} contains no readings")
    write_atomic(ws.data / "frames.csv", format_readings(frames))
    return {"frames": len(frames), "readings": sum(len(f) for f in frames)}


def stage_segment(cfg, ws, args):
    src = ws.require(ws.data / "frames.csv", "run `ingest` first")
    frames = parse_readings(src.read_text())
    segs = [s for f in frames for s in segment_modes(f, cfg.band, SegmentationConfig())]
    write_atomic(ws.data / "segments.json", dump_segments(segs))
    counts = {m.value: len(v) for m, v in sorted(group_by_mode(segs).items(), key=lambda kv: kv[0].value)}
    return {"segments": len(segs), "by_mode": counts}


def _dataset(cfg, ws):
    name = "corpus.json" if cfg.evaluation.source == "corpus" else "segments.json"
    path = ws.require(ws.data / name, "run `generate`" + ("" if name == "corpus.json" else ", `ingest`, `segment`"))
    return load_segments(path.read_text())


def _splits(cfg, ws):
    """Per-mode train/test split; modes with fewer than 5 segments are skipped."""
    out = {}
    for mode, segs in sorted(group_by_mode(_dataset(cfg, ws)).items(), key=lambda kv: kv[0].value):
        if len(segs) < 5:
            log.warning("skipping %s: only %d segments", mode.value, len(segs))
            continue
        out[mode] = split_segments(segs, cfg.evaluation.split_ratio, cfg.seeds.split)
    if not out:
        raise ValueError("no operation mode has enough segments to train on")
    return out


def _tuning_segments(train):
    return [s for s in train if len(s) >= 3]


def stage_tune(cfg, ws, args):
    budget = args.budget if getattr(args, "budget", None) is not None else cfg.tuning.budget
    summary = {}
    for mode, (train, _) in _splits(cfg, ws).items():
        trials = search_hyperparameters(_tuning_segments(train), budget, cfg.seeds.tune, dict(cfg.tuning.ranges),
                                        cfg.network, cfg.normalization, cfg.jobs)
        best = best_trial(trials)
        doc = {
            "mode": mode.value,
            "best_index": best.index,
            "best_config": asdict(best.config),
            "trials": [{"index": t.index, "validation_rmse": t.validation_rmse, "config": asdict(t.config)}
                       for t in trials],
        }
        write_atomic(ws.models / f"tuned_{mode.value}.json", _json(doc))
        summary[mode.value] = {"best_index": best.index, "validation_rmse": best.validation_rmse}
    return summary


def _network_for(cfg, ws, mode) -> NetworkConfig:
    path = ws.models / f"tuned_{mode.value}.json"
    if cfg.tuning.enabled and path.is_file():
        return NetworkConfig.from_dict(json.loads(path.read_text())["best_config"])
    return cfg.network


def _fit_baselines(cfg, train, mode):
    asym = AsymptoteMode.OUTSIDE_TEMP if mode.is_passive else AsymptoteMode.FITTED_CONSTANT
    b = cfg.baselines
    candidates = [FfnnCandidate(tuple(s), a, cfg.seeds.train, max_steps=b.ffnn_max_steps)
                  for s in b.ffnn_structures for a in b.activations]
    folds = min(b.cv_folds, len(train))
    ffnn_fit = grid_search_cv(train, candidates, k=folds, seed=cfg.seeds.train) if len(candidates) > 1 else candidates[0]
    return {
        "persistence": PersistenceModel(),
        "mlr": fit_mlr(train),
        "ffnn": ffnn_fit(train),
        "decay": fit_decay(train, asym),
    }


def stage_train(cfg, ws, args):
    summary = {}
    test_all = []
    for mode, (train, test) in _splits(cfg, ws).items():
        models = _fit_baselines(cfg, train, mode)
        net = _network_for(cfg, ws, mode)
        log.info("training rnn for %s on %d segments", mode.value, len(train))
        models["rnn"] = train_global(train, net, cfg.seeds.train, cfg.normalization)
        for kind, model in models.items():
            write_atomic(ws.model_path(kind, mode), persistence.dumps(model) + "\n")
        test_all.extend(test)
        summary[mode.value] = {"train": len(train), "test": len(test), "final_loss": models["rnn"].training_loss[-1]}
    write_atomic(ws.data / "test_segments.json", dump_segments(test_all))
    manifest = {m: {k: ws.model_path(k, OperationMode(m)).name for k in MODEL_KINDS} for m in summary}
    write_atomic(ws.models / "manifest.json", _json(manifest))
    return summary


def _load_model(ws, kind, mode):
    path = ws.require(ws.model_path(kind, mode), "run `train` first")
    try:
        return persistence.loads(path.read_text())
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ValueError(f"{path}: malformed model document ({exc})") from exc


def stage_evaluate(cfg, ws, args):
    ws.require(ws.models / "manifest.json", "model manifest; run `train` first")
    test = load_segments(ws.require(ws.data / "test_segments.json", "run `train` first").read_text())
    modes = sorted({s.mode for s in test}, key=lambda m: m.value)
    models = {kind: {m: _load_model(ws, kind, m) for m in modes} for kind in MODEL_KINDS}
    horizon = args.horizon if getattr(args, "horizon", None) is not None else cfg.evaluation.horizon
    report = evaluate_models(models, test, horizon, split=cfg.evaluation.source, seed=cfg.seeds.split)
    rows = ["model,mode,segments,rmse"]
    for mode in modes:
        sub = [s for s in test if s.mode is mode]
        r = evaluate_models(models, sub, horizon)
        rows += [f"{k},{mode.value},{len(sub)},{r.pooled_rmse[k]:.6f}" for k in MODEL_KINDS]
    rows += [f"{k},all,{len(test)},{report.pooled_rmse[k]:.6f}" for k in MODEL_KINDS]
    write_atomic(ws.reports / "evaluation.csv", "\n".join(rows) + "\n")
    sig = significance(report.segment_rmse, list(MODEL_KINDS))
    write_atomic(ws.reports / "significance.json", sig.to_json() + "\n")
    for seg, name, err in report.failures:
        log.warning("segment %d model %s failed: %s", seg, name, err)
    return {"rmse": {k: round(v, 6) for k, v in report.pooled_rmse.items()}, "best": sig.best,
            "friedman_p": sig.friedman_p, "failures": len(report.failures)}


def _schedule(cfg, args):
    path = getattr(args, "schedule", None) or cfg.simulation.schedule_path
    if path is None:
        return lecture_week()
    p = Path(path)
    if not p.is_file():
        raise MissingInput(p, "schedule JSON")
    return load_schedule(p.read_text())


def _week_outside(cfg, n_days):
    rng = np.random.default_rng(cfg.seeds.schedule)
    sim = cfg.simulation
    return [winter_outside_profile(rng, DAY_STEPS, sim.outside_mean, sim.outside_amplitude) for _ in range(n_days)]


def _predictors(cfg, ws, which: str):
    if which == "oracle":
        physics = cfg.physics
        return DecayModel.passive_from_physics(physics), DecayModel.active_from_physics(physics)
    return _load_model(ws, which, PASSIVE_MODE), _load_model(ws, which, ACTIVE_MODE)


def stage_optimize(cfg, ws, args):
    schedule = _schedule(cfg, args)
    outside = _week_outside(cfg, len(schedule))
    passive, active = _predictors(cfg, ws, "rnn")
    physics = cfg.physics.noiseless()
    plans = []
    for i, (entry, out) in enumerate(zip(schedule, outside)):
        start = i * DAY_STEPS * STEP_MINUTES
        trace = simulate_optimized(physics, cfg.band, entry, passive, active, out, cfg.simulation.initial_inside, start)
        plans += [(entry.day, start, p) for p in trace.plans]
    write_atomic(ws.reports / "plans.json", plans_to_json(plans) + "\n")
    write_atomic(ws.reports / "schedule.json", dump_schedule(schedule) + "\n")
    return {"plans": len(plans), "infeasible": sum(not p.feasible for _, _, p in plans)}


def stage_simulate(cfg, ws, args):
    schedule = _schedule(cfg, args)
    outside = _week_outside(cfg, len(schedule))
    passive, active = _predictors(cfg, ws, "rnn")
    physics = cfg.physics.noiseless()
    init = cfg.simulation.initial_inside
    for i, (entry, out) in enumerate(zip(schedule, outside)):
        start = i * DAY_STEPS * STEP_MINUTES
        occ = entry.occupancy(len(out))
        static = simulate_static(physics, cfg.band, out, init, occ, start)
        opt = simulate_optimized(physics, cfg.band, entry, passive, active, out, init, start)
        write_atomic(ws.reports / "traces" / f"{entry.day}_static.csv", static.to_csv())
        write_atomic(ws.reports / "traces" / f"{entry.day}_optimized.csv", opt.to_csv())
    return {"days": len(schedule)}


def stage_report(cfg, ws, args):
    schedule = _schedule(cfg, args)
    outside = _week_outside(cfg, len(schedule))
    summary = {}
    for which in ("rnn", "decay", "oracle"):
        passive, active = _predictors(cfg, ws, which)
        rep = weekly_report(schedule, cfg.physics, cfg.band, passive, active, outside, cfg.simulation.initial_inside)
        write_atomic(ws.reports / f"weekly_report_{which}.csv", rep.to_csv())
        red = rep.average_reduction
        summary[which] = {"average_reduction": None if red is None else round(red, 4),
                          "comfort_violations": rep.total_violations}
    return summary


STAGE_FUNCS = {
    "generate": stage_generate,
    "ingest": stage_ingest,
    "segment": stage_segment,
    "tune": stage_tune,
    "train": stage_train,
    "evaluate": stage_evaluate,
    "optimize": stage_optimize,
    "simulate": stage_simulate,
    "report": stage_report,
}


def stage_all(cfg, ws, args):
    out = {}
    for name in STAGES:
        if name == "tune" and not cfg.tuning.enabled:
            continue
        log.info("stage %s", name)
        out[name] = STAGE_FUNCS[name](cfg, ws, args)
    return out


# ------------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML file or bundled name (demo, full)")
    common.add_argument("--out-dir", help=f"artifact root (env {cfgmod.ENV_OUT_DIR})")
    common.add_argument("--seed", type=int, help="set every seed to this value")
    common.add_argument("--jobs", type=int, help=f"worker processes for tuning (env {cfgmod.ENV_JOBS})")
    common.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    parser = argparse.ArgumentParser(prog="hvacopt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="synthetic telemetry and per-mode corpus")
    p = sub.add_parser("ingest", parents=[common], help="parse and validate a telemetry CSV")
    p.add_argument("--input", help="CSV to ingest (default: generated telemetry)")
    sub.add_parser("segment", parents=[common], help="split frames into operation-mode segments")
    p = sub.add_parser("tune", parents=[common], help="random search over network hyperparameters")
    p.add_argument("--budget", type=int)
    sub.add_parser("train", parents=[common], help="fit the RNN and baselines per mode")
    p = sub.add_parser("evaluate", parents=[common], help="test-set RMSE and significance")
    p.add_argument("--horizon", type=int)
    for name, text in (("optimize", "switch-on plans for the schedule"),
                       ("simulate", "static and optimised day traces"),
                       ("report", "weekly heating-time report")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--schedule", help="schedule JSON (default: built-in lecture week)")
    p = sub.add_parser("all", parents=[common], help="every stage in order")
    p.add_argument("--schedule", help="schedule JSON (default: built-in lecture week)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on usage errors
    logging.basicConfig(level=args.log_level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = cfgmod.apply_overrides(cfgmod.load(args.config), args.out_dir, args.jobs, args.seed)
        ws = Workspace(cfg.out_dir)
        func = stage_all if args.command == "all" else STAGE_FUNCS[args.command]
        summary = func(cfg, ws, args)
    except MissingInput as exc:
        print(f"hvacopt: error[io]: {exc}", file=sys.stderr)
        return EXIT_IO
    except FileNotFoundError as exc:
        print(f"hvacopt: error[io]: missing file {exc.filename or exc}", file=sys.stderr)
        return EXIT_IO
    except (ParseError, OrderingError, cfgmod.ConfigError, ValueError) as exc:
        print(f"hvacopt: error[data]: {exc}", file=sys.stderr)
        return EXIT_DATA
    print(json.dumps({"command": args.command, "out_dir": str(ws.root), "summary": summary}, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
