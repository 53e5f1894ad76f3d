"""Static vs optimised heating over the lecture week, per predictor.

    python scripts/weekly_savings.py --seed 1 --out reports/
"""
import argparse
from pathlib import Path

import numpy as np

from hvacopt.baselines import AsymptoteMode, DecayModel, fit_decay
from hvacopt.data_model import OperationMode, SetpointBand
from hvacopt.evaluation import split_segments
from hvacopt.hvac_simulator import lecture_week, weekly_report
from hvacopt.rnn import NetworkConfig, RnnPredictor, train_global
from hvacopt.thermal_oracle import RoomPhysics, generate_corpus, winter_outside_profile

COOL, HEAT = OperationMode.PASSIVE_COOLING, OperationMode.ACTIVE_HEATING


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--out", type=Path, default=None, help="directory for the per-predictor CSV tables")
    args = ap.parse_args()

    physics, band = RoomPhysics(noise_std=0.05), SetpointBand(19.0, 20.0)
    corpus = generate_corpus(68, 112, physics=physics, seed=args.seed, band=band)
    train = {m: split_segments([s for s in corpus if s.mode is m], 0.8, seed=args.seed)[0] for m in (COOL, HEAT)}
    predictors = {
        "oracle": (DecayModel.passive_from_physics(physics), DecayModel.active_from_physics(physics)),
        "decay": (fit_decay(train[COOL]), fit_decay(train[HEAT], AsymptoteMode.FITTED_CONSTANT)),
        "rnn": tuple(RnnPredictor(train_global(train[m], NetworkConfig(), seed=args.seed)) for m in (COOL, HEAT)),
    }
    week = lecture_week()
    rng = np.random.default_rng(args.seed)
    outside = [winter_outside_profile(rng) for _ in week]
    for name, (passive, active) in predictors.items():
        report = weekly_report(week, physics, band, passive, active, outside)
        print(f"\n[{name}]\n{report.to_csv()}", end="")
        if args.out is not None:
            args.out.mkdir(parents=True, exist_ok=True)
            (args.out / f"weekly_{name}.csv").write_text(report.to_csv())


if __name__ == "__main__":
    main()
