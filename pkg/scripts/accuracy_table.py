"""Per-mode forecast accuracy of every model on a synthetic corpus.

    python scripts/accuracy_table.py --seed 1 --horizon 24
"""
import argparse
import time

from hvacopt.baselines import AsymptoteMode, FfnnCandidate, PersistenceModel, fit_decay, fit_mlr, grid_search_cv
from hvacopt.data_model import OperationMode
from hvacopt.evaluation import evaluate_models, significance, split_segments
from hvacopt.rnn import NetworkConfig, RnnPredictor, train_global
from hvacopt.thermal_oracle import RoomPhysics, generate_corpus

MODES = (OperationMode.PASSIVE_COOLING, OperationMode.ACTIVE_HEATING)
ASYMPTOTE = {MODES[0]: AsymptoteMode.OUTSIDE_TEMP, MODES[1]: AsymptoteMode.FITTED_CONSTANT}


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--horizon", type=int, default=24)
    ap.add_argument("--noise", type=float, default=0.05)
    ap.add_argument("--skip-ffnn", action="store_true", help="leave out the cross-validated FFNN grid")
    args = ap.parse_args()

    t0 = time.perf_counter()
    corpus = generate_corpus(68, 112, (21, 51), (6, 6), RoomPhysics(noise_std=args.noise), seed=args.seed)
    for mode in MODES:
        train, test = split_segments([s for s in corpus if s.mode is mode], 0.8, seed=args.seed)
        models = {
            "persistence": PersistenceModel(),
            "mlr": fit_mlr(train),
            "decay": fit_decay(train, ASYMPTOTE[mode]),
            "rnn": RnnPredictor(train_global(train, NetworkConfig(), seed=args.seed)),
        }
        if not args.skip_ffnn:
            grid = [FfnnCandidate(st, act, args.seed) for st in ((), (2,), (2, 3)) for act in ("tanh", "sigmoid")]
            models["ffnn"] = grid_search_cv(train, grid, k=10, seed=args.seed)(train)
        report = evaluate_models(models, test, args.horizon)
        sig = significance(report.segment_rmse, report.model_names)
        print(f"\n{mode.value}: {len(train)} train / {len(test)} test segments")
        for name in report.model_names:
            adj = sig.adjusted_p.get(name)
            tail = "best" if adj is None else f"p_adj={adj:.4f}"
            print(f"  {name:12s} rmse={report.pooled_rmse[name]:.4f}  rank={sig.rank_means[name]:.2f}  {tail}")
        print(f"  friedman p={sig.friedman_p:.3g}")
    print(f"\nelapsed {time.perf_counter() - t0:.0f}s")


if __name__ == "__main__":
    main()
