"""Random hyperparameter search for the per-mode RNN.

    python scripts/tune_rnn.py --mode active_heating --budget 20 --jobs 4
"""
import argparse

from hvacopt.data_model import OperationMode
from hvacopt.evaluation import split_segments
from hvacopt.rnn.training import best_trial, search_hyperparameters
from hvacopt.thermal_oracle import RoomPhysics, generate_corpus


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--mode", choices=[m.value for m in OperationMode], default="passive_cooling")
    ap.add_argument("--budget", type=int, default=20)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    mode = OperationMode(args.mode)
    corpus = generate_corpus(68, 112, physics=RoomPhysics(noise_std=0.05), seed=args.seed)
    train, _ = split_segments([s for s in corpus if s.mode is mode], 0.8, seed=args.seed)
    trials = search_hyperparameters(train, args.budget, seed=args.seed, jobs=args.jobs)
    for t in sorted(trials, key=lambda t: t.validation_rmse):
        c = t.config
        print(f"trial {t.index:3d} rmse={t.validation_rmse:.4f} cell={c.cell_dim} layers={c.num_layers} "
              f"epochs={c.max_epochs} epoch_size={c.epoch_size} batch={c.minibatch_size} l2={c.l2_weight:.2e}")
    print(f"best: {best_trial(trials).config}")


if __name__ == "__main__":
    main()
