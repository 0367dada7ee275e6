#!/usr/bin/env python3
"""Run the desk-scale smoke training config and report the outcome."""

import argparse
import statistics
import csv
from pathlib import Path

import numpy as np

from gomoku_zero.network import load_checkpoint
from gomoku_zero.search import SearchParams
from gomoku_zero.training import RandomPlayer, arena, load_train_config, train

ROOT = Path(__file__).parent.parent


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=str(ROOT / "configs" / "smoke.cfg"))
    parser.add_argument("--eval-games", type=int, default=20)
    parser.add_argument("--eval-sims", type=int, default=256)
    args = parser.parse_args()

    cfg = load_train_config(args.config)
    result = train(cfg, log_fn=print)

    with open(result.loss_log_path, newline="") as f:
        totals = [float(r["total_loss"]) for r in csv.DictReader(f)]
    tenth = max(1, len(totals) // 10)
    print(
        f"median total loss: first 10% {statistics.median(totals[:tenth]):.4f}"
        f" -> last 10% {statistics.median(totals[-tenth:]):.4f}"
    )

    net, _ = load_checkpoint(result.checkpoint_path, expected_config=cfg.net)
    outcome = arena(
        net,
        RandomPlayer(np.random.default_rng(42)),
        args.eval_games,
        SearchParams(n_simulations=args.eval_sims, dirichlet_epsilon=0.0),
        cfg.selfplay.game,
    )
    print(
        f"vs random mover: {outcome.wins_a}-{outcome.wins_b}-{outcome.draws}, "
        f"score {outcome.score_a:.3f}"
    )
    print(f"final checkpoint: {result.checkpoint_path}")


if __name__ == "__main__":
    main()
