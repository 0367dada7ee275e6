#!/usr/bin/env python3
"""Self-play throughput sweep over worker counts.

Prints one JSON report line per run; medians at the end. Worker counts
beyond the physical core count are skipped unless --force is given.
"""

import argparse
import dataclasses
import os
import statistics

try:
    import psutil
except ImportError:
    psutil = None

from gomoku_zero.game import GameConfig
from gomoku_zero.network import NetworkConfig, PolicyValueNet
from gomoku_zero.search import SearchParams
from gomoku_zero.selfplay import ReplayBuffer, SelfPlayConfig, run_iteration


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workers", type=int, nargs="+", default=[1, 2, 4, 8])
    parser.add_argument("--games", type=int, default=8)
    parser.add_argument("--sims", type=int, default=24)
    parser.add_argument("--runs", type=int, default=3)
    parser.add_argument("--board", type=int, default=6)
    parser.add_argument("--win-length", type=int, default=4)
    parser.add_argument("--force", action="store_true",
                        help="also run worker counts above the physical core count")
    args = parser.parse_args()

    if psutil is not None:
        physical = psutil.cpu_count(logical=False) or 1
    else:
        physical = os.cpu_count() or 1
    counts = [n for n in args.workers if args.force or n <= physical]
    if counts != args.workers:
        print(f"# limiting to {counts}: machine has {physical} physical cores")

    board = GameConfig(args.board, args.board, args.win_length)
    net = PolicyValueNet(
        NetworkConfig(args.board, args.board, trunk_channels=8, trunk_blocks=1, seed=8)
    )
    base = SelfPlayConfig(
        game=board,
        search=SearchParams(n_simulations=args.sims, dirichlet_epsilon=0.25),
        n_workers=1,
        games_per_iteration=args.games,
        temperature_moves=4,
        buffer_capacity=1_000_000,
        augment=False,
        seed=77,
    )
    medians = {}
    for n in counts:
        rates = []
        for run in range(args.runs):
            cfg = dataclasses.replace(base, n_workers=n, seed=77 + run)
            report = run_iteration(net, cfg, ReplayBuffer(cfg.buffer_capacity),
                                   tag=f"bench{n}_{run}")
            print(report.to_json())
            rates.append(report.games_per_sec)
        medians[n] = statistics.median(rates)
    print("# medians (games/sec):")
    for n, rate in medians.items():
        speedup = rate / medians[counts[0]]
        print(f"#   {n:2d} workers: {rate:7.2f}  ({speedup:.2f}x)")


if __name__ == "__main__":
    main()
