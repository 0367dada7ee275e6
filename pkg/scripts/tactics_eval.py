#!/usr/bin/env python3
"""Score a policy on generated one-move-win / one-move-block puzzles.

Without --checkpoint, searches with uniform priors (untrained baseline).
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent.parent / "tests"))

from gomoku_zero.game import GameConfig
from gomoku_zero.network import load_checkpoint
from gomoku_zero.search import SearchParams, run_search, select_move
from oracles import generate_puzzles, immediate_wins


class UniformNet:
    def __init__(self, n_cells):
        self.n_cells = n_cells

    def forward(self, states):
        b = states.shape[0]
        return (
            np.full((b, self.n_cells), 1.0 / self.n_cells, dtype=np.float32),
            np.zeros(b, dtype=np.float32),
        )


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--checkpoint", default=None)
    parser.add_argument("--sims", type=int, default=800)
    parser.add_argument("--board", type=int, default=6)
    parser.add_argument("--win-length", type=int, default=4)
    parser.add_argument("--puzzles", type=int, default=50)
    parser.add_argument("--seed", type=int, default=2024)
    args = parser.parse_args()

    board = GameConfig(args.board, args.board, args.win_length)
    if args.checkpoint:
        net, _ = load_checkpoint(args.checkpoint)
    else:
        net = UniformNet(board.n_cells)

    half = args.puzzles // 2
    puzzles = generate_puzzles(
        np.random.default_rng(args.seed), board, n_win=half, n_block=args.puzzles - half
    )
    params = SearchParams(n_simulations=args.sims, dirichlet_epsilon=0.0)
    solved = 0
    t0 = time.time()
    for i, (state, solutions) in enumerate(puzzles):
        kind = "win" if immediate_wins(state) else "block"
        move = select_move(run_search(state, net, params), 0.0)
        ok = move in solutions
        solved += ok
        print(f"puzzle {i:3d} [{kind:5s}]: {'ok' if ok else f'MISS {move} not in {sorted(solutions)}'}")
    print(f"solved {solved}/{len(puzzles)} at {args.sims} sims in {time.time()-t0:.1f}s")


if __name__ == "__main__":
    main()
