"""Command-line entry points: train, eval, plot-loss, play, serve."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .game import BoardState, GameConfig, Player, Point, apply_move, new_game
from .network import load_checkpoint
from .search import SearchParams, SearchTree, select_move
from .training import (
    RandomPlayer,
    SearchPlayer,
    arena,
    load_train_config,
    plot_loss,
    train,
)

_STONES = {0: ".", 1: "X", 2: "O"}


def render_board(state: BoardState) -> str:
    bx = state.config.board_x
    header = "   " + " ".join(f"{x % 10}" for x in range(bx))
    rows = [header]
    for y in range(state.config.board_y):
        cells = " ".join(_STONES[int(v)] for v in state.cells[y])
        rows.append(f"{y:2d} {cells}")
    return "\n".join(rows)


def _cmd_train(args) -> int:
    cfg = load_train_config(args.config)
    result = train(cfg, resume=args.resume, log_fn=print)
    print(f"final checkpoint: {result.checkpoint_path}")
    print(f"loss log: {result.loss_log_path}")
    return 0


def _cmd_eval(args) -> int:
    net_a, meta_a = load_checkpoint(args.a)
    game_config = GameConfig(
        meta_a.config.board_x, meta_a.config.board_y, args.win_length
    )
    if args.b == "random":
        b = RandomPlayer(np.random.default_rng(args.seed))
    else:
        net_b, _ = load_checkpoint(args.b)
        b = net_b
    params = SearchParams(n_simulations=args.sims, dirichlet_epsilon=0.0)
    result = arena(net_a, b, args.games, params, game_config,
                   rng=np.random.default_rng(args.seed))
    print(
        f"A wins {result.wins_a}, B wins {result.wins_b}, draws {result.draws} "
        f"over {result.games} games; score(A) = {result.score_a:.3f}"
    )
    return 0


def _cmd_plot_loss(args) -> int:
    plot_loss(args.log, args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_play(args) -> int:
    net, meta = load_checkpoint(args.checkpoint)
    game_config = GameConfig(
        meta.config.board_x, meta.config.board_y, args.win_length
    )
    human = Player.BLACK if args.color == "black" else Player.WHITE
    params = SearchParams(n_simulations=args.sims, dirichlet_epsilon=0.0)
    state = new_game(game_config)
    tree = SearchTree(state)
    print(render_board(state))
    while not state.outcome.is_over:
        if state.to_move == human:
            raw = input("your move x,y> ").strip()
            if raw in ("q", "quit", "exit"):
                return 0
            try:
                x_str, y_str = raw.split(",")
                p = Point(int(x_str), int(y_str))
                state = apply_move(state, p)
            except Exception as e:  # noqa: BLE001 - show and re-prompt
                print(f"rejected: {e}")
                continue
            tree.advance(p)
        else:
            result = tree.run(net, params)
            p = select_move(result, 0.0)
            state = apply_move(state, p)
            tree.advance(p)
            print(f"engine plays {p.x},{p.y} (value {result.root_value:+.2f})")
        print(render_board(state))
    if state.outcome.kind == "draw":
        print("draw")
    elif state.outcome.winner == human:
        print("you win")
    else:
        print("engine wins")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    net, meta = load_checkpoint(args.checkpoint)
    game_config = GameConfig(
        meta.config.board_x, meta.config.board_y, args.win_length
    )
    checkpoints = {"default": net, Path(args.checkpoint).stem: net}
    app = create_app(
        checkpoints,
        game_config,
        journal_path=Path(args.journal) if args.journal else None,
        time_budget_s=args.time_budget,
        ui_dir=Path(args.ui_dir) if args.ui_dir else None,
    )
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gomoku-zero")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run the training loop from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--resume", default=None, help="checkpoint to resume from")
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("eval", help="arena match between two checkpoints")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True, help="checkpoint path or 'random'")
    p.add_argument("--games", type=int, default=20)
    p.add_argument("--sims", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--win-length", type=int, default=5)
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("plot-loss", help="render a loss log CSV as SVG")
    p.add_argument("--log", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_plot_loss)

    p = sub.add_parser("play", help="play against a checkpoint in the terminal")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--color", choices=("black", "white"), default="black")
    p.add_argument("--sims", type=int, default=800)
    p.add_argument("--win-length", type=int, default=5)
    p.set_defaults(fn=_cmd_play)

    p = sub.add_parser("serve", help="serve the human-vs-engine HTTP API")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--win-length", type=int, default=5)
    p.add_argument("--journal", default=None)
    p.add_argument("--time-budget", type=float, default=None,
                   help="wall-clock cap per engine move, seconds")
    p.add_argument("--ui-dir", default=None, help="static web UI directory")
    p.set_defaults(fn=_cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
