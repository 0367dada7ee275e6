"""Training orchestration: self-play, optimization, gating, persistence.

Each iteration plays a batch of self-play games with the incumbent
network, runs a fixed number of optimizer steps on buffer samples with
the cyclic learning-rate schedule indexed by the global step counter,
appends one CSV row per step, checkpoints, and finally pits the trained
candidate against the incumbent: the candidate is adopted for self-play
only when its arena score reaches the gate threshold.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import time
import typing
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np

from .game import GameConfig, Outcome, Player, Point, apply_move, legal_indices, new_game
from .network import (
    CyclicLRConfig,
    NetworkConfig,
    PolicyValueNet,
    cyclic_lr,
    load_checkpoint,
    save_checkpoint,
)
from .search import SearchParams, run_search, select_move
from .selfplay import ReplayBuffer, SelfPlayConfig, run_iteration

LOSS_LOG_COLUMNS = ["step", "lr", "policy_loss", "value_loss", "total_loss"]
INCUMBENT_FILENAME = "incumbent.azck"


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 10
    selfplay: SelfPlayConfig = field(default_factory=SelfPlayConfig)
    net: NetworkConfig = field(default_factory=lambda: NetworkConfig(15, 15))
    lr_schedule: CyclicLRConfig = field(default_factory=CyclicLRConfig)
    batch_size: int = 256
    steps_per_iteration: int = 200
    gate_games: int = 20
    gate_threshold: float = 0.55
    arena_sims: int = 0  # 0: reuse the self-play simulation budget
    checkpoint_dir: str = "runs/default"

    def __post_init__(self) -> None:
        if self.iterations <= 0 or self.steps_per_iteration <= 0:
            raise ValueError("iterations and steps_per_iteration must be positive")
        if self.batch_size <= 0 or self.batch_size > self.selfplay.buffer_capacity:
            raise ValueError("requires 0 < batch_size <= buffer capacity")
        if self.gate_threshold != 0.0 and not 0.5 <= self.gate_threshold <= 1.0:
            raise ValueError("gate_threshold must be 0 (disabled) or in [0.5, 1]")
        if (self.net.board_x, self.net.board_y) != (
            self.selfplay.game.board_x,
            self.selfplay.game.board_y,
        ):
            raise ValueError("network and game board dimensions must match")


# ----------------------------------------------------------------------
# Arena play and gating
# ----------------------------------------------------------------------


@dataclass
class ArenaResult:
    wins_a: int
    wins_b: int
    draws: int

    @property
    def games(self) -> int:
        return self.wins_a + self.wins_b + self.draws

    @property
    def score_a(self) -> float:
        return (self.wins_a + 0.5 * self.draws) / self.games


class SearchPlayer:
    """Deterministic evaluation player: no root noise, argmax-N moves."""

    def __init__(self, net: PolicyValueNet, params: SearchParams):
        self.net = net
        self.params = replace(params, dirichlet_epsilon=0.0)

    def select(self, state) -> Point:
        result = run_search(state, self.net, self.params)
        return select_move(result, 0.0)


class RandomPlayer:
    """Uniform random legal mover; the scripted baseline opponent."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def select(self, state) -> Point:
        idx = int(self.rng.choice(legal_indices(state)))
        return state.config.point_at(idx)


def _as_player(side, params: SearchParams, rng: Optional[np.random.Generator]):
    if isinstance(side, PolicyValueNet):
        return SearchPlayer(side, params)
    if side == "random":
        return RandomPlayer(rng or np.random.default_rng(0))
    return side  # anything with .select(state) -> Point


def play_match_game(black, white, config: GameConfig) -> Outcome:
    state = new_game(config)
    while not state.outcome.is_over:
        player = black if state.to_move is Player.BLACK else white
        state = apply_move(state, player.select(state))
    return state.outcome


def arena(
    a,
    b,
    games: int,
    params: SearchParams,
    game_config: GameConfig,
    rng: Optional[np.random.Generator] = None,
) -> ArenaResult:
    """Head-to-head match; colors alternate so first-move advantage splits."""
    if games < 1:
        raise ValueError("games must be >= 1")
    player_a = _as_player(a, params, rng)
    player_b = _as_player(b, params, rng)
    wins_a = wins_b = draws = 0
    for i in range(games):
        a_is_black = i % 2 == 0
        black, white = (player_a, player_b) if a_is_black else (player_b, player_a)
        outcome = play_match_game(black, white, game_config)
        if outcome.kind == "draw":
            draws += 1
        elif (outcome.winner is Player.BLACK) == a_is_black:
            wins_a += 1
        else:
            wins_b += 1
    return ArenaResult(wins_a, wins_b, draws)


def gate(
    current: PolicyValueNet,
    candidate: PolicyValueNet,
    cfg: TrainConfig,
) -> tuple[bool, Optional[ArenaResult]]:
    """Adopt the candidate iff its arena score reaches the threshold."""
    if cfg.gate_threshold == 0.0:
        return True, None
    params = cfg.selfplay.search
    if cfg.arena_sims > 0:
        params = replace(params, n_simulations=cfg.arena_sims)
    result = arena(candidate, current, cfg.gate_games, params, cfg.selfplay.game)
    return result.score_a >= cfg.gate_threshold, result


# ----------------------------------------------------------------------
# The train loop
# ----------------------------------------------------------------------


@dataclass
class TrainResult:
    checkpoint_path: Path
    incumbent_path: Path
    loss_log_path: Path
    iteration_log_path: Path
    global_step: int
    iterations_run: int


def _append_loss_rows(path: Path, rows: list[dict]) -> None:
    new_file = not path.exists()
    with open(path, "a", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=LOSS_LOG_COLUMNS)
        if new_file:
            writer.writeheader()
        writer.writerows(rows)


def train(
    cfg: TrainConfig,
    resume: Union[str, Path, None] = None,
    log_fn: Optional[Callable[[str], None]] = None,
) -> TrainResult:
    log = log_fn or (lambda msg: None)
    ckpt_dir = Path(cfg.checkpoint_dir)
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    loss_log = ckpt_dir / "loss_log.csv"
    iter_log = ckpt_dir / "iterations.jsonl"
    incumbent_path = ckpt_dir / INCUMBENT_FILENAME

    if resume is not None:
        net, meta = load_checkpoint(resume, expected_config=cfg.net)
        global_step = meta.step
        start_iteration = int(meta.extra.get("iteration", -1)) + 1
        if incumbent_path.exists():
            incumbent, _ = load_checkpoint(incumbent_path, expected_config=cfg.net)
        else:
            incumbent = net.clone()
        log(f"resumed from {resume} at step {global_step}, iteration {start_iteration}")
    else:
        net = PolicyValueNet(cfg.net)
        incumbent = net.clone()
        global_step = 0
        start_iteration = 0

    buffer = ReplayBuffer(cfg.selfplay.buffer_capacity)
    sample_rng = np.random.default_rng([cfg.selfplay.seed, 0xB0F])
    last_ckpt = Path(resume) if resume is not None else ckpt_dir / "ckpt_init.azck"
    if resume is None:
        save_checkpoint(last_ckpt, net, step=0, lr_schedule=cfg.lr_schedule,
                        extra={"iteration": -1})
        save_checkpoint(incumbent_path, incumbent, step=0, lr_schedule=cfg.lr_schedule,
                        extra={"iteration": -1})

    iterations_run = 0
    for iteration in range(start_iteration, cfg.iterations):
        t_iter = time.monotonic()
        sp_cfg = replace(cfg.selfplay, seed=cfg.selfplay.seed + (iteration << 20))
        report = run_iteration(incumbent, sp_cfg, buffer, tag=f"iter{iteration}")
        log(
            f"iteration {iteration}: {report.games} games, "
            f"{report.samples} samples, {report.games_per_sec:.2f} games/s, "
            f"buffer {len(buffer)}"
        )

        rows = []
        for _ in range(cfg.steps_per_iteration):
            lr = cyclic_lr(global_step, cfg.lr_schedule)
            batch = buffer.sample(min(cfg.batch_size, len(buffer)), sample_rng)
            loss = net.train_step(batch, lr)
            rows.append(
                {
                    "step": global_step,
                    "lr": repr(lr),
                    "policy_loss": repr(loss.policy_loss),
                    "value_loss": repr(loss.value_loss),
                    "total_loss": repr(loss.total_loss),
                }
            )
            global_step += 1
        _append_loss_rows(loss_log, rows)

        last_ckpt = ckpt_dir / f"ckpt_iter_{iteration:04d}.azck"
        save_checkpoint(last_ckpt, net, step=global_step, lr_schedule=cfg.lr_schedule,
                        extra={"iteration": iteration})

        adopted, gate_result = gate(incumbent, net, cfg)
        if adopted:
            incumbent = net.clone()
            save_checkpoint(incumbent_path, incumbent, step=global_step,
                            lr_schedule=cfg.lr_schedule, extra={"iteration": iteration})
        gate_info = {
            "adopted": adopted,
            "score": gate_result.score_a if gate_result else 1.0,
            "wins": gate_result.wins_a if gate_result else None,
            "losses": gate_result.wins_b if gate_result else None,
            "draws": gate_result.draws if gate_result else None,
            "threshold": cfg.gate_threshold,
        }
        log(f"iteration {iteration}: gate score {gate_info['score']:.3f} "
            f"-> {'adopted' if adopted else 'retained incumbent'}")
        with open(iter_log, "a") as f:
            f.write(
                json.dumps(
                    {
                        "iteration": iteration,
                        "throughput": dataclasses.asdict(report),
                        "gate": gate_info,
                        "buffer_size": len(buffer),
                        "global_step": global_step,
                        "wall_time_s": time.monotonic() - t_iter,
                    }
                )
                + "\n"
            )
        iterations_run += 1

    return TrainResult(
        checkpoint_path=last_ckpt,
        incumbent_path=incumbent_path,
        loss_log_path=loss_log,
        iteration_log_path=iter_log,
        global_step=global_step,
        iterations_run=iterations_run,
    )


# ----------------------------------------------------------------------
# Flat key = value config files
# ----------------------------------------------------------------------


def _coerce(raw: str, target_type):
    if target_type is bool:
        if raw.lower() in ("true", "1", "yes", "on"):
            return True
        if raw.lower() in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"not a bool: {raw!r}")
    if target_type is int:
        return int(raw)
    if target_type is float:
        return float(raw)
    return raw


def _build_dataclass(cls, values: dict, prefix: str):
    hints = typing.get_type_hints(cls)
    kwargs = {}
    for f in dataclasses.fields(cls):
        key = f.name
        ftype = hints[f.name]
        if dataclasses.is_dataclass(ftype):
            sub = {
                k[len(key) + 1 :]: v for k, v in values.items() if k.startswith(key + ".")
            }
            if sub:
                kwargs[key] = _build_dataclass(ftype, sub, f"{prefix}{key}.")
        elif key in values:
            try:
                kwargs[key] = _coerce(values[key], ftype)
            except ValueError as e:
                raise ValueError(f"bad value for {prefix}{key}: {e}") from e
    unknown = [
        k for k in values
        if "." not in k and k not in {f.name for f in dataclasses.fields(cls)}
    ]
    if unknown:
        raise ValueError(f"unknown config key(s): {', '.join(prefix + k for k in unknown)}")
    return cls(**kwargs)


def parse_train_config(text: str) -> TrainConfig:
    """Parse the flat `key = value` format (dotted keys for nested fields)."""
    values: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"line {lineno}: expected key = value, got {line!r}")
        key, _, raw = stripped.partition("=")
        values[key.strip()] = raw.strip()
    return _build_dataclass(TrainConfig, values, "")


def load_train_config(path) -> TrainConfig:
    return parse_train_config(Path(path).read_text())


def format_train_config(cfg: TrainConfig) -> str:
    lines: list[str] = []

    def emit(obj, prefix: str) -> None:
        for f in dataclasses.fields(obj):
            v = getattr(obj, f.name)
            if dataclasses.is_dataclass(v):
                emit(v, f"{prefix}{f.name}.")
            else:
                lines.append(f"{prefix}{f.name} = {v}")

    emit(cfg, "")
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------------
# Loss-curve plotting
# ----------------------------------------------------------------------


def plot_loss(csv_path, out_path) -> None:
    """Render the loss log as an SVG with loss curves and the lr schedule."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    steps, lrs, pls, vls, tls = [], [], [], [], []
    with open(csv_path, newline="") as f:
        for row in csv.DictReader(f):
            steps.append(int(row["step"]))
            lrs.append(float(row["lr"]))
            pls.append(float(row["policy_loss"]))
            vls.append(float(row["value_loss"]))
            tls.append(float(row["total_loss"]))
    fig, (ax_loss, ax_lr) = plt.subplots(
        2, 1, figsize=(8, 6), sharex=True, height_ratios=[3, 1]
    )
    ax_loss.plot(steps, tls, label="total", color="black")
    ax_loss.plot(steps, pls, label="policy", color="tab:blue")
    ax_loss.plot(steps, vls, label="value", color="tab:orange")
    ax_loss.set_ylabel("loss")
    ax_loss.legend()
    ax_lr.plot(steps, lrs, color="tab:green")
    ax_lr.set_ylabel("lr")
    ax_lr.set_xlabel("step")
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
