"""Self-play data generation and the replay buffer.

Workers are independent processes: each gets an immutable weight snapshot
(checkpoint bytes) and its own RNG stream seeded with master_seed XOR
worker_id, plays its share of games to completion, and ships GameRecords
back to the collector. Only the collector touches the replay buffer.

A single-worker run executes inline in the calling process and is
bit-reproducible for a fixed seed; multi-worker runs keep per-worker
determinism but make no promise about cross-worker interleaving.
"""

from __future__ import annotations

import json
import multiprocessing as mp
import time
import traceback
from dataclasses import asdict, dataclass, field
from typing import Iterable

import numpy as np

from .features import TrainingSample, augment_sample, encode_state
from .game import (
    GameConfig,
    GameError,
    Outcome,
    Point,
    apply_move,
    format_game_log,
    new_game,
    parse_game_log,
)
from .network import PolicyValueNet, from_bytes, to_bytes
from .search import SearchParams, run_search, select_move

TARGETS_HEADER = "targets v1"


class InsufficientSamplesError(GameError):
    pass


class WorkerFailureError(GameError):
    def __init__(self, failures: dict[int, str], report: "ThroughputReport"):
        ids = sorted(failures)
        super().__init__(f"self-play worker(s) {ids} failed")
        self.failures = failures
        self.report = report


@dataclass(frozen=True)
class SelfPlayConfig:
    game: GameConfig = field(default_factory=GameConfig)
    search: SearchParams = field(default_factory=SearchParams)
    n_workers: int = 8
    games_per_iteration: int = 50
    temperature_moves: int = 8
    buffer_capacity: int = 100_000
    augment: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_workers <= 0:
            raise ValueError("n_workers must be positive")
        if self.games_per_iteration <= 0:
            raise ValueError("games_per_iteration must be positive")
        if self.temperature_moves < 0:
            raise ValueError("temperature_moves must be nonnegative")
        if self.buffer_capacity <= 0:
            raise ValueError("buffer_capacity must be positive")


@dataclass
class GameRecord:
    config: GameConfig
    moves: list[Point]
    targets: list[np.ndarray]  # one visit distribution per move
    outcome: Outcome
    worker_id: int = 0
    wall_time: float = 0.0
    game_id: str = ""


@dataclass
class ThroughputReport:
    n_workers: int
    games: int
    samples: int
    wall_time_s: float
    games_per_sec: float
    samples_per_sec: float
    per_worker_games: dict[int, int]

    def to_json(self) -> str:
        return json.dumps(asdict(self))


class ReplayBuffer:
    """Bounded FIFO of training samples with uniform batch sampling."""

    def __init__(self, capacity: int):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.total_appended = 0
        self._items: list[TrainingSample] = []
        self._next = 0  # ring position of the oldest item once full

    def __len__(self) -> int:
        return len(self._items)

    def append(self, samples: Iterable[TrainingSample]) -> None:
        for s in samples:
            if len(self._items) < self.capacity:
                self._items.append(s)
            else:
                self._items[self._next] = s
                self._next = (self._next + 1) % self.capacity
            self.total_appended += 1

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[TrainingSample]:
        if batch_size > len(self._items):
            raise InsufficientSamplesError(
                f"requested {batch_size} of {len(self._items)} buffered samples"
            )
        idx = rng.choice(len(self._items), size=batch_size, replace=False)
        return [self._items[i] for i in idx]

    def snapshot(self) -> list[TrainingSample]:
        """Contents in insertion order, oldest first."""
        if len(self._items) < self.capacity:
            return list(self._items)
        return self._items[self._next :] + self._items[: self._next]


def play_one_game(
    net: PolicyValueNet,
    cfg: SelfPlayConfig,
    rng: np.random.Generator,
    worker_id: int = 0,
    game_id: str = "",
) -> GameRecord:
    """One complete self-play game from the empty board."""
    t0 = time.monotonic()
    state = new_game(cfg.game)
    moves: list[Point] = []
    targets: list[np.ndarray] = []
    while not state.outcome.is_over:
        result = run_search(state, net, cfg.search, rng=rng)
        temperature = 1.0 if len(moves) < cfg.temperature_moves else 0.0
        move = select_move(result, temperature, rng)
        moves.append(move)
        targets.append(result.visit_distribution)
        state = apply_move(state, move)
    return GameRecord(
        config=cfg.game,
        moves=moves,
        targets=targets,
        outcome=state.outcome,
        worker_id=worker_id,
        wall_time=time.monotonic() - t0,
        game_id=game_id,
    )


def record_to_samples(rec: GameRecord, augment: bool) -> list[TrainingSample]:
    """Positions of one game labeled with the final outcome.

    z is viewed from the player to move at each position, so it alternates
    sign through a decisive game and is all zero for draws.
    """
    samples: list[TrainingSample] = []
    state = new_game(rec.config)
    for move, target in zip(rec.moves, rec.targets):
        if rec.outcome.kind == "win":
            z = 1 if state.to_move == rec.outcome.winner else -1
        else:
            z = 0
        sample = TrainingSample(
            state=encode_state(state),
            policy=np.asarray(target, dtype=np.float32),
            z=z,
        )
        if augment:
            samples.extend(augment_sample(sample))
        else:
            samples.append(sample)
        state = apply_move(state, move)
    return samples


# ----------------------------------------------------------------------
# Parallel iteration
# ----------------------------------------------------------------------


def _split_games(total: int, n_workers: int) -> list[int]:
    base, rem = divmod(total, n_workers)
    return [base + (1 if i < rem else 0) for i in range(n_workers)]


def _worker_main(worker_id, net_bytes, cfg, n_games, tag, ready, start, out_q):
    try:
        import torch

        torch.set_num_threads(1)
        net = from_bytes(net_bytes)
        rng = np.random.default_rng(cfg.seed ^ worker_id)
        ready.set()
        start.wait()
        records = [
            play_one_game(net, cfg, rng, worker_id, f"{tag}/w{worker_id}/g{i}")
            for i in range(n_games)
        ]
        out_q.put(("ok", worker_id, records))
    except Exception:
        out_q.put(("error", worker_id, traceback.format_exc()))


def run_iteration(
    net: PolicyValueNet,
    cfg: SelfPlayConfig,
    buffer: ReplayBuffer,
    tag: str = "iter",
    mp_context: str = "spawn",
) -> ThroughputReport:
    """Play cfg.games_per_iteration games across cfg.n_workers workers.

    Samples from completed games are appended to the buffer (augmented
    8-fold when cfg.augment). If some workers fail, surviving games are
    kept and a WorkerFailureError carrying the partial report is raised.
    """
    shares = _split_games(cfg.games_per_iteration, cfg.n_workers)
    records: list[GameRecord] = []
    failures: dict[int, str] = {}

    if cfg.n_workers == 1:
        import torch

        rng = np.random.default_rng(cfg.seed ^ 0)
        threads_before = torch.get_num_threads()
        torch.set_num_threads(1)  # same footing as pool workers
        t0 = time.monotonic()
        try:
            for i in range(shares[0]):
                records.append(play_one_game(net, cfg, rng, 0, f"{tag}/w0/g{i}"))
        except Exception:
            failures[0] = traceback.format_exc()
        finally:
            elapsed = time.monotonic() - t0
            torch.set_num_threads(threads_before)
    else:
        ctx = mp.get_context(mp_context)
        net_bytes = to_bytes(net)
        out_q = ctx.Queue()
        start = ctx.Event()
        procs = []
        readies = []
        for wid, n_games in enumerate(shares):
            ready = ctx.Event()
            p = ctx.Process(
                target=_worker_main,
                args=(wid, net_bytes, cfg, n_games, tag, ready, start, out_q),
                daemon=True,
            )
            p.start()
            procs.append(p)
            readies.append(ready)
        for ready in readies:
            ready.wait()
        t0 = time.monotonic()
        start.set()
        for _ in procs:
            status, wid, payload = out_q.get()
            if status == "ok":
                records.extend(payload)
            else:
                failures[wid] = payload
        elapsed = time.monotonic() - t0
        for p in procs:
            p.join()

    n_samples = 0
    per_worker: dict[int, int] = {}
    for rec in records:
        samples = record_to_samples(rec, cfg.augment)
        buffer.append(samples)
        n_samples += len(samples)
        per_worker[rec.worker_id] = per_worker.get(rec.worker_id, 0) + 1

    elapsed = max(elapsed, 1e-9)
    report = ThroughputReport(
        n_workers=cfg.n_workers,
        games=len(records),
        samples=n_samples,
        wall_time_s=elapsed,
        games_per_sec=len(records) / elapsed,
        samples_per_sec=n_samples / elapsed,
        per_worker_games=per_worker,
    )
    if failures:
        raise WorkerFailureError(failures, report)
    return report


# ----------------------------------------------------------------------
# Game record persistence: move-list log plus a targets section
# ----------------------------------------------------------------------


def format_game_record(rec: GameRecord) -> str:
    text = format_game_log(rec.config, rec.moves)
    lines = [TARGETS_HEADER]
    lines.extend(",".join(repr(float(v)) for v in t) for t in rec.targets)
    return text + "\n".join(lines) + "\n"


def parse_game_record(text: str) -> GameRecord:
    lines = text.splitlines()
    try:
        split = lines.index(TARGETS_HEADER)
    except ValueError:
        raise GameError(f"missing {TARGETS_HEADER!r} section") from None
    config, moves = parse_game_log("\n".join(lines[:split]))
    targets = [
        np.array([float(v) for v in ln.split(",")], dtype=np.float64)
        for ln in lines[split + 1 :]
        if ln.strip()
    ]
    if len(targets) != len(moves):
        raise GameError(f"{len(moves)} moves but {len(targets)} targets")
    state = new_game(config)
    for p in moves:
        state = apply_move(state, p)
    return GameRecord(config=config, moves=moves, targets=targets, outcome=state.outcome)
