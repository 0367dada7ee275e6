"""Gomoku rules engine: board state, move legality, win/draw detection.

Boards are addressed by (x, y) points with x the column and y the row.
``BoardState`` is treated as an immutable value: ``apply_move`` returns a
new state and never mutates its input, so states can be shared freely
between search workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

EMPTY = 0

GAME_LOG_HEADER = "gomoku v1"

# (dx, dy) direction pairs for the four win axes.
_AXES = ((1, 0), (0, 1), (1, 1), (1, -1))


class GameError(Exception):
    """Base class for rules-engine errors."""


class InvalidConfigError(GameError, ValueError):
    pass


class IllegalMoveError(GameError):
    """A move was rejected; the state it was applied to is unchanged."""

    def __init__(self, message: str, point: Optional["Point"] = None):
        super().__init__(message)
        self.point = point


class OccupiedCellError(IllegalMoveError):
    pass


class OutOfBoundsError(IllegalMoveError):
    pass


class GameOverError(IllegalMoveError):
    pass


class ReplayError(GameError):
    """Raised when a move list contains an illegal move; carries its index."""

    def __init__(self, index: int, cause: IllegalMoveError):
        super().__init__(f"illegal move at index {index}: {cause}")
        self.index = index
        self.cause = cause


class GameLogError(GameError, ValueError):
    pass


class Point(NamedTuple):
    x: int
    y: int


class Player(Enum):
    BLACK = 1
    WHITE = 2

    @property
    def opponent(self) -> "Player":
        return Player.WHITE if self is Player.BLACK else Player.BLACK

    @property
    def cell(self) -> int:
        """Cell code used in the board grid (1 = black, 2 = white)."""
        return self.value


@dataclass(frozen=True)
class GameConfig:
    board_x: int = 15
    board_y: int = 15
    win_length: int = 5

    def __post_init__(self) -> None:
        if self.board_x <= 0 or self.board_y <= 0:
            raise InvalidConfigError(
                f"board dimensions must be positive, got {self.board_x}x{self.board_y}"
            )
        if self.win_length <= 0:
            raise InvalidConfigError("win_length must be positive")
        if self.win_length > max(self.board_x, self.board_y):
            raise InvalidConfigError(
                f"win_length {self.win_length} exceeds board extent "
                f"{self.board_x}x{self.board_y}"
            )

    @property
    def n_cells(self) -> int:
        return self.board_x * self.board_y

    @property
    def is_square(self) -> bool:
        return self.board_x == self.board_y

    def in_bounds(self, p: Point) -> bool:
        return 0 <= p.x < self.board_x and 0 <= p.y < self.board_y

    def flat_index(self, p: Point) -> int:
        """Row-major cell index: y * board_x + x."""
        return p.y * self.board_x + p.x

    def point_at(self, index: int) -> Point:
        return Point(index % self.board_x, index // self.board_x)


@dataclass(frozen=True)
class Outcome:
    kind: str  # "ongoing" | "win" | "draw"
    winner: Optional[Player] = None

    @property
    def is_over(self) -> bool:
        return self.kind != "ongoing"


ONGOING = Outcome("ongoing")
DRAW = Outcome("draw")


def win(player: Player) -> Outcome:
    return Outcome("win", player)


class BoardState:
    """One position: grid of stones, player to move, and move history.

    ``cells`` has shape (board_y, board_x) so ``cells[y, x]`` addresses the
    cell at Point(x, y); values are 0 empty, 1 black, 2 white.
    """

    __slots__ = ("config", "cells", "to_move", "history", "outcome")

    def __init__(
        self,
        config: GameConfig,
        cells: np.ndarray,
        to_move: Player,
        history: tuple,
        outcome: Outcome,
    ):
        self.config = config
        self.cells = cells
        self.to_move = to_move
        self.history = history  # tuple of (Player, Point)
        self.outcome = outcome

    def cell(self, p: Point) -> int:
        return int(self.cells[p.y, p.x])

    @property
    def move_count(self) -> int:
        return len(self.history)

    @property
    def is_full(self) -> bool:
        return len(self.history) == self.config.n_cells

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BoardState):
            return NotImplemented
        return (
            self.config == other.config
            and self.to_move == other.to_move
            and self.history == other.history
            and np.array_equal(self.cells, other.cells)
        )

    def __repr__(self) -> str:
        return (
            f"BoardState({self.config.board_x}x{self.config.board_y}, "
            f"moves={len(self.history)}, to_move={self.to_move.name}, "
            f"outcome={self.outcome.kind})"
        )


def new_game(config: GameConfig) -> BoardState:
    """Fresh empty board with Black to move."""
    cells = np.zeros((config.board_y, config.board_x), dtype=np.int8)
    return BoardState(config, cells, Player.BLACK, (), ONGOING)


def legal_moves(state: BoardState) -> set[Point]:
    """Empty cells while the game is ongoing; the empty set once terminal."""
    if state.outcome.is_over:
        return set()
    ys, xs = np.nonzero(state.cells == EMPTY)
    return {Point(int(x), int(y)) for x, y in zip(xs, ys)}


def legal_indices(state: BoardState) -> np.ndarray:
    """Flat indices of legal moves, sorted ascending. Hot-path variant."""
    if state.outcome.is_over:
        return np.empty(0, dtype=np.int64)
    return np.nonzero(state.cells.ravel() == EMPTY)[0].astype(np.int64)


def line_through(
    cells: np.ndarray, p: Point, color: int, win_length: int
) -> bool:
    """True if a run of >= win_length stones of `color` passes through p."""
    by, bx = cells.shape
    for dx, dy in _AXES:
        count = 1
        for sign in (1, -1):
            x, y = p.x + sign * dx, p.y + sign * dy
            while 0 <= x < bx and 0 <= y < by and cells[y, x] == color:
                count += 1
                x += sign * dx
                y += sign * dy
        if count >= win_length:
            return True
    return False


def apply_move(state: BoardState, p: Point) -> BoardState:
    """Place a stone for the player to move; returns the successor state."""
    if state.outcome.is_over:
        raise GameOverError(f"game is over ({state.outcome.kind})", p)
    if not state.config.in_bounds(p):
        raise OutOfBoundsError(f"point {p} outside {state.config.board_x}x{state.config.board_y} board", p)
    if state.cells[p.y, p.x] != EMPTY:
        raise OccupiedCellError(f"cell {p} is occupied", p)

    mover = state.to_move
    cells = state.cells.copy()
    cells[p.y, p.x] = mover.cell
    history = state.history + ((mover, p),)

    if line_through(cells, p, mover.cell, state.config.win_length):
        outcome = win(mover)
    elif len(history) == state.config.n_cells:
        outcome = DRAW
    else:
        outcome = ONGOING
    return BoardState(state.config, cells, mover.opponent, history, outcome)


def check_outcome(state: BoardState) -> Outcome:
    return state.outcome


def replay(config: GameConfig, moves: Sequence[Point]) -> BoardState:
    """Fold apply_move over a move list; reports the first illegal move."""
    state = new_game(config)
    for i, p in enumerate(moves):
        try:
            state = apply_move(state, Point(*p))
        except IllegalMoveError as e:
            raise ReplayError(i, e) from e
    return state


def moves_of(state: BoardState) -> list[Point]:
    return [p for _, p in state.history]


def format_game_log(config: GameConfig, moves: Iterable[Point]) -> str:
    """Move-list text format: header line, then one "x,y" per line."""
    lines = [f"{GAME_LOG_HEADER} {config.board_x} {config.board_y} {config.win_length}"]
    lines.extend(f"{p.x},{p.y}" for p in moves)
    return "\n".join(lines) + "\n"


def parse_game_log(text: str) -> tuple[GameConfig, list[Point]]:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise GameLogError("empty game log")
    header = lines[0].split()
    if len(header) != 5 or " ".join(header[:2]) != GAME_LOG_HEADER:
        raise GameLogError(f"bad game log header: {lines[0]!r}")
    try:
        bx, by, wl = (int(v) for v in header[2:])
    except ValueError as e:
        raise GameLogError(f"bad game log header: {lines[0]!r}") from e
    config = GameConfig(bx, by, wl)
    moves = []
    for i, ln in enumerate(lines[1:]):
        parts = ln.split(",")
        if len(parts) != 2:
            raise GameLogError(f"bad move on line {i + 2}: {ln!r}")
        try:
            moves.append(Point(int(parts[0]), int(parts[1])))
        except ValueError as e:
            raise GameLogError(f"bad move on line {i + 2}: {ln!r}") from e
    return config, moves
