"""State encoding, board symmetries, and policy legality masking.

Conventions used throughout:

* State tensors have shape (21, board_x, board_y): plane 0 is the current
  position, plane k the position k half-moves earlier, all rendered from
  the perspective of the player to move (+1 own stone, -1 opponent stone,
  0 empty). Planes beyond the available history stay all-zero.
* Policy vectors have length board_x * board_y in row-major cell order,
  index = y * board_x + x.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum
from typing import BinaryIO, Iterable, Sequence

import numpy as np

from .game import BoardState, GameError, Point

N_PLANES = 21
SAMPLE_FILE_MAGIC = b"AZED"
SAMPLE_FILE_VERSION = 1


class NonSquareRotationError(GameError):
    pass


class NoLegalMovesError(GameError):
    pass


class SampleFileError(GameError, ValueError):
    pass


class Transform(Enum):
    """The 8 symmetries of a square board.

    FLIP_DIAG and FLIP_ANTIDIAG are the two flip-compose-rot90 elements
    (reflections across the main and anti diagonal).
    """

    IDENTITY = 0
    ROT90 = 1
    ROT180 = 2
    ROT270 = 3
    FLIP_H = 4
    FLIP_V = 5
    FLIP_DIAG = 6
    FLIP_ANTIDIAG = 7


# Transforms valid on non-square boards (shape preserving).
SHAPE_PRESERVING = (Transform.IDENTITY, Transform.ROT180, Transform.FLIP_H, Transform.FLIP_V)


def _require_square(g: Transform, bx: int, by: int) -> None:
    if g not in SHAPE_PRESERVING and bx != by:
        raise NonSquareRotationError(
            f"{g.name} requires a square board, got {bx}x{by}"
        )


def transform_point(p: Point, g: Transform, board_x: int, board_y: int) -> Point:
    """Image of a cell under g. Rotations are counterclockwise."""
    _require_square(g, board_x, board_y)
    x, y = p
    n = board_x
    if g is Transform.IDENTITY:
        return Point(x, y)
    if g is Transform.ROT90:
        return Point(y, n - 1 - x)
    if g is Transform.ROT180:
        return Point(board_x - 1 - x, board_y - 1 - y)
    if g is Transform.ROT270:
        return Point(n - 1 - y, x)
    if g is Transform.FLIP_H:
        return Point(board_x - 1 - x, y)
    if g is Transform.FLIP_V:
        return Point(x, board_y - 1 - y)
    if g is Transform.FLIP_DIAG:
        return Point(y, x)
    if g is Transform.FLIP_ANTIDIAG:
        return Point(n - 1 - y, n - 1 - x)
    raise ValueError(f"unknown transform {g}")


def transform_grid(a: np.ndarray, g: Transform) -> np.ndarray:
    """Apply g to an array whose last two axes are (x, y)."""
    bx, by = a.shape[-2], a.shape[-1]
    _require_square(g, bx, by)
    if g is Transform.IDENTITY:
        out = a
    elif g is Transform.ROT90:
        out = a[..., ::-1, :].swapaxes(-2, -1)
    elif g is Transform.ROT180:
        out = a[..., ::-1, ::-1]
    elif g is Transform.ROT270:
        out = a.swapaxes(-2, -1)[..., ::-1, :]
    elif g is Transform.FLIP_H:
        out = a[..., ::-1, :]
    elif g is Transform.FLIP_V:
        out = a[..., :, ::-1]
    elif g is Transform.FLIP_DIAG:
        out = a.swapaxes(-2, -1)
    elif g is Transform.FLIP_ANTIDIAG:
        out = a.swapaxes(-2, -1)[..., ::-1, ::-1]
    else:
        raise ValueError(f"unknown transform {g}")
    return np.ascontiguousarray(out)


def _build_group_tables() -> tuple[dict, dict]:
    """Derive the composition and inverse tables from the cell action."""
    n = 4
    base = np.arange(n * n).reshape(n, n)
    perms = {g: transform_grid(base, g) for g in Transform}

    def find(perm: np.ndarray) -> Transform:
        for g, q in perms.items():
            if np.array_equal(q, perm):
                return g
        raise AssertionError("composition left the dihedral group")

    compose_table = {}
    inverse_table = {}
    for g1 in Transform:
        for g2 in Transform:
            product = find(transform_grid(perms[g1], g2))
            compose_table[(g2, g1)] = product
            if product is Transform.IDENTITY:
                inverse_table[g1] = g2
    return compose_table, inverse_table


_COMPOSE, _INVERSE = _build_group_tables()


def compose(g2: Transform, g1: Transform) -> Transform:
    """The transform equal to applying g1 first, then g2."""
    return _COMPOSE[(g2, g1)]


def inverse(g: Transform) -> Transform:
    return _INVERSE[g]


def encode_state(state: BoardState) -> np.ndarray:
    """Encode a position as a (21, board_x, board_y) float32 tensor."""
    cfg = state.config
    planes = np.zeros((N_PLANES, cfg.board_x, cfg.board_y), dtype=np.float32)
    me = state.to_move.cell
    opp = state.to_move.opponent.cell
    # Signed grid indexed [y, x]; transposed into the (x, y) plane layout.
    signed = np.zeros(state.cells.shape, dtype=np.float32)
    signed[state.cells == me] = 1.0
    signed[state.cells == opp] = -1.0
    planes[0] = signed.T
    h = len(state.history)
    for k in range(1, min(N_PLANES - 1, h) + 1):
        _, p = state.history[h - k]
        signed = signed.copy()
        signed[p.y, p.x] = 0.0
        planes[k] = signed.T
    return planes


def transform_state_tensor(t: np.ndarray, g: Transform) -> np.ndarray:
    """Permute every plane of a state tensor by the cell action of g."""
    return transform_grid(t, g)


def transform_policy(d: np.ndarray, g: Transform, board_x: int, board_y: int) -> np.ndarray:
    """Permute a flat policy vector by the same cell action as the planes."""
    grid_xy = np.asarray(d).reshape(board_y, board_x).T
    out = transform_grid(grid_xy, g)
    return np.ascontiguousarray(out.T).ravel()


@dataclass
class TrainingSample:
    """One (state, search target, outcome) triple.

    ``z`` is the final game outcome from the perspective of the player to
    move in ``state``: +1 win, -1 loss, 0 draw.
    """

    state: np.ndarray  # (21, board_x, board_y) float32
    policy: np.ndarray  # (board_x * board_y,) probabilities
    z: int

    def __post_init__(self) -> None:
        if self.z not in (-1, 0, 1):
            raise ValueError(f"z must be -1, 0, or +1, got {self.z}")


def augment_sample(sample: TrainingSample) -> list[TrainingSample]:
    """The 8 dihedral images of a sample; state and policy move together."""
    _, bx, by = sample.state.shape
    out = []
    for g in Transform:
        out.append(
            TrainingSample(
                state=transform_state_tensor(sample.state, g),
                policy=transform_policy(sample.policy, g, bx, by),
                z=sample.z,
            )
        )
    return out


def mask_and_renormalize(
    raw: np.ndarray, legal: Iterable[Point] | np.ndarray, board_x: int
) -> np.ndarray:
    """Zero illegal cells and renormalize the legal mass to sum to 1.

    ``legal`` is either a collection of Points or a flat index array.
    When the network puts zero mass on every legal cell, falls back to
    the uniform distribution over legal cells.
    """
    raw = np.asarray(raw, dtype=np.float64).ravel()
    if np.any(raw < 0):
        raise ValueError("raw scores must be nonnegative")
    if isinstance(legal, np.ndarray):
        idx = legal.astype(np.int64)
    else:
        idx = np.array(sorted(p.y * board_x + p.x for p in legal), dtype=np.int64)
    if idx.size == 0:
        raise NoLegalMovesError("no legal moves to renormalize over")
    out = np.zeros_like(raw)
    vals = raw[idx]
    total = vals.sum()
    if total > 0.0:
        out[idx] = vals / total
    else:
        out[idx] = 1.0 / idx.size
    return out


def write_samples(f: BinaryIO, samples: Sequence[TrainingSample]) -> None:
    """Write samples in the binary batch-file format (magic ``AZED``)."""
    if not samples:
        raise SampleFileError("cannot write an empty sample file")
    planes, bx, by = samples[0].state.shape
    if planes != N_PLANES:
        raise SampleFileError(f"expected {N_PLANES} planes, got {planes}")
    f.write(SAMPLE_FILE_MAGIC)
    f.write(struct.pack("<IHHB", SAMPLE_FILE_VERSION, bx, by, N_PLANES))
    for s in samples:
        if s.state.shape != (planes, bx, by):
            raise SampleFileError(f"inconsistent state shape {s.state.shape}")
        state_i8 = np.rint(s.state).astype(np.int8)
        f.write(state_i8.tobytes())
        f.write(np.asarray(s.policy, dtype="<f4").tobytes())
        f.write(struct.pack("<b", int(s.z)))


def read_samples(f: BinaryIO) -> list[TrainingSample]:
    magic = f.read(4)
    if magic != SAMPLE_FILE_MAGIC:
        raise SampleFileError(f"bad magic {magic!r}")
    header = f.read(9)
    if len(header) != 9:
        raise SampleFileError("truncated header")
    version, bx, by, planes = struct.unpack("<IHHB", header)
    if version != SAMPLE_FILE_VERSION:
        raise SampleFileError(f"unsupported version {version}")
    if planes != N_PLANES:
        raise SampleFileError(f"expected {N_PLANES} planes, got {planes}")
    state_bytes = planes * bx * by
    policy_bytes = 4 * bx * by
    record_bytes = state_bytes + policy_bytes + 1
    samples = []
    while True:
        rec = f.read(record_bytes)
        if not rec:
            break
        if len(rec) != record_bytes:
            raise SampleFileError(f"truncated record {len(samples)}")
        state = (
            np.frombuffer(rec[:state_bytes], dtype=np.int8)
            .reshape(planes, bx, by)
            .astype(np.float32)
        )
        policy = np.frombuffer(
            rec[state_bytes : state_bytes + policy_bytes], dtype="<f4"
        ).copy()
        (z,) = struct.unpack("<b", rec[-1:])
        samples.append(TrainingSample(state=state, policy=policy, z=int(z)))
    return samples


def save_samples(path, samples: Sequence[TrainingSample]) -> None:
    with open(path, "wb") as f:
        write_samples(f, samples)


def load_samples(path) -> list[TrainingSample]:
    with open(path, "rb") as f:
        return read_samples(f)
