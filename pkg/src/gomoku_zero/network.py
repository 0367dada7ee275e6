"""Dual-head convolutional policy-value network.

Torch supplies the tensor ops and autograd; everything observable is pinned
down here: deterministic seeded init, softmax policy over board cells,
tanh value in [-1, 1], cross-entropy + MSE loss reported additively, SGD
with momentum 0.9 and L2 weight decay 1e-4 (weight decay never appears in
the loss report), and a binary checkpoint format (magic ``AZCK``).
"""

from __future__ import annotations

import io
import json
import math
import struct
from dataclasses import asdict, dataclass, field
from typing import BinaryIO, Optional, Sequence

import numpy as np
import torch
from torch import nn

from .features import N_PLANES, TrainingSample
from .game import GameError

CHECKPOINT_MAGIC = b"AZCK"
CHECKPOINT_VERSION = 1

LOG_EPSILON = 1e-10
MOMENTUM = 0.9
WEIGHT_DECAY = 1e-4


class ShapeMismatchError(GameError, ValueError):
    pass


class NonFiniteGradientError(GameError):
    pass


class CorruptCheckpointError(GameError, ValueError):
    def __init__(self, field_name: str, message: str = ""):
        super().__init__(f"corrupt checkpoint ({field_name}){': ' + message if message else ''}")
        self.field_name = field_name


@dataclass(frozen=True)
class NetworkConfig:
    board_x: int
    board_y: int
    input_planes: int = N_PLANES
    trunk_channels: int = 64
    trunk_blocks: int = 4
    policy_channels: int = 2
    value_channels: int = 1
    value_hidden: int = 64
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("board_x", "board_y", "input_planes", "trunk_channels",
                     "trunk_blocks", "policy_channels", "value_channels", "value_hidden"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.input_planes != N_PLANES:
            raise ValueError(f"input_planes must be {N_PLANES} to match the state encoding")

    @property
    def n_cells(self) -> int:
        return self.board_x * self.board_y


@dataclass(frozen=True)
class CyclicLRConfig:
    base_lr: float = 1e-6
    max_lr: float = 5e-3
    half_cycle_steps: int = 2000
    mode: str = "triangular"

    def __post_init__(self) -> None:
        if not (0 < self.base_lr < self.max_lr):
            raise ValueError("requires 0 < base_lr < max_lr")
        if self.half_cycle_steps <= 0:
            raise ValueError("half_cycle_steps must be positive")
        if self.mode != "triangular":
            raise ValueError(f"unsupported mode {self.mode!r}")


def cyclic_lr(step: int, cfg: CyclicLRConfig) -> float:
    """Triangular wave between base_lr and max_lr, period 2*half_cycle_steps."""
    if step < 0:
        raise ValueError("step must be nonnegative")
    # Integer modulo first: keeps the wave exactly periodic.
    cycle_pos = step % (2 * cfg.half_cycle_steps)
    x = 1.0 - abs(cycle_pos / cfg.half_cycle_steps - 1.0)
    # Hit the endpoints exactly rather than through float round trips.
    if x == 0.0:
        return cfg.base_lr
    if x == 1.0:
        return cfg.max_lr
    return cfg.base_lr + (cfg.max_lr - cfg.base_lr) * x


@dataclass
class LossReport:
    policy_loss: float
    value_loss: float
    total_loss: float = field(init=False)

    def __post_init__(self) -> None:
        self.total_loss = self.policy_loss + self.value_loss


class _ResidualBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1)

    def forward(self, x):
        y = torch.relu(self.conv1(x))
        y = self.conv2(y)
        return torch.relu(x + y)


class _Net(nn.Module):
    """Trunk of 3x3 convs plus the two heads from the output spec."""

    def __init__(self, cfg: NetworkConfig):
        super().__init__()
        c = cfg.trunk_channels
        self.conv_in = nn.Conv2d(cfg.input_planes, c, 3, padding=1)
        self.blocks = nn.ModuleList(_ResidualBlock(c) for _ in range(cfg.trunk_blocks))
        self.policy_conv = nn.Conv2d(c, cfg.policy_channels, 1)
        self.policy_fc = nn.Linear(cfg.policy_channels * cfg.n_cells, cfg.n_cells)
        self.value_conv = nn.Conv2d(c, cfg.value_channels, 1)
        self.value_fc1 = nn.Linear(cfg.value_channels * cfg.n_cells, cfg.value_hidden)
        self.value_fc2 = nn.Linear(cfg.value_hidden, 1)

    def forward(self, x):
        x = torch.relu(self.conv_in(x))
        for block in self.blocks:
            x = block(x)
        logits = self.policy_fc(self.policy_conv(x).flatten(1))
        v = torch.relu(self.value_fc1(self.value_conv(x).flatten(1)))
        v = torch.tanh(self.value_fc2(v)).squeeze(1)
        return logits, v


def _he_init(module: nn.Module, seed: int) -> None:
    """Fan-in scaled normal weights, zero biases; bit-deterministic per seed."""
    gen = torch.Generator().manual_seed(seed)
    for name, p in module.named_parameters():
        with torch.no_grad():
            if name.endswith("bias"):
                p.zero_()
            else:
                fan_in = int(np.prod(p.shape[1:]))
                p.copy_(torch.randn(p.shape, generator=gen, dtype=torch.float64)
                        .to(p.dtype) * math.sqrt(2.0 / fan_in))


def pack_samples(
    samples: Sequence[TrainingSample],
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    states = np.stack([s.state for s in samples]).astype(np.float32)
    targets = np.stack([np.asarray(s.policy, dtype=np.float32) for s in samples])
    zs = np.array([s.z for s in samples], dtype=np.float32)
    return states, targets, zs


class PolicyValueNet:
    """Wraps the torch module with the training-facing contract."""

    def __init__(self, config: NetworkConfig, dtype: torch.dtype = torch.float32):
        self.config = config
        self.dtype = dtype
        self.module = _Net(config).to(dtype)
        _he_init(self.module, config.seed)
        self.optimizer = torch.optim.SGD(
            self.module.parameters(), lr=1.0, momentum=MOMENTUM, weight_decay=WEIGHT_DECAY
        )

    # ------------------------------------------------------------------
    # Inference
    # ------------------------------------------------------------------

    def _to_batch(self, states) -> torch.Tensor:
        if isinstance(states, np.ndarray) and states.ndim == 3:
            states = states[None]
        elif not isinstance(states, np.ndarray):
            states = np.stack(list(states))
        expected = (N_PLANES, self.config.board_x, self.config.board_y)
        if states.ndim != 4 or states.shape[1:] != expected:
            raise ShapeMismatchError(
                f"expected state batch (B, {expected[0]}, {expected[1]}, {expected[2]}), "
                f"got {states.shape}"
            )
        return torch.from_numpy(np.ascontiguousarray(states)).to(self.dtype)

    def forward(self, states) -> tuple[np.ndarray, np.ndarray]:
        """Policy probabilities (softmax over all cells) and tanh values."""
        batch = self._to_batch(states)
        with torch.no_grad():
            logits, v = self.module(batch)
            probs = torch.softmax(logits, dim=1)
        return probs.numpy().astype(np.float32), v.numpy().astype(np.float32)

    # ------------------------------------------------------------------
    # Loss and optimization
    # ------------------------------------------------------------------

    def _loss_terms(self, states_t, targets_t, z_t):
        logits, v = self.module(states_t)
        probs = torch.softmax(logits, dim=1)
        # Clamp guards log underflow; a perfect prediction costs exactly 0.
        policy_loss = -(targets_t * torch.log(probs.clamp_min(LOG_EPSILON))).sum(dim=1).mean()
        value_loss = ((v - z_t) ** 2).mean()
        return policy_loss, value_loss

    def _pack_torch(self, samples: Sequence[TrainingSample]):
        states, targets, zs = pack_samples(samples)
        return (
            torch.from_numpy(states).to(self.dtype),
            torch.from_numpy(targets).to(self.dtype),
            torch.from_numpy(zs).to(self.dtype),
        )

    def loss(self, samples: Sequence[TrainingSample]) -> LossReport:
        if not samples:
            raise ValueError("loss over an empty batch")
        with torch.no_grad():
            pl, vl = self._loss_terms(*self._pack_torch(samples))
        return LossReport(float(pl), float(vl))

    def train_step(self, samples: Sequence[TrainingSample], lr: float) -> LossReport:
        """One SGD-with-momentum step on policy + value loss.

        The returned report is evaluated at the pre-step weights. On a
        non-finite gradient the step is rejected and weights are untouched.
        """
        if lr < 0:
            raise ValueError("lr must be nonnegative")
        self.optimizer.zero_grad(set_to_none=True)
        pl, vl = self._loss_terms(*self._pack_torch(samples))
        total = pl + vl
        total.backward()
        for name, p in self.module.named_parameters():
            if p.grad is not None and not torch.isfinite(p.grad).all():
                self.optimizer.zero_grad(set_to_none=True)
                raise NonFiniteGradientError(f"non-finite gradient in {name}")
        for group in self.optimizer.param_groups:
            group["lr"] = lr
        self.optimizer.step()
        return LossReport(float(pl.detach()), float(vl.detach()))

    def gradients(self, samples: Sequence[TrainingSample]) -> dict[str, np.ndarray]:
        """Analytic d(total_loss)/d(param), without weight decay. Test hook."""
        pl, vl = self._loss_terms(*self._pack_torch(samples))
        params = dict(self.module.named_parameters())
        grads = torch.autograd.grad(pl + vl, list(params.values()))
        return {name: g.detach().numpy().copy() for name, g in zip(params, grads)}

    # ------------------------------------------------------------------
    # Weights as named arrays
    # ------------------------------------------------------------------

    def named_arrays(self) -> dict[str, np.ndarray]:
        """Parameters plus any momentum buffers, as float32 arrays."""
        out = {}
        for name, p in self.module.named_parameters():
            out[name] = p.detach().to(torch.float32).numpy().copy()
        for name, p in self.module.named_parameters():
            state = self.optimizer.state.get(p, {})
            buf = state.get("momentum_buffer")
            if buf is not None:
                out[f"momentum/{name}"] = buf.detach().to(torch.float32).numpy().copy()
        return out

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        params = dict(self.module.named_parameters())
        for name, p in params.items():
            if name not in arrays:
                raise CorruptCheckpointError(name, "missing array")
            a = arrays[name]
            if tuple(a.shape) != tuple(p.shape):
                raise ShapeMismatchError(
                    f"array {name}: checkpoint shape {tuple(a.shape)} vs model {tuple(p.shape)}"
                )
            with torch.no_grad():
                p.copy_(torch.from_numpy(np.ascontiguousarray(a)).to(p.dtype))
        for name, a in arrays.items():
            if name.startswith("momentum/"):
                pname = name[len("momentum/"):]
                if pname not in params:
                    raise CorruptCheckpointError(name, "momentum for unknown parameter")
                p = params[pname]
                self.optimizer.state[p]["momentum_buffer"] = (
                    torch.from_numpy(np.ascontiguousarray(a)).to(p.dtype)
                )

    def clone(self) -> "PolicyValueNet":
        return from_bytes(to_bytes(self))


# ----------------------------------------------------------------------
# Checkpoint format
# ----------------------------------------------------------------------


@dataclass
class CheckpointMeta:
    config: NetworkConfig
    step: int
    lr_schedule: Optional[CyclicLRConfig] = None
    extra: dict = field(default_factory=dict)


def _write_array(f: BinaryIO, name: str, a: np.ndarray) -> None:
    encoded = name.encode("utf-8")
    f.write(struct.pack("<H", len(encoded)))
    f.write(encoded)
    f.write(struct.pack("<B", a.ndim))
    for d in a.shape:
        f.write(struct.pack("<I", d))
    f.write(np.ascontiguousarray(a, dtype="<f4").tobytes())


def write_checkpoint(
    f: BinaryIO,
    net: PolicyValueNet,
    step: int = 0,
    lr_schedule: Optional[CyclicLRConfig] = None,
    extra: Optional[dict] = None,
) -> None:
    meta = {
        "network": asdict(net.config),
        "lr_schedule": asdict(lr_schedule) if lr_schedule else None,
        "extra": extra or {},
    }
    blob = json.dumps(meta).encode("utf-8")
    f.write(CHECKPOINT_MAGIC)
    f.write(struct.pack("<I", CHECKPOINT_VERSION))
    f.write(struct.pack("<I", len(blob)))
    f.write(blob)
    f.write(struct.pack("<Q", step))
    arrays = net.named_arrays()
    f.write(struct.pack("<I", len(arrays)))
    for name, a in arrays.items():
        _write_array(f, name, a)


def _read_exact(f: BinaryIO, n: int, field_name: str) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise CorruptCheckpointError(field_name, "truncated")
    return data


def read_checkpoint(
    f: BinaryIO, expected_config: Optional[NetworkConfig] = None
) -> tuple[PolicyValueNet, CheckpointMeta]:
    magic = _read_exact(f, 4, "magic")
    if magic != CHECKPOINT_MAGIC:
        raise CorruptCheckpointError("magic", f"got {magic!r}")
    (version,) = struct.unpack("<I", _read_exact(f, 4, "version"))
    if version != CHECKPOINT_VERSION:
        raise CorruptCheckpointError("version", f"unsupported version {version}")
    (meta_len,) = struct.unpack("<I", _read_exact(f, 4, "meta length"))
    try:
        meta_raw = json.loads(_read_exact(f, meta_len, "meta").decode("utf-8"))
        config = NetworkConfig(**meta_raw["network"])
    except (ValueError, KeyError, TypeError) as e:
        raise CorruptCheckpointError("meta", str(e)) from e
    (step,) = struct.unpack("<Q", _read_exact(f, 8, "step"))
    (n_arrays,) = struct.unpack("<I", _read_exact(f, 4, "array count"))
    arrays = {}
    for _ in range(n_arrays):
        (name_len,) = struct.unpack("<H", _read_exact(f, 2, "array name length"))
        name = _read_exact(f, name_len, "array name").decode("utf-8")
        (rank,) = struct.unpack("<B", _read_exact(f, 1, f"{name} rank"))
        shape = tuple(
            struct.unpack("<I", _read_exact(f, 4, f"{name} dims"))[0] for _ in range(rank)
        )
        size = int(np.prod(shape)) if shape else 1
        data = _read_exact(f, 4 * size, f"{name} data")
        arrays[name] = np.frombuffer(data, dtype="<f4").reshape(shape).copy()

    build_config = expected_config or config
    net = PolicyValueNet(build_config)
    net.load_arrays(arrays)

    lr_cfg = None
    if meta_raw.get("lr_schedule"):
        lr_cfg = CyclicLRConfig(**meta_raw["lr_schedule"])
    return net, CheckpointMeta(config=config, step=step, lr_schedule=lr_cfg,
                               extra=meta_raw.get("extra", {}))


def save_checkpoint(
    path,
    net: PolicyValueNet,
    step: int = 0,
    lr_schedule: Optional[CyclicLRConfig] = None,
    extra: Optional[dict] = None,
) -> None:
    with open(path, "wb") as f:
        write_checkpoint(f, net, step=step, lr_schedule=lr_schedule, extra=extra)


def load_checkpoint(
    path, expected_config: Optional[NetworkConfig] = None
) -> tuple[PolicyValueNet, CheckpointMeta]:
    with open(path, "rb") as f:
        return read_checkpoint(f, expected_config=expected_config)


def to_bytes(net: PolicyValueNet) -> bytes:
    buf = io.BytesIO()
    write_checkpoint(buf, net)
    return buf.getvalue()


def from_bytes(data: bytes) -> PolicyValueNet:
    net, _ = read_checkpoint(io.BytesIO(data))
    return net
