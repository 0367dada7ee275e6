"""PUCT tree search guided by the policy-value network.

Edge statistics live on the parent node as flat arrays over its legal
actions (sorted by flat cell index, so argmax tie-breaks deterministically
toward the lowest cell). Values are always stored from the perspective of
the player to move at the node owning the edge; backup negates the leaf
value once per ply on the way up.

Selection maximizes  Q(a) + c_puct * P(a) * sqrt(sum_b N(b)) / (1 + N(a)),
with Q(a) = W(a)/N(a) and Q = 0 for unvisited edges. Terminal leaves are
scored exactly (-1 for the player to move facing a completed win, 0 for a
draw) instead of calling the network.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass

import numpy as np

from .features import encode_state, mask_and_renormalize
from .game import BoardState, GameError, Point, apply_move, legal_indices


class TerminalRootError(GameError):
    pass


class UnknownChildError(GameError):
    pass


@dataclass(frozen=True)
class SearchParams:
    n_simulations: int = 400
    c_puct: float = 1.5
    dirichlet_alpha: float = 0.3
    dirichlet_epsilon: float = 0.25
    temperature: float = 1.0

    def __post_init__(self) -> None:
        if self.n_simulations <= 0:
            raise ValueError("n_simulations must be positive")
        if self.c_puct <= 0:
            raise ValueError("c_puct must be positive")
        if self.dirichlet_alpha <= 0:
            raise ValueError("dirichlet_alpha must be positive")
        if not 0.0 <= self.dirichlet_epsilon <= 1.0:
            raise ValueError("dirichlet_epsilon must be in [0, 1]")
        if self.temperature < 0:
            raise ValueError("temperature must be nonnegative")


@dataclass
class SearchResult:
    visit_counts: np.ndarray  # (n_cells,) int64 root visit counts
    visit_distribution: np.ndarray  # (n_cells,) float64, sums to 1
    root_value: float
    principal_variation: list[Point]
    simulations: int
    board_x: int


class SearchNode:
    __slots__ = ("state", "terminal_value", "expanded", "actions", "P", "N", "W", "children")

    def __init__(self, state: BoardState):
        self.state = state
        if state.outcome.kind == "win":
            self.terminal_value = -1.0  # the player to move has lost
        elif state.outcome.kind == "draw":
            self.terminal_value = 0.0
        else:
            self.terminal_value = None
        self.expanded = False
        self.actions: np.ndarray | None = None
        self.P: np.ndarray | None = None
        self.N: np.ndarray | None = None
        self.W: np.ndarray | None = None
        self.children: dict[int, SearchNode] = {}

    def expand(self, priors_flat: np.ndarray) -> None:
        self.actions = legal_indices(self.state)
        self.P = priors_flat[self.actions].astype(np.float64)
        self.N = np.zeros(self.actions.size, dtype=np.int64)
        self.W = np.zeros(self.actions.size, dtype=np.float64)
        self.expanded = True

    def select(self, c_puct: float) -> int:
        """Index (into the action arrays) of the PUCT-maximizing edge."""
        q = np.where(self.N > 0, self.W / np.maximum(self.N, 1), 0.0)
        u = c_puct * self.P * math.sqrt(self.N.sum()) / (1.0 + self.N)
        return int(np.argmax(q + u))

    def child(self, i: int) -> "SearchNode":
        a = int(self.actions[i])
        node = self.children.get(a)
        if node is None:
            p = self.state.config.point_at(a)
            node = SearchNode(apply_move(self.state, p))
            self.children[a] = node
        return node


def evaluate_state(net, state: BoardState) -> tuple[np.ndarray, float]:
    """Legality-masked prior over all cells plus the network value."""
    probs, values = net.forward(encode_state(state)[None])
    priors = mask_and_renormalize(probs[0], legal_indices(state), state.config.board_x)
    return priors, float(values[0])


class SearchTree:
    """A search tree rooted at one position; supports subtree reuse."""

    def __init__(self, root_state: BoardState):
        self._root = SearchNode(root_state)

    @property
    def root_state(self) -> BoardState:
        return self._root.state

    def advance(self, move: Point) -> None:
        """Make the child along `move` the new root, keeping its statistics."""
        root = self._root
        state = root.state
        if (
            state.outcome.is_over
            or not state.config.in_bounds(move)
            or state.cell(move) != 0
        ):
            raise UnknownChildError(f"{move} is not a child of the current root")
        a = state.config.flat_index(move)
        child = root.children.get(a)
        if child is None:
            child = SearchNode(apply_move(state, move))
        self._root = child

    def run(
        self,
        net,
        params: SearchParams,
        rng: np.random.Generator | None = None,
        leaf_batch: int = 1,
        time_budget_s: float | None = None,
        trace=None,
    ) -> SearchResult:
        """Run params.n_simulations select/expand/evaluate/backup passes.

        leaf_batch > 1 enables batched leaf evaluation with virtual loss
        1.0 (performance mode); leaf_batch = 1 is the reference behavior.
        A time budget, when given, stops early and returns the counts so
        far (best-so-far play is then argmax-N as usual).
        """
        root = self._root
        if root.terminal_value is not None:
            raise TerminalRootError("cannot search a finished position")
        if not root.expanded:
            priors, _ = evaluate_state(net, root.state)
            root.expand(priors)
        if params.dirichlet_epsilon > 0.0:
            if rng is None:
                raise ValueError("dirichlet noise requires an rng")
            noise = rng.dirichlet(np.full(root.actions.size, params.dirichlet_alpha))
            root.P = (1.0 - params.dirichlet_epsilon) * root.P + params.dirichlet_epsilon * noise

        deadline = None if time_budget_s is None else time.monotonic() + time_budget_s
        done = 0
        while done < params.n_simulations:
            if deadline is not None and time.monotonic() >= deadline and done > 0:
                break
            batch = min(leaf_batch, params.n_simulations - done)
            done += self._run_batch(net, params, batch, trace)
        return self._result(done)

    # ------------------------------------------------------------------

    def _run_batch(self, net, params: SearchParams, batch: int, trace) -> int:
        """Collect up to `batch` leaves under virtual loss, evaluate, back up."""
        pending = []  # (path_edges, leaf_node)
        pending_ids = set()
        launched = 0
        for _ in range(batch):
            node = self._root
            edges = []
            while node.expanded and node.terminal_value is None:
                i = node.select(params.c_puct)
                edges.append((node, i))
                node.N[i] += 1  # virtual loss
                node.W[i] -= 1.0
                node = node.child(i)
            launched += 1
            if node.terminal_value is not None:
                self._revert_virtual(edges)
                self._backup(edges, node.terminal_value, trace)
            elif id(node) in pending_ids:
                # Same unexpanded leaf twice: stop collecting, keep one.
                self._revert_virtual(edges)
                launched -= 1
                break
            else:
                pending.append((edges, node))
                pending_ids.add(id(node))

        if pending:
            states = np.stack([encode_state(leaf.state) for _, leaf in pending])
            probs, values = net.forward(states)
            for (edges, leaf), p, v in zip(pending, probs, values):
                priors = mask_and_renormalize(
                    p, legal_indices(leaf.state), leaf.state.config.board_x
                )
                leaf.expand(priors)
                self._revert_virtual(edges)
                self._backup(edges, float(v), trace)
        return launched

    @staticmethod
    def _revert_virtual(edges) -> None:
        for node, i in edges:
            node.N[i] -= 1
            node.W[i] += 1.0

    def _backup(self, edges, leaf_value: float, trace) -> None:
        val = leaf_value
        for node, i in reversed(edges):
            val = -val
            node.N[i] += 1
            node.W[i] += val
        if trace is not None:
            entry = {
                "path": [int(node.actions[i]) for node, i in edges],
                "value": val,
            }
            if hasattr(trace, "write"):
                trace.write(json.dumps(entry) + "\n")
            else:
                trace.append(entry)

    def _result(self, simulations: int) -> SearchResult:
        root = self._root
        n_cells = root.state.config.n_cells
        counts = np.zeros(n_cells, dtype=np.int64)
        counts[root.actions] = root.N
        total = counts.sum()
        if total > 0:
            dist = counts / total
            root_value = float(root.W.sum() / total)
        else:
            dist = np.zeros(n_cells, dtype=np.float64)
            dist[root.actions] = 1.0 / root.actions.size
            root_value = 0.0
        return SearchResult(
            visit_counts=counts,
            visit_distribution=dist,
            root_value=root_value,
            principal_variation=self._principal_variation(),
            simulations=simulations,
            board_x=root.state.config.board_x,
        )

    def _principal_variation(self) -> list[Point]:
        pv = []
        node = self._root
        while node.expanded and node.terminal_value is None and node.N.sum() > 0:
            i = int(np.argmax(node.N))
            a = int(node.actions[i])
            pv.append(node.state.config.point_at(a))
            nxt = node.children.get(a)
            if nxt is None:
                break
            node = nxt
        return pv


def run_search(
    state: BoardState,
    net,
    params: SearchParams,
    rng: np.random.Generator | None = None,
    **kwargs,
) -> SearchResult:
    """Search from a bare position with a fresh tree."""
    return SearchTree(state).run(net, params, rng=rng, **kwargs)


def select_move(
    result: SearchResult, temperature: float, rng: np.random.Generator | None = None
) -> Point:
    """Visit-count action selection.

    temperature 0 picks the argmax-N move (ties to the lowest cell index);
    temperature t > 0 samples proportional to N ** (1/t).
    """
    counts = result.visit_counts
    if temperature == 0.0 or counts.max() == 0:
        idx = int(np.argmax(counts if counts.max() > 0 else result.visit_distribution))
    else:
        if rng is None:
            raise ValueError("sampling with temperature > 0 requires an rng")
        scaled = (counts / counts.max()).astype(np.float64) ** (1.0 / temperature)
        probs = scaled / scaled.sum()
        idx = int(rng.choice(counts.size, p=probs))
    return Point(idx % result.board_x, idx // result.board_x)
