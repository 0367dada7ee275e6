"""Human-vs-engine game server: JSON API, session store, crash journal.

The engine side runs a deterministic search (no root noise, argmax-N)
with an optional wall-clock cap; a session's tree is reused across moves.
Sessions are journaled as JSON lines so a restarted server can replay
every live game exactly.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .game import BoardState, GameConfig, Player, Point, apply_move, new_game
from .network import PolicyValueNet
from .search import SearchParams, SearchTree, select_move

DEFAULT_SIMULATIONS = 800


class UnknownCheckpointError(KeyError):
    pass


class UnknownSessionError(KeyError):
    pass


@dataclass
class MoveEntry:
    point: Point
    by: str  # "human" | "engine"
    engine_value: Optional[float] = None
    top_visits: Optional[list] = None


@dataclass
class GameSession:
    id: str
    state: BoardState
    human_color: Player
    checkpoint_id: str
    params: SearchParams
    status: str = "awaiting_human"  # awaiting_human | thinking | finished
    move_log: list[MoveEntry] = field(default_factory=list)
    last_distribution: Optional[np.ndarray] = None
    tree: Optional[SearchTree] = None
    lock: threading.Lock = field(default_factory=threading.Lock)

    @property
    def engine_color(self) -> Player:
        return self.human_color.opponent


def session_stats(session: GameSession) -> dict:
    """Per-session summary: result, move count, engine root values."""
    if session.state.outcome.kind == "win":
        winner = session.state.outcome.winner
        result = "human" if winner == session.human_color else "engine"
    elif session.state.outcome.kind == "draw":
        result = "draw"
    else:
        result = "ongoing"
    return {
        "id": session.id,
        "result": result,
        "moves": len(session.move_log),
        "engine_values": [
            e.engine_value for e in session.move_log if e.by == "engine"
        ],
    }


class SessionStore:
    """Sessions by id plus an append-only journal for crash recovery."""

    def __init__(self, journal_path: Optional[Path] = None):
        self._sessions: dict[str, GameSession] = {}
        self._journal_path = Path(journal_path) if journal_path else None
        self._journal_lock = threading.Lock()

    def __contains__(self, session_id: str) -> bool:
        return session_id in self._sessions

    def get(self, session_id: str) -> GameSession:
        try:
            return self._sessions[session_id]
        except KeyError:
            raise UnknownSessionError(session_id) from None

    def add(self, session: GameSession) -> None:
        self._sessions[session.id] = session

    def all_sessions(self) -> list[GameSession]:
        return list(self._sessions.values())

    def journal(self, event: dict) -> None:
        if self._journal_path is None:
            return
        with self._journal_lock:
            with open(self._journal_path, "a") as f:
                f.write(json.dumps(event) + "\n")

    def replay_journal(self, game_config: GameConfig) -> None:
        """Rebuild every session from the journal (engine moves included)."""
        if self._journal_path is None or not self._journal_path.exists():
            return
        with open(self._journal_path) as f:
            for line in f:
                if not line.strip():
                    continue
                ev = json.loads(line)
                if ev["event"] == "create":
                    session = GameSession(
                        id=ev["id"],
                        state=new_game(game_config),
                        human_color=Player[ev["human_color"].upper()],
                        checkpoint_id=ev["checkpoint"],
                        params=SearchParams(
                            n_simulations=ev["n_simulations"], dirichlet_epsilon=0.0
                        ),
                    )
                    self._sessions[session.id] = session
                elif ev["event"] == "move":
                    session = self._sessions[ev["id"]]
                    session.state = apply_move(session.state, Point(ev["x"], ev["y"]))
                    session.move_log.append(
                        MoveEntry(
                            point=Point(ev["x"], ev["y"]),
                            by=ev["by"],
                            engine_value=ev.get("engine_value"),
                        )
                    )
        for session in self._sessions.values():
            session.status = _status_of(session)


def _status_of(session: GameSession) -> str:
    if session.state.outcome.is_over:
        return "finished"
    return "awaiting_human" if session.state.to_move == session.human_color else "thinking"


def state_json(state: BoardState) -> dict:
    out = {
        "board": state.cells.tolist(),
        "to_move": state.to_move.value,
        "status": "finished" if state.outcome.is_over else "ongoing",
    }
    if state.outcome.kind == "win":
        out["winner"] = state.outcome.winner.value
    return out


class CreateGameRequest(BaseModel):
    human_color: str = Field(pattern="^(black|white)$")
    checkpoint: str = "default"
    n_simulations: int = Field(default=DEFAULT_SIMULATIONS, ge=1, le=100_000)


class MoveRequest(BaseModel):
    x: int
    y: int


def _engine_reply(session: GameSession, net: PolicyValueNet,
                  time_budget_s: Optional[float]) -> MoveEntry:
    """Run the session's search and play the argmax-N move."""
    if session.tree is None or session.tree.root_state != session.state:
        session.tree = SearchTree(session.state)
    result = session.tree.run(net, session.params, time_budget_s=time_budget_s)
    move = select_move(result, 0.0)
    counts = result.visit_counts
    order = np.argsort(counts)[::-1]
    top = [
        {"x": int(i % session.state.config.board_x),
         "y": int(i // session.state.config.board_x),
         "visits": int(counts[i])}
        for i in order[:5]
        if counts[i] > 0
    ]
    session.state = apply_move(session.state, move)
    session.tree.advance(move)
    session.last_distribution = result.visit_distribution
    entry = MoveEntry(point=move, by="engine",
                      engine_value=result.root_value, top_visits=top)
    session.move_log.append(entry)
    return entry


def create_app(
    checkpoints: dict[str, PolicyValueNet],
    game_config: GameConfig,
    journal_path: Optional[Path] = None,
    analysis_enabled: bool = True,
    time_budget_s: Optional[float] = None,
    ui_dir: Optional[Path] = None,
) -> FastAPI:
    """Build the API app around a set of named engine checkpoints."""
    app = FastAPI(title="gomoku-zero play service")
    store = SessionStore(journal_path)
    store.replay_journal(game_config)
    app.state.store = store

    def engine_for(session: GameSession) -> PolicyValueNet:
        return checkpoints[session.checkpoint_id]

    @app.post("/api/games", status_code=201)
    def create_game(req: CreateGameRequest):
        if req.checkpoint not in checkpoints:
            raise HTTPException(400, f"unknown checkpoint {req.checkpoint!r}")
        session = GameSession(
            id=uuid.uuid4().hex,
            state=new_game(game_config),
            human_color=Player[req.human_color.upper()],
            checkpoint_id=req.checkpoint,
            params=SearchParams(
                n_simulations=req.n_simulations, dirichlet_epsilon=0.0
            ),
        )
        store.add(session)
        store.journal(
            {
                "event": "create",
                "id": session.id,
                "human_color": req.human_color,
                "checkpoint": req.checkpoint,
                "n_simulations": req.n_simulations,
            }
        )
        with session.lock:
            if session.engine_color == Player.BLACK:
                session.status = "thinking"
                entry = _engine_reply(session, engine_for(session), time_budget_s)
                store.journal(
                    {
                        "event": "move", "id": session.id, "by": "engine",
                        "x": entry.point.x, "y": entry.point.y,
                        "engine_value": entry.engine_value,
                    }
                )
            session.status = _status_of(session)
        return {"id": session.id, "state": state_json(session.state)}

    @app.post("/api/games/{session_id}/moves")
    def submit_move(session_id: str, req: MoveRequest):
        try:
            session = store.get(session_id)
        except UnknownSessionError:
            raise HTTPException(404, "unknown session") from None
        with session.lock:
            if session.status == "finished":
                return JSONResponse(
                    {"error": "game is finished", "state": state_json(session.state)},
                    status_code=409,
                )
            if session.state.to_move != session.human_color:
                return JSONResponse({"error": "not your turn"}, status_code=409)
            p = Point(req.x, req.y)
            if not session.state.config.in_bounds(p) or session.state.cell(p) != 0:
                return JSONResponse(
                    {"error": f"illegal move ({req.x},{req.y})"}, status_code=409
                )
            session.state = apply_move(session.state, p)
            if session.tree is not None:
                session.tree.advance(p)
            session.move_log.append(MoveEntry(point=p, by="human"))
            store.journal(
                {"event": "move", "id": session.id, "by": "human", "x": p.x, "y": p.y}
            )
            payload = {"state": state_json(session.state)}
            if not session.state.outcome.is_over:
                session.status = "thinking"
                entry = _engine_reply(session, engine_for(session), time_budget_s)
                store.journal(
                    {
                        "event": "move", "id": session.id, "by": "engine",
                        "x": entry.point.x, "y": entry.point.y,
                        "engine_value": entry.engine_value,
                    }
                )
                payload["state"] = state_json(session.state)
                payload["engine_move"] = {"x": entry.point.x, "y": entry.point.y}
                payload["engine_value"] = entry.engine_value
                payload["top_visits"] = entry.top_visits
            session.status = _status_of(session)
        return payload

    @app.get("/api/games/{session_id}")
    def get_game(session_id: str):
        try:
            session = store.get(session_id)
        except UnknownSessionError:
            raise HTTPException(404, "unknown session") from None
        return {
            "state": state_json(session.state),
            "status": session.status,
            "history": [
                {"x": e.point.x, "y": e.point.y, "by": e.by} for e in session.move_log
            ],
        }

    @app.get("/api/games/{session_id}/analysis")
    def get_analysis(session_id: str):
        if not analysis_enabled:
            raise HTTPException(409, "analysis is disabled")
        try:
            session = store.get(session_id)
        except UnknownSessionError:
            raise HTTPException(404, "unknown session") from None
        dist = session.last_distribution
        return {
            "visit_distribution": [] if dist is None else [float(v) for v in dist]
        }

    @app.get("/api/stats")
    def get_stats():
        finished = [
            session_stats(s) for s in store.all_sessions() if s.status == "finished"
        ]
        engine = sum(1 for s in finished if s["result"] == "engine")
        human = sum(1 for s in finished if s["result"] == "human")
        draws = sum(1 for s in finished if s["result"] == "draw")
        n = len(finished)
        return {
            "finished_sessions": n,
            "engine_wins": engine,
            "human_wins": human,
            "draws": draws,
            "engine_win_rate": engine / n if n else 0.0,
            "human_win_rate": human / n if n else 0.0,
            "draw_rate": draws / n if n else 0.0,
            "sessions": finished,
        }

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
