import { ApiClient, HttpError } from "./api.js";
import type {
  Cell,
  Color,
  EngineMove,
  HistoryEntry,
  StateJson,
  TopVisit,
} from "./types.js";

/**
 * UI phases. "idle" is before any game exists; a live game is in exactly
 * one of awaiting-human / engine-thinking / finished. Input is accepted
 * only in awaiting-human, which also enforces a single in-flight request:
 * the phase leaves awaiting-human before the request is sent and returns
 * only when the response has been applied.
 */
export type Phase = "idle" | "awaiting-human" | "engine-thinking" | "finished";

export type ClickOutcome = "played" | "rejected" | "ignored" | "failed";

export interface EngineInfo {
  move: EngineMove;
  value: number | null;
  topVisits: TopVisit[];
}

/**
 * Board-and-phase state machine for one session.
 *
 * The rendered board is always the last server-confirmed state: every
 * mutation of `board` copies it out of a server response, never out of a
 * click. Rejected and failed requests leave the view untouched.
 */
export class GameSessionController {
  phase: Phase = "idle";
  sessionId: string | null = null;
  humanColor: Color = "black";
  board: Cell[][] = [];
  boardSize = 0;
  winner: 1 | 2 | null = null;
  history: HistoryEntry[] = [];
  lastEngine: EngineInfo | null = null;
  flash: { x: number; y: number } | null = null;
  error: string | null = null;

  constructor(private readonly api: ApiClient) {}

  private applyState(state: StateJson): void {
    this.board = state.board.map((row) => [...row]);
    this.boardSize = state.board.length;
    this.winner = state.winner ?? null;
    this.phase = state.status === "finished" ? "finished" : "awaiting-human";
  }

  /** POST /api/games; on failure the error banner blocks until retried. */
  async newGame(color: Color, nSimulations: number): Promise<boolean> {
    this.error = null;
    this.flash = null;
    this.history = [];
    this.lastEngine = null;
    try {
      const created = await this.api.createGame(color, nSimulations);
      this.sessionId = created.id;
      this.humanColor = color;
      this.applyState(created.state);
      if (color === "white") {
        // The engine opened inside the create call; recover its stone.
        for (let y = 0; y < this.boardSize; y++) {
          for (let x = 0; x < this.board[y].length; x++) {
            if (this.board[y][x] !== 0) {
              this.history.push({ x, y, by: "engine" });
            }
          }
        }
      }
      return true;
    } catch (e) {
      this.error = `service unreachable: ${String(e)}`;
      this.phase = "idle";
      this.sessionId = null;
      return false;
    }
  }

  /**
   * Submit a human move for an intersection click.
   *
   * Ignored outside awaiting-human. A 409 flashes the offending cell and
   * changes nothing else; a network failure sets a retryable error and
   * leaves the view unchanged; a 200 applies the server state (human
   * stone plus any engine reply in one response).
   */
  async clickIntersection(x: number, y: number): Promise<ClickOutcome> {
    if (this.phase !== "awaiting-human" || this.sessionId === null) {
      return "ignored";
    }
    this.flash = null;
    this.error = null;
    this.phase = "engine-thinking";
    try {
      const resp = await this.api.submitMove(this.sessionId, x, y);
      this.history.push({ x, y, by: "human" });
      if (resp.engine_move) {
        this.history.push({ ...resp.engine_move, by: "engine" });
        this.lastEngine = {
          move: resp.engine_move,
          value: resp.engine_value ?? null,
          topVisits: resp.top_visits ?? [],
        };
      }
      this.applyState(resp.state);
      return "played";
    } catch (e) {
      if (e instanceof HttpError && e.status === 409) {
        this.flash = { x, y };
        this.phase = "awaiting-human";
        return "rejected";
      }
      this.error = `move failed, try again: ${String(e)}`;
      this.phase = "awaiting-human";
      return "failed";
    }
  }

  /** Resync from GET /api/games/{id}; the server is the authority. */
  async refresh(): Promise<void> {
    if (this.sessionId === null) {
      return;
    }
    const view = await this.api.getGame(this.sessionId);
    this.applyState(view.state);
    this.history = [...view.history];
  }
}
