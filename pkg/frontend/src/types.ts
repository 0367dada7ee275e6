/** Wire types for the play-service JSON API. */

export type Cell = 0 | 1 | 2; // empty | black | white
export type Color = "black" | "white";

export interface StateJson {
  board: Cell[][]; // board[y][x]
  to_move: 1 | 2;
  status: "ongoing" | "finished";
  winner?: 1 | 2;
}

export interface CreateGameResponse {
  id: string;
  state: StateJson;
}

export interface EngineMove {
  x: number;
  y: number;
}

export interface TopVisit {
  x: number;
  y: number;
  visits: number;
}

export interface MoveResponse {
  state: StateJson;
  engine_move?: EngineMove;
  engine_value?: number;
  top_visits?: TopVisit[];
}

export interface HistoryEntry {
  x: number;
  y: number;
  by: "human" | "engine";
}

export interface GameView {
  state: StateJson;
  status: "awaiting_human" | "thinking" | "finished";
  history: HistoryEntry[];
}

export interface SessionRow {
  id: string;
  result: "engine" | "human" | "draw" | "ongoing";
  moves: number;
  engine_values?: (number | null)[];
}

export interface StatsResponse {
  finished_sessions: number;
  engine_wins: number;
  human_wins: number;
  draws: number;
  engine_win_rate: number;
  human_win_rate: number;
  draw_rate: number;
  sessions: SessionRow[];
}
