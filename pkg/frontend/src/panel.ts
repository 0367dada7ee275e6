import type { StatsResponse } from "./types.js";

/** Data model for the results table; rendering happens elsewhere. */
export interface ResultsModel {
  empty: boolean;
  finished: number;
  engineWins: number;
  humanWins: number;
  draws: number;
  engineRate: string;
  humanRate: string;
  drawRate: string;
  rows: { id: string; result: string; moves: number }[];
}

export function formatPercent(x: number): string {
  return `${Math.round(x * 100)}%`;
}

export function buildResultsModel(stats: StatsResponse): ResultsModel {
  const finishedRows = stats.sessions.filter((s) => s.result !== "ongoing");
  return {
    empty: stats.finished_sessions === 0,
    finished: stats.finished_sessions,
    engineWins: stats.engine_wins,
    humanWins: stats.human_wins,
    draws: stats.draws,
    engineRate: formatPercent(stats.engine_win_rate),
    humanRate: formatPercent(stats.human_win_rate),
    drawRate: formatPercent(stats.draw_rate),
    rows: finishedRows.map((s) => ({ id: s.id, result: s.result, moves: s.moves })),
  };
}
