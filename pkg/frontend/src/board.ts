import type { Cell, TopVisit } from "./types.js";

/** Pixel layout of a Go-style grid: stones sit on line intersections. */
export interface BoardGeometry {
  margin: number; // distance from canvas edge to the first line
  cell: number; // distance between adjacent lines
}

export function geometryFor(canvasSize: number, boardSize: number): BoardGeometry {
  const cell = canvasSize / boardSize;
  return { margin: cell / 2, cell };
}

export function intersectionToPixel(
  ix: number,
  iy: number,
  geom: BoardGeometry,
): { px: number; py: number } {
  return { px: geom.margin + ix * geom.cell, py: geom.margin + iy * geom.cell };
}

/**
 * Map a click to the nearest intersection, or null when the click lands
 * farther than half a cell away on either axis or off the board.
 */
export function pixelToIntersection(
  px: number,
  py: number,
  geom: BoardGeometry,
  boardSize: number,
): { x: number; y: number } | null {
  const x = Math.round((px - geom.margin) / geom.cell);
  const y = Math.round((py - geom.margin) / geom.cell);
  if (x < 0 || y < 0 || x >= boardSize || y >= boardSize) {
    return null;
  }
  const { px: cx, py: cy } = intersectionToPixel(x, y, geom);
  if (Math.abs(px - cx) > geom.cell / 2 || Math.abs(py - cy) > geom.cell / 2) {
    return null;
  }
  return { x, y };
}

export interface DrawOptions {
  lastMove?: { x: number; y: number } | null;
  flash?: { x: number; y: number } | null;
  heat?: number[] | null; // visit distribution, row-major y*size+x
}

/** Canvas renderer; drawing only, no state of its own beyond the context. */
export class BoardRenderer {
  private readonly ctx: CanvasRenderingContext2D;

  constructor(
    private readonly canvas: HTMLCanvasElement,
    private readonly boardSize: number,
  ) {
    const ctx = canvas.getContext("2d");
    if (!ctx) {
      throw new Error("canvas 2d context unavailable");
    }
    this.ctx = ctx;
  }

  get geometry(): BoardGeometry {
    return geometryFor(this.canvas.width, this.boardSize);
  }

  draw(board: Cell[][], opts: DrawOptions = {}): void {
    const { ctx } = this;
    const n = this.boardSize;
    const geom = this.geometry;
    ctx.fillStyle = "#d8b36a";
    ctx.fillRect(0, 0, this.canvas.width, this.canvas.height);

    ctx.strokeStyle = "#5b4423";
    ctx.lineWidth = 1;
    for (let i = 0; i < n; i++) {
      const a = intersectionToPixel(i, 0, geom);
      const b = intersectionToPixel(i, n - 1, geom);
      ctx.beginPath();
      ctx.moveTo(a.px, a.py);
      ctx.lineTo(b.px, b.py);
      ctx.stroke();
      const c = intersectionToPixel(0, i, geom);
      const d = intersectionToPixel(n - 1, i, geom);
      ctx.beginPath();
      ctx.moveTo(c.px, c.py);
      ctx.lineTo(d.px, d.py);
      ctx.stroke();
    }

    if (opts.heat) {
      const peak = Math.max(...opts.heat, 1e-9);
      for (let y = 0; y < n; y++) {
        for (let x = 0; x < n; x++) {
          const v = opts.heat[y * n + x];
          if (v > 0) {
            const { px, py } = intersectionToPixel(x, y, geom);
            ctx.fillStyle = `rgba(220, 40, 40, ${0.15 + 0.6 * (v / peak)})`;
            ctx.beginPath();
            ctx.arc(px, py, geom.cell * 0.28, 0, Math.PI * 2);
            ctx.fill();
          }
        }
      }
    }

    for (let y = 0; y < n; y++) {
      for (let x = 0; x < n; x++) {
        const cell = board[y]?.[x] ?? 0;
        if (cell === 0) {
          continue;
        }
        const { px, py } = intersectionToPixel(x, y, geom);
        ctx.beginPath();
        ctx.arc(px, py, geom.cell * 0.42, 0, Math.PI * 2);
        ctx.fillStyle = cell === 1 ? "#161616" : "#f4f4f4";
        ctx.fill();
        ctx.strokeStyle = "#333";
        ctx.stroke();
      }
    }

    if (opts.lastMove) {
      const { px, py } = intersectionToPixel(opts.lastMove.x, opts.lastMove.y, geom);
      ctx.strokeStyle = "#e33";
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.arc(px, py, geom.cell * 0.2, 0, Math.PI * 2);
      ctx.stroke();
    }

    if (opts.flash) {
      const { px, py } = intersectionToPixel(opts.flash.x, opts.flash.y, geom);
      ctx.strokeStyle = "#d00";
      ctx.lineWidth = 3;
      const r = geom.cell * 0.45;
      ctx.strokeRect(px - r, py - r, 2 * r, 2 * r);
    }
  }
}

export function describeTopVisits(top: TopVisit[]): string {
  return top.map((t) => `(${t.x},${t.y}) ${t.visits}`).join("  ");
}
