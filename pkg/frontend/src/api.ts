import type {
  Color,
  CreateGameResponse,
  GameView,
  MoveResponse,
  StatsResponse,
} from "./types.js";

/** Non-2xx response; status 409 marks an illegal move. */
export class HttpError extends Error {
  constructor(
    public readonly status: number,
    public readonly body: unknown,
  ) {
    super(`HTTP ${status}`);
    this.name = "HttpError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/**
 * Thin typed client over the play-service API. The fetch function is
 * injectable so tests can stand in a scripted server.
 */
export class ApiClient {
  constructor(
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
    private readonly base: string = "",
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(this.base + path, init);
    let body: unknown = null;
    try {
      body = await resp.json();
    } catch {
      body = null;
    }
    if (!resp.ok) {
      throw new HttpError(resp.status, body);
    }
    return body as T;
  }

  createGame(
    humanColor: Color,
    nSimulations: number,
    checkpoint = "default",
  ): Promise<CreateGameResponse> {
    return this.request<CreateGameResponse>("/api/games", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({
        human_color: humanColor,
        checkpoint,
        n_simulations: nSimulations,
      }),
    });
  }

  submitMove(id: string, x: number, y: number): Promise<MoveResponse> {
    return this.request<MoveResponse>(`/api/games/${id}/moves`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ x, y }),
    });
  }

  getGame(id: string): Promise<GameView> {
    return this.request<GameView>(`/api/games/${id}`);
  }

  async getAnalysis(id: string): Promise<number[]> {
    const body = await this.request<{ visit_distribution: number[] }>(
      `/api/games/${id}/analysis`,
    );
    return body.visit_distribution;
  }

  getStats(): Promise<StatsResponse> {
    return this.request<StatsResponse>("/api/stats");
  }
}
