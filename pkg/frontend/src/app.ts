import { ApiClient } from "./api.js";
import { BoardRenderer, describeTopVisits, pixelToIntersection } from "./board.js";
import { buildResultsModel } from "./panel.js";
import { GameSessionController } from "./state.js";
import type { Color } from "./types.js";

const api = new ApiClient();
const controller = new GameSessionController(api);

const el = {
  banner: document.getElementById("banner") as HTMLDivElement,
  status: document.getElementById("status") as HTMLDivElement,
  canvas: document.getElementById("board") as HTMLCanvasElement,
  newGame: document.getElementById("new-game") as HTMLButtonElement,
  retry: document.getElementById("retry") as HTMLButtonElement,
  color: document.getElementById("color") as HTMLSelectElement,
  sims: document.getElementById("sims") as HTMLInputElement,
  engineInfo: document.getElementById("engine-info") as HTMLDivElement,
  history: document.getElementById("history") as HTMLUListElement,
  analysisToggle: document.getElementById("analysis-toggle") as HTMLInputElement,
  results: document.getElementById("results") as HTMLDivElement,
  refreshResults: document.getElementById("refresh-results") as HTMLButtonElement,
};

let renderer: BoardRenderer | null = null;
let heat: number[] | null = null;
let flashTimer: number | null = null;

function statusLine(): string {
  switch (controller.phase) {
    case "idle":
      return "choose a color and start a game";
    case "awaiting-human":
      return `your move (${controller.humanColor})`;
    case "engine-thinking":
      return "engine thinking…";
    case "finished": {
      if (controller.winner === null) {
        return "draw";
      }
      const humanWon =
        (controller.winner === 1) === (controller.humanColor === "black");
      return humanWon ? "you win" : "engine wins";
    }
  }
}

function render(): void {
  el.banner.style.display = controller.error ? "block" : "none";
  el.banner.textContent = controller.error ?? "";
  el.retry.style.display = controller.error && controller.phase === "idle" ? "inline" : "none";
  el.status.textContent = statusLine();
  document.body.dataset.phase = controller.phase;

  if (controller.boardSize > 0) {
    if (renderer === null) {
      renderer = new BoardRenderer(el.canvas, controller.boardSize);
    }
    renderer.draw(controller.board, {
      lastMove: controller.lastEngine?.move ?? null,
      flash: controller.flash,
      heat,
    });
  }

  if (controller.lastEngine) {
    const v = controller.lastEngine.value;
    el.engineInfo.textContent =
      `engine value ${v === null ? "?" : v.toFixed(2)}   ` +
      `top visits: ${describeTopVisits(controller.lastEngine.topVisits)}`;
  } else {
    el.engineInfo.textContent = "";
  }

  el.history.replaceChildren(
    ...controller.history.map((h, i) => {
      const li = document.createElement("li");
      li.textContent = `${i + 1}. ${h.by} (${h.x},${h.y})`;
      return li;
    }),
  );
}

async function updateHeat(): Promise<void> {
  heat = null;
  if (el.analysisToggle.checked && controller.sessionId) {
    try {
      const dist = await api.getAnalysis(controller.sessionId);
      heat = dist.length > 0 ? dist : null;
    } catch {
      heat = null; // analysis disabled server-side: overlay stays off
    }
  }
}

async function startGame(): Promise<void> {
  const color = el.color.value as Color;
  const sims = Math.max(1, Number(el.sims.value) || 200);
  renderer = null;
  await controller.newGame(color, sims);
  await updateHeat();
  render();
}

async function refreshResults(): Promise<void> {
  try {
    const model = buildResultsModel(await api.getStats());
    if (model.empty) {
      el.results.textContent = "no finished games yet";
      return;
    }
    const table = document.createElement("table");
    const head = table.insertRow();
    for (const h of ["session", "result", "moves"]) {
      const th = document.createElement("th");
      th.textContent = h;
      head.appendChild(th);
    }
    for (const row of model.rows) {
      const tr = table.insertRow();
      tr.insertCell().textContent = row.id.slice(0, 8);
      tr.insertCell().textContent = row.result;
      tr.insertCell().textContent = String(row.moves);
    }
    const summary = document.createElement("p");
    summary.textContent =
      `${model.finished} finished: engine ${model.engineRate}, ` +
      `human ${model.humanRate}, draws ${model.drawRate}`;
    el.results.replaceChildren(summary, table);
  } catch (e) {
    el.results.textContent = `stats unavailable: ${String(e)}`;
  }
}

el.canvas.addEventListener("click", async (ev) => {
  if (renderer === null || controller.phase !== "awaiting-human") {
    return; // clicks ignored outside awaiting-human
  }
  const rect = el.canvas.getBoundingClientRect();
  const scale = el.canvas.width / rect.width;
  const hit = pixelToIntersection(
    (ev.clientX - rect.left) * scale,
    (ev.clientY - rect.top) * scale,
    renderer.geometry,
    controller.boardSize,
  );
  if (hit === null) {
    return;
  }
  render(); // shows the thinking state as soon as the phase flips
  const outcome = await controller.clickIntersection(hit.x, hit.y);
  if (outcome === "rejected") {
    if (flashTimer !== null) {
      clearTimeout(flashTimer);
    }
    flashTimer = window.setTimeout(() => {
      controller.flash = null;
      render();
    }, 600);
  }
  if (outcome === "played") {
    await updateHeat();
    const phase: string = controller.phase;
    if (phase === "finished") {
      void refreshResults();
    }
  }
  render();
});

el.newGame.addEventListener("click", () => void startGame());
el.retry.addEventListener("click", () => void startGame());
el.analysisToggle.addEventListener("change", async () => {
  await updateHeat();
  render();
});
el.refreshResults.addEventListener("click", () => void refreshResults());

render();
void refreshResults();
