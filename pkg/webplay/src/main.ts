/** DOM wiring: game picker, command input, score bar, error handling. */

import { ApiClient, SessionGoneError } from "./api.js";
import { PlaySession } from "./session.js";
import {
  COMPLETION_BANNER_HTML,
  renderExchange,
  renderGameList,
  renderScoreBar,
} from "./render.js";

function element<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function defaultServerUrl(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("server");
  if (fromQuery) return fromQuery;
  // Served by the game server itself (under /play)? Then it is the origin.
  if (window.location.pathname.startsWith("/play")) return window.location.origin;
  return "http://127.0.0.1:8000";
}

class App {
  private api: ApiClient | null = null;
  private session: PlaySession | null = null;
  private bannerShown = false;
  private retryAction: (() => Promise<void>) | null = null;

  private readonly serverInput = element<HTMLInputElement>("server-url");
  private readonly connectButton = element<HTMLButtonElement>("connect");
  private readonly gamesPanel = element<HTMLDivElement>("games");
  private readonly playPanel = element<HTMLDivElement>("play");
  private readonly logPanel = element<HTMLDivElement>("log");
  private readonly scorePanel = element<HTMLDivElement>("score");
  private readonly errorPanel = element<HTMLDivElement>("error");
  private readonly commandForm = element<HTMLFormElement>("command-form");
  private readonly commandInput = element<HTMLInputElement>("command");

  start(): void {
    this.serverInput.value = defaultServerUrl();
    this.connectButton.addEventListener("click", () => void this.loadGames());
    this.commandForm.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.sendCommand();
    });
    void this.loadGames();
  }

  private showError(message: string, retry: (() => Promise<void>) | null): void {
    this.retryAction = retry;
    this.errorPanel.innerHTML = "";
    const text = document.createElement("span");
    text.textContent = message;
    this.errorPanel.appendChild(text);
    if (retry) {
      const button = document.createElement("button");
      button.textContent = "retry";
      button.addEventListener("click", () => {
        this.clearError();
        void retry();
      });
      this.errorPanel.appendChild(button);
    }
    this.errorPanel.hidden = false;
  }

  private clearError(): void {
    this.errorPanel.hidden = true;
    this.errorPanel.innerHTML = "";
  }

  private async loadGames(): Promise<void> {
    this.clearError();
    this.api = new ApiClient(this.serverInput.value);
    try {
      const games = await this.api.listGames();
      this.gamesPanel.innerHTML = renderGameList(games);
      for (const button of Array.from(this.gamesPanel.querySelectorAll<HTMLButtonElement>("button.game"))) {
        button.addEventListener("click", () => void this.startSession(button.dataset.gameId ?? ""));
      }
      this.gamesPanel.hidden = false;
      this.playPanel.hidden = true;
    } catch (error) {
      this.showError(String(error), () => this.loadGames());
    }
  }

  private async startSession(gameId: string): Promise<void> {
    if (!this.api) return;
    this.clearError();
    this.session = new PlaySession(this.api, gameId);
    this.bannerShown = false;
    this.logPanel.innerHTML = "";
    try {
      const intro = await this.session.start();
      this.gamesPanel.hidden = true;
      this.playPanel.hidden = false;
      this.appendEntryHtml(renderExchange(intro));
      this.refreshScore();
      this.commandInput.focus();
    } catch (error) {
      this.showError(String(error), () => this.startSession(gameId));
    }
  }

  private async sendCommand(): Promise<void> {
    const session = this.session;
    if (!session || session.busy) return;
    const input = this.commandInput.value.trim();
    if (!input) return;
    this.clearError();
    this.commandInput.disabled = true;  // one request in flight per session
    try {
      const entry = await session.send(input);
      this.commandInput.value = "";
      this.appendEntryHtml(renderExchange(entry));
      this.refreshScore();
    } catch (error) {
      if (error instanceof SessionGoneError) {
        this.showError("This session has expired. Pick a game to start over.", null);
        this.gamesPanel.hidden = false;
        this.playPanel.hidden = true;
      } else {
        this.showError(String(error), () => this.sendCommand());
      }
    } finally {
      this.commandInput.disabled = false;
      this.commandInput.focus();
    }
  }

  private appendEntryHtml(html: string): void {
    this.logPanel.insertAdjacentHTML("beforeend", html);
    this.logPanel.scrollTop = this.logPanel.scrollHeight;
  }

  private refreshScore(): void {
    const session = this.session;
    if (!session) return;
    this.scorePanel.innerHTML = renderScoreBar(session.score, session.maxScore, session.done);
    if (session.done && !this.bannerShown) {
      this.bannerShown = true;
      this.appendEntryHtml(COMPLETION_BANNER_HTML);
    }
  }
}

new App().start();
