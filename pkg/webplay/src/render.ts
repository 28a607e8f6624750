/** Pure HTML-string renderers; no game logic, no state. */

import { GameInfo, TranscriptEntry } from "./api.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Output block in the room-card layout: first line bold, rest verbatim. */
export function renderOutput(output: string): string {
  const lines = output.split("\n");
  const head = escapeHtml(lines[0] ?? "");
  const rest = lines.slice(1).map(escapeHtml).join("\n");
  return rest
    ? `<div class="block"><strong>${head}</strong>\n${rest}</div>`
    : `<div class="block"><strong>${head}</strong></div>`;
}

export function renderExchange(entry: TranscriptEntry): string {
  const echo = entry.input === null ? "" : `<div class="echo">&gt; ${escapeHtml(entry.input)}</div>`;
  return echo + renderOutput(entry.output);
}

export function renderScoreBar(score: number, maxScore: number, done: boolean): string {
  const percent = maxScore > 0 ? Math.min(100, Math.round((score / maxScore) * 100)) : 0;
  const label = `Score: ${score}/${maxScore}`;
  const flag = done ? ` <span class="done-flag">complete</span>` : "";
  return (
    `<div class="score-label">${escapeHtml(label)}${flag}</div>` +
    `<div class="score-track"><div class="score-fill" style="width: ${percent}%"></div></div>`
  );
}

export function renderGameList(games: GameInfo[]): string {
  if (games.length === 0) {
    return `<p class="empty">The server has no games to offer.</p>`;
  }
  return games
    .map(
      (game) =>
        `<button class="game" data-game-id="${escapeHtml(game.id)}">` +
        `<span class="title">${escapeHtml(game.title)}</span>` +
        `<span class="genre">${escapeHtml(game.genre)}</span></button>`,
    )
    .join("");
}

export const COMPLETION_BANNER_HTML =
  `<div class="completion">You have explored enough of this world. Game complete!</div>`;
