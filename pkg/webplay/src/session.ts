/** Client-side session state: a verbatim mirror of the server exchange log.
 *
 * The client is render-only: every transcript entry is stored exactly as
 * the server produced it, so the local log always equals the server's
 * transcript endpoint byte for byte.
 */

import { ApiClient, TranscriptEntry } from "./api.js";

export class PlaySession {
  readonly transcript: TranscriptEntry[] = [];
  sessionId = "";
  score = 0;
  maxScore = 0;
  done = false;
  busy = false;

  constructor(private readonly api: ApiClient, readonly gameId: string) {}

  async start(): Promise<TranscriptEntry> {
    this.busy = true;
    try {
      const created = await this.api.createSession(this.gameId);
      this.sessionId = created.session_id;
      this.score = created.score;
      this.maxScore = created.max_score;
      this.done = created.done;
      const entry: TranscriptEntry = { input: null, output: created.intro };
      this.transcript.push(entry);
      return entry;
    } finally {
      this.busy = false;
    }
  }

  /** One command per in-flight request; the server serializes per session. */
  async send(input: string): Promise<TranscriptEntry> {
    if (this.busy) {
      throw new Error("a command is already in flight");
    }
    if (!this.sessionId) {
      throw new Error("session has not been started");
    }
    this.busy = true;
    try {
      const response = await this.api.sendCommand(this.sessionId, input);
      this.score = response.score;
      this.maxScore = response.max_score;
      this.done = response.done;
      const entry: TranscriptEntry = { input, output: response.output };
      this.transcript.push(entry);
      return entry;
    } finally {
      this.busy = false;
    }
  }

  serverTranscript(): Promise<TranscriptEntry[]> {
    return this.api.transcript(this.sessionId).then((body) => body.transcript);
  }
}
