/** Typed client for the storyworld session server (JSON over HTTP). */

export interface GameInfo {
  id: string;
  title: string;
  genre: string;
}

export interface SessionStatus {
  score: number;
  max_score: number;
  done: boolean;
}

export interface CreateSessionResponse extends SessionStatus {
  session_id: string;
  intro: string;
}

export interface CommandResponse extends SessionStatus {
  output: string;
}

export interface TranscriptEntry {
  input: string | null;
  output: string;
}

export interface TranscriptResponse extends SessionStatus {
  transcript: TranscriptEntry[];
}

/** The session no longer exists server-side (expired or unknown). */
export class SessionGoneError extends Error {
  constructor() {
    super("session has expired or is unknown");
    this.name = "SessionGoneError";
  }
}

export class ApiError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private readonly baseUrl: string;

  constructor(baseUrl: string, private readonly fetchFn: FetchLike = (...args) => fetch(...args)) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, init);
    } catch (error) {
      throw new ApiError(`cannot reach server: ${String(error)}`, 0);
    }
    if (response.status === 410) {
      throw new SessionGoneError();
    }
    if (!response.ok) {
      let detail = `HTTP ${response.status}`;
      try {
        const body = (await response.json()) as { detail?: string };
        if (body.detail) detail = `${detail}: ${body.detail}`;
      } catch {
        /* body was not JSON; keep the status line */
      }
      throw new ApiError(detail, response.status);
    }
    return (await response.json()) as T;
  }

  async listGames(): Promise<GameInfo[]> {
    const body = await this.request<{ games: GameInfo[] }>("/games");
    return body.games;
  }

  createSession(gameId: string): Promise<CreateSessionResponse> {
    return this.request<CreateSessionResponse>("/sessions", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ game_id: gameId }),
    });
  }

  sendCommand(sessionId: string, input: string): Promise<CommandResponse> {
    return this.request<CommandResponse>(`/sessions/${encodeURIComponent(sessionId)}/command`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ input }),
    });
  }

  transcript(sessionId: string): Promise<TranscriptResponse> {
    return this.request<TranscriptResponse>(`/sessions/${encodeURIComponent(sessionId)}/transcript`);
  }
}
