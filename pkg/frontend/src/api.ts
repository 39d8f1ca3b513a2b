// Typed client for the session-service HTTP API. The UI never invents
// worker-visible text: every string it renders arrives in these documents.

export type Phase = "qualification" | "setup" | "training" | "rating";

export interface ScaleLabel {
  value: number;
  term: string;
}

export interface SessionItem {
  index: number;
  type:
    | "acr"
    | "attestation"
    | "hearing"
    | "comprehension"
    | "bw"
    | "level"
    | "binaural"
    | "comparison";
  audio: string[];
}

export interface SessionDocument {
  kind: "session";
  phase: Phase;
  session_id: string;
  campaign_id: string;
  language: string;
  strings: Record<string, string>;
  scale: ScaleLabel[];
  items: SessionItem[];
  submit_url: string;
}

export type AnswerValue = number | boolean | string | number[];

export interface SubmissionBody {
  worker: string;
  answers: { index: number; value: AnswerValue }[];
  playback: Record<string, number>;
}

export type NextSession =
  | { kind: "session"; doc: SessionDocument }
  | { kind: "no-work" }
  | { kind: "excluded"; message: string };

export class ApiError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
  }
}

const RETRIES = 3;
const RETRY_DELAY_MS = 300;

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

async function fetchWithRetry(url: string, init?: RequestInit): Promise<Response> {
  let lastError: unknown;
  for (let attempt = 0; attempt < RETRIES; attempt++) {
    try {
      return await fetch(url, init);
    } catch (error) {
      lastError = error; // network failure: retry, the open session is stable
      await sleep(RETRY_DELAY_MS * (attempt + 1));
    }
  }
  throw lastError;
}

export class SessionApi {
  constructor(
    readonly baseUrl: string,
    readonly campaignId: string,
    readonly worker: string,
  ) {}

  async nextSession(): Promise<NextSession> {
    const url =
      `${this.baseUrl}/api/campaign/${encodeURIComponent(this.campaignId)}` +
      `/next-session?worker=${encodeURIComponent(this.worker)}`;
    const response = await fetchWithRetry(url);
    if (response.status === 204) return { kind: "no-work" };
    if (response.status === 409) {
      const payload = await response.json().catch(() => ({ error: "excluded" }));
      return { kind: "excluded", message: payload.error ?? "excluded" };
    }
    if (!response.ok) {
      throw new ApiError(`next-session failed: ${response.status}`, response.status);
    }
    return { kind: "session", doc: (await response.json()) as SessionDocument };
  }

  async submit(doc: SessionDocument, body: SubmissionBody): Promise<void> {
    const response = await fetchWithRetry(`${this.baseUrl}${doc.submit_url}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (response.status === 409) {
      // a retried POST whose first attempt landed: the answers are recorded
      return;
    }
    if (!response.ok) {
      throw new ApiError(`submit failed: ${response.status}`, response.status);
    }
  }

  audioUrl(path: string): string {
    const separator = path.includes("?") ? "&" : "?";
    return `${this.baseUrl}${path}${separator}worker=${encodeURIComponent(this.worker)}`;
  }
}
