// Session driver: pulls the next session document, renders it, and hands
// control to the worker (or a headless automation hook), then submits once.

import { SessionApi, type SessionDocument } from "./api.js";
import type { PlayerFactory } from "./player.js";
import { renderScreen, type RenderedScreen } from "./screens.js";

export type RunResult =
  | { kind: "submitted"; phase: SessionDocument["phase"]; sessionId: string }
  | { kind: "no-work" }
  | { kind: "excluded"; message: string };

export interface RunOptions {
  api: SessionApi;
  mount: HTMLElement;
  playerFactory: PlayerFactory;
  dom?: Document;
  /** Headless automation: interact with the rendered screen, then submit. */
  automate?: (screen: RenderedScreen) => Promise<void> | void;
}

/**
 * Serve one session to completion. Fetching the open session is idempotent,
 * so a network failure mid-way resumes instead of losing work.
 */
export async function runSession(options: RunOptions): Promise<RunResult> {
  const dom = options.dom ?? document;
  const next = await options.api.nextSession();
  if (next.kind === "no-work") return { kind: "no-work" };
  if (next.kind === "excluded") return { kind: "excluded", message: next.message };

  const doc = next.doc;
  const screen = renderScreen(dom, options.api, doc, options.playerFactory);
  options.mount.replaceChildren(screen.root);
  if (options.automate) {
    await options.automate(screen);
  }
  await screen.whenSubmitted;
  return { kind: "submitted", phase: doc.phase, sessionId: doc.session_id };
}

export interface LoopCallbacks {
  onResult?: (result: RunResult) => void;
}

/** Run sessions until the service reports no work or exclusion. */
export async function runUntilDone(
  options: RunOptions,
  callbacks: LoopCallbacks = {},
  maxSessions = 1000,
): Promise<RunResult> {
  let last: RunResult = { kind: "no-work" };
  for (let i = 0; i < maxSessions; i++) {
    last = await runSession(options);
    callbacks.onResult?.(last);
    if (last.kind !== "submitted") return last;
  }
  return last;
}
