// Playback tracking. The screen model only cares about the accumulated
// played-time fraction, so tests can swap in a scripted player.

export interface AudioPlayer {
  /** Accumulated played time over duration, clamped to [0, 1]. */
  readonly fraction: number;
  /** True once the clip has played through to its end at least once. */
  readonly completed: boolean;
  play(): void;
  /** Subscribe to playback-state changes; fires on progress and completion. */
  onChange(listener: () => void): void;
}

/**
 * Wraps an HTMLAudioElement and accumulates actually-played time from
 * timeupdate deltas. Seeks do not count: only forward progress while the
 * element is playing is credited. Reaching the natural end without seeking
 * snaps the total to the full duration, so an honest play-through reports
 * exactly 1.0.
 */
export class HtmlAudioPlayer implements AudioPlayer {
  private element: HTMLAudioElement;
  private playedSeconds = 0;
  private lastPosition = 0;
  private seeked = false;
  private done = false;
  private listeners: (() => void)[] = [];

  constructor(url: string, createElement?: () => HTMLAudioElement) {
    this.element = createElement ? createElement() : new Audio();
    this.element.preload = "metadata";
    this.element.src = url;
    this.element.addEventListener("timeupdate", () => this.onTimeUpdate());
    this.element.addEventListener("seeking", () => {
      this.seeked = true;
      this.lastPosition = this.element.currentTime;
    });
    this.element.addEventListener("ended", () => this.onEnded());
    this.element.addEventListener("play", () => {
      this.lastPosition = this.element.currentTime;
    });
  }

  private onTimeUpdate(): void {
    const now = this.element.currentTime;
    const delta = now - this.lastPosition;
    // timeupdate fires every 15-250 ms; anything larger is a seek artifact
    if (delta > 0 && delta < 1.0) {
      this.playedSeconds += delta;
    }
    this.lastPosition = now;
    this.notify();
  }

  private onEnded(): void {
    if (!this.seeked && this.element.duration > 0) {
      this.playedSeconds = this.element.duration;
    }
    this.done = true;
    this.notify();
  }

  get fraction(): number {
    const duration = this.element.duration;
    if (!duration || !isFinite(duration)) return 0;
    return Math.min(1, this.playedSeconds / duration);
  }

  get completed(): boolean {
    return this.done;
  }

  play(): void {
    void this.element.play();
  }

  onChange(listener: () => void): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) listener();
  }
}

/** Scripted player for tests and headless runs. */
export class FakeAudioPlayer implements AudioPlayer {
  private playedSeconds = 0;
  private done = false;
  private listeners: (() => void)[] = [];

  constructor(readonly durationSeconds: number = 2.0, private autoComplete = false) {}

  play(): void {
    if (this.autoComplete) this.finish();
  }

  /** Advance playback by `seconds` of listened audio. */
  advance(seconds: number): void {
    this.playedSeconds = Math.min(this.durationSeconds, this.playedSeconds + seconds);
    if (this.playedSeconds >= this.durationSeconds) this.done = true;
    this.notify();
  }

  finish(): void {
    this.playedSeconds = this.durationSeconds;
    this.done = true;
    this.notify();
  }

  get fraction(): number {
    return Math.min(1, this.playedSeconds / this.durationSeconds);
  }

  get completed(): boolean {
    return this.done;
  }

  onChange(listener: () => void): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) listener();
  }
}

export type PlayerFactory = (url: string) => AudioPlayer;
