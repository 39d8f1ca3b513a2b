// Screen model and DOM rendering for one listening-session document.
//
// Two rules shape everything here. All worker-visible text comes from the
// session document (strings, scale terms); nothing is hardcoded, so a new
// language needs no client change. And items render purely from their type:
// the client has no idea which ACR items are gold or trapping, so their DOM
// is structurally identical to ordinary rating items.

import type { AnswerValue, SessionApi, SessionDocument, SessionItem, SubmissionBody } from "./api.js";
import type { AudioPlayer, PlayerFactory } from "./player.js";

export class ScreenModel {
  private answers = new Map<number, AnswerValue>();
  private players = new Map<number, AudioPlayer[]>();
  private listeners: (() => void)[] = [];

  constructor(readonly doc: SessionDocument) {}

  registerPlayer(index: number, player: AudioPlayer): void {
    const list = this.players.get(index) ?? [];
    list.push(player);
    this.players.set(index, list);
    player.onChange(() => this.notify());
  }

  setAnswer(index: number, value: AnswerValue): void {
    this.answers.set(index, value);
    this.notify();
  }

  clearAnswer(index: number): void {
    this.answers.delete(index);
    this.notify();
  }

  answer(index: number): AnswerValue | undefined {
    return this.answers.get(index);
  }

  /** Every clip of the item played through, and a valid answer selected. */
  itemComplete(item: SessionItem): boolean {
    const players = this.players.get(item.index) ?? [];
    if (players.length !== item.audio.length) return false;
    if (!players.every((p) => p.completed)) return false;
    const value = this.answers.get(item.index);
    return value !== undefined && validAnswer(item, value);
  }

  canSubmit(): boolean {
    return this.doc.items.every((item) => this.itemComplete(item));
  }

  /** Per-item playback fraction: the least-played clip of the item. */
  telemetry(): Record<string, number> {
    const playback: Record<string, number> = {};
    for (const item of this.doc.items) {
      const players = this.players.get(item.index) ?? [];
      playback[String(item.index)] =
        players.length === 0 ? 1.0 : Math.min(...players.map((p) => p.fraction));
    }
    return playback;
  }

  submissionBody(worker: string): SubmissionBody {
    return {
      worker,
      answers: this.doc.items.map((item) => ({
        index: item.index,
        value: this.answers.get(item.index) as AnswerValue,
      })),
      playback: this.telemetry(),
    };
  }

  onChange(listener: () => void): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) listener();
  }
}

function validAnswer(item: SessionItem, value: AnswerValue): boolean {
  switch (item.type) {
    case "acr":
      return typeof value === "number" && value >= 1 && value <= 5;
    case "attestation":
      return value === true; // cannot proceed without attesting
    case "hearing":
    case "level":
      return typeof value === "boolean";
    case "comprehension":
    case "binaural":
      return typeof value === "string" && value.trim().length > 0;
    case "bw":
      return (
        Array.isArray(value) &&
        value.length === item.audio.length &&
        new Set(value).size === value.length &&
        value.every((v) => typeof v === "number" && v >= 0 && v < item.audio.length)
      );
    case "comparison":
      return value === 0 || value === 1;
  }
}

export interface RenderedScreen {
  doc: SessionDocument;
  model: ScreenModel;
  root: HTMLElement;
  submitButton: HTMLButtonElement;
  /** Resolves once the answers have been accepted by the service. */
  whenSubmitted: Promise<void>;
}

export function renderScreen(
  dom: Document,
  api: SessionApi,
  doc: SessionDocument,
  playerFactory: PlayerFactory,
): RenderedScreen {
  const model = new ScreenModel(doc);
  const root = dom.createElement("section");
  root.className = `screen screen-${doc.phase}`;
  root.setAttribute("lang", doc.language);

  const heading = dom.createElement("h2");
  heading.textContent = doc.strings["intro"] ?? "";
  root.appendChild(heading);

  const rules = dom.createElement("p");
  rules.className = "rules";
  rules.textContent = doc.strings["rules"] ?? "";
  root.appendChild(rules);

  const list = dom.createElement("ol");
  list.className = "items";
  for (const item of doc.items) {
    list.appendChild(renderItem(dom, api, doc, item, model, playerFactory));
  }
  root.appendChild(list);

  const submitButton = dom.createElement("button");
  submitButton.type = "button";
  submitButton.className = "submit";
  submitButton.textContent = doc.strings["submit"] ?? "";
  submitButton.disabled = true;
  root.appendChild(submitButton);

  model.onChange(() => {
    submitButton.disabled = !model.canSubmit();
  });

  let resolveSubmitted: () => void;
  let rejectSubmitted: (error: unknown) => void;
  const whenSubmitted = new Promise<void>((resolve, reject) => {
    resolveSubmitted = resolve;
    rejectSubmitted = reject;
  });
  let submitting = false;
  submitButton.addEventListener("click", () => {
    if (submitting || !model.canSubmit()) return;
    submitting = true;
    submitButton.disabled = true;
    api
      .submit(doc, model.submissionBody(api.worker))
      .then(() => resolveSubmitted())
      .catch((error) => {
        submitting = false;
        submitButton.disabled = !model.canSubmit();
        rejectSubmitted(error);
      });
  });

  return { doc, model, root, submitButton, whenSubmitted };
}

function renderItem(
  dom: Document,
  api: SessionApi,
  doc: SessionDocument,
  item: SessionItem,
  model: ScreenModel,
  playerFactory: PlayerFactory,
): HTMLElement {
  const container = dom.createElement("li");
  container.className = "item";
  container.dataset["index"] = String(item.index);

  const prompt = dom.createElement("p");
  prompt.className = "prompt";
  prompt.textContent = promptText(doc, item);
  container.appendChild(prompt);

  const playerElements = item.audio.map((path, clipIndex) => {
    const player = playerFactory(api.audioUrl(path));
    model.registerPlayer(item.index, player);
    return renderPlayer(dom, item, clipIndex, player);
  });
  for (const element of playerElements) container.appendChild(element);

  switch (item.type) {
    case "acr":
      container.appendChild(renderAcrControls(dom, doc, item, model));
      break;
    case "attestation":
      container.appendChild(renderCheckbox(dom, item, model));
      break;
    case "hearing":
    case "level":
      container.appendChild(renderYesNo(dom, item, model));
      break;
    case "comprehension":
    case "binaural":
      container.appendChild(renderTextEntry(dom, item, model));
      break;
    case "bw":
      container.appendChild(renderRanking(dom, item, model));
      break;
    case "comparison":
      container.appendChild(renderComparisonChoice(dom, item, model));
      break;
  }
  return container;
}

function promptText(doc: SessionDocument, item: SessionItem): string {
  // every prompt is served; acr items use the rating question
  const byType: Record<string, string | undefined> = {
    acr: doc.strings["question"],
    attestation: doc.strings["attestation"],
    hearing: doc.strings["hearing"],
    comprehension: doc.strings["comprehension"],
    bw: doc.strings["bw"],
    level: doc.strings["level"],
    binaural: doc.strings["binaural"],
    comparison: doc.strings["comparison"],
  };
  return byType[item.type] ?? "";
}

function renderPlayer(
  dom: Document,
  item: SessionItem,
  clipIndex: number,
  player: AudioPlayer,
): HTMLElement {
  const wrapper = dom.createElement("span");
  wrapper.className = "player";
  const button = dom.createElement("button");
  button.type = "button";
  button.className = "play";
  button.textContent = "▶"; // language-neutral glyph
  button.setAttribute("aria-label", `▶ ${clipIndex + 1}`);
  button.addEventListener("click", () => player.play());
  wrapper.appendChild(button);
  const meter = dom.createElement("progress");
  meter.max = 1;
  meter.value = 0;
  player.onChange(() => {
    meter.value = player.fraction;
    if (player.completed) wrapper.classList.add("played");
  });
  wrapper.appendChild(meter);
  return wrapper;
}

function renderAcrControls(
  dom: Document,
  doc: SessionDocument,
  item: SessionItem,
  model: ScreenModel,
): HTMLElement {
  // the served scale is best-first; render top-to-bottom as served
  const group = dom.createElement("fieldset");
  group.className = "acr-scale";
  for (const label of doc.scale) {
    const row = dom.createElement("label");
    row.className = "acr-option";
    const input = dom.createElement("input");
    input.type = "radio";
    input.name = `item-${item.index}`;
    input.value = String(label.value);
    input.addEventListener("change", () => {
      if (input.checked) model.setAnswer(item.index, label.value);
    });
    row.appendChild(input);
    const term = dom.createElement("span");
    term.textContent = label.term;
    row.appendChild(term);
    group.appendChild(row);
  }
  return group;
}

function renderCheckbox(dom: Document, item: SessionItem, model: ScreenModel): HTMLElement {
  const row = dom.createElement("label");
  row.className = "attestation";
  const input = dom.createElement("input");
  input.type = "checkbox";
  input.addEventListener("change", () => {
    if (input.checked) model.setAnswer(item.index, true);
    else model.clearAnswer(item.index);
  });
  row.appendChild(input);
  return row;
}

function renderYesNo(dom: Document, item: SessionItem, model: ScreenModel): HTMLElement {
  const group = dom.createElement("fieldset");
  group.className = "yes-no";
  for (const value of [true, false]) {
    const row = dom.createElement("label");
    const input = dom.createElement("input");
    input.type = "radio";
    input.name = `item-${item.index}`;
    input.value = String(value);
    input.addEventListener("change", () => {
      if (input.checked) model.setAnswer(item.index, value);
    });
    row.appendChild(input);
    const glyph = dom.createElement("span");
    glyph.textContent = value ? "✓" : "✗";
    row.appendChild(glyph);
    group.appendChild(row);
  }
  return group;
}

function renderTextEntry(dom: Document, item: SessionItem, model: ScreenModel): HTMLElement {
  const input = dom.createElement("input");
  input.type = "text";
  input.className = "text-entry";
  input.addEventListener("input", () => {
    if (input.value.trim()) model.setAnswer(item.index, input.value);
    else model.clearAnswer(item.index);
  });
  return input;
}

function renderRanking(dom: Document, item: SessionItem, model: ScreenModel): HTMLElement {
  // one rank selector per served clip; rank 1 = most audible noise
  const group = dom.createElement("fieldset");
  group.className = "ranking";
  const selects: HTMLSelectElement[] = [];
  const update = () => {
    const ranks = selects.map((s) => Number(s.value));
    if (ranks.some((r) => r === 0) || new Set(ranks).size !== ranks.length) {
      model.clearAnswer(item.index);
      return;
    }
    const order = ranks
      .map((rank, clipIndex) => ({ rank, clipIndex }))
      .sort((a, b) => a.rank - b.rank)
      .map((entry) => entry.clipIndex);
    model.setAnswer(item.index, order);
  };
  item.audio.forEach((_, clipIndex) => {
    const select = dom.createElement("select");
    select.className = "rank";
    select.setAttribute("aria-label", String(clipIndex + 1));
    const blank = dom.createElement("option");
    blank.value = "0";
    blank.textContent = "-";
    select.appendChild(blank);
    for (let rank = 1; rank <= item.audio.length; rank++) {
      const option = dom.createElement("option");
      option.value = String(rank);
      option.textContent = String(rank);
      select.appendChild(option);
    }
    select.addEventListener("change", update);
    selects.push(select);
    group.appendChild(select);
  });
  return group;
}

function renderComparisonChoice(
  dom: Document,
  item: SessionItem,
  model: ScreenModel,
): HTMLElement {
  const group = dom.createElement("fieldset");
  group.className = "comparison-choice";
  item.audio.forEach((_, clipIndex) => {
    const row = dom.createElement("label");
    const input = dom.createElement("input");
    input.type = "radio";
    input.name = `item-${item.index}`;
    input.value = String(clipIndex);
    input.addEventListener("change", () => {
      if (input.checked) model.setAnswer(item.index, clipIndex);
    });
    row.appendChild(input);
    const numeral = dom.createElement("span");
    numeral.textContent = String(clipIndex + 1);
    row.appendChild(numeral);
    group.appendChild(row);
  });
  return group;
}
