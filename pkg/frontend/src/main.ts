// Browser entry point. The service hosts this bundle; workers arrive with
// a token in the URL (?worker=...), everything else is discovered.

import { SessionApi } from "./api.js";
import { HtmlAudioPlayer } from "./player.js";
import { runUntilDone } from "./session.js";

interface CampaignInfo {
  campaign_id: string;
  language: string;
  strings: { complete: string; excluded: string };
}

async function boot(): Promise<void> {
  const mount = document.getElementById("app");
  if (!mount) throw new Error("missing #app element");
  const params = new URLSearchParams(window.location.search);
  const worker = params.get("worker");
  if (!worker) {
    mount.textContent = "?worker=";
    return;
  }
  const base = params.get("service") ?? "";
  const info = (await (await fetch(`${base}/api/campaign`)).json()) as CampaignInfo;
  document.documentElement.lang = info.language;

  const api = new SessionApi(base, info.campaign_id, worker);
  const result = await runUntilDone({
    api,
    mount,
    playerFactory: (url) => new HtmlAudioPlayer(url),
  });

  const finale = document.createElement("p");
  finale.className = `finale finale-${result.kind}`;
  finale.textContent =
    result.kind === "excluded" ? info.strings.excluded : info.strings.complete;
  mount.replaceChildren(finale);
}

boot().catch((error) => {
  const mount = document.getElementById("app");
  if (mount) {
    const note = document.createElement("p");
    note.className = "error";
    note.textContent = String(error);
    mount.replaceChildren(note);
  }
});
