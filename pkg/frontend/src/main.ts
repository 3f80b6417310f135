/** Browser wiring: forms, job banners, and view mounting. */

import { ApiError, DashboardApi } from "./api.js";
import { ConfigValidationError, openFromHistory, pinTopic, reclusterControls,
         runRegression, unpinTopic } from "./session.js";
import { ExplorationSession, Method, ModelConfigInput, newSession } from "./types.js";
import { historyList, impactView, jobBanner, topicBrowser, unitsTable } from "./views.js";

let session: ExplorationSession = newSession("");
let api: DashboardApi | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function setBanner(html: string): void {
  el("banner").innerHTML = html;
}

function readConfig(): ModelConfigInput {
  return {
    method: (el<HTMLSelectElement>("method").value || "m1") as Method,
    k: Number(el<HTMLInputElement>("k").value),
    min_cluster_size: Number(el<HTMLInputElement>("mcs").value),
    reduced_dim: Number(el<HTMLInputElement>("reduced-dim").value) || 5,
    seed: Number(el<HTMLInputElement>("seed").value) || 0,
  };
}

async function refreshTopics(): Promise<void> {
  if (!api || !session.lastModelId) return;
  const topics = await api.getTopics(session.lastModelId);
  el("topics").innerHTML = topicBrowser(topics.doc, session.pinnedTopics);
  el("history").innerHTML = historyList(session.history);
  for (const button of el("topics").querySelectorAll<HTMLButtonElement>("button.drill")) {
    button.addEventListener("click", () => void showUnits(Number(button.dataset.topicId)));
  }
  for (const button of el("topics").querySelectorAll<HTMLButtonElement>("button.pin")) {
    button.addEventListener("click", () => {
      const topicId = Number(button.dataset.topicId);
      session = session.pinnedTopics.includes(topicId)
        ? unpinTopic(session, topicId)
        : pinTopic(session, topicId);
      void refreshTopics();
    });
  }
  for (const button of el("history").querySelectorAll<HTMLButtonElement>("button.open-model")) {
    button.addEventListener("click", () => {
      session = openFromHistory(session, button.dataset.modelId!);
      void refreshTopics();
      void refreshImpact();
    });
  }
}

async function showUnits(topicId: number): Promise<void> {
  if (!api || !session.lastModelId) return;
  const units = await api.getTopicUnits(session.lastModelId, topicId, 20);
  el("units").innerHTML = unitsTable(units.doc);
}

async function refreshImpact(): Promise<void> {
  if (!api || !session.lastModelId || !session.lastFitId) {
    el("impact").innerHTML = "";
    return;
  }
  const fit = await api.getFit(session.lastFitId);
  const report = await api.getReport(session.lastModelId, session.lastFitId);
  el("impact").innerHTML = impactView(fit.doc, report.doc);
}

async function onRecluster(): Promise<void> {
  if (!api) return;
  const config = readConfig();
  setBanner(jobBanner("cluster", "queued"));
  try {
    session = await reclusterControls(session, config, api);
    setBanner(jobBanner("cluster", "done"));
    await refreshTopics();
    await refreshImpact();
  } catch (error) {
    if (error instanceof ConfigValidationError) {
      setBanner(jobBanner("cluster", "failed", error.problems.join("; ")));
      return; // invalid config: nothing was sent
    }
    setBanner(jobBanner("cluster", "failed",
                        error instanceof ApiError ? error.message : String(error)));
  }
}

async function onRegress(withSentiment: boolean): Promise<void> {
  if (!api) return;
  setBanner(jobBanner("regress", "queued"));
  try {
    session = await runRegression(session, { with_sentiment: withSentiment, seed: 0 }, api);
    setBanner(jobBanner("regress", "done"));
    await refreshImpact();
  } catch (error) {
    setBanner(jobBanner("regress", "failed",
                        error instanceof ApiError ? error.message : String(error)));
  }
}

export function boot(): void {
  el("connect").addEventListener("click", () => {
    const baseUrl = el<HTMLInputElement>("base-url").value.replace(/\/$/, "");
    const corpusId = el<HTMLInputElement>("corpus-id").value.trim();
    api = new DashboardApi(baseUrl);
    session = { ...newSession(baseUrl), corpusId };
    setBanner(`<div class="banner done">connected to ${baseUrl}</div>`);
  });
  el("recluster").addEventListener("click", () => void onRecluster());
  el("regress-with").addEventListener("click", () => void onRegress(true));
  el("regress-without").addEventListener("click", () => void onRegress(false));
}

if (typeof document !== "undefined" && document.getElementById("connect")) {
  boot();
}
