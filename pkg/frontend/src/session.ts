/**
 * Exploration-session logic: config validation, recluster + regression jobs,
 * and a client-side history so earlier models stay reachable. Sessions are
 * treated as immutable values; every operation returns a new session.
 */

import { DashboardApi } from "./api.js";
import { ExplorationSession, HistoryEntry, ModelConfigInput, RegressInput } from "./types.js";

export class ConfigValidationError extends Error {
  constructor(public readonly problems: string[]) {
    super(problems.join("; "));
  }
}

/** Client-side checks mirroring the service's 422 rules; run before any request. */
export function validateConfig(config: ModelConfigInput): string[] {
  const problems: string[] = [];
  if (!Number.isInteger(config.k) || config.k < 1) {
    problems.push("k must be an integer >= 1");
  }
  if (!Number.isInteger(config.min_cluster_size) || config.min_cluster_size < 2) {
    problems.push("min_cluster_size must be an integer >= 2");
  }
  if (!["m1", "m2", "m3"].includes(config.method)) {
    problems.push(`unknown method ${String(config.method)}`);
  }
  if (config.min_samples != null && config.min_samples < 1) {
    problems.push("min_samples must be >= 1 when set");
  }
  if (config.reduced_dim != null && config.reduced_dim < 1) {
    problems.push("reduced_dim must be >= 1 when set");
  }
  if (config.split_k != null && config.split_k < 1) {
    problems.push("split_k must be >= 1 when set");
  }
  return problems;
}

function withHistory(history: HistoryEntry[], entry: HistoryEntry): HistoryEntry[] {
  const existing = history.find((h) => h.modelId === entry.modelId);
  if (!existing) return [...history, entry];
  return history.map((h) =>
    h.modelId === entry.modelId
      ? { ...h, fitIds: [...new Set([...h.fitIds, ...entry.fitIds])] }
      : h,
  );
}

/**
 * Submit a (possibly changed) clustering config and wait for the model.
 * Identical configs hit the service cache and return the same model id
 * without recompute; the previous model stays in the history either way.
 */
export async function reclusterControls(
  session: ExplorationSession,
  config: ModelConfigInput,
  api: DashboardApi,
): Promise<ExplorationSession> {
  if (!session.corpusId) {
    throw new Error("select a corpus before clustering");
  }
  const problems = validateConfig(config);
  if (problems.length > 0) {
    throw new ConfigValidationError(problems); // no request is sent
  }
  const job = await api.postModel(session.corpusId, config);
  const done = job.status === "done" ? job : await api.pollJob(job.job_id);
  const modelId = job.model_id ?? done.artifact;
  return {
    ...session,
    currentConfig: { ...config },
    lastModelId: modelId,
    lastFitId: null,
    history: withHistory(session.history, { config: { ...config }, modelId, fitIds: [] }),
  };
}

/** Run a regression against the session's current model and record the fit. */
export async function runRegression(
  session: ExplorationSession,
  payload: RegressInput,
  api: DashboardApi,
): Promise<ExplorationSession> {
  if (!session.lastModelId) {
    throw new Error("build a model before regressing");
  }
  const job = await api.postRegress(session.lastModelId, payload);
  const done = job.status === "done" ? job : await api.pollJob(job.job_id);
  const fitId = job.fit_id ?? done.artifact;
  const modelId = session.lastModelId;
  return {
    ...session,
    lastFitId: fitId,
    history: session.history.map((h) =>
      h.modelId === modelId && !h.fitIds.includes(fitId)
        ? { ...h, fitIds: [...h.fitIds, fitId] }
        : h,
    ),
  };
}

export function pinTopic(session: ExplorationSession, topicId: number): ExplorationSession {
  if (session.pinnedTopics.includes(topicId)) return session;
  return { ...session, pinnedTopics: [...session.pinnedTopics, topicId] };
}

export function unpinTopic(session: ExplorationSession, topicId: number): ExplorationSession {
  return { ...session, pinnedTopics: session.pinnedTopics.filter((t) => t !== topicId) };
}

/** Reopen a model from history without resubmitting anything. */
export function openFromHistory(
  session: ExplorationSession,
  modelId: string,
): ExplorationSession {
  const entry = session.history.find((h) => h.modelId === modelId);
  if (!entry) {
    throw new Error(`model ${modelId} is not in this session's history`);
  }
  return {
    ...session,
    currentConfig: { ...entry.config },
    lastModelId: entry.modelId,
    lastFitId: entry.fitIds.length > 0 ? entry.fitIds[entry.fitIds.length - 1]! : null,
  };
}
