/** Wire types of the opinionmine HTTP service. */

export type JobStatus = "queued" | "running" | "done" | "failed";

export interface JobRecord {
  job_id: string;
  kind: string;
  status: JobStatus;
  config_hash: string;
  artifact: string;
  error: string | null;
  model_id?: string;
  fit_id?: string;
}

export type Method = "m1" | "m2" | "m3";

export interface ModelConfigInput {
  method: Method;
  k: number;
  min_cluster_size: number;
  min_samples?: number | null;
  reduced_dim?: number;
  seed?: number;
  split_k?: number | null;
}

export interface RegressInput {
  with_sentiment: boolean;
  folds?: number;
  seed?: number;
}

export interface HistoryEntry {
  config: ModelConfigInput;
  modelId: string;
  fitIds: string[];
}

/** Client-side exploration state; server artifacts are never mutated. */
export interface ExplorationSession {
  baseUrl: string;
  corpusId: string | null;
  currentConfig: ModelConfigInput | null;
  lastModelId: string | null;
  lastFitId: string | null;
  pinnedTopics: number[];
  history: HistoryEntry[];
}

export function newSession(baseUrl: string): ExplorationSession {
  return {
    baseUrl,
    corpusId: null,
    currentConfig: null,
    lastModelId: null,
    lastFitId: null,
    pinnedTopics: [],
    history: [],
  };
}
