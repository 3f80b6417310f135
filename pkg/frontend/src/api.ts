/**
 * Typed client for the opinionmine service.
 *
 * GET responses that carry numbers for display are parsed with parseRaw so
 * the views can render the service's own number tokens verbatim.
 */

import { parseRaw, RawValue } from "./rawjson.js";
import { JobRecord, ModelConfigInput, RegressInput } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public readonly status: number, message: string) {
    super(message);
  }
}

export interface RawDoc {
  doc: RawValue;
  raw: string;
}

export class DashboardApi {
  constructor(
    public readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
    public pollIntervalMs = 150,
  ) {}

  private async request(path: string, init?: RequestInit): Promise<string> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    const body = await response.text();
    if (!response.ok) {
      let detail = body;
      try {
        detail = String((JSON.parse(body) as { detail?: string }).detail ?? body);
      } catch {
        // leave raw body as the error detail
      }
      throw new ApiError(response.status, detail);
    }
    return body;
  }

  private async postJson<T>(path: string, payload: unknown): Promise<T> {
    const body = await this.request(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
    return JSON.parse(body) as T;
  }

  async postCorpus(reviewsJsonl: string): Promise<string> {
    const body = await this.request("/corpora", { method: "POST", body: reviewsJsonl });
    return (JSON.parse(body) as { corpus_id: string }).corpus_id;
  }

  postExtract(corpusId: string, payload: object): Promise<JobRecord> {
    return this.postJson(`/corpora/${corpusId}/extract`, payload);
  }

  postEmbed(corpusId: string, payload: object): Promise<JobRecord> {
    return this.postJson(`/corpora/${corpusId}/embed`, payload);
  }

  postModel(corpusId: string, config: ModelConfigInput): Promise<JobRecord> {
    return this.postJson(`/corpora/${corpusId}/models`, config);
  }

  postRegress(modelId: string, payload: RegressInput): Promise<JobRecord> {
    return this.postJson(`/models/${modelId}/regress`, payload);
  }

  getJob(jobId: string): Promise<JobRecord> {
    return this.request(`/jobs/${jobId}`).then((body) => JSON.parse(body) as JobRecord);
  }

  async getRawDoc(path: string): Promise<RawDoc> {
    const raw = await this.request(path);
    return { doc: parseRaw(raw), raw };
  }

  getTopics(modelId: string): Promise<RawDoc> {
    return this.getRawDoc(`/models/${modelId}/topics`);
  }

  getTopicUnits(modelId: string, topicId: number, limit = 20): Promise<RawDoc> {
    return this.getRawDoc(`/models/${modelId}/topics/${topicId}/units?limit=${limit}`);
  }

  getFit(fitId: string): Promise<RawDoc> {
    return this.getRawDoc(`/fits/${fitId}`);
  }

  getReport(modelId: string, fitId?: string): Promise<RawDoc> {
    const suffix = fitId ? `&fit_id=${fitId}` : "";
    return this.getRawDoc(`/models/${modelId}/report?format=json${suffix}`);
  }

  /** Poll a job until it reaches a terminal state; throws on failure. */
  async pollJob(jobId: string, timeoutMs = 120_000): Promise<JobRecord> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const record = await this.getJob(jobId);
      if (record.status === "done") return record;
      if (record.status === "failed") {
        throw new ApiError(500, record.error ?? `job ${jobId} failed`);
      }
      if (Date.now() > deadline) {
        throw new ApiError(504, `job ${jobId} still ${record.status} after ${timeoutMs}ms`);
      }
      await new Promise((resolve) => setTimeout(resolve, this.pollIntervalMs));
    }
  }
}
