import { beforeEach, describe, expect, it } from "vitest";

import { DashboardApi, FetchLike } from "../src/api.js";
import { ConfigValidationError, openFromHistory, pinTopic, reclusterControls,
         runRegression, unpinTopic, validateConfig } from "../src/session.js";
import { ExplorationSession, ModelConfigInput, newSession } from "../src/types.js";

function response(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

/** Scripted service: model ids derive from the config, jobs complete after one poll. */
function scriptedFetch(log: string[]): FetchLike {
  const pending = new Set<string>();
  return async (url, init) => {
    log.push(`${init?.method ?? "GET"} ${url}`);
    const modelMatch = /\/corpora\/(\w+)\/models$/.exec(url);
    if (modelMatch && init?.method === "POST") {
      const config = JSON.parse(String(init.body)) as ModelConfigInput;
      const modelId = `model-${config.method}-k${config.k}-s${config.seed ?? 0}`;
      const fresh = !pending.has(modelId);
      pending.add(modelId);
      return response(200, {
        job_id: `model-${modelId}`, kind: "model",
        status: fresh ? "queued" : "done",
        config_hash: modelId, artifact: modelId, error: null, model_id: modelId,
      });
    }
    const regressMatch = /\/models\/([\w-]+)\/regress$/.exec(url);
    if (regressMatch && init?.method === "POST") {
      const payload = JSON.parse(String(init.body)) as { with_sentiment: boolean };
      const fitId = `fit-${regressMatch[1]}-${payload.with_sentiment ? "with" : "without"}`;
      return response(200, {
        job_id: `regress-${fitId}`, kind: "regress", status: "queued",
        config_hash: fitId, artifact: fitId, error: null, fit_id: fitId,
      });
    }
    const jobMatch = /\/jobs\/([\w-]+)$/.exec(url);
    if (jobMatch) {
      const artifact = jobMatch[1]!.replace(/^(model|regress)-/, "");
      return response(200, {
        job_id: jobMatch[1], kind: "job", status: "done",
        config_hash: artifact, artifact, error: null,
      });
    }
    return response(404, { detail: `no route for ${url}` });
  };
}

const config: ModelConfigInput = { method: "m3", k: 8, min_cluster_size: 30, seed: 0 };

describe("validateConfig", () => {
  it("accepts a sane config", () => {
    expect(validateConfig(config)).toEqual([]);
  });

  it("rejects k=0, tiny clusters, unknown methods", () => {
    expect(validateConfig({ ...config, k: 0 })).toContain("k must be an integer >= 1");
    expect(validateConfig({ ...config, min_cluster_size: 1 })).not.toEqual([]);
    expect(validateConfig({ ...config, method: "m9" as never })).not.toEqual([]);
  });
});

describe("reclusterControls", () => {
  let log: string[];
  let api: DashboardApi;
  let session: ExplorationSession;

  beforeEach(() => {
    log = [];
    api = new DashboardApi("http://svc", scriptedFetch(log), 1);
    session = { ...newSession("http://svc"), corpusId: "c1" };
  });

  it("invalid config raises client-side and sends no request", async () => {
    await expect(reclusterControls(session, { ...config, k: 0 }, api))
      .rejects.toBeInstanceOf(ConfigValidationError);
    expect(log).toEqual([]);
  });

  it("submits, polls, and appends history", async () => {
    const next = await reclusterControls(session, config, api);
    expect(next.lastModelId).toBe("model-m3-k8-s0");
    expect(next.history).toHaveLength(1);
    expect(next.currentConfig).toEqual(config);
    expect(session.history).toHaveLength(0); // input session untouched
  });

  it("changing k yields a new model id and keeps the old one reachable", async () => {
    const first = await reclusterControls(session, config, api);
    const second = await reclusterControls(first, { ...config, k: 4 }, api);
    expect(second.lastModelId).toBe("model-m3-k4-s0");
    expect(second.history.map((h) => h.modelId)).toEqual(
      ["model-m3-k8-s0", "model-m3-k4-s0"]);
    const reopened = openFromHistory(second, "model-m3-k8-s0");
    expect(reopened.lastModelId).toBe("model-m3-k8-s0");
    expect(reopened.currentConfig?.k).toBe(8);
  });

  it("identical config resubmitted returns instantly from the cache", async () => {
    const first = await reclusterControls(session, config, api);
    log.length = 0;
    const second = await reclusterControls(first, config, api);
    expect(second.lastModelId).toBe(first.lastModelId);
    expect(second.history).toHaveLength(1);
    expect(log).toEqual(["POST http://svc/corpora/c1/models"]); // no job polling
  });

  it("requires a corpus", async () => {
    await expect(reclusterControls(newSession("http://svc"), config, api))
      .rejects.toThrow(/corpus/);
  });
});

describe("runRegression", () => {
  it("records the fit id on the session and its history entry", async () => {
    const log: string[] = [];
    const api = new DashboardApi("http://svc", scriptedFetch(log), 1);
    let session = { ...newSession("http://svc"), corpusId: "c1" };
    session = await reclusterControls(session, config, api);
    const withFit = await runRegression(session, { with_sentiment: true }, api);
    expect(withFit.lastFitId).toBe("fit-model-m3-k8-s0-with");
    expect(withFit.history[0]!.fitIds).toEqual(["fit-model-m3-k8-s0-with"]);
    const toggled = await runRegression(withFit, { with_sentiment: false }, api);
    expect(toggled.lastFitId).toBe("fit-model-m3-k8-s0-without");
    expect(toggled.history[0]!.fitIds).toHaveLength(2);
  });
});

describe("pinning", () => {
  it("pin/unpin round-trips and deduplicates", () => {
    let session = newSession("http://svc");
    session = pinTopic(session, 3);
    session = pinTopic(session, 3);
    expect(session.pinnedTopics).toEqual([3]);
    session = unpinTopic(session, 3);
    expect(session.pinnedTopics).toEqual([]);
  });
});
