/**
 * Dashboard acceptance against a live service instance over a fixture corpus:
 * changing k yields a new model id with at most k topics, n.s. rows follow
 * the service's p > .05 rule, and every displayed number is byte-equal to the
 * service JSON.
 */

import { spawn, spawnSync, ChildProcess } from "node:child_process";
import { createServer, Server } from "node:http";
import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { DashboardApi } from "../src/api.js";
import { reclusterControls, runRegression } from "../src/session.js";
import { display, numeric, RawNumber } from "../src/rawjson.js";
import { ExplorationSession, newSession } from "../src/types.js";
import { impactTable, impactView, topicBrowser } from "../src/views.js";

const PORT = 8300 + Math.floor(Math.random() * 500);
const BASE = `http://127.0.0.1:${PORT}`;

let serverProc: ChildProcess | null = null;
let mockLlm: Server | null = null;
let api: DashboardApi;
let session: ExplorationSession;

function startMockLlm(repliesByText: Map<string, string>): Promise<number> {
  return new Promise((resolve) => {
    mockLlm = createServer((req, res) => {
      let body = "";
      req.on("data", (chunk) => (body += chunk));
      req.on("end", () => {
        const prompt = (JSON.parse(body) as { messages: { content: string }[] })
          .messages[0]!.content;
        let reply = "[]";
        for (const [text, scripted] of repliesByText) {
          if (prompt.includes(text)) {
            reply = scripted;
            break;
          }
        }
        res.setHeader("Content-Type", "application/json");
        res.end(JSON.stringify({ choices: [{ message: { content: reply } }] }));
      });
    });
    mockLlm.listen(0, "127.0.0.1", () => {
      resolve((mockLlm!.address() as { port: number }).port);
    });
  });
}

async function waitForService(timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    try {
      const res = await fetch(`${BASE}/jobs/does-not-exist`);
      if (res.status === 404) return;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) throw new Error("service did not come up");
    await new Promise((r) => setTimeout(r, 200));
  }
}

beforeAll(async () => {
  const workdir = mkdtempSync(join(tmpdir(), "dashboard-acceptance-"));
  const fixture = join(workdir, "fixture");
  const synth = spawnSync("opinionmine", [
    "synth", "--out", fixture, "--reviews", "260", "--topics", "4",
    "--dim", "16", "--seed", "1",
  ], { encoding: "utf-8" });
  expect(synth.status, synth.stderr).toBe(0);

  const reviews = readFileSync(join(fixture, "reviews.jsonl"), "utf-8");
  const units = readFileSync(join(fixture, "units.jsonl"), "utf-8")
    .trim().split("\n").map((line) => JSON.parse(line) as {
      review_id: string; label: string; excerpt: string; sentiment: number;
    });
  const byReview = new Map<string, [string, string, number][]>();
  for (const u of units) {
    const triples = byReview.get(u.review_id) ?? [];
    triples.push([u.label, u.excerpt, u.sentiment]);
    byReview.set(u.review_id, triples);
  }
  const replies = new Map<string, string>();
  for (const line of reviews.trim().split("\n")) {
    const r = JSON.parse(line) as { review_id: string; text: string };
    replies.set(r.text, JSON.stringify(byReview.get(r.review_id) ?? []));
  }
  const llmPort = await startMockLlm(replies);

  serverProc = spawn("opinionmine", [
    "serve", "--data-dir", join(workdir, "data"), "--port", String(PORT),
  ], { stdio: "ignore" });
  await waitForService();

  api = new DashboardApi(BASE);
  const corpusId = await api.postCorpus(reviews);
  session = { ...newSession(BASE), corpusId };
  const extract = await api.postExtract(corpusId, {
    endpoint_url: `http://127.0.0.1:${llmPort}/v1/chat`,
    model: "scripted", backoff_base: 0.0,
  });
  await api.pollJob(extract.job_id);
  const embed = await api.postEmbed(corpusId, {
    path: join(fixture, "vectors.jsonl"),
  });
  await api.pollJob(embed.job_id);
}, 120_000);

afterAll(() => {
  serverProc?.kill();
  mockLlm?.close();
});

describe("dashboard against a live service", () => {
  it("changing k produces a new model id with at most k topics", async () => {
    session = await reclusterControls(session, {
      method: "m3", k: 8, min_cluster_size: 30, reduced_dim: 4, seed: 0,
    }, api);
    const first = session.lastModelId!;
    const topicsA = await api.getTopics(first);
    expect((topicsA.doc as any).topics.length).toBeLessThanOrEqual(8);

    session = await reclusterControls(session, {
      method: "m3", k: 4, min_cluster_size: 30, reduced_dim: 4, seed: 0,
    }, api);
    const second = session.lastModelId!;
    expect(second).not.toBe(first);
    const topicsB = await api.getTopics(second);
    expect((topicsB.doc as any).topics.length).toBeLessThanOrEqual(4);
    expect(session.history.map((h) => h.modelId)).toEqual([first, second]);
  }, 120_000);

  it("n.s. rows render exactly per the p > .05 rule", async () => {
    session = await runRegression(session, { with_sentiment: true, seed: 0 }, api);
    const fit = await api.getFit(session.lastFitId!);
    const report = await api.getReport(session.lastModelId!, session.lastFitId!);
    const html = impactTable(report.doc);
    const pByTopic = new Map<number, number>();
    for (const c of (fit.doc as any).coefficients) {
      pByTopic.set(numeric(c.topic_id), numeric(c.p));
    }
    const rows = (report.doc as any).impact_table as any[];
    expect(rows.length).toBeGreaterThan(0);
    for (const row of rows) {
      const topicId = numeric(row.topic_id);
      const p = pByTopic.get(topicId)!;
      const expectNs = p > 0.05;
      expect(display(row.beta) === "n.s.", `topic ${topicId} p=${p}`).toBe(expectNs);
      const marker = expectNs ? `class="ns" data-topic-id="${topicId}"`
        : `class="significant" data-topic-id="${topicId}"`;
      expect(html).toContain(marker);
    }
  }, 120_000);

  it("all displayed numbers are byte-equal to the service JSON", async () => {
    const topics = await api.getTopics(session.lastModelId!);
    const fit = await api.getFit(session.lastFitId!);
    const report = await api.getReport(session.lastModelId!, session.lastFitId!);

    const browser = topicBrowser(topics.doc);
    for (const topic of (topics.doc as any).topics) {
      const precision = topic.sentiment_precision as RawNumber;
      expect(topics.raw).toContain(precision.raw);       // token really is the wire form
      expect(browser).toContain(`>${precision.raw}<`);   // and is displayed unchanged
      expect(browser).toContain(`${(topic.size as RawNumber).raw} units`);
    }
    const outlierRate = (topics.doc as any).outlier_rate as RawNumber;
    expect(browser).toContain(`outlier rate: ${outlierRate.raw}`);

    const view = impactView(fit.doc, report.doc);
    const cv = (fit.doc as any).cross_validation;
    for (const token of [cv.mean_r2 as RawNumber, cv.mean_rmse as RawNumber]) {
      expect(fit.raw).toContain(token.raw);
      expect(view).toContain(token.raw);
    }
    for (const row of (report.doc as any).impact_table) {
      const beta = display(row.beta);
      const p = display(row.p);
      expect(report.raw).toContain(`"beta": ${JSON.stringify(beta)}`);
      expect(view).toContain(`<td class="beta">${beta}</td>`);
      expect(view).toContain(`<td class="p">${p}</td>`);
    }
  }, 120_000);
});
