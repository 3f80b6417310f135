/**
 * Pure HTML/SVG string rendering of service documents.
 *
 * Every displayed number is the service's own token (RawNumber.raw) or a
 * string the service produced (e.g. "n.s."); the client computes layout
 * geometry only, never values.
 */

import { display, numeric, RawValue } from "./rawjson.js";

type Obj = { [key: string]: RawValue };

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

function asObj(value: RawValue | undefined): Obj {
  if (value === null || typeof value !== "object" || Array.isArray(value)) {
    throw new TypeError("expected a JSON object");
  }
  return value as Obj;
}

function asArray(value: RawValue | undefined): RawValue[] {
  if (!Array.isArray(value)) throw new TypeError("expected a JSON array");
  return value;
}

// --- topic browser ----------------------------------------------------------

function topicCard(topic: Obj, pinned: boolean): string {
  const keywords = asArray(topic.keywords)
    .map((k) => escapeHtml(display(k)))
    .join(", ");
  const precision = display(topic.sentiment_precision);
  // bar width is geometry; the label next to it is the verbatim value
  const width = Math.round(Math.min(1, Math.max(0, numeric(topic.sentiment_precision))) * 100);
  const topicId = display(topic.topic_id);
  return `
  <article class="topic-card${pinned ? " pinned" : ""}" data-topic-id="${topicId}">
    <header>
      <span class="topic-name">${keywords || `topic ${topicId}`}</span>
      <span class="badge ${escapeHtml(display(topic.polarity))}">${escapeHtml(display(topic.polarity))}</span>
    </header>
    <div class="topic-meta">
      <span class="size">${display(topic.size)} units</span>
      <span class="precision-bar" title="sentiment precision ${precision}">
        <span class="fill" style="width:${width}%"></span>
      </span>
      <span class="precision-value">${precision}</span>
    </div>
    <p class="example">${escapeHtml(display(topic.example))}</p>
    <button class="drill" data-topic-id="${topicId}">units</button>
    <button class="pin" data-topic-id="${topicId}">${pinned ? "unpin" : "pin"}</button>
  </article>`;
}

export function topicBrowser(topicsDoc: RawValue, pinnedTopics: number[] = []): string {
  const doc = asObj(topicsDoc);
  const topics = asArray(doc.topics).map((t) => asObj(t));
  const isSplit = display(doc.method) === "m3";
  const pinned = new Set(pinnedTopics);
  const card = (t: Obj) => topicCard(t, pinned.has(numeric(t.topic_id)));
  let body: string;
  if (isSplit) {
    const negative = topics.filter((t) => display(t.polarity) === "negative");
    const positive = topics.filter((t) => display(t.polarity) === "positive");
    body = `
    <div class="pane negative"><h3>Negative topics</h3>${negative.map(card).join("")}</div>
    <div class="pane positive"><h3>Positive topics</h3>${positive.map(card).join("")}</div>`;
  } else {
    body = `<div class="pane">${topics.map(card).join("")}</div>`;
  }
  return `
<section class="topic-browser" data-model-id="${escapeHtml(display(doc.model_id))}">
  <header>
    <h2>Topics (${display(doc.method)})</h2>
    <span class="outliers">outlier rate: ${display(doc.outlier_rate)}</span>
  </header>
  ${body}
</section>`;
}

export function unitsTable(unitsDoc: RawValue): string {
  const doc = asObj(unitsDoc);
  const rows = asArray(doc.units)
    .map((u) => asObj(u))
    .map(
      (u) => `
    <tr data-review-id="${escapeHtml(display(u.review_id))}">
      <td>${escapeHtml(display(u.label))}</td>
      <td class="excerpt">${escapeHtml(display(u.excerpt))}</td>
      <td class="sentiment">${display(u.sentiment)}</td>
      <td><button class="show-review" data-review-id="${escapeHtml(display(u.review_id))}">review</button></td>
    </tr>`,
    )
    .join("");
  return `
<section class="topic-units" data-topic-id="${display(doc.topic_id)}">
  <h3>Topic ${display(doc.topic_id)} — ${display(doc.total)} units</h3>
  <table>
    <thead><tr><th>Label</th><th>Excerpt</th><th>Sentiment</th><th></th></tr></thead>
    <tbody>${rows}</tbody>
  </table>
</section>`;
}

// --- impact view ------------------------------------------------------------

function impactRows(reportDoc: Obj): Obj[] {
  return asArray(reportDoc.impact_table).map((r) => asObj(r));
}

export function impactTable(reportDoc: RawValue): string {
  const rows = impactRows(asObj(reportDoc))
    .map((row) => {
      const beta = display(row.beta); // service-rendered string: digits or "n.s."
      const ns = beta === "n.s.";
      return `
    <tr class="${ns ? "ns" : "significant"}" data-topic-id="${display(row.topic_id)}">
      <td>${escapeHtml(display(row.topic))}</td>
      <td>${escapeHtml(display(row.polarity))}</td>
      <td class="beta">${escapeHtml(beta)}</td>
      <td class="p">${escapeHtml(display(row.p))}</td>
      <td class="size">${display(row.size)}</td>
      <td class="example">${escapeHtml(display(row.example))}</td>
    </tr>`;
    })
    .join("");
  return `
<table class="impact-table" data-sortable>
  <thead>
    <tr><th>Topic</th><th>Polarity</th><th>beta</th><th>p</th><th>Size</th><th>Example</th></tr>
  </thead>
  <tbody>${rows}</tbody>
</table>`;
}

const QUADRANT_COLOR: { [key: string]: string } = {
  urgent: "#c62828",
  monitor: "#ef6c00",
  maintain: "#2e7d32",
  promote: "#1565c0",
};

/**
 * Frequency-vs-beta scatter. Point positions are layout geometry; quadrant
 * membership and the beta/frequency labels come verbatim from the service's
 * priority matrix.
 */
export function priorityScatter(reportDoc: RawValue, width = 420, height = 300): string {
  const doc = asObj(reportDoc);
  if (doc.priority_matrix === undefined || doc.priority_matrix === null) {
    return `<p class="no-matrix">No significant topics; no priority matrix.</p>`;
  }
  const matrix = asObj(doc.priority_matrix);
  const cells = asArray(matrix.cells).map((c) => asObj(c));
  if (cells.length === 0) {
    return `<p class="no-matrix">No significant topics; no priority matrix.</p>`;
  }
  // the service renders cell betas as fixed-precision strings; geometry needs
  // their numeric value, labels keep the service string
  const betaValue = (c: Obj) => Number(display(c.beta));
  const freqs = cells.map((c) => numeric(c.frequency));
  const betas = cells.map(betaValue);
  const median = numeric(matrix.median_frequency);
  const maxFreq = Math.max(...freqs, median) * 1.1 + 1;
  const betaSpan = Math.max(...betas.map(Math.abs), 0.1) * 1.2;
  const px = (f: number) => 40 + (f / maxFreq) * (width - 60);
  const py = (b: number) => height / 2 - (b / betaSpan) * (height / 2 - 20);
  const midX = px(median);
  const shade = (x: number, y: number, w: number, h: number, quadrant: string) =>
    `<rect x="${x}" y="${y}" width="${w}" height="${h}" fill="${QUADRANT_COLOR[quadrant]}" opacity="0.08"><title>${quadrant}</title></rect>`;
  const points = cells
    .map((c) => {
      const quadrant = display(c.quadrant);
      const color = QUADRANT_COLOR[quadrant] ?? "#555";
      return `
  <circle cx="${px(numeric(c.frequency))}" cy="${py(betaValue(c))}" r="5" fill="${color}" class="cell ${quadrant}" data-topic-id="${display(c.topic_id)}">
    <title>${escapeHtml(display(c.topic))}: beta ${escapeHtml(display(c.beta))}, frequency ${display(c.frequency)} (${quadrant})</title>
  </circle>`;
    })
    .join("");
  return `
<svg class="priority-matrix" viewBox="0 0 ${width} ${height}" role="img">
  ${shade(midX, 0, width - midX, height / 2, "maintain")}
  ${shade(40, 0, midX - 40, height / 2, "promote")}
  ${shade(midX, height / 2, width - midX, height / 2, "urgent")}
  ${shade(40, height / 2, midX - 40, height / 2, "monitor")}
  <line x1="40" y1="${height / 2}" x2="${width - 20}" y2="${height / 2}" stroke="#999"/>
  <line x1="${midX}" y1="0" x2="${midX}" y2="${height}" stroke="#999" stroke-dasharray="4 3"/>
  <text x="${midX + 4}" y="12" class="axis-label">median frequency ${display(matrix.median_frequency)}</text>
  ${points}
</svg>`;
}

export function impactView(fitDoc: RawValue, reportDoc: RawValue): string {
  const fit = asObj(fitDoc);
  const cv = asObj(fit.cross_validation);
  return `
<section class="impact-view" data-fit-id="${escapeHtml(display(fit.fit_id))}">
  <header>
    <h2>Star-rating impact (${escapeHtml(display(fit.mode))})</h2>
    <span class="cv">hold-out R&#178; ${display(cv.mean_r2)} &middot; RMSE ${display(cv.mean_rmse)} &middot; n ${display(fit.n)}</span>
  </header>
  ${impactTable(reportDoc)}
  ${priorityScatter(reportDoc)}
</section>`;
}

export function jobBanner(kind: string, status: string, error?: string | null): string {
  if (status === "failed") {
    return `<div class="banner error">${escapeHtml(kind)} failed: ${escapeHtml(error ?? "unknown error")}</div>`;
  }
  if (status === "done") {
    return `<div class="banner done">${escapeHtml(kind)} done</div>`;
  }
  return `<div class="banner pending">${escapeHtml(kind)}: ${escapeHtml(status)}&hellip;</div>`;
}

export function historyList(entries: { config: { k: number; method: string }; modelId: string }[]): string {
  if (entries.length === 0) return `<p class="history empty">No models yet.</p>`;
  const items = entries
    .map(
      (e) => `
  <li><button class="open-model" data-model-id="${escapeHtml(e.modelId)}">
    ${escapeHtml(e.config.method)} k=${e.config.k} &rarr; ${escapeHtml(e.modelId)}
  </button></li>`,
    )
    .join("");
  return `<ol class="history">${items}</ol>`;
}
