import type { Answer, ApiError, Provenance, StatRow } from "./types";

export function escapeHtml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/**
 * Flatten the answer's data payload into table rows. Values are
 * stringified verbatim (no rounding, no unit conversion) so every cell
 * string-matches the server payload.
 */
export function statsRows(
  data: Record<string, unknown>,
  unit = "",
  prefix = ""
): StatRow[] {
  const rows: StatRow[] = [];
  for (const [key, value] of Object.entries(data)) {
    // series/timestamp arrays belong in the figure, not the table
    if (key === "series" || key === "errors") continue;
    const name = prefix ? `${prefix}.${key}` : key;
    if (typeof value === "number") {
      rows.push({ name, value: String(value), unit });
    } else if (typeof value === "string") {
      rows.push({ name, value, unit: "" });
    } else if (value && typeof value === "object" && !Array.isArray(value)) {
      rows.push(...statsRows(value as Record<string, unknown>, unit, name));
    }
  }
  return rows;
}

export function renderStatsTable(rows: StatRow[]): string {
  if (rows.length === 0) return "";
  const body = rows
    .map(
      (r) =>
        `<tr><td class="stat-name">${escapeHtml(r.name)}</td>` +
        `<td class="stat-value">${escapeHtml(r.value)}</td>` +
        `<td class="stat-unit">${escapeHtml(r.unit)}</td></tr>`
    )
    .join("");
  return (
    '<table class="stats-table"><thead>' +
    "<tr><th>statistic</th><th>value</th><th>unit</th></tr>" +
    `</thead><tbody>${body}</tbody></table>`
  );
}

export function renderFigures(figures: Answer["figures"], baseUrl = ""): string {
  if (figures.length === 0) return "";
  const imgs = figures
    .map(
      (f) =>
        `<figure><img src="${escapeHtml(baseUrl + f.url)}" ` +
        `alt="${escapeHtml(f.alt_text)}" loading="lazy"></figure>`
    )
    .join("");
  return `<div class="figures">${imgs}</div>`;
}

export function renderProvenance(records: Provenance[]): string {
  if (records.length === 0) return "";
  const panels = records.map((p) => {
    const fields: Array<[string, string | null]> = [
      ["source", p.source_name],
      ["dataset", p.dataset_id],
      ["station / grid", p.station_or_grid],
      ["unit", p.unit],
      ["datum", p.datum], // optional: omitted when null, never blank-rendered
      ["time span", `${p.time_span.start} .. ${p.time_span.end}`],
      ["retrieved", p.retrieved_at],
    ];
    const dl = fields
      .filter(([, v]) => v !== null && v !== "")
      .map(([k, v]) => `<dt>${escapeHtml(k)}</dt><dd>${escapeHtml(v!)}</dd>`)
      .join("");
    const steps = p.processing_steps
      .map((s) => `<li>${escapeHtml(s)}</li>`)
      .join("");
    return (
      `<details class="provenance"><summary>${escapeHtml(p.source_name)} — ` +
      `${escapeHtml(p.dataset_id)}</summary><dl>${dl}</dl>` +
      `<ol class="processing-steps">${steps}</ol></details>`
    );
  });
  return `<div class="provenance-panel">${panels.join("")}</div>`;
}

export function renderCitations(citations: Answer["citations"]): string {
  if (citations.length === 0) return "";
  const items = citations
    .map((c) => {
      const label = escapeHtml(c.identifier);
      const inner =
        c.kind === "web" ? `<a href="${label}" rel="noopener">${label}</a>` : label;
      return `<li class="citation citation-${c.kind}">${inner}</li>`;
    })
    .join("");
  return `<ul class="citations">${items}</ul>`;
}

export function renderAnswer(answer: Answer, baseUrl = ""): string {
  const unit = typeof answer.data["unit"] === "string" ? (answer.data["unit"] as string) : "";
  const notes = answer.notes.length
    ? `<ul class="notes">${answer.notes.map((n) => `<li>${escapeHtml(n)}</li>`).join("")}</ul>`
    : "";
  return (
    '<div class="bubble answer">' +
    `<p class="answer-text">${escapeHtml(answer.text)}</p>` +
    renderFigures(answer.figures, baseUrl) +
    renderStatsTable(statsRows(answer.data, unit)) +
    renderCitations(answer.citations) +
    renderProvenance(answer.provenance) +
    notes +
    "</div>"
  );
}

export function renderError(err: ApiError): string {
  return (
    '<div class="bubble error">' +
    `<span class="error-code">${escapeHtml(err.error)}</span> ` +
    `<span class="error-detail">${escapeHtml(err.detail)}</span></div>`
  );
}

export function renderUserTurn(text: string): string {
  return `<div class="bubble user">${escapeHtml(text)}</div>`;
}
