// Mirrors the JSON bodies served by the backend. Numbers are rendered as
// the strings the server sent — the UI never recomputes anything.

export interface FigureView {
  url: string;
  alt_text: string;
  kind: string;
}

export interface Citation {
  kind: "dataset" | "document" | "web";
  identifier: string;
}

export interface Provenance {
  source_name: string;
  dataset_id: string;
  station_or_grid: string;
  unit: string;
  datum: string | null;
  time_span: { start: string; end: string; resolution: string };
  retrieved_at: string;
  processing_steps: string[];
}

export interface Answer {
  text: string;
  figures: FigureView[];
  data: Record<string, unknown>;
  citations: Citation[];
  provenance: Provenance[];
  notes: string[];
}

export interface ApiError {
  error: string;
  detail: string;
  [extra: string]: unknown;
}

export interface StatRow {
  name: string;
  value: string;
  unit: string;
}
