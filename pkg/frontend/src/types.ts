/** Wire types mirroring the monitor service's JSON payloads. */

export interface MonitorStatePayload {
  run_id: string;
  current_round: number;
  keywords: string[];
  cap: number;
  last_refresh: string | null;
  refresh_interval_seconds: number;
  mode: string;
}

export interface KeywordInfo {
  token: string;
  age: number;
  frequency: number;
}

export interface NeighborRow {
  token: string;
  kind: string;
  similarity: number;
  distance: number;
  frequency: number;
  combined?: number;
}

export interface ProjectionPoint {
  token: string;
  x: number;
  y: number;
  frequency: number;
}

export interface ForecastPayload {
  keyword: string;
  origin?: string;
  bucket_width_seconds?: number;
  history: number[];
  points: number[];
  ci_lower: number[];
  ci_upper: number[];
  level?: number;
  trend: string | null;
  unforecast: boolean;
  validation_mse?: number | null;
}

export interface PanelPayload {
  frequency: number;
  neighbors: NeighborRow[];
  projection: ProjectionPoint[];
  forecast: ForecastPayload;
  frequency_tail: number[];
}

export interface ProposalAddition {
  token: string;
  kind: string;
  score: number;
  slope: number;
  avg_distance: number;
  frequency: number;
  trend_variance: number;
  raw_frequency: number;
  unforecast: boolean;
}

export interface ProposalRemoval {
  token: string;
  reason: string;
}

export interface ProposalPayload {
  round: number;
  status: string;
  additions: ProposalAddition[];
  removals: ProposalRemoval[];
}

export interface SnapshotPayload {
  round: number;
  created_at: string;
  keywords: KeywordInfo[];
  panels: Record<string, PanelPayload>;
  pending_proposal: ProposalPayload | null;
  failed: boolean;
}

export interface StateResponse {
  state: MonitorStatePayload;
  snapshot: SnapshotPayload | null;
}

export interface KeywordsResponse {
  round: number;
  keywords: KeywordInfo[];
}

export interface NeighborsResponse {
  query: string;
  rows: NeighborRow[];
  sort_weights: { distance: number; frequency: number };
}

export interface ProjectionResponse {
  points: ProjectionPoint[];
}

export interface ProposalResponse {
  proposal: ProposalPayload | null;
}

export interface DecisionRequest {
  additions: string[];
  removals: string[];
  forced?: string[];
}

export interface DecisionResponse {
  record: Record<string, unknown>;
  keywords: string[];
}

export interface ApiErrorBody {
  code: number;
  reason: string;
  detail: string;
}
