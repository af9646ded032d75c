/** Pure transforms from API payloads to render-ready view models. Sorting and
 * scaling only; every displayed number is a server-provided field. */

import type {
  ForecastPayload,
  KeywordInfo,
  NeighborRow,
  ProjectionPoint,
  ProposalPayload,
  SnapshotPayload,
  StateResponse,
} from "./types.js";

export type NeighborSortKey = "distance" | "frequency" | "combined";

export function sortNeighborRows(rows: NeighborRow[], key: NeighborSortKey): NeighborRow[] {
  const copy = [...rows];
  if (key === "frequency") {
    copy.sort((a, b) => b.frequency - a.frequency || a.token.localeCompare(b.token));
  } else if (key === "combined") {
    copy.sort((a, b) => (a.combined ?? 0) - (b.combined ?? 0) || a.token.localeCompare(b.token));
  } else {
    copy.sort((a, b) => a.distance - b.distance || a.token.localeCompare(b.token));
  }
  return copy;
}

export interface ScatterBubble {
  token: string;
  x: number;
  y: number;
  radius: number;
  frequency: number;
  highlighted: boolean;
}

export const MIN_RADIUS = 4;
export const MAX_RADIUS = 22;

/** Bubble radius scales linearly with corpus frequency. */
export function buildScatter(points: ProjectionPoint[], highlight: string): ScatterBubble[] {
  const maxFreq = Math.max(1, ...points.map((p) => p.frequency));
  return points.map((p) => ({
    token: p.token,
    x: p.x,
    y: p.y,
    radius: MIN_RADIUS + (MAX_RADIUS - MIN_RADIUS) * (p.frequency / maxFreq),
    frequency: p.frequency,
    highlighted: p.token === highlight,
  }));
}

export interface ForecastChartModel {
  unforecast: boolean;
  trend: string | null;
  history: { index: number; value: number }[];
  forecast: { index: number; value: number }[];
  band: { index: number; lower: number; upper: number }[];
}

export function buildForecastChart(payload: ForecastPayload): ForecastChartModel {
  const historyLength = payload.history.length;
  return {
    unforecast: payload.unforecast,
    trend: payload.trend,
    history: payload.history.map((value, index) => ({ index, value })),
    forecast: payload.points.map((value, i) => ({ index: historyLength + i, value })),
    band: payload.points.map((_, i) => ({
      index: historyLength + i,
      lower: payload.ci_lower[i],
      upper: payload.ci_upper[i],
    })),
  };
}

export interface ProposalItemModel {
  token: string;
  accepted: boolean;
  detail: string;
}

export interface ProposalCardModel {
  round: number;
  status: string;
  additions: ProposalItemModel[];
  removals: ProposalItemModel[];
  freeForm: string[];
}

export function buildProposalCard(proposal: ProposalPayload): ProposalCardModel {
  return {
    round: proposal.round,
    status: proposal.status,
    additions: proposal.additions.map((a) => ({
      token: a.token,
      accepted: true,
      detail: `score ${a.score.toFixed(3)}, freq ${a.raw_frequency}` +
        (a.unforecast ? ", no forecast" : `, slope ${a.slope.toFixed(3)}`),
    })),
    removals: proposal.removals.map((r) => ({
      token: r.token,
      accepted: true,
      detail: r.reason,
    })),
    freeForm: [],
  };
}

/** The POST body for a decision: checked additions plus free-form entries,
 * checked removals. Accept-all therefore round-trips the proposal unchanged. */
export function decisionFromCard(card: ProposalCardModel): { additions: string[]; removals: string[] } {
  return {
    additions: [
      ...card.additions.filter((a) => a.accepted).map((a) => a.token),
      ...card.freeForm,
    ],
    removals: card.removals.filter((r) => r.accepted).map((r) => r.token),
  };
}

export interface KeywordRowModel extends KeywordInfo {
  selected: boolean;
}

export interface PageModel {
  round: number;
  mode: string;
  lastRefresh: string | null;
  keywords: KeywordRowModel[];
  selected: string | null;
  stale: boolean;
}

export function buildPageModel(state: StateResponse, selected: string | null,
                               staleAfterSeconds: number, now: Date = new Date()): PageModel {
  const snapshot: SnapshotPayload | null = state.snapshot;
  const keywords = (snapshot?.keywords ?? state.state.keywords.map((token) => ({
    token, age: 0, frequency: 0,
  }))).map((k) => ({ ...k, selected: k.token === selected }));
  const last = snapshot?.created_at ?? state.state.last_refresh;
  const stale = last !== null
    ? (now.getTime() - new Date(last).getTime()) / 1000 > staleAfterSeconds
    : true;
  return {
    round: state.state.current_round,
    mode: state.state.mode,
    lastRefresh: last,
    keywords,
    selected: selected ?? keywords[0]?.token ?? null,
    stale,
  };
}
