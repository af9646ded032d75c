/** Page wiring: poll the service, render the three panels and the proposal
 * sidebar, and push decisions back. All numbers shown come from the API. */

import { ApiClient, ApiRequestError } from "./api.js";
import { svgForecast, svgScatter } from "./charts.js";
import type { PanelPayload, StateResponse } from "./types.js";
import {
  NeighborSortKey,
  ProposalCardModel,
  buildForecastChart,
  buildPageModel,
  buildProposalCard,
  buildScatter,
  decisionFromCard,
  sortNeighborRows,
} from "./viewmodel.js";

const params = new URLSearchParams(window.location.search);
const api = new ApiClient(params.get("api") ?? "http://127.0.0.1:8000");
const pollSeconds = Number(params.get("poll") ?? "30");

let selected: string | null = null;
let sortKey: NeighborSortKey = "combined";
let card: ProposalCardModel | null = null;
let lastState: StateResponse | null = null;

const el = (id: string) => document.getElementById(id)!;

function setBanner(text: string | null): void {
  const banner = el("banner");
  banner.textContent = text ?? "";
  banner.classList.toggle("hidden", text === null);
}

function renderKeywords(state: StateResponse): void {
  const model = buildPageModel(state, selected, pollSeconds * 2);
  selected = model.selected;
  el("round").textContent = `round ${model.round} (${model.mode})`;
  const list = el("keywords");
  list.innerHTML = "";
  for (const kw of model.keywords) {
    const item = document.createElement("li");
    item.className = kw.selected ? "selected" : "";
    item.innerHTML = `<span class="token">${kw.token}</span>` +
      `<span class="meta">age ${kw.age}, freq ${kw.frequency}</span>`;
    const drop = document.createElement("button");
    drop.textContent = "drop";
    drop.onclick = async (ev) => {
      ev.stopPropagation();
      try {
        await api.removeKeyword(kw.token);
        await refresh();
      } catch (err) {
        setBanner(err instanceof ApiRequestError ? err.message : String(err));
      }
    };
    item.appendChild(drop);
    item.onclick = () => {
      selected = kw.token;
      renderAll();
    };
    list.appendChild(item);
  }
}

function renderPanels(state: StateResponse): void {
  const panels = state.snapshot?.panels ?? {};
  const panel: PanelPayload | undefined = selected ? panels[selected] : undefined;
  const table = el("neighbor-rows");
  table.innerHTML = "";
  if (panel) {
    for (const row of sortNeighborRows(panel.neighbors, sortKey)) {
      const tr = document.createElement("tr");
      tr.innerHTML = `<td>${row.token}</td><td>${row.kind}</td>` +
        `<td>${row.distance.toFixed(4)}</td><td>${row.frequency}</td>` +
        `<td>${row.combined !== undefined ? row.combined.toFixed(4) : ""}</td>`;
      table.appendChild(tr);
    }
    el("scatter-host").innerHTML = svgScatter(buildScatter(panel.projection, selected!));
    el("forecast-host").innerHTML = svgForecast(buildForecastChart(panel.forecast));
    el("forecast-note").textContent = panel.forecast.unforecast
      ? "insufficient data" : `trend: ${panel.forecast.trend}`;
  } else {
    el("scatter-host").innerHTML = "";
    el("forecast-host").innerHTML = "";
    el("forecast-note").textContent = selected ? "no panel for this keyword yet" : "";
  }
}

function renderProposal(state: StateResponse): void {
  const pending = state.snapshot?.pending_proposal ?? null;
  const host = el("proposal");
  if (!pending) {
    host.innerHTML = "<p>no pending proposal</p>";
    card = null;
    return;
  }
  if (!card || card.round !== pending.round) {
    card = buildProposalCard(pending);
  }
  host.innerHTML = `<h3>proposal for round ${card.round}</h3>`;
  const makeList = (title: string, items: ProposalCardModel["additions"], kind: "add" | "remove") => {
    const section = document.createElement("div");
    section.innerHTML = `<h4>${title}</h4>`;
    for (const item of items) {
      const label = document.createElement("label");
      const box = document.createElement("input");
      box.type = "checkbox";
      box.checked = item.accepted;
      box.onchange = () => { item.accepted = box.checked; };
      label.appendChild(box);
      label.append(` ${item.token} (${item.detail})`);
      section.appendChild(label);
    }
    if (items.length === 0) {
      section.append(kind === "add" ? "nothing to add" : "nothing to remove");
    }
    return section;
  };
  host.appendChild(makeList("additions", card.additions, "add"));
  host.appendChild(makeList("removals", card.removals, "remove"));

  const free = document.createElement("input");
  free.placeholder = "free-form keyword";
  const freeError = document.createElement("span");
  freeError.className = "error";
  const submit = document.createElement("button");
  submit.textContent = "submit decision";
  submit.onclick = async () => {
    if (!card) return;
    if (free.value.trim()) card.freeForm = [free.value.trim()];
    try {
      await api.postDecision(decisionFromCard(card));
      card = null;
      setBanner(null);
      await refresh();
    } catch (err) {
      if (err instanceof ApiRequestError && err.status === 409) {
        setBanner("another researcher already decided this proposal; refreshing");
        card = null;
        await refresh();
      } else if (err instanceof ApiRequestError) {
        freeError.textContent = err.message;
      } else {
        setBanner(String(err));
      }
    }
  };
  host.appendChild(free);
  host.appendChild(submit);
  host.appendChild(freeError);
}

function renderAll(): void {
  if (!lastState) return;
  renderKeywords(lastState);
  renderPanels(lastState);
  renderProposal(lastState);
}

async function refresh(): Promise<void> {
  try {
    lastState = await api.getState();
    const model = buildPageModel(lastState, selected, pollSeconds * 2);
    setBanner(model.stale && model.lastRefresh
      ? `showing stale data from ${model.lastRefresh}` : null);
    renderAll();
  } catch (err) {
    const last = lastState?.snapshot?.created_at ?? "never";
    setBanner(`service unreachable (last snapshot: ${last})`);
  }
}

function wireControls(): void {
  for (const key of ["distance", "frequency", "combined"] as NeighborSortKey[]) {
    el(`sort-${key}`).onclick = () => {
      sortKey = key;
      renderAll();
    };
  }
  el("advance").onclick = async () => {
    try {
      await api.advanceRound();
      await refresh();
    } catch (err) {
      setBanner(err instanceof ApiRequestError ? err.message : String(err));
    }
  };
  el("add-keyword").onclick = async () => {
    const field = el("new-keyword") as HTMLInputElement;
    if (!field.value.trim()) return;
    try {
      await api.addKeyword(field.value.trim());
      field.value = "";
      setBanner(null);
      await refresh();
    } catch (err) {
      setBanner(err instanceof ApiRequestError ? err.message : String(err));
    }
  };
  // wheel zoom on the charts: scale the viewBox around its center
  for (const hostId of ["scatter-host", "forecast-host"]) {
    el(hostId).addEventListener("wheel", (ev) => {
      const svg = el(hostId).querySelector("svg");
      if (!svg) return;
      ev.preventDefault();
      const box = svg.getAttribute("viewBox")!.split(" ").map(Number);
      const factor = (ev as WheelEvent).deltaY > 0 ? 1.1 : 0.9;
      const [x, y, w, h] = box;
      const nw = w * factor;
      const nh = h * factor;
      svg.setAttribute("viewBox",
        `${x + (w - nw) / 2} ${y + (h - nh) / 2} ${nw} ${nh}`);
    }, { passive: false });
  }
}

wireControls();
refresh();
window.setInterval(refresh, pollSeconds * 1000);
