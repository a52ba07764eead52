// DOM painting: an SVG one-line diagram plus checklist, POPS and timeline
// panels. Pure functions of the view model; no fetches here.

import type { Diagram } from "./model.js";
import type { OrderView, TimelineRow } from "./records.js";

const ROW_H = 46;
const PAD = 30;
const WIDTH = 1060;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K, cls?: string, text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  if (text !== undefined) node.textContent = text;
  return node;
}

function svgEl(tag: string, attrs: Record<string, string | number>): SVGElement {
  const node = document.createElementNS("http://www.w3.org/2000/svg", tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, String(v));
  return node;
}

export function renderDiagram(container: HTMLElement, d: Diagram): void {
  container.textContent = "";
  const height = (d.rows.length + 1) * ROW_H;
  const svg = svgEl("svg", {
    viewBox: `0 0 ${WIDTH} ${height}`, width: "100%",
    class: "oneline", role: "img",
  }) as SVGSVGElement;
  const [lo, hi] = d.extent;
  const sx = (ft: number) => PAD + ((ft - lo) / Math.max(1, hi - lo)) * (WIDTH - 2 * PAD);
  const sy = (row: number) => PAD + row * ROW_H;

  for (const [i, name] of d.rows.entries()) {
    const label = svgEl("text", { x: 4, y: sy(i) + 4, class: "rowlabel" });
    label.textContent = name;
    svg.appendChild(label);
  }
  for (const bar of d.bars) {
    svg.appendChild(svgEl("rect", {
      x: sx(bar.x1), y: sy(bar.row) - 14, width: sx(bar.x2) - sx(bar.x1), height: 28,
      class: "barred", "data-plate": bar.plate,
    }));
  }
  for (const s of d.sections) {
    svg.appendChild(svgEl("line", {
      x1: sx(s.x1), y1: sy(s.row), x2: sx(s.x2), y2: sy(s.row),
      class: `section ${s.cls}${s.keepLive ? " keeplive" : ""}`,
      "data-id": s.id,
    }));
  }
  for (const dev of d.devices) {
    const g = svgEl("g", {
      class: `device ${dev.kind} ${dev.position} ${dev.cls}${dev.tagged ? " tagged" : ""}`,
      transform: `translate(${sx(dev.x)} ${sy(dev.row)})`,
      "data-id": dev.id,
    });
    g.appendChild(svgEl("rect", { x: -5, y: -5, width: 10, height: 10 }));
    if (dev.tagged) g.appendChild(svgEl("circle", { cx: 7, cy: -7, r: 3, class: "tagbadge" }));
    const title = svgEl("title", {});
    title.textContent = `${dev.id} (${dev.kind}, ${dev.position})`;
    g.appendChild(title);
    svg.appendChild(g);
  }
  for (const s of d.sources) {
    const g = svgEl("g", {
      class: `source${s.active ? " active" : ""}`,
      transform: `translate(${sx(s.x)} ${sy(s.row) + 16})`,
      "data-id": s.id,
    });
    g.appendChild(svgEl("circle", { cx: 0, cy: 0, r: 7 }));
    const t = svgEl("text", { x: 0, y: 3, class: "glyphtext" });
    t.textContent = s.kindGlyph;
    g.appendChild(t);
    svg.appendChild(g);
  }
  for (const g0 of d.grounds) {
    if (!g0.active) continue; // only applied grounds clutter-free
    const g = svgEl("g", {
      class: "groundglyph on",
      transform: `translate(${sx(g0.x)} ${sy(g0.row) - 16})`,
      "data-id": g0.id,
    });
    g.appendChild(svgEl("path", { d: "M0 0 v6 M-5 6 h10 M-3 9 h6 M-1 12 h2" }));
    svg.appendChild(g);
  }
  container.appendChild(svg);
}

export function renderChecklist(
  container: HTMLElement, order: OrderView | null,
  onConfirm: () => void, onExecute: () => void, armed: boolean,
  rejection: { kind: string; detail: string } | null,
): void {
  container.textContent = "";
  if (!order) {
    container.appendChild(el("p", "hint", "No operating order selected."));
    return;
  }
  container.appendChild(el("h3", undefined, `Operating order ${order.id}`));
  container.appendChild(el("p", "hint",
    `Director ${order.director} · line group ${order.lineGroup}`));
  const list = el("ol", "checklist");
  for (const row of order.rows) {
    const item = el("li",
      row.index === order.next ? "op next" : row.record ? "op done" : "op pending",
      `${row.kind} ${row.target} (${row.actor})`);
    if (row.record) item.appendChild(el("span", "record", ` ✓ ${row.record}`));
    list.appendChild(item);
  }
  container.appendChild(list);
  if (rejection) {
    const box = el("div", "interlock", `${rejection.kind}: ${rejection.detail}`);
    box.setAttribute("data-kind", rejection.kind);
    container.appendChild(box);
  }
  if (order.next >= 0) {
    const confirm = el("button", "confirmstate", "Confirm system state");
    confirm.id = "confirm-state";
    confirm.onclick = onConfirm;
    const execute = el("button", "execute", `Execute step ${order.next + 1}`);
    execute.id = "execute-step";
    execute.disabled = !armed;
    execute.onclick = onExecute;
    container.appendChild(confirm);
    container.appendChild(execute);
  } else {
    container.appendChild(el("p", "done", "Order complete."));
  }
}

export function renderPops(
  container: HTMLElement,
  sessions: Map<string, { plate: string; state: string }>,
  onEvent: (session: string, event: string, role: "director" | "dispatcher") => void,
): void {
  container.textContent = "";
  container.appendChild(el("h3", undefined, "Plate order protection"));
  if (!sessions.size) {
    container.appendChild(el("p", "hint", "No POPS sessions."));
    return;
  }
  const steps: [string, string, "director" | "dispatcher"][] = [
    ["request", "Request", "director"],
    ["acknowledge", "Acknowledge", "dispatcher"],
    ["put_in_effect", "Put in effect", "dispatcher"],
    ["request_release", "Request release", "director"],
    ["release", "Release", "dispatcher"],
  ];
  for (const [sid, s] of sessions) {
    const box = el("div", "pops");
    box.setAttribute("data-session", sid);
    box.appendChild(el("strong", undefined, `${sid} · plate ${s.plate}`));
    box.appendChild(el("span", `popsstate s-${s.state}`, ` ${s.state}`));
    for (const [event, label, role] of steps) {
      const b = el("button", `popsbtn role-${role}`, label);
      b.setAttribute("data-event", event);
      b.onclick = () => onEvent(sid, event, role);
      box.appendChild(b);
    }
    container.appendChild(box);
  }
}

export function renderTimeline(container: HTMLElement, rows: TimelineRow[]): void {
  container.textContent = "";
  container.appendChild(el("h3", undefined, "Night timeline"));
  const phases = rows.filter((r) => r.phase !== "on_track");
  const total = phases.reduce((acc, r) => acc + r.minutes, 0) || 1;
  const chart = el("div", "gantt");
  for (const r of phases) {
    const bar = el("div", `phase p-${r.phase}`);
    bar.style.width = `${(100 * r.minutes) / total}%`;
    bar.title = `${r.phase} ${r.start}-${r.end} (${r.minutes} min)`;
    bar.setAttribute("data-phase", r.phase);
    bar.setAttribute("data-minutes", String(r.minutes));
    chart.appendChild(bar);
  }
  container.appendChild(chart);
  const onTrack = rows.find((r) => r.phase === "on_track");
  if (onTrack) {
    container.appendChild(el("p", "ontrack",
      `On-track work window: ${onTrack.minutes} min`));
  }
}

export function renderBanner(container: HTMLElement, text: string | null): void {
  container.textContent = "";
  if (text) {
    container.appendChild(el("div", "banner offline", text));
  }
}
