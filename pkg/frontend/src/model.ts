// Schematic view model: stationing-proportional rows, one per line group,
// with the live overlay taken verbatim from the service's state document.

import type { LiveState, NetworkModel, NetSection } from "./records.js";

export type NodeClass = "energized" | "grounded" | "dead";

export interface SectionView {
  id: string;
  row: number;
  x1: number;
  x2: number;
  cls: NodeClass;
  keepLive: boolean;
}

export interface DeviceView {
  id: string;
  kind: string;
  row: number;
  x: number;
  position: string; // open | closed | racked_out
  tagged: boolean;
  cls: NodeClass;
}

export interface GlyphView {
  id: string;
  kindGlyph: string;
  row: number;
  x: number;
  active: boolean; // source in service / ground applied
  tagged: boolean;
}

export interface BarView {
  row: number;
  x1: number;
  x2: number;
  plate: string;
}

export interface Diagram {
  rows: string[];
  extent: [number, number];
  sections: SectionView[];
  devices: DeviceView[];
  sources: GlyphView[];
  grounds: GlyphView[];
  bars: BarView[];
}

function lineGroup(sec: NetSection): string {
  if (sec.track) return sec.track;
  return sec.kind === "feeder" ? "feeders" : sec.kind;
}

function nodeClass(state: LiveState, node: string): NodeClass {
  if (state.grounded.has(node) && !state.energized.has(node)) return "grounded";
  if (state.energized.has(node)) return "energized";
  return "dead";
}

function sectionClass(state: LiveState, sec: NetSection): NodeClass {
  const a = nodeClass(state, sec.a);
  const b = nodeClass(state, sec.b);
  if (a === "energized" && b === "energized") return "energized";
  if (a === "grounded" || b === "grounded") return "grounded";
  return "dead";
}

export function buildDiagram(net: NetworkModel, state: LiveState): Diagram {
  const rowNames: string[] = [];
  for (const sec of net.sections) {
    const g = lineGroup(sec);
    if (!rowNames.includes(g)) rowNames.push(g);
  }
  rowNames.sort((a, b) => {
    const at = net.tracks.includes(a) ? 0 : 1; // tracks first, feeders below
    const bt = net.tracks.includes(b) ? 0 : 1;
    return at !== bt ? at - bt : a.localeCompare(b);
  });
  const rowOf = new Map<string, number>();
  rowNames.forEach((g, i) => rowOf.set(g, i));

  const nodeRow = new Map<string, number>();
  let lo = Infinity;
  let hi = -Infinity;
  const sections: SectionView[] = [];
  for (const sec of net.sections) {
    const row = rowOf.get(lineGroup(sec))!;
    nodeRow.set(sec.a, row);
    nodeRow.set(sec.b, row);
    lo = Math.min(lo, sec.lo);
    hi = Math.max(hi, sec.hi);
    sections.push({
      id: sec.id, row, x1: sec.lo, x2: sec.hi,
      cls: sectionClass(state, sec),
      keepLive: net.keepLive.includes(sec.id),
    });
  }
  if (!isFinite(lo)) { lo = 0; hi = 1; }

  const busRow = rowNames.length; // off-line equipment parks under the diagram
  const xOf = (node: string): number => net.nodes.get(node)?.ft ?? lo;
  const rowFor = (node: string): number => nodeRow.get(node) ?? busRow;

  const devices: DeviceView[] = net.devices.map((dev) => {
    const rows = [rowFor(dev.a), rowFor(dev.b)].filter((r) => r < busRow);
    const row = rows.length ? Math.min(...rows) : busRow;
    const aCls = nodeClass(state, dev.a);
    const bCls = nodeClass(state, dev.b);
    return {
      id: dev.id, kind: dev.kind, row,
      x: (xOf(dev.a) + xOf(dev.b)) / 2,
      position: state.positions.get(dev.id) ?? "closed",
      tagged: state.tags.has(dev.id),
      cls: aCls === "energized" || bCls === "energized" ? "energized"
        : aCls === "grounded" || bCls === "grounded" ? "grounded" : "dead",
    };
  });

  const sources: GlyphView[] = net.sources.map((s) => ({
    id: s.id, kindGlyph: s.kind === "supply_substation" ? "SS" : "EQ",
    row: rowFor(s.node), x: xOf(s.node),
    active: !state.outOfService.has(s.id), tagged: false,
  }));

  const grounds: GlyphView[] = net.grounds.map((g) => ({
    id: g.id, kindGlyph: g.kind === "aerial" ? "GA" : "G",
    row: rowFor(g.node), x: xOf(g.node),
    active: state.groundsOn.has(g.id), tagged: state.tags.has(g.id),
  }));

  // plate order bars while a POPS session is in effect
  const bars: BarView[] = [];
  for (const [, session] of state.pops) {
    if (session.state !== "InEffect") continue;
    const plate = net.plates.get(session.plate);
    if (!plate) continue;
    for (const bar of plate.bars) {
      const a = net.switches.get(bar.from);
      const b = net.switches.get(bar.to);
      const row = rowOf.get(bar.track);
      if (!a || !b || row === undefined) continue;
      bars.push({
        row, x1: Math.min(a.ft, b.ft), x2: Math.max(a.ft, b.ft),
        plate: session.plate,
      });
    }
  }

  return { rows: [...rowNames, "equipment"], extent: [lo, hi], sections, devices, sources, grounds, bars };
}

// A stable, comparable digest of everything the operator can see. Two
// renderings are "identical" exactly when these match.
export interface RenderedState {
  sections: Record<string, string>;
  devices: Record<string, string>;
  grounds: Record<string, string>;
  bars: string[];
  violations: string[];
  pops: Record<string, string>;
}

export function renderedState(net: NetworkModel, state: LiveState): RenderedState {
  const d = buildDiagram(net, state);
  const out: RenderedState = {
    sections: {}, devices: {}, grounds: {}, bars: [], violations: [], pops: {},
  };
  for (const s of d.sections) out.sections[s.id] = s.cls;
  for (const dev of d.devices) {
    out.devices[dev.id] = `${dev.position}${dev.tagged ? "+tag" : ""}`;
  }
  for (const g of d.grounds) {
    out.grounds[g.id] = `${g.active ? "on" : "off"}${g.tagged ? "+tag" : ""}`;
  }
  out.bars = d.bars.map((b) => `${b.plate}@${b.row}:${b.x1}-${b.x2}`).sort();
  out.violations = state.violations.map((v) => `${v.kind}[${v.participants.join(",")}]`).sort();
  for (const [sid, s] of state.pops) out.pops[sid] = `${s.plate}:${s.state}`;
  return out;
}
