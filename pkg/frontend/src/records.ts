// Parsers for the control-room service's line-oriented record formats.
// The console never computes electrical state itself: everything rendered
// comes out of these records.

export interface NetNode {
  zone: string;
  ft: number;
}

export interface NetSection {
  id: string;
  kind: string;
  track: string | null;
  a: string;
  b: string;
  lo: number;
  hi: number;
}

export interface NetDevice {
  id: string;
  kind: string;
  a: string;
  b: string;
  control: string;
}

export interface PlateBar {
  track: string;
  from: string;
  to: string;
}

export interface NetworkModel {
  tracks: string[];
  nodes: Map<string, NetNode>;
  sections: NetSection[];
  devices: NetDevice[];
  sources: { id: string; kind: string; node: string }[];
  grounds: { id: string; kind: string; node: string }[];
  switches: Map<string, { tracks: [string, string]; ft: number }>;
  plates: Map<string, { bars: PlateBar[]; blocked: string[] }>;
  keepLive: string[];
}

function attrs(parts: string[]): Record<string, string> {
  const out: Record<string, string> = {};
  for (const p of parts) {
    const i = p.indexOf("=");
    if (i > 0) out[p.slice(0, i)] = p.slice(i + 1);
  }
  return out;
}

export function parseNetwork(text: string): NetworkModel {
  const net: NetworkModel = {
    tracks: [], nodes: new Map(), sections: [], devices: [], sources: [],
    grounds: [], switches: new Map(), plates: new Map(), keepLive: [],
  };
  let plate: { bars: PlateBar[]; blocked: string[] } | null = null;
  for (const raw of text.split("\n")) {
    const line = raw.split("#", 1)[0].trim();
    if (!line) continue;
    const parts = line.split(/\s+/);
    const kv = attrs(parts);
    switch (parts[0]) {
      case "track":
        net.tracks.push(parts[1]);
        break;
      case "node":
        net.nodes.set(parts[1], { zone: parts[2], ft: Number(parts[3]) });
        break;
      case "section": {
        const pos = parts.filter((p) => !p.includes("="));
        net.sections.push({
          id: pos[1], kind: pos[2], track: kv["track"] ?? null,
          a: pos[3], b: pos[4], lo: Number(pos[5]), hi: Number(pos[6]),
        });
        break;
      }
      case "device": {
        const pos = parts.filter((p) => !p.includes("="));
        net.devices.push({
          id: pos[1], kind: pos[2], a: pos[3], b: pos[4],
          control: kv["control"] ?? "remote",
        });
        break;
      }
      case "source":
        net.sources.push({ id: parts[1], kind: parts[2], node: parts[3] });
        break;
      case "ground":
        net.grounds.push({ id: parts[1], kind: parts[2], node: parts[3] });
        break;
      case "switch": {
        const [ta, tb] = parts[2].split(":");
        net.switches.set(parts[1], { tracks: [ta, tb], ft: Number(parts[3]) });
        break;
      }
      case "keeplive":
        net.keepLive.push(parts[1]);
        break;
      case "plate":
        plate = { bars: [], blocked: [] };
        net.plates.set(parts[1], plate);
        break;
      case "bar":
        plate?.bars.push({ track: parts[1], from: parts[2], to: parts[3] });
        break;
      case "block":
        plate?.blocked.push(parts[1]);
        break;
      default:
        break; // zones, interlockings and anything newer are not drawn
    }
  }
  return net;
}

export interface LiveState {
  positions: Map<string, string>;
  groundsOn: Set<string>;
  outOfService: Set<string>;
  tags: Map<string, string>;
  energized: Set<string>;
  grounded: Set<string>;
  dead: Set<string>;
  violations: { kind: string; participants: string[]; detail: string }[];
  pops: Map<string, { plate: string; state: string }>;
}

export function parseState(text: string): LiveState {
  const st: LiveState = {
    positions: new Map(), groundsOn: new Set(), outOfService: new Set(),
    tags: new Map(), energized: new Set(), grounded: new Set(),
    dead: new Set(), violations: [], pops: new Map(),
  };
  for (const raw of text.split("\n")) {
    const line = raw.trim();
    if (!line || line.startsWith("#")) continue;
    const parts = line.split(/\s+/);
    switch (parts[0]) {
      case "position": st.positions.set(parts[1], parts[2]); break;
      case "ground": st.groundsOn.add(parts[1]); break;
      case "outofservice": st.outOfService.add(parts[1]); break;
      case "tag": st.tags.set(parts[1], parts[2]); break;
      case "energized": st.energized.add(parts[1]); break;
      case "grounded": st.grounded.add(parts[1]); break;
      case "dead": st.dead.add(parts[1]); break;
      case "violation":
        st.violations.push({
          kind: parts[1],
          participants: (parts[2] ?? "").split(",").filter(Boolean),
          detail: parts.slice(3).join(" "),
        });
        break;
      case "pops": {
        const kv = attrs(parts.slice(2));
        st.pops.set(parts[1], { plate: kv["plate"] ?? "", state: kv["state"] ?? "Idle" });
        break;
      }
      default: break; // bridge records carry no rendering
    }
  }
  return st;
}

export interface OrderRow {
  index: number;
  kind: string;
  target: string;
  actor: string;
  record: string | null;
}

export interface OrderView {
  id: string;
  director: string;
  lineGroup: string;
  rows: OrderRow[];
  next: number; // -1 when complete
  shared: string[];
}

export function parseOrder(text: string): OrderView {
  const view: OrderView = { id: "", director: "", lineGroup: "", rows: [], next: -1, shared: [] };
  for (const raw of text.split("\n")) {
    const line = raw.trimEnd();
    if (!line) continue;
    if (line.startsWith("OPERATING ORDER ")) view.id = line.slice(16).trim();
    else if (line.startsWith("Director: ")) view.director = line.slice(10).trim();
    else if (line.startsWith("Line group: ")) view.lineGroup = line.slice(12).trim();
    else if (line.startsWith("next ")) view.next = Number(line.slice(5));
    else if (line.startsWith("shared ")) view.shared = line.slice(7).split(",").filter(Boolean);
    else {
      const m = line.match(/^\s*(\d+)\s+(\S+)\s+(\S+)\s+(\S+)(\s+\[record: (.*)\])?$/);
      if (m) {
        view.rows.push({
          index: Number(m[1]) - 1, kind: m[2], target: m[3], actor: m[4],
          record: m[6] ?? null,
        });
      }
    }
  }
  return view;
}

export interface ServiceEvent {
  seq: number;
  kind: string;
  fields: Record<string, string>;
}

export function parseEvents(text: string): ServiceEvent[] {
  const out: ServiceEvent[] = [];
  for (const raw of text.split("\n")) {
    const line = raw.trim();
    if (!line) continue;
    const kv = attrs(line.split(/\s+/));
    out.push({ seq: Number(kv["seq"] ?? 0), kind: kv["kind"] ?? "", fields: kv });
  }
  return out;
}

export interface OrderRef {
  id: string;
  phase: "isolation" | "restore";
}

export function parseIsolationCreated(text: string):
    { request: string; plate: string; session: string; orders: OrderRef[] } {
  let request = "", plate = "", session = "";
  const orders: OrderRef[] = [];
  for (const raw of text.split("\n")) {
    const parts = raw.trim().split(/\s+/);
    if (parts[0] === "plan") {
      request = parts[1];
      const kv = attrs(parts.slice(2));
      plate = kv["plate"] ?? "-";
      session = kv["session"] ?? "-";
    } else if (parts[0] === "order") {
      const kv = attrs(parts.slice(2));
      orders.push({ id: parts[1], phase: (kv["phase"] as OrderRef["phase"]) ?? "isolation" });
    }
  }
  return { request, plate, session, orders };
}

export interface TimelineRow {
  night: string;
  phase: string;
  start: string;
  end: string;
  minutes: number;
}

export function parseTimelineRows(text: string): TimelineRow[] {
  const out: TimelineRow[] = [];
  for (const raw of text.split("\n")) {
    const line = raw.trim();
    if (!line) continue;
    const [night, phase, start, end, minutes] = line.split(",");
    out.push({ night, phase, start, end, minutes: Number(minutes) });
  }
  return out;
}
