// Thin typed client for the control-room HTTP interface. Every mutation the
// console can make goes through here; there are no other side channels.

export interface StepResult {
  ok: boolean;
  status: number;
  kind?: string;
  detail?: string;
  note?: string;
  next?: number;
}

export interface Rejection {
  kind: string;
  detail: string;
  participants: string[];
}

function parseRejection(body: string): Rejection {
  const out: Rejection = { kind: "UNKNOWN", detail: "", participants: [] };
  for (const line of body.split("\n")) {
    const i = line.indexOf("=");
    if (i < 0) continue;
    const key = line.slice(0, i);
    const val = line.slice(i + 1);
    if (key === "kind") out.kind = val;
    else if (key === "detail") out.detail = val;
    else if (key === "participants") out.participants = val.split(",").filter(Boolean);
  }
  return out;
}

export class ServiceClient {
  constructor(
    public base: string,
    public director = "PD1",
  ) {}

  private headers(role: "director" | "dispatcher"): Record<string, string> {
    return { "X-Role": role, "X-Director": this.director };
  }

  private async text(path: string): Promise<string> {
    const res = await fetch(this.base + path);
    if (!res.ok) throw new Error(`GET ${path}: ${res.status}`);
    return res.text();
  }

  network(): Promise<string> {
    return this.text("/network");
  }

  state(): Promise<string> {
    return this.text("/state");
  }

  order(id: string): Promise<string> {
    return this.text(`/orders/${id}`);
  }

  events(since: number, timeoutSeconds = 0): Promise<string> {
    return this.text(`/events?since=${since}&timeout=${timeoutSeconds}`);
  }

  async isolate(requestLine: string): Promise<{ status: number; body: string }> {
    const res = await fetch(this.base + "/isolations", {
      method: "POST", body: requestLine, headers: this.headers("director"),
    });
    return { status: res.status, body: await res.text() };
  }

  async step(orderId: string): Promise<StepResult> {
    const res = await fetch(this.base + `/orders/${orderId}/step`, {
      method: "POST", headers: this.headers("director"),
    });
    const body = await res.text();
    if (res.ok) {
      const next = body.match(/next (-?\d+)/);
      const note = body.match(/note=(\S+)/);
      return {
        ok: true, status: res.status,
        next: next ? Number(next[1]) : undefined,
        note: note ? note[1] : undefined,
      };
    }
    const rej = parseRejection(body);
    return { ok: false, status: res.status, kind: rej.kind, detail: rej.detail };
  }

  async confirm(orderId: string, device: string, director: string): Promise<boolean> {
    const res = await fetch(this.base + `/orders/${orderId}/confirm`, {
      method: "POST", body: `device=${device}\ndirector=${director}\n`,
      headers: this.headers("director"),
    });
    return res.ok;
  }

  async pops(session: string, event: string, role: "director" | "dispatcher"):
      Promise<{ ok: boolean; state?: string; kind?: string; detail?: string }> {
    const res = await fetch(this.base + `/pops/${session}/${event}`, {
      method: "POST", headers: this.headers(role),
    });
    const body = await res.text();
    if (res.ok) {
      const m = body.match(/state=(\S+)/);
      return { ok: true, state: m ? m[1] : undefined };
    }
    const rej = parseRejection(body);
    return { ok: false, kind: rej.kind, detail: rej.detail };
  }

  async simulate(attrs: Record<string, string>): Promise<string> {
    const body = Object.entries(attrs).map(([k, v]) => `${k}=${v}`).join("\n") + "\n";
    const res = await fetch(this.base + "/simulate", {
      method: "POST", body, headers: this.headers("director"),
    });
    if (!res.ok) throw new Error(`simulate: ${res.status}`);
    return res.text();
  }
}
