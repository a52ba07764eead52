// Console application: wires the service client to the panels and runs the
// event long-poll loop. One human rule is enforced here: every Execute needs
// a fresh "Confirm system state" click first.

import { ServiceClient } from "./api.js";
import { buildDiagram, renderedState } from "./model.js";
import type { RenderedState } from "./model.js";
import {
  parseEvents, parseIsolationCreated, parseNetwork, parseOrder, parseState,
  parseTimelineRows,
} from "./records.js";
import type { LiveState, NetworkModel, OrderView } from "./records.js";
import {
  renderBanner, renderChecklist, renderDiagram, renderPops, renderTimeline,
} from "./render.js";

export interface AppPanels {
  diagram: HTMLElement;
  checklist: HTMLElement;
  pops: HTMLElement;
  timeline: HTMLElement;
  banner: HTMLElement;
  orders: HTMLElement;
}

export class ConsoleApp {
  net: NetworkModel | null = null;
  live: LiveState | null = null;
  order: OrderView | null = null;
  orderIds: string[] = [];
  armed = false;
  rejection: { kind: string; detail: string } | null = null;
  lastSeq = 0;
  offline = false;
  private polling = false;

  constructor(
    public api: ServiceClient,
    public panels: AppPanels,
  ) {}

  async load(): Promise<void> {
    this.net = parseNetwork(await this.api.network());
    await this.refresh();
    this.offline = false;
    renderBanner(this.panels.banner, null);
  }

  async refresh(): Promise<void> {
    this.live = parseState(await this.api.state());
    if (this.order) {
      this.order = parseOrder(await this.api.order(this.order.id));
    }
    this.paint();
  }

  paint(): void {
    if (!this.net || !this.live) return;
    renderDiagram(this.panels.diagram, buildDiagram(this.net, this.live));
    renderChecklist(this.panels.checklist, this.order,
      () => this.confirmState(), () => { void this.execute(); }, this.armed,
      this.rejection);
    renderPops(this.panels.pops, this.live.pops,
      (sid, ev, role) => { void this.popsEvent(sid, ev, role); });
    this.paintOrderPicker();
  }

  private paintOrderPicker(): void {
    const box = this.panels.orders;
    box.textContent = "";
    for (const oid of this.orderIds) {
      const b = document.createElement("button");
      b.className = "orderpick" + (this.order?.id === oid ? " current" : "");
      b.textContent = oid;
      b.onclick = () => { void this.selectOrder(oid); };
      box.appendChild(b);
    }
  }

  async createIsolation(requestLine: string): Promise<string | null> {
    const res = await this.api.isolate(requestLine);
    if (res.status !== 201) {
      this.rejection = { kind: `HTTP ${res.status}`, detail: res.body.trim() };
      this.paint();
      return null;
    }
    const created = parseIsolationCreated(res.body);
    this.orderIds = created.orders.map((o) => o.id);
    await this.selectOrder(this.orderIds[0]);
    return created.request;
  }

  async selectOrder(orderId: string): Promise<void> {
    this.order = parseOrder(await this.api.order(orderId));
    this.armed = false;
    this.rejection = null;
    await this.refresh();
  }

  // the mandatory look-before-you-leap click: verify the diagram, then arm
  confirmState(): void {
    this.armed = true;
    this.rejection = null;
    this.paint();
  }

  async execute(): Promise<void> {
    if (!this.order || !this.armed || this.order.next < 0) return;
    this.armed = false; // one confirmation buys exactly one execution
    const res = await this.api.step(this.order.id);
    if (!res.ok) {
      this.rejection = { kind: res.kind ?? "REJECTED", detail: res.detail ?? "" };
      await this.refresh(); // checklist position must not move
      return;
    }
    this.rejection = null;
    await this.refresh();
  }

  async popsEvent(session: string, event: string,
                  role: "director" | "dispatcher"): Promise<void> {
    const res = await this.api.pops(session, event, role);
    if (!res.ok) {
      this.rejection = { kind: res.kind ?? "REJECTED", detail: res.detail ?? "" };
    }
    await this.refresh();
  }

  async simulateNight(attrs: Record<string, string>): Promise<void> {
    const rows = parseTimelineRows(await this.api.simulate(attrs));
    renderTimeline(this.panels.timeline, rows);
  }

  rendered(): RenderedState {
    if (!this.net || !this.live) throw new Error("not loaded");
    return renderedState(this.net, this.live);
  }

  // -- event stream ---------------------------------------------------------

  async pollOnce(timeoutSeconds = 0): Promise<number> {
    const text = await this.api.events(this.lastSeq, timeoutSeconds);
    const events = parseEvents(text);
    if (events.length) {
      this.lastSeq = Math.max(...events.map((e) => e.seq));
      await this.refresh();
    }
    return events.length;
  }

  async runEventLoop(): Promise<void> {
    if (this.polling) return;
    this.polling = true;
    while (this.polling) {
      try {
        await this.pollOnce(25);
        if (this.offline) await this.resume();
      } catch {
        this.offline = true;
        renderBanner(this.panels.banner,
          "Connection lost: read-only view, retrying...");
        await new Promise((r) => setTimeout(r, 1000));
      }
    }
  }

  stopEventLoop(): void {
    this.polling = false;
  }

  // reconnect: catch up from the last seen sequence number and re-render
  async resume(): Promise<void> {
    await this.pollOnce(0);
    await this.refresh();
    this.offline = false;
    renderBanner(this.panels.banner, null);
  }
}

export function mount(root: HTMLElement, base: string): ConsoleApp {
  root.innerHTML = `
    <div id="banner"></div>
    <header><h1>Power Director console</h1>
      <form id="isolate-form">
        <input id="request-line" size="60"
               placeholder="request r1 sections=st1" />
        <button id="plan-isolation" type="submit">Plan isolation</button>
      </form>
      <div id="orders"></div>
    </header>
    <main>
      <section id="diagram"></section>
      <aside>
        <section id="checklist"></section>
        <section id="pops"></section>
        <section id="timeline"></section>
      </aside>
    </main>`;
  const app = new ConsoleApp(new ServiceClient(base), {
    diagram: root.querySelector("#diagram")!,
    checklist: root.querySelector("#checklist")!,
    pops: root.querySelector("#pops")!,
    timeline: root.querySelector("#timeline")!,
    banner: root.querySelector("#banner")!,
    orders: root.querySelector("#orders")!,
  });
  const form = root.querySelector<HTMLFormElement>("#isolate-form")!;
  form.onsubmit = (ev) => {
    ev.preventDefault();
    const line = root.querySelector<HTMLInputElement>("#request-line")!.value;
    void app.createIsolation(line.endsWith("\n") ? line : line + "\n");
  };
  void app.load().then(() => app.runEventLoop());
  return app;
}
