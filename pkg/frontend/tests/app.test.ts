// App behavior against a scripted in-memory service: the confirm gate, 409
// handling, and reconnect fold-equivalence, all without a network.

import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";
import { ConsoleApp } from "../src/app.js";
import { ServiceClient } from "../src/api.js";

const NET = `zone za
track t1
node n1 za 200
node n2 za 480
node n3 za 1500
section st1 trolley track=t1 n2 n3 480 1500
device b1 breaker n1 n2
source eq1 equalizing_substation n1
ground g2 box n2
`;

interface Scripted {
  state: string;
  order: string;
  events: string[];
  stepResponses: { status: number; body: string }[];
  stepCalls: number;
}

function panels() {
  const mk = () => document.createElement("div");
  return { diagram: mk(), checklist: mk(), pops: mk(), timeline: mk(),
           banner: mk(), orders: mk() };
}

function install(script: Scripted) {
  vi.stubGlobal("fetch", vi.fn(async (url: string, init?: RequestInit) => {
    const path = String(url).replace("http://test", "");
    const ok = (body: string, status = 200) =>
      new Response(body, { status });
    if (path === "/network") return ok(NET);
    if (path === "/state") return ok(script.state);
    if (path.startsWith("/orders/o1") && !init) return ok(script.order);
    if (path.endsWith("/step") && init?.method === "POST") {
      script.stepCalls++;
      const r = script.stepResponses.shift() ?? { status: 409, body: "kind=ORDER_COMPLETE\ndetail=done\n" };
      return ok(r.body, r.status);
    }
    if (path.startsWith("/events")) {
      const since = Number(new URL(String(url), "http://test").searchParams.get("since"));
      const pending = script.events.filter((e) => Number(e.match(/seq=(\d+)/)![1]) > since);
      return ok(pending.join("\n") + (pending.length ? "\n" : ""));
    }
    return ok("kind=NOT_FOUND\ndetail=?\n", 404);
  }));
}

const LIVE_STATE = "energized n1\nenergized n2\nenergized n3\n";
const ORDER = [
  "OPERATING ORDER o1", "Director: PD1", "Line group: t1",
  "  1  open  b1  remote_scada",
  "  2  test_potential  g2  field_lineman",
  "next 0",
].join("\n");

let script: Scripted;

beforeEach(() => {
  script = { state: LIVE_STATE, order: ORDER, events: [], stepResponses: [], stepCalls: 0 };
  install(script);
});

afterEach(() => vi.unstubAllGlobals());

function makeApp(): ConsoleApp {
  return new ConsoleApp(new ServiceClient("http://test"), panels());
}

describe("confirm-before-execute", () => {
  it("refuses to step without a fresh confirmation", async () => {
    const app = makeApp();
    await app.load();
    await app.selectOrder("o1");
    await app.execute();
    expect(script.stepCalls).toBe(0);
    app.confirmState();
    script.stepResponses.push({ status: 200, body: "executed 0 open b1 result=ok note=-\nnext 1\n" });
    await app.execute();
    expect(script.stepCalls).toBe(1);
    // a second execute without re-confirming must not fire
    await app.execute();
    expect(script.stepCalls).toBe(1);
  });
});

describe("interlock rejection", () => {
  it("renders the 409 inline and leaves the checklist position alone", async () => {
    const app = makeApp();
    await app.load();
    await app.selectOrder("o1");
    app.confirmState();
    script.stepResponses.push({
      status: 409,
      body: "kind=LOAD_OPEN\nparticipants=b1\ndetail=cannot be opened under load\n",
    });
    await app.execute();
    expect(app.rejection).toEqual({ kind: "LOAD_OPEN", detail: "cannot be opened under load" });
    expect(app.order!.next).toBe(0);
    const box = app.panels.checklist.querySelector(".interlock")!;
    expect(box.getAttribute("data-kind")).toBe("LOAD_OPEN");
    expect(box.textContent).toContain("cannot be opened under load");
    const items = app.panels.checklist.querySelectorAll("li.op");
    expect(items[0].className).toContain("next");
  });
});

describe("event stream reconnect", () => {
  it("resuming from the last sequence renders the same state as a fresh load", async () => {
    const app = makeApp();
    await app.load();
    script.events.push("seq=1 kind=op order=o1 index=0 op=open target=b1 actor=remote_scada by=PD1 result=ok note=-");
    script.state = "position b1 open\nenergized n1\ndead n2\ndead n3\n";
    script.order = ORDER.replace("next 0", "next 1");
    await app.pollOnce();
    expect(app.lastSeq).toBe(1);

    // connection drops; more happens while we are away
    script.events.push("seq=2 kind=op order=o1 index=1 op=test_potential target=g2 actor=field_lineman by=PD1 result=ok note=dead");
    script.state = "position b1 open\nenergized n1\ndead n2\ndead n3\n# tested\n";
    await app.resume();
    expect(app.lastSeq).toBe(2);

    const fresh = makeApp();
    await fresh.load();
    expect(app.rendered()).toEqual(fresh.rendered());
    expect(app.offline).toBe(false);
  });

  it("shows the read-only banner while offline", async () => {
    const app = makeApp();
    await app.load();
    vi.stubGlobal("fetch", vi.fn(async () => { throw new Error("down"); }));
    await expect(app.pollOnce()).rejects.toThrow();
    // the loop path is what sets the banner; emulate one iteration
    const { renderBanner } = await import("../src/render.js");
    renderBanner(app.panels.banner, "Connection lost: read-only view, retrying...");
    expect(app.panels.banner.textContent).toContain("read-only");
  });
});
