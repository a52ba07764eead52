#!/usr/bin/env python3
"""Regenerate the bundled fixtures. Deterministic; run from the repo root:

    python tools/make_fixtures.py
"""

from __future__ import annotations

import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

BLOCK = 14080                    # ft between equalizing substations
SUBS = 20
SPAN = BLOCK * (SUBS + 1)        # 295,680 ft = 56 miles
PHASE_BREAK_FT = 147840          # river crossing mid block 10
TRACKS = ("t1", "t2", "t3", "t4")
SUPPLY_AT = (4, 9, 13, 17)       # supply substations co-located with these subs
BRIDGE_BLOCKS = (2, 6, 10, 14, 18)
INTERLOCKED_SUBS = (3, 7, 12, 16)


def zone_of(ft: int, east_side: bool = False) -> str:
    if ft < PHASE_BREAK_FT:
        return "za"
    if ft > PHASE_BREAK_FT:
        return "zb"
    return "zb" if east_side else "za"


def block_bounds(b: int) -> tuple[int, int]:
    lo = b * BLOCK if b > 0 else 480
    hi = (b + 1) * BLOCK if b < SUBS else SPAN - 480
    return lo, hi


def section_cuts(b: int) -> list[int]:
    lo, hi = block_bounds(b)
    step = (hi - lo) // 4
    return [lo + i * step for i in range(4)] + [hi]


def make_fourtrack() -> dict[str, str]:
    net: list[str] = [
        "# Four-track electrified division: 56 mile span, 20 equalizing and 4",
        "# supply substations, 5 movable bridges, phase break at the river",
        "# crossing in block 10. Catenary structure spacing is 300 ft, so the",
        "# 30-catenary work zone limit is 9,000 ft.",
        "zone za", "zone zb",
    ]
    for t in TRACKS:
        net.append(f"track {t}")

    nodes: dict[str, tuple[str, int]] = {}

    def node(nid: str, zone: str, ft: int) -> str:
        if nid not in nodes:
            nodes[nid] = (zone, ft)
            net.append(f"node {nid} {zone} {ft}")
        return nid

    grounds: list[str] = []

    def box_ground(nid: str) -> None:
        gid = f"g_{nid}"
        if gid not in grounds:
            grounds.append(gid)
            net.append(f"ground {gid} box {nid}")

    # trolley sections: 4 per block per track, insulated joints between them
    # (adjacent sections share no node; a MOD bridges each joint)
    for t in TRACKS:
        for b in range(SUBS + 1):
            cuts = section_cuts(b)
            for s in range(4):
                lo, hi = cuts[s], cuts[s + 1]
                a = node(f"{t}b{b}s{s}a", zone_of(lo, east_side=True), lo)
                z = node(f"{t}b{b}s{s}b", zone_of(hi, east_side=False), hi)
                cats = max(1, round((hi - lo) / 300))
                net.append(f"section {t}b{b}s{s} trolley track={t} {a} {z} {lo} {hi} cats={cats}")
                box_ground(a)
                box_ground(z)
            for s in range(3):
                j_ft = cuts[s + 1]
                if j_ft == PHASE_BREAK_FT:
                    net.append(f"device tie_pb_{t} tie {t}b{b}s{s}b {t}b{b}s{s+1}a "
                               f"control=remote loadbreak=1   # phase break jumper")
                else:
                    net.append(f"device m_{t}b{b}s{s}{s+1} mod {t}b{b}s{s}b {t}b{b}s{s+1}a control=remote")

    # feeder sections: one per block per side, split at the phase break
    for side in ("fe", "fw"):
        for b in range(SUBS + 1):
            lo, hi = block_bounds(b)
            if lo < PHASE_BREAK_FT < hi:
                a = node(f"{side}{b}wa", "za", lo)
                m1 = node(f"{side}{b}wb", "za", PHASE_BREAK_FT)
                m2 = node(f"{side}{b}ea", "zb", PHASE_BREAK_FT)
                z = node(f"{side}{b}eb", "zb", hi)
                net.append(f"section s{side}{b}w feeder track={side} {a} {m1} {lo} {PHASE_BREAK_FT}")
                net.append(f"section s{side}{b}e feeder track={side} {m2} {z} {PHASE_BREAK_FT} {hi}")
                net.append(f"device tie_pb_{side} tie {m1} {m2} control=remote loadbreak=1")
                for n in (a, m1, m2, z):
                    box_ground(n)
            else:
                zone = zone_of((lo + hi) // 2)
                a = node(f"{side}{b}a", zone, lo)
                z = node(f"{side}{b}b", zone, hi)
                net.append(f"section s{side}{b} feeder track={side} {a} {z} {lo} {hi}")
                box_ground(a)
                box_ground(z)

    def feeder_end(side: str, b: int, east: bool) -> str:
        lo, hi = block_bounds(b)
        if lo < PHASE_BREAK_FT < hi:
            return f"{side}{b}eb" if east else f"{side}{b}wa"
        return f"{side}{b}b" if east else f"{side}{b}a"

    # equalizing substations: a bus node with breakers to every line each side
    for k in range(1, SUBS + 1):
        ft = k * BLOCK
        zone = zone_of(ft, east_side=(ft >= PHASE_BREAK_FT))
        bus = node(f"eq{k}bus", zone, ft)
        net.append(f"source eq{k} equalizing_substation {bus}")
        for t in TRACKS:
            net.append(f"device bk{k}w_{t} breaker {bus} {t}b{k-1}s3b control=remote rackable=1")
            net.append(f"device bk{k}e_{t} breaker {bus} {t}b{k}s0a control=remote rackable=1")
        for side in ("fe", "fw"):
            net.append(f"device bk{k}w_{side} breaker {bus} {feeder_end(side, k - 1, True)} "
                       f"control=remote rackable=1")
            net.append(f"device bk{k}e_{side} breaker {bus} {feeder_end(side, k, False)} "
                       f"control=remote rackable=1")

    # supply substations feeding the traction grid through a tap
    for k in SUPPLY_AT:
        ft = k * BLOCK
        zone = zone_of(ft)
        sn = node(f"ss{k}n", zone, ft + 60)
        st = node(f"ss{k}t", zone, ft + 50)
        net.append(f"source ss{k} supply_substation {sn}")
        net.append(f"device ssbk{k} breaker {sn} {st} control=remote rackable=1")
        net.append(f"section sst{k} supply_tap {st} eq{k}bus {ft} {ft + 50}")
        net.append(f"ground g_ss{k}t local {st}")

    # signal feeders: independent medium-voltage runs, one per phase zone,
    # hung from the supply substation taps; never part of any isolation
    net.append(f"section sf_a signal_feeder ss4t ss9t {SUPPLY_AT[0] * BLOCK + 50} "
               f"{SUPPLY_AT[1] * BLOCK + 50}")
    net.append(f"section sf_b signal_feeder ss13t ss17t {SUPPLY_AT[2] * BLOCK + 50} "
               f"{SUPPLY_AT[3] * BLOCK + 50}")

    # a couple of aerial ground points for pole-climb scenarios
    net.append("ground ga_t2b5 aerial t2b5s1a")
    net.append("ground ga_t3b15 aerial t3b15s1a")

    # crossover switches flank every substation; yard throats close the ends
    switch_locs: dict[str, int] = {}

    def switch(swid: str, pair: str, ft: int) -> None:
        switch_locs[swid] = ft
        net.append(f"switch {swid} {pair} {ft}")

    switch("sw0e12", "t1:t2", 240)
    switch("sw0e34", "t3:t4", 240)
    for k in range(1, SUBS + 1):
        switch(f"sw{k}w12", "t1:t2", k * BLOCK - 440)
        switch(f"sw{k}w34", "t3:t4", k * BLOCK - 440)
        switch(f"sw{k}e12", "t1:t2", k * BLOCK + 440)
        switch(f"sw{k}e34", "t3:t4", k * BLOCK + 440)
    switch("sw21w12", "t1:t2", SPAN - 240)
    switch("sw21w34", "t3:t4", SPAN - 240)

    for k in INTERLOCKED_SUBS:
        sws = f"sw{k}w12,sw{k}w34,sw{k}e12,sw{k}e34"
        net.append(f"interlocking ilk{k} {k * BLOCK - 500} {k * BLOCK + 500} switches={sws}")

    # keep-live assets: the movable bridges and two busy interlockings
    for b in BRIDGE_BLOCKS:
        sec = "t1b10s2" if b == 10 else f"t1b{b}s1"
        net.append(f"keeplive {sec}   # movable bridge, block {b}")
    net.append("keeplive t1b3s0   # interlocking ilk3 approach")
    net.append("keeplive t1b7s0   # interlocking ilk7 approach")

    # -- plate order library (200 published orders) --
    def wlim(i: int, pair: str) -> str:
        return f"sw0e{pair}" if i == 0 else f"sw{i}w{pair}"

    def elim(j: int, pair: str) -> str:
        return f"sw21w{pair}" if j == 21 else f"sw{j}e{pair}"

    def blocked_between(a: str, b: str, pairs) -> list[str]:
        lo = min(switch_locs[a], switch_locs[b])
        hi = max(switch_locs[a], switch_locs[b])
        return sorted(s for s, ft in switch_locs.items()
                      if lo < ft < hi and s[-2:] in pairs)

    plates: list[str] = []

    def plate(pid: str, desc: str, bars: list[tuple[str, str, str]]) -> None:
        plates.append(f'plate {pid} "{desc}"')
        blocked: set[str] = set()
        for track, a, b in bars:
            plates.append(f"bar {track} {a} {b}")
            pair = "12" if track in ("t1", "t2") else "34"
            blocked.update(blocked_between(a, b, {pair}))
        for s in sorted(blocked):
            plates.append(f"block {s}")

    for w in (1, 2, 3):
        for i in range(0, SUBS + 2 - w):
            j = i + w
            plate(f"p4_{i}_{j}", f"all tracks, blocks {i} to {j - 1}",
                  [("t1", wlim(i, "12"), elim(j, "12")),
                   ("t2", wlim(i, "12"), elim(j, "12")),
                   ("t3", wlim(i, "34"), elim(j, "34")),
                   ("t4", wlim(i, "34"), elim(j, "34"))])
    for w in (1, 2, 3):
        for i in range(0, SUBS + 2 - w):
            j = i + w
            plate(f"p12_{i}_{j}", f"tracks 1-2, blocks {i} to {j - 1}",
                  [("t1", wlim(i, "12"), elim(j, "12")),
                   ("t2", wlim(i, "12"), elim(j, "12"))])
            plate(f"p34_{i}_{j}", f"tracks 3-4, blocks {i} to {j - 1}",
                  [("t3", wlim(i, "34"), elim(j, "34")),
                   ("t4", wlim(i, "34"), elim(j, "34"))])
    for i in range(18):
        j = i + 4
        plate(f"p4_{i}_{j}", f"all tracks, blocks {i} to {j - 1} (long possession)",
              [("t1", wlim(i, "12"), elim(j, "12")),
               ("t2", wlim(i, "12"), elim(j, "12")),
               ("t3", wlim(i, "34"), elim(j, "34")),
               ("t4", wlim(i, "34"), elim(j, "34"))])
    plate("p_all_12", "tracks 1-2, whole division",
          [("t1", "sw0e12", "sw21w12"), ("t2", "sw0e12", "sw21w12")])
    plate("p_all_34", "tracks 3-4, whole division",
          [("t3", "sw0e34", "sw21w34"), ("t4", "sw0e34", "sw21w34")])

    plate_text = "\n".join(plates) + "\n"
    net_text = "\n".join(net) + "\n" + plate_text

    # normal switching state: phase break jumpers open, everything else shut
    state = ["# normal configuration: phase break ties open, all else closed"]
    for t in TRACKS:
        state.append(f"position tie_pb_{t} open")
    state.append("position tie_pb_fe open")
    state.append("position tie_pb_fw open")
    state_text = "\n".join(state) + "\n"

    # bridle extension removal: four-track outage spanning substation 10,
    # feeders on both sides included
    target = [f"{t}b9s3" for t in TRACKS] + [f"{t}b10s0" for t in TRACKS]
    target += ["sfe9", "sfw9", "sfe10w", "sfw10w"]
    req_text = (f"# four-track bridle extension removal around substation 10\n"
                f"request bridle sections={','.join(sorted(target))} job=J1\n")

    jobs_text = "\n".join([
        "# weekend work program; friday demand totals 6/4/2/3/2 across crafts",
        "job J1 prio=1 owner=contractor nights=fri,sat",
        "variant A lineman=2 groundman=2 director=1 flagman=1 dispatcher=1 "
        "isolation=bridle track_outage=1 progress=25",
        "variant B lineman=1 groundman=1 director=1 flagman=1 dispatcher=1 progress=8",
        "job J2 prio=2 owner=contractor nights=fri",
        "variant A lineman=3 groundman=1 director=1 flagman=1 dispatcher=1 "
        "track_outage=1 progress=12",
        "job J3 prio=3 owner=in_house nights=fri",
        "variant A lineman=1 groundman=1 director=0 flagman=1 dispatcher=0 progress=4",
        "isolation bridle lineman=2 groundman=2 director=1",
    ]) + "\n"

    cal_text = "\n".join([
        "avail fri lineman 6", "avail fri groundman 4", "avail fri power_director 2",
        "avail fri flagman 3", "avail fri dispatcher 2",
        "avail sat lineman 4", "avail sat groundman 2", "avail sat power_director 1",
        "avail sat flagman 2", "avail sat dispatcher 1",
        "crews fri 2", "crews sat 1",
    ]) + "\n"

    window_text = "\n".join([
        "# observed weeknight: 22:00-05:00 window, service ran to 00:15,",
        "# remote and field switching totals taken from the night log",
        "night fig5",
        "start 22:00", "end 05:00", "service_clear 00:15",
        "track_removal 30", "remote_total 45", "field_total 36", "briefing 0",
        "work_until 04:45", "restore_total 45",
    ]) + "\n"

    return {
        "fourtrack.net": net_text,
        "fourtrack.plates": plate_text,
        "normal.state": state_text,
        "bridle_removal.req": req_text,
        "weekly.jobs": jobs_text,
        "weekly.cal": cal_text,
        "fig5.window": window_text,
    }


def make_minimal() -> dict[str, str]:
    net = "\n".join([
        "# single-track teaching fixture: one breaker-fed dead-end section",
        "zone za",
        "track t1", "track t2",
        "node n1 za 200",
        "node n2 za 480", "node n3 za 1500",
        "node n4 za 1500", "node n5 za 2500",
        "node n6 za 2600",
        "section st1 trolley track=t1 n2 n3 480 1500 cats=4",
        "section st2 trolley track=t1 n4 n5 1500 2500 cats=4",
        "device b1 breaker n1 n2 control=remote rackable=1",
        "device k1 knife_switch n3 n4 control=manual travel=5",
        "device b2 breaker n6 n5 control=remote rackable=1",
        "source eq1 equalizing_substation n1",
        "source eq2 equalizing_substation n6",
        "ground g2 box n2", "ground g3 box n3",
        "ground g4 box n4", "ground g5 box n5",
        "switch swa t1:t2 240",
        "switch swb t1:t2 2550",
        'plate pm1 "minimal possession, switch to switch"',
        "bar t1 swa swb",
        "block swa", "block swb",
    ]) + "\n"
    return {
        "minimal.net": net,
        "normal.state": "# all devices closed, both substations in service\n",
        "outage.req": "request min1 sections=st1\n",
        "night.window": "\n".join([
            "night minimal", "start 22:00", "end 05:00", "service_clear 23:00",
        ]) + "\n",
    }


def make_minimal2() -> dict[str, str]:
    net = "\n".join([
        "# two-track fixture with a cross jumper: stepping one form ahead of",
        "# the other runs into the load-break and hot-ground interlocks",
        "zone za",
        "track t1", "track t2",
        "node n0 za 100",
        "node a1 za 500", "node a2 za 1500",
        "node c1 za 500", "node c2 za 1500",
        "section sa trolley track=t1 a1 a2 500 1500 cats=3",
        "section sc trolley track=t2 c1 c2 500 1500 cats=3",
        "device b1 breaker n0 a1 control=remote rackable=1",
        "device b2 breaker n0 c1 control=remote rackable=1",
        "device tc knife_switch a2 c2 control=manual travel=3",
        "source eq1 equalizing_substation n0",
        "ground ga1 box a1", "ground ga2 box a2",
        "ground gc1 box c1", "ground gc2 box c2",
        "switch swx t1:t2 240",
        "switch swy t1:t2 2600",
        'plate pm2 "both tracks, full fixture"',
        "bar t1 swx swy",
        "bar t2 swx swy",
        "block swx", "block swy",
    ]) + "\n"
    return {
        "minimal2.net": net,
        "normal.state": "# everything closed and in service\n",
        "t1outage.req": "request m2a sections=sa\n",
        "t2outage.req": "request m2c sections=sc\n",
    }


def main() -> None:
    fixtures = ROOT / "fixtures"
    for name, files in (("fourtrack", make_fourtrack()),
                        ("minimal", make_minimal()),
                        ("minimal2", make_minimal2())):
        d = fixtures / name
        d.mkdir(parents=True, exist_ok=True)
        for fn, text in files.items():
            (d / fn).write_text(text)
            print(f"wrote {d / fn}")

    from isoplan.topology import load_topology, wire_run_check
    for name in ("fourtrack/fourtrack.net", "minimal/minimal.net", "minimal2/minimal2.net"):
        topo = load_topology((fixtures / name).read_text())
        runs = wire_run_check(topo)
        s = topo.summary()
        print(f"{name}: {s['nodes']} nodes, {s['sections']} sections, "
              f"{s['devices']} devices, {s['plate_orders']} plates, "
              f"{len(runs)} wire run violations")
        assert not runs, f"{name} must be wire-run compliant"


if __name__ == "__main__":
    main()
