"""Deterministic random network/state generators for property tests."""

from __future__ import annotations

import random

from isoplan.energization import SwitchingState
from isoplan.topology import NetworkTopology, parse_network, validate_network


def random_net_doc(rng: random.Random, max_nodes: int = 20) -> str:
    """A small, always-valid network document: one or two phase zones, a chain
    of trolley sections with random devices, sources, and grounds."""
    n_zones = rng.choice((1, 1, 2))
    zones = [f"z{i}" for i in range(n_zones)]
    lines = [f"zone {z}" for z in zones]
    lines.append("track t1")

    n_sections = rng.randint(1, max(1, max_nodes // 2 - 1))
    # zone boundary between sections at a random cut (sections never cross)
    cut = rng.randint(1, n_sections) if n_zones == 2 else n_sections + 1
    nodes = []
    ft = 0
    for i in range(n_sections):
        zone = zones[0] if i < cut else zones[-1]
        length = rng.choice((500, 1000, 2000, 4000))
        a, b = f"n{2 * i}", f"n{2 * i + 1}"
        lines.append(f"node {a} {zone} {ft}")
        lines.append(f"node {b} {zone} {ft + length}")
        lines.append(f"section s{i} trolley track=t1 {a} {b} {ft} {ft + length} "
                     f"cats={max(1, length // 300)}")
        nodes.append((a, zone))
        nodes.append((b, zone))
        ft += length + rng.choice((0, 50))

    # bus nodes hanging off the chain
    n_bus = rng.randint(1, 3)
    for i in range(n_bus):
        zone = rng.choice(zones)
        lines.append(f"node bus{i} {zone} {rng.randint(0, ft)}")

    dev_id = 0
    # joint devices between consecutive sections (same zone: mod/knife; across: tie)
    for i in range(n_sections - 1):
        a, za = nodes[2 * i + 1]
        b, zb = nodes[2 * i + 2]
        if za != zb:
            lines.append(f"device d{dev_id} tie {a} {b} loadbreak={rng.choice((0, 1))}")
        else:
            kind = rng.choice(("mod", "knife_switch", "breaker"))
            extra = " rackable=1" if kind == "breaker" and rng.random() < 0.5 else ""
            ctl = " control=manual travel=5" if kind == "knife_switch" else ""
            lines.append(f"device d{dev_id} {kind} {a} {b}{ctl}{extra}")
        dev_id += 1

    # feeds from buses to chain nodes in the same zone
    for i in range(n_bus):
        bus_zone = None
        for ln in lines:
            if ln.startswith(f"node bus{i} "):
                bus_zone = ln.split()[2]
        cands = [nid for nid, z in nodes if z == bus_zone]
        if not cands:
            continue
        for _ in range(rng.randint(1, 2)):
            kind = rng.choice(("breaker", "breaker", "mod"))
            extra = " rackable=1" if kind == "breaker" else ""
            lines.append(f"device d{dev_id} {kind} bus{i} {rng.choice(cands)}{extra}")
            dev_id += 1
        lines.append(f"source src{i} equalizing_substation bus{i}")

    for i, (nid, _) in enumerate(nodes):
        if rng.random() < 0.4:
            kind = rng.choice(("box", "local", "aerial"))
            lines.append(f"ground g{i} {kind} {nid}")

    return "\n".join(lines) + "\n"


def random_topology(rng: random.Random, max_nodes: int = 20) -> NetworkTopology:
    doc = random_net_doc(rng, max_nodes)
    topo, errs = parse_network(doc)
    errs += validate_network(topo)
    assert not errs, f"generator produced an invalid net: {errs}\n{doc}"
    return topo


def random_state(rng: random.Random, topo: NetworkTopology,
                 intact_interzone: bool = False) -> SwitchingState:
    state = SwitchingState()
    for did, dev in topo.devices.items():
        r = rng.random()
        if r < 0.25:
            state.device_positions[did] = "open"
        elif r < 0.30 and dev.rackable:
            state.device_positions[did] = "racked_out"
    if intact_interzone:
        for did, dev in topo.devices.items():
            za = topo.nodes[dev.terminals[0]].phase_zone
            zb = topo.nodes[dev.terminals[1]].phase_zone
            if za != zb:
                state.device_positions[did] = "open"
    for gid in topo.ground_points:
        if rng.random() < 0.2:
            state.applied_grounds.add(gid)
    for sid in topo.sources:
        if rng.random() < 0.25:
            state.sources_out.add(sid)
    if rng.random() < 0.3 and not intact_interzone:
        ns = sorted(topo.nodes)
        for _ in range(rng.randint(1, 2)):
            a, b = rng.choice(ns), rng.choice(ns)
            if a != b:
                state.pantograph_bridges.add((min(a, b), max(a, b)))
    return state


def solvable_isolation_case(rng: random.Random):
    """A topology family where single-section isolation requests are usually
    exactly solvable: every feed passes a breaker, grounds at section ends."""
    n_sections = rng.randint(1, 4)
    lines = ["zone z0", "track t1"]
    ft = 0
    nodes = []
    for i in range(n_sections):
        length = rng.choice((800, 1500, 3000))
        a, b = f"n{2 * i}", f"n{2 * i + 1}"
        lines.append(f"node {a} z0 {ft}")
        lines.append(f"node {b} z0 {ft + length}")
        lines.append(f"section s{i} trolley track=t1 {a} {b} {ft} {ft + length} cats=3")
        lines.append(f"ground ga{i} box {a}")
        lines.append(f"ground gb{i} box {b}")
        nodes.append((a, b))
        ft += length + 10
    dev = 0
    for i in range(n_sections - 1):
        kind = rng.choice(("mod", "knife_switch", "tie"))
        lb = " loadbreak=1" if kind == "tie" else ""
        lines.append(f"device j{dev} {kind} {nodes[i][1]} {nodes[i + 1][0]}{lb}")
        dev += 1
    n_src = rng.randint(1, 2)
    for k in range(n_src):
        lines.append(f"node bus{k} z0 {rng.randint(0, ft)}")
        lines.append(f"source src{k} equalizing_substation bus{k}")
        attach = sorted(rng.sample(range(n_sections), rng.randint(1, n_sections)))
        for i in attach:
            end = rng.choice(nodes[i])
            lines.append(f"device fb{dev} breaker bus{k} {end} rackable=1")
            dev += 1
    doc = "\n".join(lines) + "\n"
    topo, errs = parse_network(doc)
    errs += validate_network(topo)
    assert not errs, doc
    return topo
