"""Live/dead/grounded partition of the network and the hazards that fall out.

Everything here is connectivity-level: no impedance, no current. Energy and
ground potential both spread through sections, closed devices, and any train
momentarily bridging nodes with its pantograph bus.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .topology import NetworkTopology

OPEN, CLOSED, RACKED_OUT = "open", "closed", "racked_out"
POSITIONS = (OPEN, CLOSED, RACKED_OUT)


@dataclass
class SwitchingState:
    """Mutable runtime state of the switchable network.

    Devices not listed in device_positions are closed (normal); sources not
    listed in sources_out are in service. Ground points listed in
    applied_grounds carry a physical ground.
    """
    device_positions: dict[str, str] = field(default_factory=dict)
    applied_grounds: set[str] = field(default_factory=set)
    sources_out: set[str] = field(default_factory=set)
    tags: dict[str, object] = field(default_factory=dict)
    pantograph_bridges: set[tuple[str, str]] = field(default_factory=set)

    def position(self, device_id: str) -> str:
        return self.device_positions.get(device_id, CLOSED)

    def set_position(self, device_id: str, position: str) -> None:
        if position == CLOSED:
            self.device_positions.pop(device_id, None)
        else:
            self.device_positions[device_id] = position

    def in_service(self, topology: NetworkTopology, source_id: str) -> bool:
        return source_id in topology.sources and source_id not in self.sources_out

    def sources_in_service(self, topology: NetworkTopology) -> list[str]:
        return sorted(s for s in topology.sources if s not in self.sources_out)

    def copy(self) -> "SwitchingState":
        return SwitchingState(
            device_positions=dict(self.device_positions),
            applied_grounds=set(self.applied_grounds),
            sources_out=set(self.sources_out),
            tags=dict(self.tags),
            pantograph_bridges=set(self.pantograph_bridges),
        )

    def snapshot(self) -> tuple:
        return (
            tuple(sorted(self.device_positions.items())),
            tuple(sorted(self.applied_grounds)),
            tuple(sorted(self.sources_out)),
            tuple(sorted((k, getattr(v, "authority", str(v))) for k, v in self.tags.items())),
            tuple(sorted(self.pantograph_bridges)),
        )


def normal_state() -> SwitchingState:
    return SwitchingState()


def parse_state(text: str, topology: NetworkTopology) -> SwitchingState:
    """Parse a state document: exceptions from the all-closed, all-in-service norm."""
    from .switching import Tag

    state = SwitchingState()
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        rec, rest = parts[0], parts[1:]
        if rec == "position":
            did, pos = rest
            if did not in topology.devices:
                raise ValueError(f"line {ln}: unknown device {did}")
            if pos not in POSITIONS:
                raise ValueError(f"line {ln}: bad position {pos}")
            state.set_position(did, pos)
        elif rec == "ground":
            (gid,) = rest
            if gid not in topology.ground_points:
                raise ValueError(f"line {ln}: unknown ground point {gid}")
            state.applied_grounds.add(gid)
        elif rec == "outofservice":
            (sid,) = rest
            if sid not in topology.sources:
                raise ValueError(f"line {ln}: unknown source {sid}")
            state.sources_out.add(sid)
        elif rec == "tag":
            target, authority = rest[0], rest[1]
            reason = " ".join(rest[2:]).strip('"')
            if target not in topology.devices and target not in topology.ground_points:
                raise ValueError(f"line {ln}: unknown tag target {target}")
            state.tags[target] = Tag(authority=authority, reason=reason)
        elif rec == "bridge":
            a, b = rest
            for n in (a, b):
                if n not in topology.nodes:
                    raise ValueError(f"line {ln}: unknown node {n}")
            state.pantograph_bridges.add((min(a, b), max(a, b)))
        else:
            raise ValueError(f"line {ln}: unrecognized state record '{rec}'")
    return state


def format_state(state: SwitchingState) -> str:
    out = []
    for did, pos in sorted(state.device_positions.items()):
        out.append(f"position {did} {pos}")
    for gid in sorted(state.applied_grounds):
        out.append(f"ground {gid}")
    for sid in sorted(state.sources_out):
        out.append(f"outofservice {sid}")
    for target, tag in sorted(state.tags.items()):
        reason = getattr(tag, "reason", "")
        out.append(f'tag {target} {getattr(tag, "authority", "?")} "{reason}"')
    for a, b in sorted(state.pantograph_bridges):
        out.append(f"bridge {a} {b}")
    return "\n".join(out) + ("\n" if out else "")


# -- energization ------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    kind: str          # GROUND_FAULT | PHASE_TIE | BACKFEED_HAZARD | UNBALANCE
    participants: tuple[str, ...]
    detail: str = ""

    def __str__(self) -> str:
        return f"{self.kind}[{','.join(self.participants)}] {self.detail}"


@dataclass(frozen=True)
class EnergizationResult:
    energized: frozenset[str]
    grounded: frozenset[str]
    dead: frozenset[str]
    violations: tuple[Violation, ...]

    @property
    def not_energized(self) -> frozenset[str]:
        return self.grounded.union(self.dead) - self.energized

    def violations_of(self, kind: str) -> list[Violation]:
        return [v for v in self.violations if v.kind == kind]


def _edges(topology: NetworkTopology, state: SwitchingState, with_bridges: bool):
    """Adjacency over conducting edges: sections, closed devices, bridges.
    Edge labels: ('section', id) / ('device', id) / ('bridge', 'a|b')."""
    adj: dict[str, list[tuple[str, tuple[str, str]]]] = {n: [] for n in topology.nodes}
    for sec in topology.sections.values():
        a, b = sec.endpoints
        adj[a].append((b, ("section", sec.id)))
        adj[b].append((a, ("section", sec.id)))
    for dev in topology.devices.values():
        if state.position(dev.id) == CLOSED:
            a, b = dev.terminals
            adj[a].append((b, ("device", dev.id)))
            adj[b].append((a, ("device", dev.id)))
    if with_bridges:
        for a, b in state.pantograph_bridges:
            adj[a].append((b, ("bridge", f"{a}|{b}")))
            adj[b].append((a, ("bridge", f"{a}|{b}")))
    return adj


def _reach(adj, seeds) -> set[str]:
    seen = set()
    queue = deque()
    for s in seeds:
        if s in adj and s not in seen:
            seen.add(s)
            queue.append(s)
    while queue:
        n = queue.popleft()
        for m, _ in adj[n]:
            if m not in seen:
                seen.add(m)
                queue.append(m)
    return seen


def unbalance_metric(topology: NetworkTopology, state: SwitchingState) -> dict[str, float]:
    """Per-source load score: each energized trolley section counts toward the
    source(s) nearest by closed-edge hops; ties split evenly."""
    adj = _edges(topology, state, with_bridges=True)
    live_sources = state.sources_in_service(topology)
    scores = {s: 0.0 for s in live_sources}
    if not live_sources:
        return scores
    energized = _reach(adj, [topology.sources[s].node for s in live_sources])

    dist: dict[str, dict[str, int]] = {}
    for sid in live_sources:
        d = {topology.sources[sid].node: 0}
        queue = deque([topology.sources[sid].node])
        while queue:
            n = queue.popleft()
            for m, _ in adj[n]:
                if m not in d:
                    d[m] = d[n] + 1
                    queue.append(m)
        dist[sid] = d

    for sec in sorted(topology.sections.values(), key=lambda s: s.id):
        if sec.kind != "trolley":
            continue
        a, b = sec.endpoints
        if a not in energized and b not in energized:
            continue
        best = None
        winners: list[str] = []
        for sid in live_sources:
            d = min(dist[sid].get(a, 10**9), dist[sid].get(b, 10**9))
            if best is None or d < best:
                best, winners = d, [sid]
            elif d == best:
                winners.append(sid)
        if best is not None and best < 10**9:
            share = 1.0 / len(winners)
            for sid in winners:
                scores[sid] += share
    return scores


def compute_energization(topology: NetworkTopology, state: SwitchingState,
                         unbalance_factor: float = 2.0) -> EnergizationResult:
    """Partition nodes into energized / grounded / dead and list hazards.

    Unknown ids in the state raise KeyError; hazards never raise.
    """
    for did in state.device_positions:
        if did not in topology.devices:
            raise KeyError(f"state references unknown device {did}")
    for gid in state.applied_grounds:
        if gid not in topology.ground_points:
            raise KeyError(f"state references unknown ground point {gid}")
    for sid in state.sources_out:
        if sid not in topology.sources:
            raise KeyError(f"state references unknown source {sid}")
    for a, b in state.pantograph_bridges:
        for n in (a, b):
            if n not in topology.nodes:
                raise KeyError(f"state references unknown node {n}")

    adj = _edges(topology, state, with_bridges=True)
    source_nodes = [topology.sources[s].node for s in state.sources_in_service(topology)]
    ground_nodes = [topology.ground_points[g].node for g in sorted(state.applied_grounds)]

    energized = _reach(adj, source_nodes)
    grounded = _reach(adj, ground_nodes)
    dead = set(topology.nodes) - energized - grounded

    violations: list[Violation] = []

    for n in sorted(energized & grounded):
        violations.append(Violation("GROUND_FAULT", (n,),
                                    "node is simultaneously energized and grounded"))

    # Phase tie: a conducting path joins utility grids that are synchronized to
    # different phase timings, i.e. one energized component carries in-service
    # sources from more than one zone. Backfeeding a dead stub across a phase
    # break is legitimate and does not trip this.
    live_src = state.sources_in_service(topology)
    seen: set[str] = set()
    for start in sorted(energized):
        if start in seen:
            continue
        comp = _reach(adj, [start])
        seen |= comp
        src_zones = {topology.sources[s].phase_zone for s in live_src
                     if topology.sources[s].node in comp}
        if len(src_zones) > 1:
            culprits: set[str] = set()
            for n in comp:
                for m, (ek, eid) in adj[n]:
                    if topology.nodes[n].phase_zone != topology.nodes[m].phase_zone:
                        culprits.add(eid)
            violations.append(Violation("PHASE_TIE", tuple(sorted(culprits)),
                                        f"grids {'/'.join(sorted(src_zones))} electrically connected"))

    # Backfeed: a bridge whose removal splits live from not-live. The bus on a
    # multi-pantograph train would momentarily feed the far side.
    if state.pantograph_bridges:
        base_adj = _edges(topology, state, with_bridges=False)
        base_energized = _reach(base_adj, source_nodes)
        for a, b in sorted(state.pantograph_bridges):
            if (a in base_energized) != (b in base_energized):
                violations.append(Violation("BACKFEED_HAZARD", (a, b),
                                            "train bridges an energized node to a de-energized one"))

    scores = unbalance_metric(topology, state)
    if len(scores) >= 2:
        values = list(scores.values())
        mean = sum(values) / len(values)
        worst = max(values)
        if mean > 0 and worst > unbalance_factor * mean:
            overloaded = tuple(sorted(s for s, v in scores.items() if v > unbalance_factor * mean))
            detail = "; ".join(f"{s}={scores[s]:g}" for s in sorted(scores))
            violations.append(Violation("UNBALANCE", overloaded,
                                        f"max load {worst:g} > {unbalance_factor:g} x mean {mean:g} ({detail})"))

    return EnergizationResult(
        energized=frozenset(energized),
        grounded=frozenset(grounded),
        dead=frozenset(dead),
        violations=tuple(violations),
    )
