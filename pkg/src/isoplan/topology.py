"""Static network model: nodes, sections, devices, sources, grounds, tracks.

The topology is the electrical one-line diagram plus the track layout. It is
immutable once loaded; every other module reads it and never writes it.
Insulation points (sectionalizing insulators, air gaps, phase breaks) are not
objects: they are simply the absence of a section between two adjacent nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .plate_orders import PlateOrder, parse_plate_records

SECTION_KINDS = ("trolley", "feeder", "supply_tap", "signal_feeder")
DEVICE_KINDS = ("breaker", "mod", "knife_switch", "tie")
SOURCE_KINDS = ("supply_substation", "equalizing_substation")
GROUND_KINDS = ("local", "aerial", "box")

WIRE_RUN_LIMIT_FT = 10_560    # two miles of mechanically continuous catenary
WORK_ZONE_LIMIT_FT = 9_000    # 30 catenary structures at 300 ft spacing
CATENARY_SPACING_FT = 300


@dataclass(frozen=True)
class ElectricalNode:
    id: str
    phase_zone: str
    location_ft: int


@dataclass(frozen=True)
class Section:
    id: str
    kind: str
    endpoints: tuple[str, str]
    span: tuple[int, int]
    track: str | None = None        # required for trolley; group label for feeders
    catenary_count: int = 0

    @property
    def length_ft(self) -> int:
        return self.span[1] - self.span[0]


@dataclass(frozen=True)
class Device:
    id: str
    kind: str
    terminals: tuple[str, str]
    load_break: bool
    control: str = "remote"         # remote | manual
    travel_minutes: int = 0
    rackable: bool = False


@dataclass(frozen=True)
class Source:
    id: str
    kind: str
    node: str
    phase_zone: str


@dataclass(frozen=True)
class GroundPoint:
    id: str
    kind: str
    node: str

    @property
    def requires_pole_climb(self) -> bool:
        return self.kind == "aerial"


@dataclass(frozen=True)
class TrackSwitch:
    id: str
    track_pair: tuple[str, str]
    location_ft: int


@dataclass(frozen=True)
class Interlocking:
    id: str
    span: tuple[int, int]
    switches: tuple[str, ...]


@dataclass
class TrackLayout:
    tracks: list[str] = field(default_factory=list)
    switches: dict[str, TrackSwitch] = field(default_factory=dict)
    interlockings: dict[str, Interlocking] = field(default_factory=dict)
    keep_live_assets: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class ValidationError:
    code: str
    message: str
    line: int = 0

    def __str__(self) -> str:
        where = f" (line {self.line})" if self.line else ""
        return f"{self.code}: {self.message}{where}"


class TopologyError(Exception):
    """Raised by load_topology when the document fails validation."""

    def __init__(self, errors: list[ValidationError]):
        self.errors = errors
        super().__init__("; ".join(str(e) for e in errors))


@dataclass
class NetworkTopology:
    nodes: dict[str, ElectricalNode] = field(default_factory=dict)
    sections: dict[str, Section] = field(default_factory=dict)
    devices: dict[str, Device] = field(default_factory=dict)
    sources: dict[str, Source] = field(default_factory=dict)
    ground_points: dict[str, GroundPoint] = field(default_factory=dict)
    track_layout: TrackLayout = field(default_factory=TrackLayout)
    phase_zones: list[str] = field(default_factory=list)
    plate_order_library: dict[str, PlateOrder] = field(default_factory=dict)
    source_text: str = ""
    _record_lines: dict[tuple[str, str], int] = field(default_factory=dict, repr=False)
    _section_adj: dict[str, list[tuple[str, str]]] | None = field(default=None, repr=False)
    _devices_at: dict[str, list[str]] | None = field(default=None, repr=False)

    # -- derived adjacency (cached; the topology never changes after load) --

    def section_adjacency(self) -> dict[str, list[tuple[str, str]]]:
        """node id -> [(neighbor node, section id), ...] over sections only."""
        if self._section_adj is None:
            adj: dict[str, list[tuple[str, str]]] = {n: [] for n in self.nodes}
            for sec in self.sections.values():
                a, b = sec.endpoints
                adj[a].append((b, sec.id))
                adj[b].append((a, sec.id))
            self._section_adj = adj
        return self._section_adj

    def devices_at(self) -> dict[str, list[str]]:
        """node id -> device ids with a terminal there."""
        if self._devices_at is None:
            at: dict[str, list[str]] = {n: [] for n in self.nodes}
            for dev in self.devices.values():
                for t in dev.terminals:
                    at[t].append(dev.id)
            self._devices_at = at
        return self._devices_at

    def sections_at(self, node_id: str) -> list[Section]:
        return [self.sections[sid] for _, sid in self.section_adjacency().get(node_id, [])]

    def line_group_of_section(self, section_id: str) -> str:
        sec = self.sections[section_id]
        if sec.track:
            return sec.track
        return "feeders" if sec.kind == "feeder" else sec.kind

    def _node_groups(self, node_id: str) -> tuple[list[str], list[str]]:
        line, other = [], []
        for _, sid in self.section_adjacency().get(node_id, []):
            g = self.line_group_of_section(sid)
            if self.sections[sid].kind in ("trolley", "feeder"):
                line.append(g)
            else:
                other.append(g)
        return line, other

    def line_group_of_node(self, node_id: str) -> str | None:
        line, other = self._node_groups(node_id)
        if line:
            return min(line)
        return min(other) if other else None

    def line_group_of_device(self, device_id: str) -> str:
        """Which operating-order form a device belongs to: the trolley track or
        feeder group it switches; bus-side terminals do not decide."""
        dev = self.devices[device_id]
        line, other = [], []
        for t in dev.terminals:
            tl, to = self._node_groups(t)
            line += tl
            other += to
        if line:
            return min(line)
        return min(other) if other else "misc"

    def line_group_of_ground(self, ground_id: str) -> str:
        g = self.line_group_of_node(self.ground_points[ground_id].node)
        return g or "misc"

    def section_closure(self, section_ids) -> frozenset[str]:
        """All nodes reachable from the given sections through sections alone.

        This is the electrically inseparable extent of a work zone: nothing
        switchable lies between these nodes and the targets.
        """
        adj = self.section_adjacency()
        seen: set[str] = set()
        stack: list[str] = []
        for sid in section_ids:
            for n in self.sections[sid].endpoints:
                if n not in seen:
                    seen.add(n)
                    stack.append(n)
        while stack:
            n = stack.pop()
            for m, _ in adj[n]:
                if m not in seen:
                    seen.add(m)
                    stack.append(m)
        return frozenset(seen)

    def switch_location(self, switch_id: str) -> int:
        return self.track_layout.switches[switch_id].location_ft

    def summary(self) -> dict[str, int]:
        return {
            "zones": len(self.phase_zones),
            "nodes": len(self.nodes),
            "sections": len(self.sections),
            "trolley_sections": sum(1 for s in self.sections.values() if s.kind == "trolley"),
            "devices": len(self.devices),
            "breakers": sum(1 for d in self.devices.values() if d.kind == "breaker"),
            "sources": len(self.sources),
            "supply_substations": sum(1 for s in self.sources.values() if s.kind == "supply_substation"),
            "equalizing_substations": sum(1 for s in self.sources.values() if s.kind == "equalizing_substation"),
            "ground_points": len(self.ground_points),
            "tracks": len(self.track_layout.tracks),
            "switches": len(self.track_layout.switches),
            "interlockings": len(self.track_layout.interlockings),
            "keep_live_assets": len(self.track_layout.keep_live_assets),
            "plate_orders": len(self.plate_order_library),
        }


# -- parsing ----------------------------------------------------------------

def _split_attrs(parts: list[str]) -> tuple[list[str], dict[str, str]]:
    positional, attrs = [], {}
    for p in parts:
        if "=" in p:
            k, _, v = p.partition("=")
            attrs[k] = v
        else:
            positional.append(p)
    return positional, attrs


def parse_network(text: str) -> tuple[NetworkTopology, list[ValidationError]]:
    """Parse a network document. Syntactic errors are returned, not raised.

    Records are one per line; `#` starts a comment. The result is NOT yet
    validated; run validate_network for the semantic checks.
    """
    topo = NetworkTopology(source_text=text)
    errors: list[ValidationError] = []
    plate_lines: list[tuple[int, str]] = []

    def err(code: str, msg: str, ln: int) -> None:
        errors.append(ValidationError(code, msg, ln))

    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        rec, rest = parts[0], parts[1:]
        try:
            if rec == "zone":
                (zid,) = rest
                if zid in topo.phase_zones:
                    err("DUPLICATE_ID", f"zone {zid} declared twice", ln)
                else:
                    topo.phase_zones.append(zid)
            elif rec == "node":
                nid, zone, ft = rest
                if nid in topo.nodes:
                    err("DUPLICATE_ID", f"node {nid} declared twice", ln)
                topo.nodes[nid] = ElectricalNode(nid, zone, int(ft))
                topo._record_lines[("node", nid)] = ln
            elif rec == "section":
                pos, attrs = _split_attrs(rest)
                sid, kind, a, b, start, end = pos
                if sid in topo.sections:
                    err("DUPLICATE_ID", f"section {sid} declared twice", ln)
                topo.sections[sid] = Section(
                    id=sid, kind=kind, endpoints=(a, b),
                    span=(int(start), int(end)),
                    track=attrs.get("track"),
                    catenary_count=int(attrs.get("cats", 0)),
                )
                topo._record_lines[("section", sid)] = ln
            elif rec == "device":
                pos, attrs = _split_attrs(rest)
                did, kind, a, b = pos
                if did in topo.devices:
                    err("DUPLICATE_ID", f"device {did} declared twice", ln)
                control = attrs.get("control", "remote")
                if kind == "breaker":
                    load_break = True
                elif kind == "tie":
                    load_break = attrs.get("loadbreak", "0") == "1"
                else:
                    load_break = False
                topo.devices[did] = Device(
                    id=did, kind=kind, terminals=(a, b), load_break=load_break,
                    control=control,
                    travel_minutes=int(attrs.get("travel", 0)),
                    rackable=attrs.get("rackable", "0") == "1",
                )
                topo._record_lines[("device", did)] = ln
                if kind != "tie" and "loadbreak" in attrs:
                    want = attrs["loadbreak"] == "1"
                    if want != load_break:
                        err("DEVICE_LOADBREAK",
                            f"device {did}: {kind} load_break is fixed to {load_break}", ln)
            elif rec == "source":
                sid, kind, node = rest
                if sid in topo.sources:
                    err("DUPLICATE_ID", f"source {sid} declared twice", ln)
                zone = topo.nodes[node].phase_zone if node in topo.nodes else ""
                topo.sources[sid] = Source(sid, kind, node, zone)
                topo._record_lines[("source", sid)] = ln
            elif rec == "ground":
                gid, kind, node = rest
                if gid in topo.ground_points:
                    err("DUPLICATE_ID", f"ground {gid} declared twice", ln)
                topo.ground_points[gid] = GroundPoint(gid, kind, node)
                topo._record_lines[("ground", gid)] = ln
            elif rec == "track":
                (tid,) = rest
                if tid in topo.track_layout.tracks:
                    err("DUPLICATE_ID", f"track {tid} declared twice", ln)
                else:
                    topo.track_layout.tracks.append(tid)
            elif rec == "switch":
                swid, pair, ft = rest
                ta, _, tb = pair.partition(":")
                if swid in topo.track_layout.switches:
                    err("DUPLICATE_ID", f"switch {swid} declared twice", ln)
                topo.track_layout.switches[swid] = TrackSwitch(swid, (ta, tb), int(ft))
                topo._record_lines[("switch", swid)] = ln
            elif rec == "interlocking":
                pos, attrs = _split_attrs(rest)
                iid, start, end = pos
                topo.track_layout.interlockings[iid] = Interlocking(
                    iid, (int(start), int(end)),
                    tuple(s for s in attrs.get("switches", "").split(",") if s),
                )
                topo._record_lines[("interlocking", iid)] = ln
            elif rec == "keeplive":
                (sid,) = rest
                topo.track_layout.keep_live_assets.append(sid)
                topo._record_lines[("keeplive", sid)] = ln
            elif rec in ("plate", "bar", "block"):
                plate_lines.append((ln, line))
            else:
                err("UNKNOWN_RECORD", f"unrecognized record '{rec}'", ln)
        except (ValueError, KeyError):
            err("MALFORMED_RECORD", f"cannot parse: {raw.strip()}", ln)

    if plate_lines:
        plates, perrs = parse_plate_records(plate_lines)
        topo.plate_order_library.update(plates)
        for code, msg, pln in perrs:
            err(code, msg, pln)
    return topo, errors


def validate_network(topo: NetworkTopology) -> list[ValidationError]:
    """Semantic validation. Re-running on a constructed topology reproduces
    every error that load_topology would report."""
    errors: list[ValidationError] = []
    lines = topo._record_lines

    def err(code: str, msg: str, key: tuple[str, str] | None = None) -> None:
        errors.append(ValidationError(code, msg, lines.get(key, 0) if key else 0))

    zones = set(topo.phase_zones)
    for n in topo.nodes.values():
        if n.phase_zone not in zones:
            err("DANGLING_REF", f"node {n.id} references undeclared zone {n.phase_zone}",
                ("node", n.id))

    by_track: dict[str, list[Section]] = {}
    for s in topo.sections.values():
        key = ("section", s.id)
        if s.kind not in SECTION_KINDS:
            err("BAD_KIND", f"section {s.id} has unknown kind {s.kind}", key)
            continue
        if s.span[0] >= s.span[1]:
            err("BAD_SPAN", f"section {s.id} span must satisfy start < end", key)
        if s.endpoints[0] == s.endpoints[1]:
            err("SELF_EDGE", f"section {s.id} endpoints must differ", key)
        missing = [n for n in s.endpoints if n not in topo.nodes]
        if missing:
            err("DANGLING_REF", f"section {s.id} references unknown node(s) {','.join(missing)}", key)
            continue
        za, zb = (topo.nodes[n].phase_zone for n in s.endpoints)
        if za != zb:
            err("PHASE_CROSSING",
                f"section {s.id} crosses phase zones {za}/{zb}; only devices may", key)
        if s.kind == "trolley":
            if not s.track:
                err("TRACK_REQUIRED", f"trolley section {s.id} must name a track", key)
            elif s.track not in topo.track_layout.tracks:
                err("DANGLING_REF", f"section {s.id} references unknown track {s.track}", key)
            else:
                by_track.setdefault(s.track, []).append(s)

    for track, secs in sorted(by_track.items()):
        secs.sort(key=lambda s: (s.span, s.id))
        for prev, cur in zip(secs, secs[1:]):
            if cur.span[0] < prev.span[1]:
                err("OVERLAP",
                    f"trolley sections {prev.id} and {cur.id} overlap on track {track}",
                    ("section", cur.id))

    for d in topo.devices.values():
        key = ("device", d.id)
        if d.kind not in DEVICE_KINDS:
            err("BAD_KIND", f"device {d.id} has unknown kind {d.kind}", key)
            continue
        if d.terminals[0] == d.terminals[1]:
            err("SELF_EDGE", f"device {d.id} terminals must differ", key)
        missing = [n for n in d.terminals if n not in topo.nodes]
        if missing:
            err("DANGLING_REF", f"device {d.id} references unknown node(s) {','.join(missing)}", key)
        if d.kind == "breaker" and not d.load_break:
            err("DEVICE_LOADBREAK", f"breaker {d.id} must be load-break", key)
        if d.kind in ("mod", "knife_switch") and d.load_break:
            err("DEVICE_LOADBREAK", f"{d.kind} {d.id} cannot be load-break", key)
        if d.control == "remote" and d.travel_minutes:
            err("BAD_TRAVEL", f"remote device {d.id} must have travel=0", key)
        if d.control not in ("remote", "manual"):
            err("BAD_KIND", f"device {d.id} control must be remote or manual", key)
        if d.rackable and d.kind != "breaker":
            err("BAD_RACKABLE", f"only breakers may be rackable ({d.id})", key)
        if d.travel_minutes < 0:
            err("BAD_TRAVEL", f"device {d.id} travel minutes must be >= 0", key)

    for s in topo.sources.values():
        key = ("source", s.id)
        if s.kind not in SOURCE_KINDS:
            err("BAD_KIND", f"source {s.id} has unknown kind {s.kind}", key)
        if s.node not in topo.nodes:
            err("DANGLING_REF", f"source {s.id} references unknown node {s.node}", key)
        elif topo.nodes[s.node].phase_zone != s.phase_zone:
            err("ZONE_MISMATCH", f"source {s.id} zone differs from its node's zone", key)

    for g in topo.ground_points.values():
        key = ("ground", g.id)
        if g.kind not in GROUND_KINDS:
            err("BAD_KIND", f"ground point {g.id} has unknown kind {g.kind}", key)
        if g.node not in topo.nodes:
            err("DANGLING_REF", f"ground point {g.id} references unknown node {g.node}", key)

    tl = topo.track_layout
    seen_in_interlocking: dict[str, str] = {}
    for sw in tl.switches.values():
        for t in sw.track_pair:
            if t not in tl.tracks:
                err("DANGLING_REF", f"switch {sw.id} references unknown track {t}", ("switch", sw.id))
    for ilk in tl.interlockings.values():
        for swid in ilk.switches:
            if swid not in tl.switches:
                err("DANGLING_REF", f"interlocking {ilk.id} references unknown switch {swid}",
                    ("interlocking", ilk.id))
            elif swid in seen_in_interlocking:
                err("SWITCH_SHARED",
                    f"switch {swid} belongs to interlockings {seen_in_interlocking[swid]} and {ilk.id}",
                    ("interlocking", ilk.id))
            else:
                seen_in_interlocking[swid] = ilk.id
    for sid in tl.keep_live_assets:
        if sid not in topo.sections:
            err("DANGLING_REF", f"keeplive references unknown section {sid}", ("keeplive", sid))
        elif topo.sections[sid].kind != "trolley":
            err("BAD_KEEPLIVE", f"keeplive {sid} must reference a trolley section", ("keeplive", sid))

    for p in topo.plate_order_library.values():
        for track, sw_from, sw_to in p.barred_segments:
            for swid in (sw_from, sw_to):
                if swid not in tl.switches:
                    err("DANGLING_REF", f"plate {p.id} references unknown switch {swid}")
                elif track not in tl.switches[swid].track_pair:
                    err("PLATE_OFF_TRACK",
                        f"plate {p.id}: switch {swid} is not on track {track}")
        barred_sw = set()
        for track, sw_from, sw_to in p.barred_segments:
            if sw_from in tl.switches and sw_to in tl.switches:
                lo = min(tl.switches[sw_from].location_ft, tl.switches[sw_to].location_ft)
                hi = max(tl.switches[sw_from].location_ft, tl.switches[sw_to].location_ft)
                for sw in tl.switches.values():
                    if lo <= sw.location_ft <= hi and track in sw.track_pair:
                        barred_sw.add(sw.id)
                barred_sw.update((sw_from, sw_to))
        for swid in sorted(p.blocked_switches - barred_sw):
            err("PLATE_BLOCK_OUTSIDE",
                f"plate {p.id} blocks switch {swid} outside its barred segments")

    return errors


def load_topology(text: str) -> NetworkTopology:
    """Parse and validate a network document; raises TopologyError on any error."""
    topo, errors = parse_network(text)
    errors += validate_network(topo)
    if errors:
        raise TopologyError(errors)
    return topo


# -- wire run report ---------------------------------------------------------

@dataclass(frozen=True)
class WireRunViolation:
    track: str
    sections: tuple[str, ...]
    length_ft: int
    limit_ft: int = WIRE_RUN_LIMIT_FT

    def __str__(self) -> str:
        return (f"wire run on track {self.track} is {self.length_ft} ft "
                f"(> {self.limit_ft} ft): {' '.join(self.sections)}")


def wire_run_check(topo: NetworkTopology, limit_ft: int = WIRE_RUN_LIMIT_FT) -> list[WireRunViolation]:
    """Report every mechanically continuous trolley run longer than the limit.

    A run is a maximal chain of same-track trolley sections joined by shared
    nodes; a node that no further section shares is a termination point.
    """
    violations: list[WireRunViolation] = []
    for track in sorted(topo.track_layout.tracks):
        secs = [s for s in topo.sections.values() if s.kind == "trolley" and s.track == track]
        node_to_secs: dict[str, list[str]] = {}
        for s in secs:
            for n in s.endpoints:
                node_to_secs.setdefault(n, []).append(s.id)
        seen: set[str] = set()
        for s in sorted(secs, key=lambda s: (s.span, s.id)):
            if s.id in seen:
                continue
            chain = {s.id}
            stack = [s.id]
            while stack:
                cur = topo.sections[stack.pop()]
                for n in cur.endpoints:
                    for other in node_to_secs.get(n, []):
                        if other not in chain:
                            chain.add(other)
                            stack.append(other)
            seen |= chain
            lo = min(topo.sections[c].span[0] for c in chain)
            hi = max(topo.sections[c].span[1] for c in chain)
            if hi - lo > limit_ft:
                ordered = tuple(sorted(chain, key=lambda c: (topo.sections[c].span, c)))
                violations.append(WireRunViolation(track, ordered, hi - lo, limit_ft))
    return violations
