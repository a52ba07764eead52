"""Plate orders and the POPS request/acknowledge protocol.

A plate order is a pre-published set of track limits barred to electric
operation while a catenary segment is isolated, plus the switches the
dispatcher must block. POPS is the director/dispatcher handshake that puts
one in effect and electronically locks those switches.
"""

from __future__ import annotations

import shlex
from dataclasses import dataclass, field, replace


@dataclass(frozen=True)
class PlateOrder:
    id: str
    barred_segments: tuple[tuple[str, str, str], ...]   # (track, from_switch, to_switch)
    blocked_switches: frozenset[str]
    description: str = ""


def parse_plate_records(lines: list[tuple[int, str]]):
    """Parse `plate`/`bar`/`block` records. Returns (orders, errors)."""
    orders: dict[str, PlateOrder] = {}
    errors: list[tuple[str, str, int]] = []
    cur_id = None
    cur_bars: list[tuple[str, str, str]] = []
    cur_blocks: set[str] = set()
    cur_desc = ""

    def flush():
        nonlocal cur_id, cur_bars, cur_blocks, cur_desc
        if cur_id is not None:
            orders[cur_id] = PlateOrder(cur_id, tuple(cur_bars), frozenset(cur_blocks), cur_desc)
        cur_id, cur_bars, cur_blocks, cur_desc = None, [], set(), ""

    for ln, line in lines:
        try:
            parts = shlex.split(line)
        except ValueError:
            errors.append(("MALFORMED_RECORD", f"cannot parse: {line}", ln))
            continue
        if not parts:
            continue
        rec = parts[0]
        if rec == "plate":
            flush()
            if len(parts) < 2:
                errors.append(("MALFORMED_RECORD", "plate record needs an id", ln))
                continue
            cur_id = parts[1]
            cur_desc = parts[2] if len(parts) > 2 else ""
            if cur_id in orders:
                errors.append(("DUPLICATE_ID", f"plate {cur_id} declared twice", ln))
        elif rec == "bar":
            if cur_id is None or len(parts) != 4:
                errors.append(("MALFORMED_RECORD", f"stray or malformed bar record: {line}", ln))
            else:
                cur_bars.append((parts[1], parts[2], parts[3]))
        elif rec == "block":
            if cur_id is None or len(parts) != 2:
                errors.append(("MALFORMED_RECORD", f"stray or malformed block record: {line}", ln))
            else:
                cur_blocks.add(parts[1])
        else:
            errors.append(("UNKNOWN_RECORD", f"unrecognized record '{rec}'", ln))
    flush()
    return orders, errors


def parse_plate_library(text: str) -> dict[str, PlateOrder]:
    lines = []
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append((ln, line))
    orders, errors = parse_plate_records(lines)
    if errors:
        raise ValueError("; ".join(f"{c}: {m} (line {ln})" for c, m, ln in errors))
    return orders


def format_plate_library(orders: dict[str, PlateOrder]) -> str:
    out = []
    for p in sorted(orders.values(), key=lambda p: p.id):
        out.append(f'plate {p.id} "{p.description}"')
        for track, a, b in p.barred_segments:
            out.append(f"bar {track} {a} {b}")
        for sw in sorted(p.blocked_switches):
            out.append(f"block {sw}")
    return "\n".join(out) + "\n"


# -- coverage ----------------------------------------------------------------

@dataclass(frozen=True)
class CoverageGap:
    section: str
    track: str
    span: tuple[int, int]
    missing_ft: int

    def __str__(self) -> str:
        return (f"section {self.section} on {self.track}: {self.missing_ft} ft "
                f"outside barred limits around {self.span[0]}..{self.span[1]}")


@dataclass(frozen=True)
class CoverageResult:
    covered: bool
    gaps: tuple[CoverageGap, ...] = ()


def _insulation_extent(topology, section_id: str) -> tuple[int, int]:
    """Stationing extent of the same-track trolley chain electrically joined
    to this section by shared nodes (the SI-to-SI limits of what gets dead)."""
    sec = topology.sections[section_id]
    node_to_secs: dict[str, list[str]] = {}
    for s in topology.sections.values():
        if s.kind == "trolley" and s.track == sec.track:
            for n in s.endpoints:
                node_to_secs.setdefault(n, []).append(s.id)
    chain = {section_id}
    stack = [section_id]
    while stack:
        cur = topology.sections[stack.pop()]
        for n in cur.endpoints:
            for other in node_to_secs.get(n, []):
                if other not in chain:
                    chain.add(other)
                    stack.append(other)
    lo = min(topology.sections[c].span[0] for c in chain)
    hi = max(topology.sections[c].span[1] for c in chain)
    return lo, hi


def _barred_interval(topology, track: str, sw_from: str, sw_to: str) -> tuple[int, int]:
    a = topology.switch_location(sw_from)
    b = topology.switch_location(sw_to)
    return (a, b) if a <= b else (b, a)


def coverage_check(topology, plate_order: PlateOrder, request, margin_ft: int = 0) -> CoverageResult:
    """A plate order covers a request when every target trolley section lies
    inside a barred segment whose switch limits sit at or outside the
    section's insulation boundaries (by at least margin_ft)."""
    gaps: list[CoverageGap] = []
    for sid in sorted(request.target_sections):
        sec = topology.sections[sid]
        if sec.kind != "trolley":
            continue
        lo, hi = _insulation_extent(topology, sid)
        need = (lo - margin_ft, hi + margin_ft)
        best_missing = None
        for track, sw_from, sw_to in plate_order.barred_segments:
            if track != sec.track:
                continue
            blo, bhi = _barred_interval(topology, track, sw_from, sw_to)
            missing = max(0, blo - need[0]) + max(0, need[1] - bhi)
            if best_missing is None or missing < best_missing:
                best_missing = missing
        if best_missing is None:
            best_missing = need[1] - need[0]
        if best_missing > 0:
            gaps.append(CoverageGap(sid, sec.track or "", need, best_missing))
    return CoverageResult(covered=not gaps, gaps=tuple(gaps))


class PlateSelectionError(Exception):
    kind = "NO_PLATE_ORDER"

    def __init__(self, detail: str):
        self.detail = detail
        super().__init__(detail)


def barred_track_feet(topology, plate_order: PlateOrder) -> int:
    total = 0
    for track, sw_from, sw_to in plate_order.barred_segments:
        lo, hi = _barred_interval(topology, track, sw_from, sw_to)
        total += hi - lo
    return total


def select_plate_order(library: dict[str, PlateOrder], topology, request,
                       margin_ft: int = 0) -> PlateOrder:
    """Pick the covering plate order barring the fewest track-feet; ties by id.

    Raises PlateSelectionError when nothing in the library covers the request;
    that signals the work must be re-scoped.
    """
    best: tuple[int, str] | None = None
    chosen: PlateOrder | None = None
    for pid in sorted(library):
        p = library[pid]
        if coverage_check(topology, p, request, margin_ft).covered:
            key = (barred_track_feet(topology, p), pid)
            if best is None or key < best:
                best, chosen = key, p
    if chosen is None:
        raise PlateSelectionError(
            f"no published plate order covers request {getattr(request, 'id', '?')}")
    return chosen


# -- POPS session state machine ----------------------------------------------

POPS_STATES = ("Idle", "Requested", "Acknowledged", "InEffect", "ReleaseRequested", "Released")
POPS_EVENTS = ("request", "acknowledge", "put_in_effect", "request_release", "release", "abort")

_TRANSITIONS = {
    ("Idle", "request"): "Requested",
    ("Requested", "acknowledge"): "Acknowledged",
    ("Acknowledged", "put_in_effect"): "InEffect",
    ("InEffect", "request_release"): "ReleaseRequested",
    ("ReleaseRequested", "release"): "Released",
}

# roles allowed to fire each event; abort is open to both ends of the wire
EVENT_ROLE = {
    "request": "director",
    "acknowledge": "dispatcher",
    "put_in_effect": "dispatcher",
    "request_release": "director",
    "release": "dispatcher",
    "abort": None,
}


class PopsError(Exception):
    kind = "ILLEGAL_TRANSITION"

    def __init__(self, detail: str):
        self.detail = detail
        super().__init__(detail)


@dataclass(frozen=True)
class POPSSession:
    plate_order: str
    director: str = ""
    dispatcher: str = ""
    state: str = "Idle"
    log: tuple[tuple[str, str, str], ...] = ()   # (event, new_state, timestamp)

    @property
    def locks_active(self) -> bool:
        return self.state == "InEffect"


def pops_transition(session: POPSSession, event: str, at: str = "") -> POPSSession:
    """Apply one protocol event; illegal events raise and leave the session as-is."""
    if event not in POPS_EVENTS:
        raise PopsError(f"unknown POPS event {event!r}")
    if event == "abort":
        new_state = "Idle"
    else:
        new_state = _TRANSITIONS.get((session.state, event))
        if new_state is None:
            raise PopsError(f"event {event} is illegal in state {session.state}")
    return replace(session, state=new_state, log=session.log + ((event, new_state, at),))


def locked_switches(topology, sessions) -> frozenset[str]:
    """Switches operation-locked right now: blocked sets of all InEffect sessions."""
    locked: set[str] = set()
    for s in sessions:
        if s.locks_active:
            p = topology.plate_order_library.get(s.plate_order)
            if p:
                locked |= set(p.blocked_switches)
    return frozenset(locked)


def barred_intervals(topology, sessions) -> dict[str, list[tuple[int, int]]]:
    """track -> stationing intervals barred to electric operation while InEffect."""
    out: dict[str, list[tuple[int, int]]] = {}
    for s in sessions:
        if not s.locks_active:
            continue
        p = topology.plate_order_library.get(s.plate_order)
        if not p:
            continue
        for track, sw_from, sw_to in p.barred_segments:
            out.setdefault(track, []).append(_barred_interval(topology, track, sw_from, sw_to))
    return out


def route_allowed(topology, sessions, track: str, from_ft: int, to_ft: int,
                  electric: bool = True) -> bool:
    """May a train route over [from_ft, to_ft] on this track? Electric moves
    must stay clear of every barred segment of every in-effect plate order."""
    if not electric:
        return True
    lo, hi = min(from_ft, to_ft), max(from_ft, to_ft)
    for blo, bhi in barred_intervals(topology, sessions).get(track, []):
        if lo < bhi and blo < hi:
            return False
    return True
