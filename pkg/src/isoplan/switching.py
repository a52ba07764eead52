"""Switching operations: interlocks, tagging, and isolation sequence planning.

The real control system leaves sequencing entirely to the human operator;
this engine adds machine interlocks so that an unsafe command is rejected
before it changes state. plan_isolation generates the full de-energize /
ground / restore sequence for a work zone and packages it into one operating
order per line group, mirroring the paper checklists used in the field.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .energization import (CLOSED, OPEN, RACKED_OUT, SwitchingState,
                           compute_energization)
from .topology import NetworkTopology, WORK_ZONE_LIMIT_FT

OP_KINDS = ("open", "close", "rack_out", "rack_in", "apply_ground",
            "remove_ground", "tag", "untag", "test_potential")
GROUND_OPS = ("apply_ground", "remove_ground", "test_potential")

INVERSE_OP = {
    "open": "close", "close": "open",
    "rack_out": "rack_in", "rack_in": "rack_out",
    "apply_ground": "remove_ground", "remove_ground": "apply_ground",
    "tag": "untag", "untag": "tag",
    "test_potential": "test_potential",
}


@dataclass(frozen=True)
class Tag:
    authority: str
    reason: str = ""
    timestamp: str = ""


@dataclass(frozen=True)
class SwitchOp:
    kind: str
    target: str
    actor: str                  # remote_scada | field_lineman
    order_ref: str = ""
    line_group: str = ""
    seq: int = -1


@dataclass(frozen=True)
class OpRecord:
    by: str                     # director authority
    actor: str
    at: str = ""
    result: str = "ok"
    note: str = ""


class InterlockError(Exception):
    def __init__(self, kind: str, participants: tuple[str, ...], detail: str = ""):
        self.kind = kind
        self.participants = participants
        self.detail = detail
        super().__init__(f"{kind}[{','.join(participants)}] {detail}")


@dataclass
class OperatingOrder:
    """The paper checklist for one line group: ops execute strictly in order."""
    id: str
    line_group: str
    ops: list[SwitchOp]
    director: str
    records: list[OpRecord] = field(default_factory=list)
    shared_with: str | None = None
    shared_devices: frozenset[str] = frozenset()

    @property
    def complete(self) -> bool:
        return len(self.records) == len(self.ops)

    @property
    def next_index(self) -> int:
        return len(self.records)


@dataclass(frozen=True)
class IsolationRequest:
    id: str
    target_sections: frozenset[str]
    keep_live: frozenset[str] | None = None
    requesting_job: str = ""
    allow_aerial_grounds: bool = False


def parse_requests(text: str) -> dict[str, IsolationRequest]:
    reqs: dict[str, IsolationRequest] = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] != "request" or len(parts) < 2:
            raise ValueError(f"line {ln}: expected 'request <id> key=value...'")
        rid = parts[1]
        attrs = dict(p.partition("=")[::2] for p in parts[2:])
        keep = attrs.get("keep_live")
        reqs[rid] = IsolationRequest(
            id=rid,
            target_sections=frozenset(s for s in attrs.get("sections", "").split(",") if s),
            keep_live=None if keep is None else frozenset(s for s in keep.split(",") if s),
            requesting_job=attrs.get("job", ""),
            allow_aerial_grounds=attrs.get("aerial", "0") == "1",
        )
    return reqs


def format_request(req: IsolationRequest) -> str:
    out = f"request {req.id} sections={','.join(sorted(req.target_sections))}"
    if req.keep_live is not None:
        out += f" keep_live={','.join(sorted(req.keep_live))}"
    if req.requesting_job:
        out += f" job={req.requesting_job}"
    if req.allow_aerial_grounds:
        out += " aerial=1"
    return out + "\n"


class PlanError(Exception):
    def __init__(self, kind: str, detail: str = "", split_suggestion=None):
        self.kind = kind
        self.detail = detail
        self.split_suggestion = split_suggestion or []
        super().__init__(f"{kind}: {detail}")


@dataclass
class IsolationPlan:
    request_id: str
    plate_order: str | None
    forms: list[OperatingOrder]
    restore_forms: list[OperatingOrder]
    sequence: list[SwitchOp]
    restore_sequence: list[SwitchOp]
    director: str
    keep_live_infeasible: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def predicted_counts(self) -> tuple[int, int]:
        return (len(self.sequence), len(self.restore_sequence))


# -- single-op validation and execution ---------------------------------------

def _ground_node(topology: NetworkTopology, gid: str) -> str:
    return topology.ground_points[gid].node


def validate_op(topology: NetworkTopology, state: SwitchingState, op: SwitchOp,
                authority: str = "", order: OperatingOrder | None = None) -> InterlockError | None:
    """Returns None when the op is safe to execute, else the interlock that
    rejects it. Pure: never mutates state."""
    if op.kind not in OP_KINDS:
        return InterlockError("BAD_TARGET", (op.target,), f"unknown op kind {op.kind}")

    if op.kind in GROUND_OPS:
        if op.target not in topology.ground_points:
            return InterlockError("UNKNOWN_TARGET", (op.target,), "no such ground point")
    else:
        if op.target not in topology.devices:
            return InterlockError("UNKNOWN_TARGET", (op.target,), "no such device")

    tag = state.tags.get(op.target)
    own = tag is not None and getattr(tag, "authority", None) == authority
    if tag is not None and not own and op.kind != "test_potential":
        return InterlockError("TAGGED", (op.target,),
                              f"held by {getattr(tag, 'authority', '?')}: {getattr(tag, 'reason', '')}")

    if op.kind in ("tag", "untag"):
        return None

    if op.kind in GROUND_OPS:
        node = _ground_node(topology, op.target)
        if op.kind == "apply_ground":
            result = compute_energization(topology, state)
            if node in result.energized:
                return InterlockError("HOT_GROUND", (op.target, node),
                                      "node is energized; grounding it would fault")
            if order is not None:
                tested = any(
                    o.kind == "test_potential" and o.target == op.target and r.note == "dead"
                    for o, r in zip(order.ops, order.records)
                )
                if not tested:
                    return InterlockError("HOT_GROUND", (op.target, node),
                                          "no completed potential test showing dead in this order")
        return None

    dev = topology.devices[op.target]
    pos = state.position(dev.id)

    if op.kind == "open":
        if pos == RACKED_OUT:
            return InterlockError("RACKED_OUT", (dev.id,), "device is racked out")
        if pos == OPEN:
            return None
        if not dev.load_break:
            result = compute_energization(topology, state)
            a, b = dev.terminals
            if a in result.energized and b in result.energized:
                return InterlockError("LOAD_OPEN", (dev.id, a, b),
                                      "cannot be opened under load")
        return None

    if op.kind == "close":
        if pos == RACKED_OUT:
            return InterlockError("RACKED_OUT", (dev.id,), "device is racked out")
        if pos == CLOSED:
            return None
        result = compute_energization(topology, state)
        a, b = dev.terminals
        if (a in result.energized or b in result.energized) and \
           (a in result.grounded or b in result.grounded):
            return InterlockError("LIVE_CLOSE", (dev.id, a, b),
                                  "would connect an energized circuit to a grounded one")
        za, zb = topology.nodes[a].phase_zone, topology.nodes[b].phase_zone
        if za != zb and a in result.energized and b in result.energized:
            return InterlockError("PHASE_CLOSE", (dev.id, a, b),
                                  f"would join live phase zones {za} and {zb}")
        return None

    if op.kind == "rack_out":
        if not dev.rackable:
            return InterlockError("NOT_RACKABLE", (dev.id,), "device cannot be racked")
        if pos == CLOSED:
            return InterlockError("RACK_CLOSED", (dev.id,), "open the breaker before racking out")
        return None

    if op.kind == "rack_in":
        if not dev.rackable:
            return InterlockError("NOT_RACKABLE", (dev.id,), "device cannot be racked")
        if pos != RACKED_OUT:
            return InterlockError("NOT_RACKED", (dev.id,), "device is not racked out")
        return None

    return None


def execute_op(topology: NetworkTopology, state: SwitchingState, op: SwitchOp,
               authority: str = "", at: str = "", order: OperatingOrder | None = None,
               enforce: bool = True) -> tuple[SwitchingState, OpRecord]:
    """Apply one op, returning the new state and its execution record.

    With enforce=True (normal mode) an interlock rejection raises before any
    state change. enforce=False replays historical-style operation with no
    machine checks; the record then notes what the interlocks would have said.
    """
    err = validate_op(topology, state, op, authority=authority, order=order)
    note = ""
    if err is not None:
        if enforce:
            raise err
        note = f"interlock bypassed: {err.kind}"

    before = compute_energization(topology, state)
    new = state.copy()
    kind = op.kind

    if kind == "open":
        if new.position(op.target) != RACKED_OUT:
            new.set_position(op.target, OPEN)
    elif kind == "close":
        if new.position(op.target) != RACKED_OUT or not enforce:
            new.set_position(op.target, CLOSED)
    elif kind == "rack_out":
        new.set_position(op.target, RACKED_OUT)
    elif kind == "rack_in":
        new.set_position(op.target, OPEN)
    elif kind == "apply_ground":
        new.applied_grounds.add(op.target)
        new.tags[op.target] = Tag(authority=authority, reason="ground applied", timestamp=at)
    elif kind == "remove_ground":
        new.applied_grounds.discard(op.target)
        new.tags.pop(op.target, None)
    elif kind == "tag":
        new.tags[op.target] = Tag(authority=authority, reason="switching order", timestamp=at)
    elif kind == "untag":
        new.tags.pop(op.target, None)
    elif kind == "test_potential":
        node = _ground_node(topology, op.target)
        note = "dead" if node not in before.energized else "live"

    after = compute_energization(topology, new)
    new_faults = {v.participants for v in after.violations_of("GROUND_FAULT")} - \
                 {v.participants for v in before.violations_of("GROUND_FAULT")}
    if new_faults:
        if enforce:
            raise InterlockError("GROUND_FAULT",
                                 tuple(sorted(p for ps in new_faults for p in ps)),
                                 "operation would create a ground fault")
        note = (note + "; " if note else "") + "GROUND_FAULT created"

    record = OpRecord(by=authority, actor=op.actor, at=at,
                      result="ok" if err is None else "forced", note=note)
    return new, record


def run_sequence(topology: NetworkTopology, state: SwitchingState, ops,
                 authority: str = "PD1", enforce: bool = True):
    """Execute ops in order against per-order record context. Returns the final
    state, the records, and (in no-enforce mode) the interlocks bypassed."""
    orders: dict[str, OperatingOrder] = {}
    records: list[OpRecord] = []
    caught: list[tuple[int, InterlockError]] = []
    cur = state
    for i, op in enumerate(ops):
        order = None
        if op.order_ref:
            order = orders.setdefault(
                op.order_ref,
                OperatingOrder(id=op.order_ref, line_group=op.line_group, ops=[], director=authority))
            order.ops.append(op)
        err = validate_op(topology, cur, op, authority=authority, order=order)
        if err is not None and not enforce:
            caught.append((i, err))
        cur, rec = execute_op(topology, cur, op, authority=authority, order=order, enforce=enforce)
        records.append(rec)
        if order is not None:
            order.records.append(rec)
    return cur, records, caught


# -- double-header -----------------------------------------------------------

def shared_device_set(order: OperatingOrder, other_orders) -> frozenset[str]:
    mine = {op.target for op in order.ops if op.kind not in GROUND_OPS}
    theirs: set[str] = set()
    for other in other_orders:
        theirs |= {op.target for op in other.ops if op.kind not in GROUND_OPS}
    return frozenset(mine & theirs)


def request_shared_control(order: OperatingOrder, second_director: str,
                           all_orders) -> OperatingOrder:
    """Double-header: any device this order shares with the second director's
    orders now needs both directors' confirmations before each operation."""
    others = [o for o in all_orders
              if o.id != order.id and second_director in (o.director, o.shared_with)]
    order.shared_with = second_director
    order.shared_devices = shared_device_set(order, others)
    return order


# -- isolation planning --------------------------------------------------------

def _op_group(topology: NetworkTopology, kind: str, target: str) -> str:
    if kind in GROUND_OPS:
        return topology.line_group_of_ground(target)
    return topology.line_group_of_device(target)


def _op_actor(topology: NetworkTopology, kind: str, target: str) -> str:
    if kind in GROUND_OPS:
        return "field_lineman"
    dev = topology.devices[target]
    if kind in ("tag", "untag"):
        return "remote_scada" if dev.control == "remote" else "field_lineman"
    if kind in ("rack_out", "rack_in"):
        return "field_lineman"
    return "remote_scada" if dev.control == "remote" else "field_lineman"


def _nonloadbreak_closure(topology: NetworkTopology, state: SwitchingState, seeds) -> set[str]:
    """Closure over sections plus closed devices that cannot interrupt load.
    Everything in here must go dead before boundary disconnects can move."""
    adj = topology.section_adjacency()
    dev_at = topology.devices_at()
    seen = set(seeds)
    stack = list(seeds)
    while stack:
        n = stack.pop()
        for m, _ in adj[n]:
            if m not in seen:
                seen.add(m)
                stack.append(m)
        for did in dev_at[n]:
            dev = topology.devices[did]
            if dev.load_break or state.position(did) != CLOSED:
                continue
            for t in dev.terminals:
                if t not in seen:
                    seen.add(t)
                    stack.append(t)
    return seen


def suggest_split(topology: NetworkTopology, trolley_ids: list[str],
                  limit_ft: int = WORK_ZONE_LIMIT_FT) -> list[tuple[int, int]]:
    """Greedy stationing split of an over-long trolley request into parts that
    each fit the work zone limit."""
    spans = sorted(topology.sections[sid].span for sid in trolley_ids)
    parts: list[tuple[int, int]] = []
    cur_lo, cur_hi = spans[0]
    for lo, hi in spans[1:]:
        if max(cur_hi, hi) - cur_lo <= limit_ft:
            cur_hi = max(cur_hi, hi)
        else:
            parts.append((cur_lo, cur_hi))
            cur_lo, cur_hi = lo, hi
    parts.append((cur_lo, cur_hi))
    return parts


def plan_isolation(topology: NetworkTopology, state: SwitchingState,
                   request: IsolationRequest, director: str = "PD1",
                   plate_margin_ft: int = 0, require_plate: bool = True) -> IsolationPlan:
    """Produce the deterministic eight-step isolation and its mirror restore.

    Raises PlanError (SPAN_EXCEEDED, NO_BOX_GROUND, NO_PLATE_ORDER, UNISOLABLE,
    BAD_TARGET_SECTION, TARGET_TAGGED) when no safe plan exists as requested.
    """
    from .plate_orders import PlateSelectionError, select_plate_order

    # -- request validation
    if not request.target_sections:
        raise PlanError("BAD_TARGET_SECTION", "empty target set")
    trolley_targets: list[str] = []
    for sid in sorted(request.target_sections):
        sec = topology.sections.get(sid)
        if sec is None:
            raise PlanError("BAD_TARGET_SECTION", f"unknown section {sid}")
        if sec.kind == "signal_feeder":
            raise PlanError("SIGNAL_FEEDER",
                            f"{sid} is a signal feeder; signal power stays up during isolations")
        if sec.kind not in ("trolley", "feeder"):
            raise PlanError("BAD_TARGET_SECTION", f"{sid} is a {sec.kind} section")
        if sec.kind == "trolley":
            trolley_targets.append(sid)

    if trolley_targets:
        lo = min(topology.sections[s].span[0] for s in trolley_targets)
        hi = max(topology.sections[s].span[1] for s in trolley_targets)
        if hi - lo > WORK_ZONE_LIMIT_FT:
            parts = suggest_split(topology, trolley_targets)
            raise PlanError(
                "SPAN_EXCEEDED",
                f"trolley work zone spans {hi - lo} ft (> {WORK_ZONE_LIMIT_FT} ft); "
                f"split into {len(parts)} requests",
                split_suggestion=parts)

    target_nodes = topology.section_closure(request.target_sections)
    for sec in topology.sections.values():
        if sec.kind == "signal_feeder" and set(sec.endpoints) & target_nodes:
            raise PlanError("SIGNAL_FEEDER",
                            f"isolating would kill signal feeder {sec.id}")

    blast = _nonloadbreak_closure(topology, state, target_nodes)
    for sid in state.sources_in_service(topology):
        if topology.sources[sid].node in blast:
            raise PlanError("UNISOLABLE",
                            f"source {sid} feeds the work zone with no load-break device between")

    keep_live = set(request.keep_live if request.keep_live is not None
                    else topology.track_layout.keep_live_assets)
    keep_live_infeasible: list[str] = []
    for sid in sorted(keep_live):
        if sid in topology.sections and set(topology.sections[sid].endpoints) <= target_nodes:
            keep_live_infeasible.append(sid)
    keep_live -= set(keep_live_infeasible)

    # -- plate order
    plate_id: str | None = None
    if topology.plate_order_library:
        try:
            plate_id = select_plate_order(topology.plate_order_library, topology,
                                          request, plate_margin_ft).id
        except PlateSelectionError as e:
            raise PlanError("NO_PLATE_ORDER", e.detail) from e
    elif require_plate and trolley_targets:
        plate_id = None   # no library loaded: plan is simulation-only

    # -- box ground selection, per line group of the target
    groups = sorted({topology.line_group_of_section(s) for s in request.target_sections})
    gp_by_node: dict[str, list[str]] = {}
    for gid, gp in topology.ground_points.items():
        gp_by_node.setdefault(gp.node, []).append(gid)
    kind_rank = {"box": 0, "local": 1, "aerial": 2}

    def pick_ground(nodes: list[str]) -> str | None:
        cands = []
        for n in nodes:
            for gid in gp_by_node.get(n, []):
                gp = topology.ground_points[gid]
                if gp.kind == "aerial" and not request.allow_aerial_grounds:
                    continue
                cands.append((kind_rank[gp.kind], gid))
        return min(cands)[1] if cands else None

    box_points: list[str] = []
    for group in groups:
        group_nodes = sorted(
            n for n in target_nodes
            if any(topology.line_group_of_section(sid) == group
                   for _, sid in topology.section_adjacency()[n]))
        if not group_nodes:
            continue
        locs = {n: topology.nodes[n].location_ft for n in group_nodes}
        lo_ft, hi_ft = min(locs.values()), max(locs.values())
        lo_pick = pick_ground([n for n in group_nodes if locs[n] == lo_ft])
        hi_pick = pick_ground([n for n in group_nodes if locs[n] == hi_ft and
                               (lo_pick is None or n != topology.ground_points[lo_pick].node)])
        if lo_pick is None or hi_pick is None:
            raise PlanError("NO_BOX_GROUND",
                            f"line group {group}: no ground point at both work zone boundaries")
        box_points += [lo_pick, hi_pick]

    # -- simulate while emitting
    sim = state.copy()
    ops: list[SwitchOp] = []
    initially_tagged = set(state.tags)

    def emit(kind: str, target: str) -> None:
        nonlocal sim
        if target in initially_tagged:
            raise PlanError("TARGET_TAGGED",
                            f"{target} already carries a tag; clear it before planning")
        op = SwitchOp(kind=kind, target=target,
                      actor=_op_actor(topology, kind, target),
                      line_group=_op_group(topology, kind, target))
        err = validate_op(topology, sim, op, authority=director)
        if err is not None:
            if err.kind == "TAGGED":
                raise PlanError("TARGET_TAGGED",
                                f"{target} already carries a tag: {err.detail}")
            raise PlanError("INTERLOCKED", f"planner hit {err.kind} on {kind} {target}")
        sim, _ = execute_op(topology, sim, op, authority=director)
        ops.append(op)

    def op_sort_key(did: str):
        return (topology.line_group_of_device(did), did)

    # step 1: trip every closed load-break device facing the blast area
    step1 = sorted((d.id for d in topology.devices.values()
                    if d.load_break and sim.position(d.id) == CLOSED
                    and (d.terminals[0] in blast or d.terminals[1] in blast)),
                   key=op_sort_key)
    for did in step1:
        emit("open", did)

    # step 2: boundary disconnects of the work zone, now dead on both sides
    boundary = sorted((d.id for d in topology.devices.values()
                       if (d.terminals[0] in target_nodes) != (d.terminals[1] in target_nodes)),
                      key=op_sort_key)
    for did in boundary:
        if sim.position(did) == CLOSED:
            emit("open", did)
            emit("tag", did)
        elif did not in step1 and sim.position(did) == OPEN and did not in sim.tags:
            emit("tag", did)

    # sources inside the zone (handled at step 4, but their breakers are off
    # the step-7 re-close list, so work the set out now). A substation is
    # inside when it feeds the zone directly AND sits within its stationing.
    zone_lo = min(topology.nodes[n].location_ft for n in target_nodes)
    zone_hi = max(topology.nodes[n].location_ft for n in target_nodes)
    in_zone_sources: list[str] = []
    step4_handled: set[str] = set()
    for sid in sorted(topology.sources):
        src = topology.sources[sid]
        if not zone_lo < topology.nodes[src.node].location_ft < zone_hi:
            continue
        feed_breakers = [did for did in topology.devices_at().get(src.node, [])
                         if topology.devices[did].kind == "breaker"
                         and (set(topology.devices[did].terminals) - {src.node}) & target_nodes]
        if feed_breakers:
            in_zone_sources.append(sid)
            step4_handled.update(feed_breakers)

    # helper predicates over a scratch state
    def zone_dead(chk: SwitchingState) -> bool:
        res = compute_energization(topology, chk)
        return not (target_nodes & res.energized)

    def hazard_free(chk: SwitchingState) -> bool:
        res = compute_energization(topology, chk)
        return not (res.violations_of("GROUND_FAULT") or res.violations_of("PHASE_TIE")
                    or res.violations_of("BACKFEED_HAZARD"))

    def safe_closes(base: SwitchingState, candidates: list[str]):
        chk = base.copy()
        accepted = []
        for did in candidates:
            trial = chk.copy()
            trial.set_position(did, CLOSED)
            if zone_dead(trial) and hazard_free(trial):
                chk = trial
                accepted.append(did)
        return chk, accepted

    # step 3: backfeed collateral areas the big trip killed, via open ties.
    # Lookahead includes the step-7 re-closes so we only feed what stays dead.
    reclose_candidates = [d for d in step1 if d not in step4_handled]
    tie_ops: list[str] = []

    def lookahead_state() -> SwitchingState:
        look, _ = safe_closes(sim, reclose_candidates)
        return look

    def dead_outside(chk: SwitchingState) -> list[str]:
        res = compute_energization(topology, chk)
        return sorted(n for n in topology.nodes
                      if n not in target_nodes and n not in res.energized)

    open_ties = sorted((d.id for d in topology.devices.values()
                        if d.kind == "tie" and d.load_break and sim.position(d.id) == OPEN),
                       key=op_sort_key)
    for _ in range(len(open_ties) + 1):
        look = lookahead_state()
        needy = dead_outside(look)
        if not needy:
            break
        progressed = False
        for tid in open_ties:
            if tid in tie_ops:
                continue
            op = SwitchOp("close", tid, _op_actor(topology, "close", tid))
            if validate_op(topology, sim, op, authority=director) is not None:
                continue
            trial_now = sim.copy()
            trial_now.set_position(tid, CLOSED)
            if not (zone_dead(trial_now) and hazard_free(trial_now)):
                continue
            trial_look = look.copy()
            trial_look.set_position(tid, CLOSED)
            if not (zone_dead(trial_look) and hazard_free(trial_look)):
                continue
            if len(dead_outside(trial_look)) < len(needy):
                emit("close", tid)
                emit("tag", tid)
                tie_ops.append(tid)
                progressed = True
                break
        if not progressed:
            break

    look = lookahead_state()
    still_dead = set(dead_outside(look))
    for sid in sorted(keep_live):
        if sid in topology.sections and set(topology.sections[sid].endpoints) & still_dead:
            keep_live_infeasible.append(sid)
    permitted_dead = set()
    for sid in keep_live_infeasible:
        if sid in topology.sections:
            permitted_dead |= topology.section_closure([sid])
    unrescued = still_dead - permitted_dead
    if unrescued:
        raise PlanError("UNISOLABLE",
                        "cannot keep these nodes energized outside the work zone: "
                        + ",".join(sorted(unrescued)))

    # step 4: hold open every breaker of a substation inside the zone; rack
    # out the ones under the catenary the crews will work on
    def faces_trolley(did: str, src_node: str) -> bool:
        for t in topology.devices[did].terminals:
            if t == src_node:
                continue
            if any(topology.sections[sid].kind == "trolley"
                   for _, sid in topology.section_adjacency()[t]):
                return True
        return False

    step4_grounds: list[str] = []
    for sid in in_zone_sources:
        src = topology.sources[sid]
        feed_breakers = sorted(
            (did for did in topology.devices_at().get(src.node, [])
             if did in step4_handled), key=op_sort_key)
        for did in feed_breakers:
            if topology.devices[did].rackable and sim.position(did) == OPEN \
                    and faces_trolley(did, src.node):
                emit("rack_out", did)
            emit("tag", did)
        tap_nodes = sorted(
            n for s in topology.sections.values() if s.kind == "supply_tap"
            for n in s.endpoints if n in target_nodes)
        for n in tap_nodes:
            for gid in sorted(gp_by_node.get(n, [])):
                if gid not in step4_grounds and gid not in box_points and \
                        gid not in sim.applied_grounds:
                    step4_grounds.append(gid)
                    emit("test_potential", gid)
                    emit("apply_ground", gid)

    # step 5: working grounds inside the zone (aerial only when the request
    # allows pole climbs; climbing may need a momentary cross-track widening)
    local_grounds = sorted(
        (gid for n in sorted(target_nodes) for gid in gp_by_node.get(n, [])
         if topology.ground_points[gid].kind != "box"
         and gid not in box_points and gid not in step4_grounds
         and gid not in sim.applied_grounds),
        key=lambda g: (_op_group(topology, "apply_ground", g), g))
    for gid in local_grounds:
        gp = topology.ground_points[gid]
        if gp.kind == "aerial" and not request.allow_aerial_grounds:
            continue
        widen: list[str] = []
        if gp.requires_pole_climb:
            here = topology.nodes[gp.node].location_ft
            my_tracks = {topology.sections[sid].track
                         for _, sid in topology.section_adjacency()[gp.node]
                         if topology.sections[sid].kind == "trolley"}
            res = compute_energization(topology, sim)
            near = [s for s in topology.sections.values()
                    if s.kind == "trolley" and s.track not in my_tracks
                    and s.span[0] <= here <= s.span[1]
                    and set(s.endpoints) & res.energized]
            if near:
                w_nodes = topology.section_closure([s.id for s in near])
                w_blast = _nonloadbreak_closure(topology, sim, w_nodes)
                widen = sorted((d.id for d in topology.devices.values()
                                if d.load_break and sim.position(d.id) == CLOSED
                                and set(d.terminals) & w_blast),
                               key=op_sort_key)
        for did in widen:
            emit("open", did)
        emit("test_potential", gid)
        emit("apply_ground", gid)
        for did in reversed(widen):
            emit("close", did)

    # step 7: restore the big trip where the work zone stays dead and clean
    for did in reclose_candidates:
        trial = sim.copy()
        trial.set_position(did, CLOSED)
        op = SwitchOp("close", did, _op_actor(topology, "close", did))
        if validate_op(topology, sim, op, authority=director) is None \
                and zone_dead(trial) and hazard_free(trial):
            emit("close", did)
        else:
            emit("tag", did)

    # step 8: test and box ground both ends of every touched line group
    for gid in box_points:
        if gid in sim.applied_grounds:
            continue
        emit("test_potential", gid)
        emit("apply_ground", gid)

    # -- verify the outage configuration
    final = compute_energization(topology, sim)
    if final.violations_of("GROUND_FAULT") or final.violations_of("PHASE_TIE") \
            or final.violations_of("BACKFEED_HAZARD"):
        raise PlanError("INTERLOCKED", "planned end state carries hazards")
    want_dead = set(target_nodes) | permitted_dead
    got_dead = set(topology.nodes) - set(final.energized)
    if got_dead != want_dead:
        raise PlanError("UNISOLABLE",
                        f"exact isolation unreachable: dead={sorted(got_dead)} "
                        f"wanted={sorted(want_dead)}")

    # -- restore: exact reverse order, inverse op kinds
    restore_ops = [replace(op, kind=INVERSE_OP[op.kind],
                           actor=_op_actor(topology, INVERSE_OP[op.kind], op.target))
                   for op in reversed(ops)]

    def build_forms(seq: list[SwitchOp], phase: str) -> tuple[list[OperatingOrder], list[SwitchOp]]:
        grouped: dict[str, list[SwitchOp]] = {}
        renumbered: list[SwitchOp] = []
        for i, op in enumerate(seq):
            oid = f"{request.id}-{op.line_group}" + ("-restore" if phase == "restore" else "")
            op = replace(op, seq=i, order_ref=oid)
            renumbered.append(op)
            grouped.setdefault(op.line_group, []).append(op)
        forms = [OperatingOrder(id=f"{request.id}-{g}" + ("-restore" if phase == "restore" else ""),
                                line_group=g, ops=grouped[g], director=director)
                 for g in sorted(grouped)]
        return forms, renumbered

    forms, sequence = build_forms(ops, "isolation")
    restore_forms, restore_sequence = build_forms(restore_ops, "restore")

    plan = IsolationPlan(
        request_id=request.id,
        plate_order=plate_id,
        forms=forms, restore_forms=restore_forms,
        sequence=sequence, restore_sequence=restore_sequence,
        director=director,
        keep_live_infeasible=sorted(set(keep_live_infeasible)),
    )
    if plan.keep_live_infeasible:
        plan.notes.append("keep-live dropped: " + ",".join(plan.keep_live_infeasible))
    return plan


# -- operating order export ----------------------------------------------------

def format_order(order: OperatingOrder, date: str = "") -> str:
    """Render one operating order in the paper form layout."""
    out = [f"OPERATING ORDER {order.id}",
           f"Director: {order.director}" + (f" / shared with {order.shared_with}" if order.shared_with else ""),
           f"Line group: {order.line_group}",
           f"Date: {date}", ""]
    for i, op in enumerate(order.ops):
        rec = ""
        if i < len(order.records):
            r = order.records[i]
            rec = f"  [record: {r.by}/{r.at or '-'}/{r.result}" + (f" {r.note}" if r.note else "") + "]"
        out.append(f"{i + 1:3d}  {op.kind:<14} {op.target:<18} {op.actor}{rec}")
    scada = [op for op in order.ops if op.actor == "remote_scada" or op.kind in ("tag", "untag")]
    switching = [op for op in order.ops
                 if op.kind in ("open", "close", "rack_out", "rack_in") and op.actor == "field_lineman"]
    grounds = [op for op in order.ops if op.kind in GROUND_OPS]
    out.append("")
    out.append("SCADA Operations & Tags: " + (", ".join(f"{o.kind} {o.target}" for o in scada) or "none"))
    out.append("Switching Orders: " + (", ".join(f"{o.kind} {o.target}" for o in switching) or "none"))
    out.append("Grounds: " + (", ".join(f"{o.kind} {o.target}" for o in grounds) or "none"))
    out.append("Plate Orders: see plan header")
    return "\n".join(out) + "\n"


def format_plan(plan: IsolationPlan, net_path: str = "", state_path: str = "") -> str:
    """Machine-readable plan document; replay and simulate read this back."""
    out = [f"plan {plan.request_id} plate={plan.plate_order or '-'} "
           f"director={plan.director} isolation_ops={plan.predicted_counts[0]} "
           f"restore_ops={plan.predicted_counts[1]}"]
    if net_path:
        out.append(f"inputs net={net_path} state={state_path}")
    for note in plan.notes:
        out.append(f"note {note}")
    for phase, forms in (("isolation", plan.forms), ("restore", plan.restore_forms)):
        for form in forms:
            out.append(f"form {form.id} group={form.line_group} phase={phase}")
    for phase, seq in (("isolation", plan.sequence), ("restore", plan.restore_sequence)):
        for op in seq:
            out.append(f"op {phase} {op.seq} {op.kind} {op.target} {op.actor} "
                       f"group={op.line_group} order={op.order_ref}")
    return "\n".join(out) + "\n"


def parse_plan(text: str) -> tuple[IsolationPlan, dict[str, str]]:
    """Read a plan document back; returns the plan and its recorded inputs."""
    plan: IsolationPlan | None = None
    forms: dict[str, OperatingOrder] = {}
    inputs: dict[str, str] = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        rec = parts[0]
        if rec == "plan":
            attrs = dict(p.partition("=")[::2] for p in parts[2:])
            plate = attrs.get("plate", "-")
            plan = IsolationPlan(request_id=parts[1],
                                 plate_order=None if plate == "-" else plate,
                                 forms=[], restore_forms=[], sequence=[],
                                 restore_sequence=[], director=attrs.get("director", "PD1"))
        elif rec == "inputs":
            inputs = dict(p.partition("=")[::2] for p in parts[1:])
        elif rec == "note" and plan is not None:
            plan.notes.append(line[5:])
        elif rec == "form" and plan is not None:
            attrs = dict(p.partition("=")[::2] for p in parts[2:])
            form = OperatingOrder(id=parts[1], line_group=attrs.get("group", ""),
                                  ops=[], director=plan.director)
            forms[form.id] = form
            (plan.restore_forms if attrs.get("phase") == "restore" else plan.forms).append(form)
        elif rec == "op" and plan is not None:
            phase, seq, kind, target, actor = parts[1:6]
            attrs = dict(p.partition("=")[::2] for p in parts[6:])
            op = SwitchOp(kind=kind, target=target, actor=actor,
                          order_ref=attrs.get("order", ""),
                          line_group=attrs.get("group", ""), seq=int(seq))
            (plan.restore_sequence if phase == "restore" else plan.sequence).append(op)
            if op.order_ref in forms:
                forms[op.order_ref].ops.append(op)
        else:
            raise ValueError(f"line {ln}: unrecognized plan record '{rec}'")
    if plan is None:
        raise ValueError("no plan record found")
    return plan, inputs
