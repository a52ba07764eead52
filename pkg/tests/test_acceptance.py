"""Acceptance suite: one test per shipping criterion, each printing a
pass/fail line. Run with `pytest tests/test_acceptance.py -v -s`."""

import random
import time

import pytest

from isoplan.energization import compute_energization, normal_state
from isoplan.plate_orders import (POPS_EVENTS, POPS_STATES, POPSSession,
                                  PlateSelectionError, PopsError, pops_transition,
                                  select_plate_order)
from isoplan.scheduler import (CRAFTS, Disruption, Job, JobVariant, ResourceCalendar,
                               advance_pipeline, apply_disruption, build_weekly_plan)
from isoplan.switching import (IsolationRequest, PlanError, execute_op,
                               plan_isolation, run_sequence)
from isoplan.timeline import DurationModel, format_clock, parse_clock, parse_window, simulate_night
from isoplan.topology import load_topology, wire_run_check
from conftest import FIXTURES
from netgen import random_state, random_topology, solvable_isolation_case
from oracles import (exhaustive_exact_isolation, full_scan_select, naive_partition,
                     pops_reference)


def report(name: str, ok: bool, detail: str = ""):
    print(f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'}"
          + (f" ({detail})" if detail else ""))
    assert ok, f"{name} failed: {detail}"


def test_figure5_timeline_replication(fourtrack, fourtrack_state, bridle_request):
    plan = plan_isolation(fourtrack, fourtrack_state, bridle_request)
    t0 = time.perf_counter()
    window = parse_window((FIXTURES / "fourtrack/fig5.window").read_text())
    rep = simulate_night(plan, window, DurationModel(), "expected", fourtrack)
    elapsed = time.perf_counter() - t0
    briefing_end = next(e for n, _, e in rep.phases if n == "briefing")
    ok = (format_clock(briefing_end) == "02:06"
          and rep.on_track_s == 159 * 60
          and rep.nominal_minutes == 420
          and format_clock(rep.opened_to_traffic_s) == "05:30"
          and elapsed < 1.0)
    report("figure5-replication", ok,
           f"briefing {format_clock(briefing_end)}, on-track {rep.on_track_s // 60} min, "
           f"nominal {rep.nominal_minutes} min, {elapsed * 1000:.0f} ms")


def test_five_craft_gating():
    def cal():
        c = ResourceCalendar()
        for craft, n in zip(CRAFTS, (6, 4, 2, 3, 2)):
            c.availability[("fri", craft)] = n
        return c

    jobs = [
        Job("J1", 1, frozenset({"fri"}),
            (JobVariant("A", {"lineman": 2, "groundman": 2, "power_director": 1,
                              "flagman": 1, "dispatcher": 1}),)),
        Job("J2", 2, frozenset({"fri"}),
            (JobVariant("A", {"lineman": 3, "groundman": 1, "power_director": 1,
                              "flagman": 1, "dispatcher": 1}),)),
        Job("J3", 3, frozenset({"fri"}),
            (JobVariant("A", {"lineman": 1, "groundman": 1, "flagman": 1}),)),
    ]
    outcomes = set()
    for _ in range(100):
        plan = build_weekly_plan(jobs, cal())
        for _ in range(3):
            plan = advance_pipeline(plan)
        assert all(not a.cancelled for a in plan.assignments.values())
        replanned, diff = apply_disruption(
            plan, Disruption("sick_call", night="fri", craft="lineman", count=1))
        outcomes.add((diff.changes,
                      tuple(sorted((k, a.variant, a.reason)
                                   for k, a in replanned.assignments.items()))))
    (changes, final), = outcomes    # identical across all 100 runs
    ok = (len(changes) == 1
          and changes[0][:2] == ("fri", "J3")
          and changes[0][3] == "CANCELLED(insufficient_lineman)"
          and ("fri", "J1") not in [c[:2] for c in changes]
          and dict((k, v) for k, v, _ in final)[("fri", "J1")] == "A"
          and dict((k, v) for k, v, _ in final)[("fri", "J2")] == "A")
    report("five-craft-gating", ok,
           "lowest-priority lineman job cancelled, others untouched, 100/100 identical")


def test_four_track_structural(fourtrack, fourtrack_state, bridle_request):
    plan = plan_isolation(fourtrack, fourtrack_state, bridle_request)
    groups = sorted(f.line_group for f in plan.forms)
    iso_n, rst_n = plan.predicted_counts
    cur = fourtrack_state
    prefix_safe = True
    for op in plan.sequence:
        cur, _ = execute_op(fourtrack, cur, op, authority=plan.director)
        res = compute_energization(fourtrack, cur)
        if res.violations_of("GROUND_FAULT") or res.violations_of("PHASE_TIE"):
            prefix_safe = False
            break
    ok = (len(plan.forms) == 6
          and groups == ["fe", "fw", "t1", "t2", "t3", "t4"]
          and iso_n == rst_n
          and 60 <= iso_n <= 100
          and prefix_safe)
    report("four-track-structural", ok,
           f"6 forms ({', '.join(groups)}), {iso_n} ops each way, prefix-safe")


def test_energization_oracle_equivalence():
    rng = random.Random(2024)
    t0 = time.perf_counter()
    mismatches = 0
    for _ in range(1000):
        topo = random_topology(rng, max_nodes=20)
        state = random_state(rng, topo)
        res = compute_energization(topo, state)
        e, g, d = naive_partition(topo, state)
        if (res.energized, res.grounded, res.dead) != (frozenset(e), frozenset(g), frozenset(d)):
            mismatches += 1
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 10.0
    report("energization-oracle", ok, f"1000 topologies, {mismatches} mismatches, {elapsed:.2f}s")


def test_isolation_exhaustive_oracle():
    rng = random.Random(4096)
    checked = mismatches = 0
    while checked < 120:
        topo = solvable_isolation_case(rng)
        if len(topo.devices) > 6:
            continue
        state = normal_state()
        for sid in sorted(s.id for s in topo.sections.values() if s.kind == "trolley"):
            request = IsolationRequest(id="r", target_sections=frozenset({sid}),
                                       keep_live=frozenset())
            try:
                plan = plan_isolation(topo, state, request, require_plate=False)
            except PlanError:
                plan = None
            budget = len(plan.sequence) if plan else 2 * len(topo.devices) + 2
            found = exhaustive_exact_isolation(topo, state, {sid}, budget)
            checked += 1
            if (plan is None) != (found is None):
                mismatches += 1
                continue
            if plan is not None:
                final, _, _ = run_sequence(topo, state, plan.sequence,
                                           authority=plan.director)
                e, _, _ = naive_partition(topo, final)
                if set(topo.nodes) - e != set(topo.section_closure({sid})):
                    mismatches += 1
    report("isolation-exhaustive-oracle", mismatches == 0,
           f"{checked} single-section requests over <=6-device nets, {mismatches} mismatches")


def test_constraint_enforcement(fourtrack, fourtrack_state):
    secs = [f"t3b{b}s{k}" for b in (5, 6) for k in range(4)]
    request = IsolationRequest(id="long", target_sections=frozenset(secs))
    try:
        plan_isolation(fourtrack, fourtrack_state, request)
        span_ok = False
        parts = []
    except PlanError as e:
        parts = e.split_suggestion
        spans = sorted(fourtrack.sections[s].span for s in secs)
        span_ok = (e.kind == "SPAN_EXCEEDED"
                   and parts
                   and all(hi - lo <= 9000 for lo, hi in parts)
                   and all(any(plo <= lo and hi <= phi for plo, phi in parts)
                           for lo, hi in spans))
    doc = ["zone za", "track t1", "node a za 0"]
    ft = 0
    prev = "a"
    for i in range(3):
        nxt = f"n{i}"
        doc.append(f"node {nxt} za {ft + 4000}")
        doc.append(f"section w{i} trolley track=t1 {prev} {nxt} {ft} {ft + 4000}")
        prev = nxt
        ft += 4000
    long_run = load_topology("\n".join(doc) + "\n")
    runs = wire_run_check(long_run)
    wire_ok = (len(runs) == 1 and runs[0].length_ft == 12000
               and wire_run_check(fourtrack) == [])
    report("constraint-enforcement", span_ok and wire_ok,
           f"SPAN_EXCEEDED with {len(parts)} parts <= 9000 ft; "
           f"12000 ft wire run reported; fixture clean")


def test_plate_order_protocol(fourtrack):
    rng = random.Random(31337)
    session = POPSSession(plate_order="p4_0_1")
    fuzz_ok = True
    for _ in range(10_000):
        ev = rng.choice(POPS_EVENTS)
        want = pops_reference(session.state, ev)
        try:
            session = pops_transition(session, ev)
            if want is None or session.state != want:
                fuzz_ok = False
                break
        except PopsError:
            if want is not None:
                fuzz_ok = False
                break
        if session.state not in POPS_STATES or \
                session.locks_active != (session.state == "InEffect"):
            fuzz_ok = False
            break

    trolleys = sorted(s.id for s in fourtrack.sections.values() if s.kind == "trolley")
    select_ok = True
    assert len(fourtrack.plate_order_library) == 200
    for i in range(50):
        picks = rng.sample(trolleys, rng.randint(1, 3))
        request = IsolationRequest(id=f"r{i}", target_sections=frozenset(picks))
        want = full_scan_select(fourtrack, fourtrack.plate_order_library, request)
        try:
            got = select_plate_order(fourtrack.plate_order_library, fourtrack, request).id
        except PlateSelectionError:
            got = None
        if got != want:
            select_ok = False
            break
    report("plate-order-protocol", fuzz_ok and select_ok,
           "10000-event fuzz clean; 50/50 selections match the full scan over 200 orders")


def test_round_trip_restoration(fourtrack, fourtrack_state, bridle_request,
                                minimal, minimal_state, minimal_request, minimal2):
    # every bundled fixture
    fixtures_ok = True
    for topo, state, request in (
        (fourtrack, fourtrack_state, bridle_request),
        (minimal, minimal_state, minimal_request),
        (minimal2, normal_state(),
         IsolationRequest(id="m2a", target_sections=frozenset({"sa"}))),
        (minimal2, normal_state(),
         IsolationRequest(id="m2c", target_sections=frozenset({"sc"}))),
    ):
        plan = plan_isolation(topo, state, request)
        mid, _, _ = run_sequence(topo, state, plan.sequence, authority=plan.director)
        back, _, _ = run_sequence(topo, mid, plan.restore_sequence, authority=plan.director)
        if back.snapshot() != state.snapshot():
            fixtures_ok = False

    rng = random.Random(500500)
    done = 0
    random_ok = True
    while done < 500:
        topo = solvable_isolation_case(rng)
        state = normal_state()
        trolleys = sorted(s.id for s in topo.sections.values() if s.kind == "trolley")
        request = IsolationRequest(id="r", target_sections=frozenset({rng.choice(trolleys)}),
                                   keep_live=frozenset())
        try:
            plan = plan_isolation(topo, state, request, require_plate=False)
        except PlanError:
            continue
        mid, _, _ = run_sequence(topo, state, plan.sequence, authority=plan.director)
        back, _, _ = run_sequence(topo, mid, plan.restore_sequence, authority=plan.director)
        if back.snapshot() != state.snapshot():
            random_ok = False
            break
        done += 1
    report("round-trip-restoration", fixtures_ok and random_ok,
           f"all fixtures and {done} random cases restore bit-exactly")


def test_scheduler_exhaustive_oracle():
    import itertools

    rng = random.Random(9000)

    def exhaustive(jobs, calendar):
        slots = [(j, night) for j in sorted(jobs, key=lambda j: j.priority)
                 for night in sorted(j.nights)]
        best_key = None
        for combo in itertools.product(*[list(range(len(j.variants))) + [None]
                                         for j, _ in slots]):
            residual = calendar.copy()
            ok = True
            for (j, night), pick in zip(slots, combo):
                if pick is None:
                    continue
                v = j.variants[pick]
                if any(v.need(c) > residual.avail(night, c) for c in CRAFTS):
                    ok = False
                    break
                for c in CRAFTS:
                    if v.need(c):
                        residual.adjust(night, c, -v.need(c))
            if not ok:
                continue
            key = tuple(len(slots[i][0].variants) if combo[i] is None else combo[i]
                        for i in range(len(slots)))
            if best_key is None or key < best_key:
                best_key = key
        return slots, best_key

    mismatches = 0
    for _ in range(150):
        jobs = []
        for i in range(rng.randint(1, 4)):
            variants = tuple(
                JobVariant(l, {c: rng.randint(0, 3) for c in CRAFTS})
                for l in "ABC"[:rng.randint(1, 3)])
            jobs.append(Job(f"J{i}", i, frozenset(rng.sample(("fri", "sat"),
                                                             rng.randint(1, 2))), variants))
        calendar = ResourceCalendar()
        for night in ("fri", "sat"):
            for craft in CRAFTS:
                calendar.availability[(night, craft)] = rng.randint(0, 6)
        plan = build_weekly_plan(jobs, calendar)
        slots, best = exhaustive(jobs, calendar)
        got = []
        for j, night in slots:
            a = plan.assignments[(night, j.id)]
            got.append(len(j.variants) if a.cancelled
                       else next(i for i, v in enumerate(j.variants) if v.label == a.variant))
        if tuple(got) != best:
            mismatches += 1
    report("scheduler-exhaustive-oracle", mismatches == 0,
           f"150 instances (<=4 jobs x <=3 variants), {mismatches} mismatches")
