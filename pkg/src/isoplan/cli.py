"""Batch command line: validate networks, plan isolations, run POPS checks,
build weekly plans, apply disruptions, simulate nights, serve the console."""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import energization, plate_orders, scheduler, switching, timeline, topology


class DomainError(Exception):
    pass


def _load_topo(net_path: str, plates_path: str | None = None) -> topology.NetworkTopology:
    try:
        topo = topology.load_topology(Path(net_path).read_text())
    except topology.TopologyError as e:
        raise DomainError("\n".join(str(err) for err in e.errors)) from e
    if plates_path:
        topo.plate_order_library.update(
            plate_orders.parse_plate_library(Path(plates_path).read_text()))
    return topo


def _load_state(topo, state_path: str | None):
    if not state_path:
        return energization.normal_state()
    return energization.parse_state(Path(state_path).read_text(), topo)


def _load_request(req_path: str, req_id: str | None):
    reqs = switching.parse_requests(Path(req_path).read_text())
    if not reqs:
        raise DomainError(f"no requests in {req_path}")
    if req_id is None:
        if len(reqs) > 1:
            raise DomainError(f"{req_path} holds {len(reqs)} requests; name one")
        return next(iter(reqs.values()))
    if req_id not in reqs:
        raise DomainError(f"no request {req_id} in {req_path}")
    return reqs[req_id]


def cmd_validate(args) -> int:
    topo = _load_topo(args.net, args.plates)
    s = topo.summary()
    runs = topology.wire_run_check(topo)
    if args.format == "records":
        for k, v in s.items():
            print(f"summary {k} {v}")
        for r in runs:
            print(f"wirerun {r.track} {r.length_ft} {','.join(r.sections)}")
    else:
        print(f"{args.net}: valid")
        print(f"  phase zones:             {s['zones']}")
        print(f"  nodes:                   {s['nodes']}")
        print(f"  sections:                {s['sections']} ({s['trolley_sections']} trolley)")
        print(f"  devices:                 {s['devices']} ({s['breakers']} breakers)")
        print(f"  supply substations:      {s['supply_substations']}")
        print(f"  equalizing substations:  {s['equalizing_substations']}")
        print(f"  tracks:                  {s['tracks']}")
        print(f"  switches/interlockings:  {s['switches']}/{s['interlockings']}")
        print(f"  keep-live assets:        {s['keep_live_assets']}")
        print(f"  ground points:           {s['ground_points']}")
        print(f"  plate orders:            {s['plate_orders']}")
        print(f"  wire runs over limit:    {len(runs)}")
        for r in runs:
            print(f"    {r}")
    return 0


def cmd_energize(args) -> int:
    topo = _load_topo(args.net, args.plates)
    state = _load_state(topo, args.state)
    res = energization.compute_energization(topo, state, unbalance_factor=args.unbalance_factor)
    if args.format == "records":
        for n in sorted(res.energized):
            print(f"energized {n}")
        for n in sorted(res.grounded):
            print(f"grounded {n}")
        for n in sorted(res.dead):
            print(f"dead {n}")
        for v in res.violations:
            print(f"violation {v.kind} {','.join(v.participants)} {v.detail}")
    else:
        print(f"energized: {len(res.energized)}  grounded: {len(res.grounded)}  "
              f"dead: {len(res.dead)}")
        for v in res.violations:
            print(f"  {v}")
    return 0


def cmd_isolate(args) -> int:
    topo = _load_topo(args.net, args.plates)
    state = _load_state(topo, args.state)
    request = _load_request(args.request, args.request_id)
    if not request.target_sections:
        raise UsageError("isolation request has an empty target set")
    plan = switching.plan_isolation(topo, state, request,
                                    director=args.director,
                                    plate_margin_ft=args.margin_ft)
    if args.format == "records":
        print(switching.format_plan(plan, net_path=args.net, state_path=args.state or ""),
              end="")
    else:
        iso_n, rst_n = plan.predicted_counts
        print(f"isolation plan for request {plan.request_id}")
        print(f"  plate order: {plan.plate_order or 'none on file'}")
        print(f"  operations:  {iso_n} to isolate, {rst_n} to restore")
        print(f"  forms:       {len(plan.forms)}")
        for note in plan.notes:
            print(f"  note: {note}")
        for form in plan.forms + plan.restore_forms:
            print()
            print(switching.format_order(form), end="")
    return 0


def cmd_plate_order(args) -> int:
    topo = _load_topo(args.net, args.plates)
    request = _load_request(args.request, args.request_id)
    plate = plate_orders.select_plate_order(topo.plate_order_library, topo, request,
                                            margin_ft=args.margin_ft)
    cov = plate_orders.coverage_check(topo, plate, request, margin_ft=args.margin_ft)
    if args.format == "records":
        print(plate_orders.format_plate_library({plate.id: plate}), end="")
    else:
        feet = plate_orders.barred_track_feet(topo, plate)
        print(f"selected plate order {plate.id}: {plate.description}")
        print(f"  barred track-feet: {feet}")
        print(f"  blocked switches:  {len(plate.blocked_switches)}")
        print(f"  covers request:    {'yes' if cov.covered else 'no'}")
    return 0


def cmd_schedule(args) -> int:
    topo = _load_topo(args.net, args.plates)
    jobs, overheads = scheduler.parse_jobs(Path(args.jobs).read_text())
    calendar = scheduler.parse_calendar(Path(args.calendar).read_text())
    requests = {}
    if args.requests:
        requests = switching.parse_requests(Path(args.requests).read_text())
    plan = scheduler.build_weekly_plan(jobs, calendar, topo.plate_order_library,
                                       topo, requests, overheads)
    for _ in range(3):
        plan = scheduler.advance_pipeline(plan)
    if args.format == "records":
        print(scheduler.format_plan(plan), end="")
        print(f"inputs net={args.net} jobs={args.jobs} cal={args.calendar}"
              + (f" requests={args.requests}" if args.requests else ""))
    else:
        print(f"weekly plan (stage {plan.pipeline_stage})")
        for (night, job_id), a in sorted(plan.assignments.items()):
            if a.cancelled:
                print(f"  {night} {job_id}: CANCELLED ({a.reason})")
            else:
                print(f"  {night} {job_id}: variant {a.variant}")
    return 0


def cmd_disrupt(args) -> int:
    text = Path(args.plan).read_text()
    inputs = {}
    for line in text.splitlines():
        if line.startswith("inputs "):
            inputs = dict(p.partition("=")[::2] for p in line.split()[1:])
    if not {"net", "jobs", "cal"} <= set(inputs):
        raise DomainError(f"{args.plan} lacks an inputs record; "
                          "regenerate it with 'schedule --format records'")
    base = Path(args.plan).parent
    topo = _load_topo(_rel(base, inputs["net"]))
    jobs, overheads = scheduler.parse_jobs(Path(_rel(base, inputs["jobs"])).read_text())
    calendar = scheduler.parse_calendar(Path(_rel(base, inputs["cal"])).read_text())
    requests = {}
    if "requests" in inputs:
        requests = switching.parse_requests(Path(_rel(base, inputs["requests"])).read_text())
    plan = scheduler.build_weekly_plan(jobs, calendar, topo.plate_order_library,
                                       topo, requests, overheads)
    for _ in range(3):
        plan = scheduler.advance_pipeline(plan)
    event = scheduler.parse_disruption(args.event)
    replanned, diff = scheduler.apply_disruption(plan, event)
    if args.format == "records":
        print(scheduler.format_plan(replanned), end="")
        for night, job, before, after, reason in diff.changes:
            print(f"diff {night} {job} {before} {after} {reason}")
    else:
        print(f"disruption: {' '.join(args.event)}")
        if not diff:
            print("  no assignments changed")
        for night, job, before, after, reason in diff.changes:
            print(f"  {night} {job}: {before} -> {after} ({reason})")
    return 0


def _rel(base: Path, p: str) -> str:
    q = Path(p)
    if q.exists():
        return str(q)
    return str(base / q)


def cmd_simulate(args) -> int:
    topo = _load_topo(args.net)
    plan, _ = switching.parse_plan(Path(args.plan).read_text())
    window = timeline.parse_window(Path(args.window).read_text())
    mode = "expected" if args.expected else "sampled"
    durations = timeline.DurationModel(seed=args.seed)
    if args.nights > 1:
        windows = [replace(window, night=f"{window.night}-{i + 1}") for i in range(args.nights)]
        models = [replace(durations, seed=args.seed + i) for i in range(args.nights)]
        with ThreadPoolExecutor(max_workers=min(8, args.nights)) as pool:
            reports = list(pool.map(
                lambda wm: timeline.simulate_night(plan, wm[0], wm[1], mode, topo),
                zip(windows, models)))
    else:
        reports = [timeline.simulate_night(plan, window, durations, mode, topo)]
    if args.format == "records":
        for r in reports:
            for row in r.to_rows():
                print(row)
    else:
        for r in reports:
            print(f"night {r.night} (nominal {r.nominal_minutes} min"
                  + (", INFEASIBLE WINDOW" if r.flags else "") + ")")
            for name, s, e in r.phases:
                print(f"  {name:<17} {timeline.format_clock(s)} - {timeline.format_clock(e)} "
                      f"{(e - s) // 60:5d} min")
            print(f"  {'on_track':<17} {'':>14}{r.on_track_minutes:5d} min")
            print(f"  opened to traffic {timeline.format_clock(r.opened_to_traffic_s)}")
    if len(reports) > 1:
        agg = timeline.work_window_report(reports)
        print(f"mean on-track {agg.mean_on_track_min:.0f} of {agg.mean_nominal_min:.0f} min "
              f"nominal ({100 * agg.effective_ratio:.1f}%)")
    return 0


def cmd_replay(args) -> int:
    text = Path(args.orderlog).read_text()
    plan, inputs = switching.parse_plan(text)
    if "net" not in inputs:
        raise DomainError(f"{args.orderlog} lacks an inputs record")
    base = Path(args.orderlog).parent
    topo = _load_topo(_rel(base, inputs["net"]))
    state = _load_state(topo, _rel(base, inputs["state"]) if inputs.get("state") else None)
    enforce = not args.no_interlock
    try:
        final, records, caught = switching.run_sequence(
            topo, state, plan.sequence, authority=plan.director, enforce=enforce)
    except switching.InterlockError as e:
        print(f"replay halted by interlock: {e}", file=sys.stderr)
        return 1
    res = energization.compute_energization(topo, final)
    if args.format == "records":
        print(energization.format_state(final), end="")
        for n in sorted(res.energized):
            print(f"energized {n}")
        for n in sorted(res.grounded):
            print(f"grounded {n}")
        for n in sorted(res.dead):
            print(f"dead {n}")
        for v in res.violations:
            print(f"violation {v.kind} {','.join(v.participants)} {v.detail}")
        for i, err in caught:
            print(f"caught {i} {err.kind} {','.join(err.participants)}")
        return 0
    print(f"replayed {len(records)} operations"
          + ("" if enforce else " with interlocks disabled"))
    if caught:
        print(f"the interlocks would have rejected {len(caught)} of them:")
        for i, err in caught:
            op = plan.sequence[i]
            print(f"  step {i + 1}: {op.kind} {op.target}: {err.kind} {err.detail}")
    faults = res.violations_of("GROUND_FAULT")
    if faults:
        print(f"final state carries {len(faults)} ground fault(s)")
    return 0


def cmd_serve(args) -> int:
    from .service import serve
    topo = _load_topo(args.net, args.plates)
    state = _load_state(topo, args.state)
    console = args.console
    if console is None:
        default = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        console = str(default) if default.is_dir() else None
    serve(topo, state, host=args.host, port=args.port, rooms=args.rooms,
          net_text=Path(args.net).read_text(), console_dir=console)
    return 0


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="isoplan",
                                description="traction power isolation engine")
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp, plates=True):
        sp.add_argument("--format", choices=["table", "records"], default="table")
        if plates:
            sp.add_argument("--plates", help="standalone plate order library file")

    sp = sub.add_parser("validate", help="load and validate a network document")
    sp.add_argument("net")
    common(sp)
    sp.set_defaults(fn=cmd_validate)

    sp = sub.add_parser("energize", help="live/dead/grounded partition and hazards")
    sp.add_argument("net")
    sp.add_argument("state", nargs="?")
    sp.add_argument("--unbalance-factor", type=float, default=2.0)
    common(sp)
    sp.set_defaults(fn=cmd_energize)

    sp = sub.add_parser("isolate", help="plan an isolation and print its forms")
    sp.add_argument("net")
    sp.add_argument("state")
    sp.add_argument("request")
    sp.add_argument("request_id", nargs="?")
    sp.add_argument("--director", default="PD1")
    sp.add_argument("--margin-ft", type=int, default=0)
    common(sp)
    sp.set_defaults(fn=cmd_isolate)

    sp = sub.add_parser("plate-order", help="select and check the covering plate order")
    sp.add_argument("net")
    sp.add_argument("request")
    sp.add_argument("request_id", nargs="?")
    sp.add_argument("--margin-ft", type=int, default=0)
    common(sp)
    sp.set_defaults(fn=cmd_plate_order)

    sp = sub.add_parser("schedule", help="build the weekly plan")
    sp.add_argument("net")
    sp.add_argument("jobs")
    sp.add_argument("calendar")
    sp.add_argument("--requests", help="isolation requests file")
    common(sp)
    sp.set_defaults(fn=cmd_schedule)

    sp = sub.add_parser("disrupt", help="apply a disruption to a scheduled plan")
    sp.add_argument("plan", help="plan records file from 'schedule --format records'")
    sp.add_argument("event", nargs="+",
                    help="e.g. sick_call lineman fri 1 | contractor_cancel J2 | "
                         "weather_cancel fri,sat | service_emergency fri lineman=2 outages=1")
    common(sp, plates=False)
    sp.set_defaults(fn=cmd_disrupt)

    sp = sub.add_parser("simulate", help="simulate a night against an isolation plan")
    sp.add_argument("net")
    sp.add_argument("plan", help="plan records file from 'isolate --format records'")
    sp.add_argument("window")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--expected", action="store_true", help="midpoint durations")
    sp.add_argument("--nights", type=int, default=1)
    common(sp, plates=False)
    sp.set_defaults(fn=cmd_simulate)

    sp = sub.add_parser("serve", help="HTTP control room for the operator console")
    sp.add_argument("net")
    sp.add_argument("--state")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8455)
    sp.add_argument("--rooms", type=int, default=1)
    sp.add_argument("--plates")
    sp.add_argument("--console", help="directory of built console assets")
    sp.set_defaults(fn=cmd_serve)

    sp = sub.add_parser("replay", help="re-execute a recorded isolation plan")
    sp.add_argument("orderlog")
    sp.add_argument("--no-interlock", action="store_true",
                    help="historical mode: execute blind, report what the "
                         "interlocks would have caught")
    common(sp, plates=False)
    sp.set_defaults(fn=cmd_replay)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    try:
        return args.fn(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 2
    except DomainError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except switching.PlanError as e:
        print(f"error {e.kind}: {e.detail}", file=sys.stderr)
        for lo, hi in e.split_suggestion:
            print(f"  suggested part: {lo}..{hi} ft", file=sys.stderr)
        return 1
    except plate_orders.PlateSelectionError as e:
        print(f"error NO_PLATE_ORDER: {e.detail}", file=sys.stderr)
        return 1
    except switching.InterlockError as e:
        print(f"error {e.kind}[{','.join(e.participants)}]: {e.detail}", file=sys.stderr)
        return 1
    except plate_orders.PopsError as e:
        print(f"error ILLEGAL_TRANSITION: {e.detail}", file=sys.stderr)
        return 1
    except (ValueError, KeyError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
