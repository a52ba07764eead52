"""HTTP control room: the engine behind the operator console.

One room owns one switching state; every mutation goes through the room lock,
appends exactly one event, and wakes the long-poll readers. Bodies are the
same line-oriented record formats the files use; the event stream is
newline-delimited `seq=<n> kind=<k> key=value...` records.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from . import timeline
from .energization import SwitchingState, compute_energization, format_state
from .plate_orders import EVENT_ROLE, POPSSession, PopsError, pops_transition
from .switching import (GROUND_OPS, InterlockError, IsolationPlan, OperatingOrder,
                        PlanError, execute_op, format_order, format_plan,
                        parse_requests, plan_isolation, request_shared_control,
                        validate_op)
from .topology import NetworkTopology


class HttpError(Exception):
    def __init__(self, status: int, kind: str, detail: str = "", participants=()):
        self.status = status
        self.kind = kind
        self.detail = detail
        self.participants = tuple(participants)
        super().__init__(f"{status} {kind}: {detail}")

    def body(self) -> str:
        out = [f"kind={self.kind}"]
        if self.participants:
            out.append(f"participants={','.join(self.participants)}")
        out.append(f"detail={self.detail}")
        return "\n".join(out) + "\n"


@dataclass
class Event:
    seq: int
    kind: str
    fields: dict

    def line(self) -> str:
        parts = [f"seq={self.seq}", f"kind={self.kind}"]
        parts += [f"{k}={v}" for k, v in self.fields.items()]
        return " ".join(str(p) for p in parts)


@dataclass
class ControlRoom:
    """Event-sourced owner of one simulated control territory."""
    topology: NetworkTopology
    state: SwitchingState
    net_text: str = ""
    orders: dict[str, OperatingOrder] = field(default_factory=dict)
    plans: dict[str, IsolationPlan] = field(default_factory=dict)
    sessions: dict[str, POPSSession] = field(default_factory=dict)
    events: list[Event] = field(default_factory=list)
    confirmations: dict[str, set[str]] = field(default_factory=dict)

    def __post_init__(self):
        self.lock = threading.RLock()
        self.changed = threading.Condition(self.lock)

    def _emit(self, kind: str, **fields) -> Event:
        ev = Event(seq=len(self.events) + 1, kind=kind, fields=fields)
        self.events.append(ev)
        self.changed.notify_all()
        return ev

    # -- commands (all under the room lock) --

    def create_isolation(self, request, director: str = "PD1") -> IsolationPlan:
        with self.lock:
            if request.id in self.plans:
                raise HttpError(422, "DUPLICATE_REQUEST", f"plan {request.id} already exists")
            try:
                plan = plan_isolation(self.topology, self.state, request,
                                      director=director or "PD1")
            except PlanError as e:
                raise HttpError(422, e.kind, e.detail) from e
            self.plans[request.id] = plan
            for form in plan.forms + plan.restore_forms:
                self.orders[form.id] = form
            if plan.plate_order:
                sid = f"pops-{request.id}"
                self.sessions[sid] = POPSSession(plate_order=plan.plate_order,
                                                 director=plan.director)
            self._emit("plan", request=request.id, plate=plan.plate_order or "-",
                       forms=",".join(f.id for f in plan.forms),
                       restore_forms=",".join(f.id for f in plan.restore_forms))
            return plan

    def _plan_of(self, order: OperatingOrder):
        for plan in self.plans.values():
            if order in plan.forms:
                return plan, False
            if order in plan.restore_forms:
                return plan, True
        return None, False

    def _session_for(self, plan: IsolationPlan) -> POPSSession | None:
        return self.sessions.get(f"pops-{plan.request_id}")

    def step_order(self, order_id: str, director: str):
        with self.lock:
            order = self.orders.get(order_id)
            if order is None:
                raise HttpError(404, "UNKNOWN_ORDER", order_id)
            if order.complete:
                raise HttpError(409, "ORDER_COMPLETE", "every operation is recorded")
            op = order.ops[order.next_index]
            plan, is_restore = self._plan_of(order)

            if plan is not None:
                session = self._session_for(plan)
                if session is not None and op.kind in GROUND_OPS and not is_restore \
                        and not session.locks_active:
                    raise HttpError(409, "POPS_NOT_IN_EFFECT",
                                    f"plate order {plan.plate_order} must be in effect "
                                    "before ground work")
                if session is not None and is_restore:
                    remaining = sum(len(f.ops) - len(f.records) for f in plan.restore_forms)
                    if remaining == 1 and session.state not in ("ReleaseRequested", "Released"):
                        raise HttpError(409, "POPS_NOT_RELEASED",
                                        "request release before completing restoration")

            if op.target in order.shared_devices:
                confirmed = self.confirmations.get(op.target, set())
                needed = {order.director, order.shared_with} - {None}
                if not needed <= confirmed:
                    raise HttpError(409, "NEEDS_CONFIRMATION",
                                    f"double-header device {op.target} needs "
                                    f"confirmation from {', '.join(sorted(needed - confirmed))}",
                                    participants=(op.target,))

            err = validate_op(self.topology, self.state, op,
                              authority=order.director, order=order)
            if err is not None:
                raise HttpError(409, err.kind, err.detail, err.participants)
            new_state, record = execute_op(self.topology, self.state, op,
                                           authority=order.director,
                                           at=time.strftime("%H:%M:%S"), order=order)
            self.state = new_state
            order.records.append(record)
            if op.target in self.confirmations:
                self.confirmations[op.target].clear()
            self._emit("op", order=order.id, index=order.next_index - 1, op=op.kind,
                       target=op.target, actor=op.actor, by=director or order.director,
                       result=record.result, note=record.note or "-")
            return order, record

    def confirm(self, order_id: str, device: str, director: str):
        with self.lock:
            order = self.orders.get(order_id)
            if order is None:
                raise HttpError(404, "UNKNOWN_ORDER", order_id)
            if device not in order.shared_devices:
                raise HttpError(422, "NOT_SHARED", f"{device} is not double-header controlled")
            self.confirmations.setdefault(device, set()).add(director)
            self._emit("confirm", order=order.id, device=device, director=director)
            return sorted(self.confirmations[device])

    def share(self, order_id: str, second_director: str):
        with self.lock:
            order = self.orders.get(order_id)
            if order is None:
                raise HttpError(404, "UNKNOWN_ORDER", order_id)
            request_shared_control(order, second_director, list(self.orders.values()))
            self._emit("share", order=order.id, second=second_director,
                       devices=",".join(sorted(order.shared_devices)) or "-")
            return order

    def pops(self, session_id: str, event: str, role: str, who: str):
        with self.lock:
            session = self.sessions.get(session_id)
            if session is None:
                raise HttpError(404, "UNKNOWN_SESSION", session_id)
            need = EVENT_ROLE.get(event, "missing")
            if need == "missing":
                raise HttpError(400, "UNKNOWN_EVENT", event)
            if need is not None and role != need:
                raise HttpError(422, "WRONG_ROLE", f"{event} is a {need} action")
            try:
                session = pops_transition(session, event, at=time.strftime("%H:%M:%S"))
            except PopsError as e:
                raise HttpError(409, "ILLEGAL_TRANSITION", e.detail) from e
            if event in ("acknowledge", "release") and who:
                session = POPSSession(plate_order=session.plate_order,
                                      director=session.director, dispatcher=who,
                                      state=session.state, log=session.log)
            self.sessions[session_id] = session
            self._emit("pops", session=session_id, event=event, state=session.state,
                       plate=session.plate_order)
            return session

    def state_document(self) -> str:
        with self.lock:
            res = compute_energization(self.topology, self.state)
            out = [format_state(self.state).rstrip("\n")]
            for n in sorted(res.energized):
                out.append(f"energized {n}")
            for n in sorted(res.grounded):
                out.append(f"grounded {n}")
            for n in sorted(res.dead):
                out.append(f"dead {n}")
            for v in res.violations:
                out.append(f"violation {v.kind} {','.join(v.participants)} {v.detail}")
            for sid, s in sorted(self.sessions.items()):
                out.append(f"pops {sid} plate={s.plate_order} state={s.state}")
            return "\n".join(ln for ln in out if ln) + "\n"

    def events_since(self, since: int, wait_s: float = 0.0) -> list[Event]:
        deadline = time.monotonic() + wait_s
        with self.lock:
            while True:
                pending = [e for e in self.events if e.seq > since]
                if pending or wait_s <= 0:
                    return list(pending)
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return []
                self.changed.wait(remaining)

    def simulate(self, attrs: dict) -> timeline.TimelineReport:
        with self.lock:
            plan = self.plans.get(attrs.get("plan", ""))
            if plan is None:
                raise HttpError(404, "UNKNOWN_PLAN", attrs.get("plan", "?"))
            window = timeline.NightWindow(
                nominal_start=timeline.parse_clock(attrs.get("start", "22:00")),
                nominal_end=timeline.parse_clock(attrs.get("end", "05:00")),
                service_clear=timeline.parse_clock(attrs.get("service_clear", "22:00")),
                work_until=timeline.parse_clock(attrs["work_until"]) if "work_until" in attrs else None,
                track_removal_min=float(attrs["track_removal"]) if "track_removal" in attrs else None,
                remote_total_min=float(attrs["remote_total"]) if "remote_total" in attrs else None,
                field_total_min=float(attrs["field_total"]) if "field_total" in attrs else None,
                briefing_min=float(attrs["briefing"]) if "briefing" in attrs else None,
                restore_total_min=float(attrs["restore_total"]) if "restore_total" in attrs else None,
                extension_minutes=int(attrs["extension"]) if "extension" in attrs else None,
                night=attrs.get("night", "night1"),
            )
            model = timeline.DurationModel(seed=int(attrs.get("seed", 0)))
            return timeline.simulate_night(plan, window, model,
                                           attrs.get("mode", "expected"), self.topology)


def _parse_body_attrs(text: str) -> dict:
    attrs: dict[str, str] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" in line and " " not in line.split("=", 1)[0]:
            k, _, v = line.partition("=")
            attrs[k.strip()] = v.strip()
        else:
            key, *rest = line.split(None, 1)
            attrs[key] = rest[0] if rest else ""
    return attrs


class _Handler(BaseHTTPRequestHandler):
    server_version = "isoplan"
    rooms: dict[str, ControlRoom] = {}
    console_dir: str | None = None

    def log_message(self, fmt, *args):   # quiet by default
        pass

    # -- helpers --

    def _room(self, path_parts: list[str]) -> tuple[ControlRoom, list[str]]:
        if len(path_parts) >= 2 and path_parts[0] == "rooms":
            room = self.rooms.get(path_parts[1])
            if room is None:
                raise HttpError(404, "UNKNOWN_ROOM", path_parts[1])
            return room, path_parts[2:]
        return self.rooms["r1"], path_parts

    def _send(self, status: int, body: str, content_type="text/plain; charset=utf-8"):
        data = body.encode()
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(data)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Headers", "X-Role, X-Director, Content-Type")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.end_headers()
        self.wfile.write(data)

    def _body(self) -> str:
        n = int(self.headers.get("Content-Length") or 0)
        return self.rfile.read(n).decode() if n else ""

    def _role(self) -> str:
        return self.headers.get("X-Role", "")

    def _director(self) -> str:
        return self.headers.get("X-Director", "")

    # -- verbs --

    def do_OPTIONS(self):
        self._send(204, "")

    def _serve_console(self, path: str) -> None:
        import mimetypes
        from pathlib import Path as _P
        root = _P(self.console_dir).resolve()
        rel = path[len("/console"):].lstrip("/") or "index.html"
        target = (root / rel).resolve()
        if not str(target).startswith(str(root)) or not target.is_file():
            self._send(404, "not found\n")
            return
        ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        self._send(200, target.read_text(), content_type=ctype)

    def do_GET(self):
        try:
            url = urlparse(self.path)
            if self.console_dir and (url.path == "/console" or url.path.startswith("/console/")):
                self._serve_console(url.path)
                return
            parts = [p for p in url.path.split("/") if p]
            room, parts = self._room(parts)
            if parts == ["network"]:
                self._send(200, room.net_text or "# network document unavailable\n")
            elif parts == ["state"]:
                self._send(200, room.state_document())
            elif len(parts) == 2 and parts[0] == "orders":
                with room.lock:
                    order = room.orders.get(parts[1])
                    if order is None:
                        raise HttpError(404, "UNKNOWN_ORDER", parts[1])
                    body = format_order(order)
                    body += f"next {order.next_index if not order.complete else -1}\n"
                    if order.shared_devices:
                        body += f"shared {','.join(sorted(order.shared_devices))}\n"
                self._send(200, body)
            elif parts == ["orders"]:
                with room.lock:
                    lines = [f"order {o.id} group={o.line_group} director={o.director} "
                             f"done={len(o.records)} of={len(o.ops)}"
                             for o in room.orders.values()]
                self._send(200, "\n".join(lines) + ("\n" if lines else ""))
            elif parts == ["plans"]:
                with room.lock:
                    body = "".join(format_plan(p) for p in room.plans.values())
                self._send(200, body)
            elif parts == ["events"]:
                q = parse_qs(url.query)
                since = int(q.get("since", ["0"])[0])
                wait_s = min(float(q.get("timeout", ["0"])[0]), 30.0)
                events = room.events_since(since, wait_s)
                self._send(200, "\n".join(e.line() for e in events) + ("\n" if events else ""))
            else:
                raise HttpError(404, "NOT_FOUND", url.path)
        except HttpError as e:
            self._send(e.status, e.body())

    def do_POST(self):
        try:
            url = urlparse(self.path)
            parts = [p for p in url.path.split("/") if p]
            room, parts = self._room(parts)
            body = self._body()
            if parts == ["isolations"]:
                reqs = parse_requests(body)
                if len(reqs) != 1:
                    raise HttpError(400, "BAD_REQUEST", "post exactly one request record")
                plan = room.create_isolation(next(iter(reqs.values())), self._director())
                out = [f"plan {plan.request_id} plate={plan.plate_order or '-'} "
                       f"session={'pops-' + plan.request_id if plan.plate_order else '-'}"]
                out += [f"order {f.id} phase=isolation" for f in plan.forms]
                out += [f"order {f.id} phase=restore" for f in plan.restore_forms]
                self._send(201, "\n".join(out) + "\n")
            elif len(parts) == 3 and parts[0] == "orders" and parts[2] == "step":
                if self._role() not in ("", "director"):
                    raise HttpError(422, "WRONG_ROLE", "stepping is the director's job")
                order, record = room.step_order(parts[1], self._director())
                idx = order.next_index - 1
                op = order.ops[idx]
                self._send(200, f"executed {idx} {op.kind} {op.target} result={record.result}"
                                f" note={record.note or '-'}\n"
                                f"next {order.next_index if not order.complete else -1}\n")
            elif len(parts) == 3 and parts[0] == "orders" and parts[2] == "confirm":
                attrs = _parse_body_attrs(body)
                who = attrs.get("director") or self._director()
                confirmed = room.confirm(parts[1], attrs.get("device", ""), who)
                self._send(200, f"confirmed {','.join(confirmed)}\n")
            elif len(parts) == 3 and parts[0] == "orders" and parts[2] == "share":
                attrs = _parse_body_attrs(body)
                order = room.share(parts[1], attrs.get("director", ""))
                self._send(200, f"shared {','.join(sorted(order.shared_devices)) or '-'}\n")
            elif len(parts) == 3 and parts[0] == "pops":
                session = room.pops(parts[1], parts[2], self._role(), self._director())
                self._send(200, f"session {parts[1]} state={session.state}\n")
            elif parts == ["simulate"]:
                report = room.simulate(_parse_body_attrs(body))
                self._send(200, "\n".join(report.to_rows()) + "\n")
            else:
                raise HttpError(404, "NOT_FOUND", url.path)
        except HttpError as e:
            self._send(e.status, e.body())
        except PlanError as e:
            self._send(422, HttpError(422, e.kind, e.detail).body())
        except (ValueError, KeyError) as e:
            self._send(400, HttpError(400, "BAD_REQUEST", str(e)).body())


def make_server(topology: NetworkTopology, state: SwitchingState,
                host: str = "127.0.0.1", port: int = 0, rooms: int = 1,
                net_text: str = "", console_dir: str | None = None) -> ThreadingHTTPServer:
    handler = type("Handler", (_Handler,), {"rooms": {}, "console_dir": console_dir})
    for i in range(max(1, rooms)):
        handler.rooms[f"r{i + 1}"] = ControlRoom(topology=topology, state=state.copy(),
                                                 net_text=net_text)
    server = ThreadingHTTPServer((host, port), handler)
    server.rooms = handler.rooms
    return server


def serve(topology, state, host="127.0.0.1", port=8455, rooms=1, net_text="",
          console_dir=None) -> None:
    server = make_server(topology, state, host, port, rooms, net_text, console_dir)
    print(f"control room listening on http://{host}:{server.server_address[1]}/ "
          f"({rooms} room{'s' if rooms != 1 else ''})")
    if console_dir:
        print(f"console at http://{host}:{server.server_address[1]}/console")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
