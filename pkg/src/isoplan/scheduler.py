"""Weekly possession/isolation planning under five-craft resource limits.

Jobs carry A/B/C variants (full scope down to contingency scope). Planning is
greedy by priority, per night: the first variant whose craft demand fits the
remaining availability and whose isolation admits a plate order and a valid
switching plan wins; otherwise the job is cancelled for that night with the
first failing reason. Friday disruptions adjust availability and replan only
what they touch.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

CRAFTS = ("lineman", "groundman", "power_director", "flagman", "dispatcher")
NIGHTS = ("mon", "tue", "wed", "thu", "fri", "sat", "sun")
PIPELINE_STAGES = ("look_ahead", "priorities_set", "requested", "approved", "executing")


@dataclass
class ResourceCalendar:
    availability: dict[tuple[str, str], int] = field(default_factory=dict)
    contractor_crews: dict[str, int] = field(default_factory=dict)

    def avail(self, night: str, craft: str) -> int:
        return self.availability.get((night, craft), 0)

    def adjust(self, night: str, craft: str, delta: int) -> None:
        self.availability[(night, craft)] = max(0, self.avail(night, craft) + delta)

    def copy(self) -> "ResourceCalendar":
        return ResourceCalendar(dict(self.availability), dict(self.contractor_crews))


def parse_calendar(text: str) -> ResourceCalendar:
    cal = ResourceCalendar()
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "avail":
            _, night, craft, n = parts
            if craft not in CRAFTS:
                raise ValueError(f"line {ln}: unknown craft {craft}")
            if int(n) < 0:
                raise ValueError(f"line {ln}: headcount must be >= 0")
            cal.availability[(night, craft)] = int(n)
        elif parts[0] == "crews":
            _, night, n = parts
            cal.contractor_crews[night] = int(n)
        else:
            raise ValueError(f"line {ln}: unrecognized calendar record '{parts[0]}'")
    return cal


def format_calendar(cal: ResourceCalendar) -> str:
    out = [f"avail {night} {craft} {n}"
           for (night, craft), n in sorted(cal.availability.items())]
    out += [f"crews {night} {n}" for night, n in sorted(cal.contractor_crews.items())]
    return "\n".join(out) + ("\n" if out else "")


@dataclass(frozen=True)
class JobVariant:
    label: str                      # A | B | C
    demand: dict = field(default_factory=dict)   # craft -> headcount
    isolation: str | None = None
    track_outage_needed: bool = False
    expected_progress: float = 1.0

    def need(self, craft: str) -> int:
        return self.demand.get(craft, 0)


@dataclass(frozen=True)
class Job:
    id: str
    priority: int                   # lower = more important, unique per week
    nights: frozenset[str]
    variants: tuple[JobVariant, ...]
    owner: str = "contractor"       # contractor | in_house


_CRAFT_KEYS = {"lineman": "lineman", "groundman": "groundman", "director": "power_director",
               "flagman": "flagman", "dispatcher": "dispatcher"}


def parse_jobs(text: str):
    """Parse a jobs file. Returns (jobs, isolation_overheads) where overheads
    give the per-request craft bundle counted once when jobs share an isolation."""
    jobs: list[Job] = []
    overheads: dict[str, dict[str, int]] = {}
    cur: dict | None = None

    def flush():
        nonlocal cur
        if cur is not None:
            if not cur["variants"]:
                raise ValueError(f"job {cur['id']} has no variants")
            jobs.append(Job(id=cur["id"], priority=cur["priority"],
                            nights=frozenset(cur["nights"]),
                            variants=tuple(cur["variants"]), owner=cur["owner"]))
        cur = None

    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        rec = parts[0]
        attrs = dict(p.partition("=")[::2] for p in parts[1:] if "=" in p)
        if rec == "job":
            flush()
            cur = {"id": parts[1], "priority": int(attrs["prio"]),
                   "owner": attrs.get("owner", "contractor"),
                   "nights": [n for n in attrs.get("nights", "").split(",") if n],
                   "variants": []}
        elif rec == "variant":
            if cur is None:
                raise ValueError(f"line {ln}: variant outside a job")
            demand = {}
            for key, craft in _CRAFT_KEYS.items():
                if key in attrs:
                    demand[craft] = int(attrs[key])
            progress = float(attrs.get("progress", 1.0))
            if progress <= 0:
                raise ValueError(f"line {ln}: progress must be > 0")
            cur["variants"].append(JobVariant(
                label=parts[1], demand=demand,
                isolation=attrs.get("isolation"),
                track_outage_needed=attrs.get("track_outage", "0") == "1",
                expected_progress=progress))
        elif rec == "isolation":
            rid = parts[1]
            overheads[rid] = {craft: int(attrs[key])
                              for key, craft in _CRAFT_KEYS.items() if key in attrs}
        else:
            raise ValueError(f"line {ln}: unrecognized jobs record '{rec}'")
    flush()
    return jobs, overheads


@dataclass(frozen=True)
class Assignment:
    variant: str | None             # variant label, or None when cancelled
    reason: str = ""                # cancellation reason when variant is None

    @property
    def cancelled(self) -> bool:
        return self.variant is None


def CANCELLED(reason: str) -> Assignment:
    return Assignment(variant=None, reason=reason)


@dataclass
class WeeklyPlan:
    assignments: dict[tuple[str, str], Assignment] = field(default_factory=dict)
    residual: ResourceCalendar = field(default_factory=ResourceCalendar)
    pipeline_stage: str = "look_ahead"
    jobs: list[Job] = field(default_factory=list)
    calendar: ResourceCalendar = field(default_factory=ResourceCalendar)
    overheads: dict[str, dict[str, int]] = field(default_factory=dict)
    iso_feasible: dict[str, str] = field(default_factory=dict)   # request id -> "" or reason

    def assignment(self, night: str, job_id: str) -> Assignment | None:
        return self.assignments.get((night, job_id))


@dataclass(frozen=True)
class CapacityReport:
    availability: dict
    demand: dict
    binding: tuple[str, ...]


def effective_capacity(calendar: ResourceCalendar, night: str, jobs) -> CapacityReport:
    """Per-craft headcounts and the binding craft(s): smallest availability to
    total-demand ratio. Crafts nobody asked for cannot bind."""
    demand = {craft: 0 for craft in CRAFTS}
    for job in jobs:
        if night in job.nights:
            v = job.variants[0]
            for craft in CRAFTS:
                demand[craft] += v.need(craft)
    ratios = {}
    for craft in CRAFTS:
        if demand[craft] > 0:
            ratios[craft] = calendar.avail(night, craft) / demand[craft]
    binding: tuple[str, ...] = ()
    if ratios:
        best = min(ratios.values())
        binding = tuple(sorted(c for c, r in ratios.items() if r == best))
    return CapacityReport(
        availability={c: calendar.avail(night, c) for c in CRAFTS},
        demand=demand, binding=binding)


def _isolation_feasible(request_id: str, plan_ctx) -> str:
    """Returns '' when the request admits a plate order and a switching plan,
    else the blocking reason. Results are cached on the context."""
    topology, state, requests, cache = plan_ctx
    if request_id in cache:
        return cache[request_id]
    from .switching import PlanError, plan_isolation
    reason = ""
    req = requests.get(request_id)
    if req is None:
        reason = "unknown_isolation"
    else:
        try:
            plan_isolation(topology, state, req)
        except PlanError as e:
            reason = e.kind.lower()
    cache[request_id] = reason
    return reason


def build_weekly_plan(jobs, calendar: ResourceCalendar, plate_library=None,
                      topology=None, requests=None, overheads=None,
                      prev: WeeklyPlan | None = None,
                      state=None, iso_results=None) -> WeeklyPlan:
    """Greedy priority-order assignment with A-then-B-then-C fallback.

    With prev given, a job-night keeps its previous variant whenever that
    variant is still feasible (replan stability); cancelled slots may revive.
    Isolation feasibility comes from planning against the topology, or from
    iso_results when replanning without one.
    """
    prios = [j.priority for j in jobs]
    if len(set(prios)) != len(prios):
        raise ValueError("job priorities must be unique")
    overheads = overheads or {}
    residual = calendar.copy()
    plan = WeeklyPlan(residual=residual, jobs=list(jobs), calendar=calendar.copy(),
                      overheads=dict(overheads))
    if iso_results is not None:
        plan.iso_feasible.update(iso_results)
    if topology is not None and requests is not None:
        from .energization import normal_state
        ctx = (topology, state if state is not None else normal_state(), requests,
               plan.iso_feasible)
    else:
        ctx = None

    iso_active: dict[tuple[str, str], int] = {}   # (night, request id) -> jobs sharing it

    def effective_demand(night: str, variant: JobVariant) -> dict[str, int]:
        demand = {c: variant.need(c) for c in CRAFTS}
        if variant.isolation and iso_active.get((night, variant.isolation), 0) > 0:
            for craft, n in overheads.get(variant.isolation, {}).items():
                demand[craft] = max(0, demand[craft] - n)
        return demand

    for job in sorted(jobs, key=lambda j: j.priority):
        for night in sorted(job.nights):
            variant_order = list(job.variants)
            if prev is not None:
                old = prev.assignment(night, job.id)
                if old is not None and not old.cancelled:
                    variant_order.sort(key=lambda v: v.label != old.variant)
            chosen: JobVariant | None = None
            first_reason = ""
            for v in variant_order:
                reason = ""
                demand = effective_demand(night, v)
                for craft in CRAFTS:
                    if demand[craft] > residual.avail(night, craft):
                        reason = f"insufficient_{craft}"
                        break
                if not reason and v.isolation:
                    if ctx is not None:
                        reason = _isolation_feasible(v.isolation, ctx)
                    else:
                        reason = plan.iso_feasible.get(v.isolation, "")
                if not reason:
                    chosen = v
                    break
                if not first_reason:
                    first_reason = reason
            if chosen is None:
                plan.assignments[(night, job.id)] = CANCELLED(first_reason or "infeasible")
            else:
                demand = effective_demand(night, chosen)
                for craft in CRAFTS:
                    if demand[craft]:
                        residual.adjust(night, craft, -demand[craft])
                if chosen.isolation:
                    iso_active[(night, chosen.isolation)] = \
                        iso_active.get((night, chosen.isolation), 0) + 1
                plan.assignments[(night, job.id)] = Assignment(variant=chosen.label)
    return plan


def advance_pipeline(plan: WeeklyPlan, availability_cuts=None, outage_rejections=None) -> WeeklyPlan:
    """Move the plan through the weekday gates. Wednesday-style resource cuts
    and Thursday-style outage rejections may be injected at any gate."""
    idx = PIPELINE_STAGES.index(plan.pipeline_stage)
    if idx >= len(PIPELINE_STAGES) - 1:
        return plan
    if availability_cuts:
        for night, craft, n in availability_cuts:
            plan.calendar.adjust(night, craft, -n)
    rebuilt = build_weekly_plan(plan.jobs, plan.calendar, overheads=plan.overheads, prev=plan,
                                iso_results=plan.iso_feasible)
    if outage_rejections:
        for night, job_id in outage_rejections:
            job = next((j for j in plan.jobs if j.id == job_id), None)
            if job is None:
                continue
            a = rebuilt.assignments.get((night, job_id))
            if a is not None and not a.cancelled:
                v = next(v for v in job.variants if v.label == a.variant)
                if v.track_outage_needed:
                    _unassign(rebuilt, night, job, v)
                    rebuilt.assignments[(night, job_id)] = CANCELLED("track_outage_rejected")
    rebuilt.pipeline_stage = PIPELINE_STAGES[idx + 1]
    return rebuilt


def _unassign(plan: WeeklyPlan, night: str, job: Job, variant: JobVariant) -> None:
    for craft in CRAFTS:
        if variant.need(craft):
            plan.residual.adjust(night, craft, variant.need(craft))


# -- disruptions ---------------------------------------------------------------

@dataclass(frozen=True)
class Disruption:
    kind: str                       # sick_call | contractor_cancel | weather_cancel | service_emergency
    night: str | None = None
    craft: str | None = None
    count: int = 0
    job: str | None = None
    nights: tuple[str, ...] = ()
    crafts_lost: tuple[tuple[str, int], ...] = ()
    outages_lost: int = 0


def parse_disruption(words: list[str]) -> Disruption:
    kind = words[0]
    if kind == "sick_call":
        return Disruption(kind, craft=words[1], night=words[2], count=int(words[3]))
    if kind == "contractor_cancel":
        return Disruption(kind, job=words[1])
    if kind == "weather_cancel":
        return Disruption(kind, nights=tuple(words[1].split(",")))
    if kind == "service_emergency":
        crafts = []
        outages = 0
        for w in words[2:]:
            k, _, v = w.partition("=")
            if k == "outages":
                outages = int(v)
            else:
                craft = _CRAFT_KEYS.get(k, k)
                crafts.append((craft, int(v)))
        return Disruption(kind, night=words[1], crafts_lost=tuple(crafts), outages_lost=outages)
    raise ValueError(f"unknown disruption kind {kind}")


@dataclass(frozen=True)
class PlanDiff:
    changes: tuple[tuple[str, str, str, str, str], ...]   # (night, job, before, after, reason)

    def __bool__(self) -> bool:
        return bool(self.changes)


def _label(a: Assignment | None) -> str:
    if a is None:
        return "-"
    return a.variant if not a.cancelled else f"CANCELLED({a.reason})"


def apply_disruption(plan: WeeklyPlan, event: Disruption) -> tuple[WeeklyPlan, PlanDiff]:
    """Adjust availability per the event and replan only the affected nights,
    keeping every still-feasible prior assignment."""
    if PIPELINE_STAGES.index(plan.pipeline_stage) < PIPELINE_STAGES.index("approved"):
        raise ValueError("disruptions apply to approved plans only")
    known_nights = {n for j in plan.jobs for n in j.nights}
    calendar = plan.calendar.copy()
    forced_cancel: dict[tuple[str, str], str] = {}
    affected: set[str] = set()

    if event.kind == "sick_call":
        if event.night not in known_nights:
            raise ValueError(f"unknown night {event.night}")
        calendar.adjust(event.night, event.craft, -event.count)
        affected.add(event.night)
    elif event.kind == "contractor_cancel":
        job = next((j for j in plan.jobs if j.id == event.job), None)
        if job is None:
            raise ValueError(f"unknown job {event.job}")
        for night in job.nights:
            forced_cancel[(night, job.id)] = "contractor_cancel"
            affected.add(night)
    elif event.kind == "weather_cancel":
        for night in event.nights:
            if night not in known_nights:
                raise ValueError(f"unknown night {night}")
            for job in plan.jobs:
                if night in job.nights and any(v.isolation for v in job.variants):
                    forced_cancel[(night, job.id)] = "weather"
            affected.add(night)
    elif event.kind == "service_emergency":
        if event.night not in known_nights:
            raise ValueError(f"unknown night {event.night}")
        for craft, n in event.crafts_lost:
            calendar.adjust(event.night, craft, -n)
        affected.add(event.night)
        if event.outages_lost:
            outage_jobs = sorted(
                (j for j in plan.jobs if event.night in j.nights
                 and any(v.track_outage_needed for v in j.variants)
                 and not plan.assignments.get((event.night, j.id), CANCELLED("")).cancelled),
                key=lambda j: -j.priority)
            for j in outage_jobs[:event.outages_lost]:
                forced_cancel[(event.night, j.id)] = "track_outage_lost"
    else:
        raise ValueError(f"unknown disruption kind {event.kind}")

    jobs_view = []
    for job in plan.jobs:
        nights = frozenset(n for n in job.nights
                           if (n, job.id) not in forced_cancel)
        jobs_view.append(replace(job, nights=nights))

    rebuilt = build_weekly_plan(jobs_view, calendar, overheads=plan.overheads, prev=plan,
                                iso_results=plan.iso_feasible)
    rebuilt.jobs = plan.jobs
    rebuilt.pipeline_stage = plan.pipeline_stage
    for key, reason in forced_cancel.items():
        old = plan.assignments.get(key)
        if old is not None and old.cancelled:
            rebuilt.assignments[key] = old      # already off the plan; nothing to cancel
        else:
            rebuilt.assignments[key] = CANCELLED(reason)

    # isolation feasibility decided at build time is carried over: replace
    # feasibility-dependent outcomes for unaffected nights with prior results
    for (night, job_id), old in plan.assignments.items():
        if night not in affected and (night, job_id) not in forced_cancel:
            rebuilt.assignments[(night, job_id)] = old

    changes = []
    keys = set(plan.assignments) | set(rebuilt.assignments)
    for night, job_id in sorted(keys):
        before = plan.assignments.get((night, job_id))
        after = rebuilt.assignments.get((night, job_id))
        if _label(before) != _label(after):
            reason = after.reason if after is not None and after.cancelled else "replanned"
            changes.append((night, job_id, _label(before), _label(after), reason))
    return rebuilt, PlanDiff(tuple(changes))


# -- plan round-trip -------------------------------------------------------------

def format_plan(plan: WeeklyPlan) -> str:
    out = [f"weeklyplan stage={plan.pipeline_stage}"]
    for (night, job_id), a in sorted(plan.assignments.items()):
        out.append(f"assign {night} {job_id} {_label(a)}")
    for (night, craft), n in sorted(plan.residual.availability.items()):
        out.append(f"residual {night} {craft} {n}")
    return "\n".join(out) + "\n"


def parse_plan_summary(text: str) -> WeeklyPlan:
    plan = WeeklyPlan()
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "weeklyplan":
            attrs = dict(p.partition("=")[::2] for p in parts[1:])
            plan.pipeline_stage = attrs.get("stage", "look_ahead")
        elif parts[0] == "assign":
            night, job_id, label = parts[1], parts[2], parts[3]
            if label.startswith("CANCELLED("):
                plan.assignments[(night, job_id)] = CANCELLED(label[10:-1])
            else:
                plan.assignments[(night, job_id)] = Assignment(variant=label)
        elif parts[0] == "residual":
            plan.residual.availability[(parts[1], parts[2])] = int(parts[3])
    return plan
