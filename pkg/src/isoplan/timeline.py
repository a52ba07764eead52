"""Discrete-event timeline of one night's isolation: how much of the nominal
work window the contractor actually gets on track.

Phases run back to back: residual train service, track removal, remote
switching, field switching, safety briefing, contractor work, restoration.
Durations come from a seeded model (sampled) or its midpoints (expected),
unless a phase total is pinned in the night window inputs.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

PHASES = ("service_residual", "track_removal", "remote_switching",
          "field_switching", "briefing", "contractor_work", "restoration")


def parse_clock(text: str) -> int:
    """Clock time 'HH:MM' to seconds since midnight."""
    hh, _, mm = text.partition(":")
    return int(hh) * 3600 + int(mm) * 60


def format_clock(seconds: int) -> str:
    s = seconds % 86400
    return f"{s // 3600:02d}:{(s % 3600) // 60:02d}"


@dataclass(frozen=True)
class DurationModel:
    remote_min_s: int = 30
    remote_max_s: int = 90
    manual_base_min: float = 5.0
    manual_cap_min: float = 15.0
    track_removal_min: float = 30.0
    briefing_min: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.remote_min_s > self.remote_max_s:
            raise ValueError("remote_min_s must be <= remote_max_s")
        if min(self.remote_min_s, self.manual_base_min, self.manual_cap_min,
               self.track_removal_min, self.briefing_min) < 0:
            raise ValueError("durations must be nonnegative")

    def remote_expected_s(self) -> int:
        return (self.remote_min_s + self.remote_max_s) // 2

    def manual_expected_s(self, travel_minutes: float) -> int:
        return int(60 * min(self.manual_base_min + travel_minutes, self.manual_cap_min))


@dataclass
class NightWindow:
    nominal_start: int                      # seconds since midnight
    nominal_end: int                        # may exceed 86400 (past midnight)
    service_clear: int
    extension_minutes: int | None = None
    work_until: int | None = None
    track_removal_min: float | None = None
    remote_total_min: float | None = None
    field_total_min: float | None = None
    briefing_min: float | None = None
    restore_total_min: float | None = None
    night: str = "night1"

    def __post_init__(self):
        if self.nominal_end <= self.nominal_start:
            self.nominal_end += 86400
        if self.service_clear < self.nominal_start:
            self.service_clear += 86400
        if self.work_until is not None and self.work_until < self.nominal_start:
            self.work_until += 86400

    @property
    def nominal_minutes(self) -> int:
        return (self.nominal_end - self.nominal_start) // 60


def parse_window(text: str) -> NightWindow:
    attrs: dict[str, str] = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, *rest = line.split()
        if len(rest) != 1:
            raise ValueError(f"line {ln}: window records are '<key> <value>'")
        attrs[key] = rest[0]
    for req in ("start", "end", "service_clear"):
        if req not in attrs:
            raise ValueError(f"window is missing '{req}'")
    return NightWindow(
        nominal_start=parse_clock(attrs["start"]),
        nominal_end=parse_clock(attrs["end"]),
        service_clear=parse_clock(attrs["service_clear"]),
        extension_minutes=int(attrs["extension"]) if "extension" in attrs else None,
        work_until=parse_clock(attrs["work_until"]) if "work_until" in attrs else None,
        track_removal_min=float(attrs["track_removal"]) if "track_removal" in attrs else None,
        remote_total_min=float(attrs["remote_total"]) if "remote_total" in attrs else None,
        field_total_min=float(attrs["field_total"]) if "field_total" in attrs else None,
        briefing_min=float(attrs["briefing"]) if "briefing" in attrs else None,
        restore_total_min=float(attrs["restore_total"]) if "restore_total" in attrs else None,
        night=attrs.get("night", "night1"),
    )


@dataclass
class TimelineReport:
    night: str
    phases: list[tuple[str, int, int]]      # (name, start_s, end_s)
    on_track_s: int
    opened_to_traffic_s: int
    nominal_minutes: int
    flags: list[str] = field(default_factory=list)

    @property
    def on_track_minutes(self) -> int:
        return self.on_track_s // 60

    def phase_minutes(self, name: str) -> float:
        return sum((e - s) for n, s, e in self.phases if n == name) / 60

    def to_rows(self) -> list[str]:
        rows = [f"{self.night},{name},{format_clock(s)},{format_clock(e)},{(e - s) / 60:g}"
                for name, s, e in self.phases]
        rows.append(f"{self.night},on_track,,,{self.on_track_s / 60:g}")
        return rows


def _op_durations_s(plan, topology, durations: DurationModel, mode: str) -> tuple[list[int], list[int], list[int]]:
    """Per-op second draws for (remote isolation, field isolation, restoration)."""
    rng = random.Random(durations.seed)

    def draw(ops):
        remote, fieldwork = [], []
        for op in ops:
            if op.actor == "remote_scada":
                if mode == "expected":
                    remote.append(durations.remote_expected_s())
                else:
                    remote.append(rng.randint(durations.remote_min_s, durations.remote_max_s))
            else:
                travel = 0
                if topology is not None and op.target in topology.devices:
                    travel = topology.devices[op.target].travel_minutes
                if mode == "expected":
                    fieldwork.append(durations.manual_expected_s(travel))
                else:
                    base = durations.manual_base_min
                    drawn = rng.uniform(0.5 * base, 1.5 * base) + travel
                    fieldwork.append(int(60 * min(drawn, durations.manual_cap_min)))
        return remote, fieldwork

    iso_remote, iso_field = draw(plan.sequence if plan else [])
    r_remote, r_field = draw(plan.restore_sequence if plan else [])
    return iso_remote, iso_field, [*r_remote, *r_field]


def simulate_night(plan, window: NightWindow, durations: DurationModel,
                   mode: str = "expected", topology=None) -> TimelineReport:
    """Build the night's phase timeline for an isolation plan.

    Phase totals pinned in the window override the per-op model (used when
    reproducing observed nights where only the totals are known).
    """
    if mode not in ("expected", "sampled"):
        raise ValueError("mode must be 'expected' or 'sampled'")
    iso_remote, iso_field, restore = _op_durations_s(plan, topology, durations, mode)

    def total(override_min: float | None, samples: list[int]) -> int:
        if override_min is not None:
            return int(60 * override_min)
        return sum(samples)

    track_removal_s = int(60 * (window.track_removal_min
                                if window.track_removal_min is not None
                                else durations.track_removal_min))
    remote_s = total(window.remote_total_min, iso_remote)
    field_s = total(window.field_total_min, iso_field)
    briefing_s = int(60 * (window.briefing_min if window.briefing_min is not None
                           else durations.briefing_min))
    restore_s = total(window.restore_total_min, restore)

    t = window.nominal_start
    phases: list[tuple[str, int, int]] = []

    def push(name: str, dur: int) -> None:
        nonlocal t
        phases.append((name, t, t + dur))
        t += dur

    push("service_residual", window.service_clear - window.nominal_start)
    push("track_removal", track_removal_s)
    push("remote_switching", remote_s)
    push("field_switching", field_s)
    push("briefing", briefing_s)
    briefing_done = t

    if window.work_until is not None:
        work_end = window.work_until
    else:
        work_end = window.nominal_end - restore_s
        if window.extension_minutes:
            work_end += 60 * window.extension_minutes

    flags = []
    if work_end <= briefing_done:
        flags.append("INFEASIBLE_WINDOW")
        work_end = briefing_done
    push("contractor_work", work_end - briefing_done)
    push("restoration", restore_s)

    return TimelineReport(
        night=window.night,
        phases=phases,
        on_track_s=work_end - briefing_done,
        opened_to_traffic_s=t,
        nominal_minutes=window.nominal_minutes,
        flags=flags,
    )


@dataclass(frozen=True)
class WorkWindowSummary:
    rows: tuple[tuple[str, int, int], ...]      # (night, nominal_min, on_track_min)
    mean_nominal_min: float
    mean_on_track_min: float
    overhead_minutes: dict
    effective_ratio: float


def work_window_report(reports: list[TimelineReport]) -> WorkWindowSummary:
    """Aggregate several nights: nominal vs effective window and the overhead
    split by phase."""
    if not reports:
        raise ValueError("need at least one night")
    rows = tuple((r.night, r.nominal_minutes, r.on_track_s // 60) for r in reports)
    overhead: dict[str, float] = {}
    for name in PHASES:
        if name == "contractor_work":
            continue
        overhead[name] = sum(r.phase_minutes(name) for r in reports) / len(reports)
    mean_nominal = sum(r.nominal_minutes for r in reports) / len(reports)
    mean_on_track = sum(r.on_track_s for r in reports) / 60 / len(reports)
    return WorkWindowSummary(
        rows=rows,
        mean_nominal_min=mean_nominal,
        mean_on_track_min=mean_on_track,
        overhead_minutes=overhead,
        effective_ratio=(mean_on_track / mean_nominal) if mean_nominal else 0.0,
    )
