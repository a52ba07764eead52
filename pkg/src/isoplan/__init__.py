"""Traction power isolation engine: topology, energization, switching,
plate orders, weekly scheduling, night timelines, CLI, and control-room service."""

from .energization import (EnergizationResult, SwitchingState, Violation,
                           compute_energization, normal_state, parse_state,
                           unbalance_metric)
from .plate_orders import (POPSSession, PlateOrder, PlateSelectionError,
                           PopsError, coverage_check, parse_plate_library,
                           pops_transition, select_plate_order)
from .scheduler import (CRAFTS, Job, JobVariant, ResourceCalendar, WeeklyPlan,
                        apply_disruption, build_weekly_plan, effective_capacity,
                        parse_calendar, parse_jobs)
from .switching import (InterlockError, IsolationPlan, IsolationRequest,
                        OperatingOrder, PlanError, SwitchOp, Tag, execute_op,
                        parse_requests, plan_isolation, request_shared_control,
                        run_sequence, validate_op)
from .timeline import (DurationModel, NightWindow, TimelineReport,
                       simulate_night, work_window_report)
from .topology import (NetworkTopology, TopologyError, load_topology,
                       parse_network, validate_network, wire_run_check)

__all__ = [n for n in dir() if not n.startswith("_")]
