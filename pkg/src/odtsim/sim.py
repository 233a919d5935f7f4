"""Deterministic discrete-event simulator for the zone-based shuttle protocol.

One run processes scheduled inputs (shifts, request submissions, scripted
cancellations, admin sign-offs) through the dispatch engine and emits the
event log. Everything random flows from one seeded generator, sampled in
event order, so identical (scenario, seed) pairs produce byte-identical logs.

Protocol highlights, mirrored from the driver/monitor workflow:

* Drivers see one leg at a time. Every trip-leg instruction samples a driver
  reaction; instructions to an empty vehicle arm the removal deadline.
* Drives are never diverted mid-segment. A vehicle that is driving anchors
  new insertions at its drive target; plan edits take effect at arrival.
* Segment mileage is recorded on the DriverResponded event that starts the
  drive, labeled with the onboard request ids for shared-mileage accounting.
* After its last leg a vehicle relocates to the nearest idle location.
* No new assignments happen after the service day closes; in-progress plans
  run to completion and still-queued requests are canceled at close.
"""

from __future__ import annotations

import bisect
import heapq
import json
import os
import random
from dataclasses import dataclass, field
from typing import Optional

from . import dispatch as dsp
from .domain import (
    EventKind,
    EventLog,
    Request,
    RequestPhase,
    RegularActivity,
    StatusTop,
    TERMINAL_PHASES,
    VehicleStatus,
    VirtualStop,
    Zone,
    load_network_file,
    load_requests_csv,
    validate_request,
)
from .errors import EmptyEmpiricalFile, NoIdleStopInZone, ScenarioInvalid
from .lifecycle import (
    FleetLifecycle,
    RemovalDecision,
    RemovalPolicy,
    ShiftSchedule,
    ShiftWindow,
)
from .travel import MODE_GRID, MODE_MATRIX, TravelProvider

DAY_S = 86_400
DEFAULT_SERVICE_START_S = 6 * 3600
DEFAULT_SERVICE_END_S = 19 * 3600


# --- behavior models ----------------------------------------------------------


@dataclass(frozen=True)
class ReactionTimeModel:
    """Driver reaction-time sampler: constant, log-normal, or empirical."""

    family: str
    value: float = 0.0
    mu: float = 0.0
    sigma: float = 1.0
    samples: tuple[float, ...] = ()

    @classmethod
    def constant(cls, value: float) -> "ReactionTimeModel":
        if value < 0:
            raise ScenarioInvalid("reaction time must be nonnegative")
        return cls(family="constant", value=float(value))

    @classmethod
    def lognormal(cls, mu: float, sigma: float) -> "ReactionTimeModel":
        if sigma <= 0:
            raise ScenarioInvalid("lognormal sigma must be positive")
        return cls(family="lognormal", mu=float(mu), sigma=float(sigma))

    @classmethod
    def empirical(cls, samples) -> "ReactionTimeModel":
        samples = tuple(float(s) for s in samples)
        if not samples:
            raise EmptyEmpiricalFile("empirical reaction model needs at least one sample")
        if any(s < 0 for s in samples):
            raise ScenarioInvalid("reaction samples must be nonnegative")
        return cls(family="empirical", samples=samples)

    @classmethod
    def from_config(cls, doc: dict, base_dir: str = ".") -> "ReactionTimeModel":
        family = doc.get("family", "constant")
        if family == "constant":
            return cls.constant(doc.get("value", 0.0))
        if family == "lognormal":
            return cls.lognormal(doc["mu"], doc["sigma"])
        if family == "empirical":
            if "file" in doc:
                with open(os.path.join(base_dir, doc["file"]), encoding="utf-8") as fh:
                    samples = [float(line) for line in fh if line.strip()]
            else:
                samples = doc.get("samples", [])
            return cls.empirical(samples)
        raise ScenarioInvalid(f"unknown reaction model family {family!r}")


def sample_reaction(model: ReactionTimeModel, rng: random.Random) -> float:
    """One nonnegative reaction-time draw in seconds."""
    if model.family == "constant":
        return model.value
    if model.family == "lognormal":
        return rng.lognormvariate(model.mu, model.sigma)
    if model.family == "empirical":
        if not model.samples:
            raise EmptyEmpiricalFile("empirical reaction model has no samples")
        return model.samples[rng.randrange(len(model.samples))]
    raise ScenarioInvalid(f"unknown reaction model family {model.family!r}")


# --- scenario -----------------------------------------------------------------


@dataclass(frozen=True)
class VehicleSpec:
    id: str
    zone_id: str
    start_stop: str


@dataclass
class Scenario:
    zones: dict[str, Zone]
    stops: dict[str, VirtualStop]
    vehicles: list[VehicleSpec]
    requests: list[Request]
    scripted_cancels: dict[str, int]
    shifts: ShiftSchedule
    provider: TravelProvider
    dispatch: dsp.DispatchParams = field(default_factory=dsp.DispatchParams)
    removal_policy: RemovalPolicy = field(default_factory=RemovalPolicy.disabled)
    reaction: ReactionTimeModel = field(default_factory=lambda: ReactionTimeModel.constant(0))
    p_noshow: float = 0.0
    noshow_wait_s: int = 300
    service_start_s: int = DEFAULT_SERVICE_START_S
    service_end_s: int = DEFAULT_SERVICE_END_S
    days: int = 1
    seed: int = 0
    forecast: dict[tuple[str, int], float] = field(default_factory=dict)
    admin_removals: list[tuple[str, int]] = field(default_factory=list)
    removal_cooldown_s: int = 0

    def service_windows(self) -> list[tuple[int, int]]:
        return [
            (d * DAY_S + self.service_start_s, d * DAY_S + self.service_end_s)
            for d in range(self.days)
        ]

    def in_service(self, t: int) -> bool:
        if not 0 <= t // DAY_S < self.days:
            return False
        tod = t % DAY_S
        return self.service_start_s <= tod < self.service_end_s


def _default_vehicles(zones: dict[str, Zone], stops: dict[str, VirtualStop]) -> list[VehicleSpec]:
    specs = []
    for zi, zid in enumerate(sorted(zones)):
        idle = sorted(s.id for s in stops.values() if s.zone_id == zid and s.is_idle_location)
        start = idle[0] if idle else sorted(s.id for s in stops.values() if s.zone_id == zid)[0]
        for k in range(zones[zid].fleet_size):
            specs.append(VehicleSpec(id=f"{4000 + 100 * zi + k}", zone_id=zid, start_stop=start))
    return specs


def _default_shifts(vehicles: list[VehicleSpec], scenario_doc_windows) -> ShiftSchedule:
    windows: dict[str, list[ShiftWindow]] = {}
    for spec in vehicles:
        windows[spec.id] = [ShiftWindow(a, b) for a, b in scenario_doc_windows]
    return ShiftSchedule(windows)


def load_forecast_csv(path: str) -> dict[tuple[str, int], float]:
    import csv as _csv

    out: dict[tuple[str, int], float] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = _csv.DictReader(fh)
        needed = {"stop_id", "hour", "weight"}
        if not needed.issubset(set(reader.fieldnames or [])):
            raise ScenarioInvalid(f"forecast CSV must have columns {sorted(needed)}")
        for row in reader:
            out[(row["stop_id"], int(row["hour"]))] = float(row["weight"])
    return out


def load_scenario(path: str) -> Scenario:
    """Read a scenario JSON document; file references resolve relative to it."""
    base = os.path.dirname(os.path.abspath(path))
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)

    def resolve(name: str) -> str:
        return os.path.join(base, doc[name])

    zones, stops = load_network_file(resolve("network_file"))
    requests, scripted = load_requests_csv(resolve("requests_file"))

    pdoc = doc.get("provider", {"mode": "grid", "speed_mps": 8.0, "detour_factor": 1.3})
    if pdoc["mode"] == MODE_MATRIX:
        provider = TravelProvider.from_matrix_csv(
            os.path.join(base, pdoc["file"]), stop_ids=sorted(stops)
        )
    elif pdoc["mode"] == MODE_GRID:
        provider = TravelProvider.synthetic_grid(
            stops, float(pdoc["speed_mps"]), float(pdoc["detour_factor"])
        )
    else:
        raise ScenarioInvalid(f"unknown provider mode {pdoc['mode']!r}")

    service = doc.get("service", {})
    start_s = int(service.get("start_s", DEFAULT_SERVICE_START_S))
    end_s = int(service.get("end_s", DEFAULT_SERVICE_END_S))
    days = int(service.get("days", 1))

    if "vehicles" in doc:
        vehicles = [
            VehicleSpec(str(v["id"]), str(v["zone_id"]), str(v["start_stop"]))
            for v in doc["vehicles"]
        ]
    else:
        vehicles = _default_vehicles(zones, stops)

    if "shifts_file" in doc:
        shifts = ShiftSchedule.from_csv(resolve("shifts_file"))
    else:
        windows = [(d * DAY_S + start_s, d * DAY_S + end_s) for d in range(days)]
        shifts = _default_shifts(vehicles, windows)

    ddoc = doc.get("dispatch", {})
    params = dsp.DispatchParams(
        stretch_factor=float(ddoc.get("stretch_factor", 1.5)),
        ride_weight=float(ddoc.get("ride_weight", 0.5)),
        dwell_s=int(doc.get("dwell_s", 30)),
        reaction_allowance_s=int(ddoc.get("reaction_allowance_s", 0)),
        rebalance_period_s=int(ddoc.get("rebalance_period_s", 0)),
    )

    policy = RemovalPolicy.from_config(doc.get("removal_policy", []))
    behavior = doc.get("behavior", {})
    reaction = ReactionTimeModel.from_config(behavior.get("reaction", {"family": "constant", "value": 0}), base)

    forecast = {}
    if "forecast_file" in doc:
        forecast = load_forecast_csv(resolve("forecast_file"))

    admin = [(str(a["vehicle_id"]), int(a["time"])) for a in doc.get("admin_removals", [])]

    return Scenario(
        zones=zones,
        stops=stops,
        vehicles=vehicles,
        requests=requests,
        scripted_cancels=scripted,
        shifts=shifts,
        provider=provider,
        dispatch=params,
        removal_policy=policy,
        reaction=reaction,
        p_noshow=float(behavior.get("p_noshow", 0.0)),
        noshow_wait_s=int(behavior.get("noshow_wait_s", 300)),
        service_start_s=start_s,
        service_end_s=end_s,
        days=days,
        seed=int(doc.get("seed", 0)),
        forecast=forecast,
        admin_removals=admin,
        removal_cooldown_s=int(doc.get("removal_cooldown_s", 0)),
    )


def validate_scenario(s: Scenario) -> None:
    """Check every cross-reference; raises ScenarioInvalid naming the first
    failure."""
    for zone in s.zones.values():
        zone.validate()
        idle = [st for st in s.stops.values() if st.zone_id == zone.id and st.is_idle_location]
        if not idle:
            raise ScenarioInvalid(f"zone {zone.id} has no idle location")
    for stop in s.stops.values():
        stop.validate(s.zones)
        if not s.provider.covers(stop.id):
            raise ScenarioInvalid(f"travel provider does not cover stop {stop.id}")
    for zid in s.zones:
        zone_stops = sorted(st.id for st in s.stops.values() if st.zone_id == zid)
        if not s.provider.complete_over(zone_stops):
            raise ScenarioInvalid(f"travel provider incomplete over zone {zid}")
    seen_vehicles = set()
    for spec in s.vehicles:
        if spec.id in seen_vehicles:
            raise ScenarioInvalid(f"duplicate vehicle id {spec.id}")
        seen_vehicles.add(spec.id)
        if spec.zone_id not in s.zones:
            raise ScenarioInvalid(f"vehicle {spec.id}: unknown zone {spec.zone_id}")
        start = s.stops.get(spec.start_stop)
        if start is None or start.zone_id != spec.zone_id:
            raise ScenarioInvalid(f"vehicle {spec.id}: bad start stop {spec.start_stop}")
    for vid in s.shifts.windows:
        if vid not in seen_vehicles:
            raise ScenarioInvalid(f"shift schedule references unknown vehicle {vid}")
    s.shifts.validate(s.service_windows())
    seen_requests = set()
    for req in s.requests:
        if req.id in seen_requests:
            raise ScenarioInvalid(f"duplicate request id {req.id}")
        seen_requests.add(req.id)
        result = validate_request(req, s.zones, s.stops)
        if not result.ok:
            raise ScenarioInvalid(f"request {req.id}: {result.violation} ({result.detail})")
        if not s.in_service(req.submit_time):
            raise ScenarioInvalid(f"request {req.id}: submitted outside service hours")
        cancel = s.scripted_cancels.get(req.id)
        if cancel is not None and cancel <= req.submit_time:
            raise ScenarioInvalid(f"request {req.id}: cancel_time before submit_time")
    for (stop_id, hour), w in s.forecast.items():
        if stop_id not in s.stops:
            raise ScenarioInvalid(f"forecast references unknown stop {stop_id}")
        if not 0 <= hour <= 23 or w < 0:
            raise ScenarioInvalid(f"forecast row for stop {stop_id} invalid")
    for vid, t in s.admin_removals:
        if vid not in seen_vehicles:
            raise ScenarioInvalid(f"admin removal references unknown vehicle {vid}")


# --- runtime ------------------------------------------------------------------

_OFFLINE = "offline"
_IDLE = "idle"
_AWAIT = "await_response"
_DRIVING = "driving"
_SERVING = "serving"


@dataclass
class VehicleRuntime:
    id: str
    zone_id: str
    capacity: int
    start_stop: str
    stop: str = ""
    signed_in: bool = False
    phase: str = _OFFLINE
    plan: list[dsp.PlanLeg] = field(default_factory=list)
    onboard: dict[str, tuple[int, int]] = field(default_factory=dict)
    token: int = 0
    instruction: Optional[tuple] = None  # ("leg", request_id, action, stop) | ("relocate"|"rebalance", target)
    instr_time: int = 0
    removal_token: int = 0
    drive: Optional[tuple] = None  # (purpose, request_id|None, action|None, from_stop, target)
    drive_eta: int = 0
    serving_until: int = 0
    serving_request: Optional[str] = None
    pending_signout: bool = False
    pending_admin: bool = False
    removed_at: Optional[int] = None

    @property
    def status(self) -> VehicleStatus:
        if self.onboard:
            return VehicleStatus(top=StatusTop.WITH_RIDERS, regular_sub=None)
        if self.phase == _AWAIT:
            return VehicleStatus(regular_sub=RegularActivity.WAITING_FOR_DEPARTURE)
        if self.phase == _DRIVING:
            return VehicleStatus(regular_sub=RegularActivity.DRIVING_WITHOUT_PASSENGERS)
        if self.phase == _SERVING:
            return VehicleStatus(regular_sub=RegularActivity.WAITING_FOR_PASSENGERS)
        return VehicleStatus(regular_sub=RegularActivity.IDLING)


@dataclass
class SimResult:
    events: EventLog
    summary: dict


class Simulation:
    """Single-writer event loop over one scenario."""

    def __init__(self, scenario: Scenario, seed: Optional[int] = None) -> None:
        validate_scenario(scenario)
        self.s = scenario
        self.seed = scenario.seed if seed is None else seed
        self.rng = random.Random(self.seed)
        self.log = EventLog()
        self.provider = scenario.provider
        self.requests: dict[str, Request] = {}
        self.vehicles: dict[str, VehicleRuntime] = {
            spec.id: VehicleRuntime(
                id=spec.id,
                zone_id=spec.zone_id,
                capacity=8,
                start_stop=spec.start_stop,
            )
            for spec in scenario.vehicles
        }
        self.lifecycle = FleetLifecycle(
            scenario.removal_policy, {spec.id: spec.zone_id for spec in scenario.vehicles}
        )
        self.queues: dict[str, list[tuple[int, str]]] = {zid: [] for zid in scenario.zones}
        self._heap: list[tuple] = []
        self._eseq = 0
        self.now = 0

    # -- scheduling -------------------------------------------------------------

    def _schedule(self, t: int, handler: str, *args) -> None:
        heapq.heappush(self._heap, (int(t), self._eseq, handler, args))
        self._eseq += 1

    # -- public entry -------------------------------------------------------------

    def run(self) -> SimResult:
        s = self.s
        for vid, windows in sorted(s.shifts.windows.items()):
            for w in windows:
                self._schedule(w.sign_in_s, "sign_in", vid)
                self._schedule(w.sign_out_s, "sign_out", vid)
        for req in s.requests:
            self._schedule(req.submit_time, "submit", req.id)
            self.requests[req.id] = req
        for rid, t in s.scripted_cancels.items():
            self._schedule(t, "cancel", rid)
        for d in range(s.days):
            self._schedule(d * DAY_S + s.service_end_s, "day_end")
            if s.dispatch.rebalance_period_s > 0 and s.forecast:
                t = d * DAY_S + s.service_start_s + s.dispatch.rebalance_period_s
                while t < d * DAY_S + s.service_end_s:
                    self._schedule(t, "rebalance_tick")
                    t += s.dispatch.rebalance_period_s
        for vid, t in s.admin_removals:
            self._schedule(t, "admin_remove", vid)

        handlers = {
            "sign_in": self._h_sign_in,
            "sign_out": self._h_sign_out,
            "submit": self._h_submit,
            "cancel": self._h_cancel,
            "response": self._h_response,
            "removal": self._h_removal,
            "arrival": self._h_arrival,
            "board": self._h_board,
            "alight": self._h_alight,
            "noshow": self._h_noshow,
            "day_end": self._h_day_end,
            "rebalance_tick": self._h_rebalance_tick,
            "admin_remove": self._h_admin_remove,
        }
        while self._heap:
            t, _, handler, args = heapq.heappop(self._heap)
            self.now = t
            handlers[handler](t, *args)
        return SimResult(self.log, self._summary())

    # -- dispatch integration -----------------------------------------------------

    def _snapshot(self, v: VehicleRuntime, now: int) -> dsp.VehicleSnapshot:
        allowance = self.s.dispatch.reaction_allowance_s
        if v.phase == _DRIVING:
            anchor_stop, anchor_time = v.drive[4], v.drive_eta
            locked = 1 if v.drive[0] == "leg" else 0
        elif v.phase == _SERVING:
            anchor_stop, anchor_time = v.stop, v.serving_until
            locked = 1
        elif v.phase == _AWAIT and v.instruction[0] == "leg":
            anchor_stop = v.stop
            anchor_time = max(now, v.instr_time + allowance)
            locked = 1
        else:  # idle, or awaiting a relocation/rebalance response that a new job overrides
            anchor_stop = v.stop
            anchor_time = now + allowance
            locked = 0
        return dsp.VehicleSnapshot(
            vehicle_id=v.id,
            zone_id=v.zone_id,
            capacity=v.capacity,
            anchor_stop=anchor_stop,
            anchor_time=anchor_time,
            plan=v.plan,
            onboard=v.onboard,
            locked_legs=locked,
        )

    def _candidates(self, zone_id: str, now: int) -> list[dsp.VehicleSnapshot]:
        out = []
        for vid in sorted(self.vehicles):
            v = self.vehicles[vid]
            if (
                v.signed_in
                and v.zone_id == zone_id
                and not v.pending_signout
                and not v.pending_admin
            ):
                out.append(self._snapshot(v, now))
        return out

    def _try_assign(self, req: Request, now: int) -> bool:
        assignment = dsp.assign(req, self._candidates(req.zone_id, now), self.provider, self.s.dispatch)
        if assignment is None:
            return False
        v = self.vehicles[assignment.vehicle_id]
        v.plan = assignment.plan
        req.state.phase = RequestPhase.ASSIGNED
        req.state.assigned_vehicle = v.id
        self.log.emit(
            now,
            EventKind.ASSIGNED,
            vehicle_id=v.id,
            request_id=req.id,
            rider_id=req.rider_id,
            predicted_wait_s=assignment.predicted_wait,
            predicted_ride_s=assignment.predicted_ride,
        )
        if v.phase == _IDLE:
            self._issue_next(v, now)
        elif v.phase == _AWAIT and v.instruction[0] in ("relocate", "rebalance"):
            self._cancel_instruction(v, now)
            self._issue_next(v, now)
        return True

    def _retry_queue(self, zone_id: str, now: int) -> None:
        if not self.s.in_service(now):
            return
        queue = self.queues[zone_id]
        remaining: list[tuple[int, str]] = []
        for entry in list(queue):
            req = self.requests[entry[1]]
            if req.state.phase != RequestPhase.SUBMITTED:
                continue
            if not self._try_assign(req, now):
                remaining.append(entry)
        queue[:] = remaining

    def _enqueue(self, req: Request) -> None:
        bisect.insort(self.queues[req.zone_id], (req.submit_time, req.id))

    # -- instruction / drive flow ---------------------------------------------------

    def _issue_next(self, v: VehicleRuntime, now: int) -> None:
        leg = v.plan[0]
        v.instruction = ("leg", leg.request_id, leg.action.value, leg.stop_id)
        v.instr_time = now
        v.phase = _AWAIT
        v.token += 1
        self.log.emit(
            now,
            EventKind.VEHICLE_DISPATCHED,
            vehicle_id=v.id,
            request_id=leg.request_id,
            action=leg.action.value,
            stop_id=leg.stop_id,
        )
        deadline, ltoken = self.lifecycle.on_instruction(v.id, now, onboard_empty=not v.onboard)
        v.removal_token = ltoken
        reaction = int(round(sample_reaction(self.s.reaction, self.rng)))
        self._schedule(now + reaction, "response", v.id, v.token, reaction)
        if deadline is not None:
            self._schedule(deadline, "removal", v.id, ltoken)

    def _issue_relocation(self, v: VehicleRuntime, now: int, kind: str, target: str) -> None:
        v.instruction = (kind, target)
        v.instr_time = now
        v.phase = _AWAIT
        v.token += 1
        self.lifecycle.on_instruction(v.id, now, onboard_empty=True, arm_removal=False)
        reaction = int(round(sample_reaction(self.s.reaction, self.rng)))
        self._schedule(now + reaction, "response", v.id, v.token, reaction)

    def _cancel_instruction(self, v: VehicleRuntime, now: int) -> None:
        v.token += 1
        v.instruction = None
        self.lifecycle.on_response(v.id, now)

    def _after_task(self, v: VehicleRuntime, now: int) -> None:
        if v.phase == _OFFLINE:
            return
        if v.plan:
            self._issue_next(v, now)
            return
        if v.pending_admin and not v.onboard:
            self._do_admin_remove(v, now)
            return
        if v.pending_signout:
            self._do_sign_out(v, now)
            return
        self._relocate_or_idle(v, now)

    def _relocate_or_idle(self, v: VehicleRuntime, now: int) -> None:
        try:
            target = dsp.idle_relocation_target(v.stop, v.zone_id, self.s.stops, self.provider)
        except NoIdleStopInZone:
            v.phase = _IDLE
            v.instruction = None
            return
        if target == v.stop:
            v.phase = _IDLE
            v.instruction = None
            return
        self.log.emit(
            now,
            EventKind.RELOCATE_TO_IDLE,
            vehicle_id=v.id,
            from_stop=v.stop,
            to_stop=target,
        )
        self._issue_relocation(v, now, "relocate", target)

    def _begin_drive(self, v: VehicleRuntime, now: int, reaction: int) -> None:
        kind = v.instruction[0]
        if kind == "leg":
            _, request_id, action, target = v.instruction
        else:
            request_id = action = None
            target = v.instruction[1]
        drive_s = self.provider.drive_time(v.stop, target)
        drive_m = self.provider.drive_distance(v.stop, target)
        self.log.emit(
            now,
            EventKind.DRIVER_RESPONDED,
            vehicle_id=v.id,
            request_id=request_id,
            instruction=kind,
            reaction_s=reaction,
            segment={
                "from_stop": v.stop,
                "to_stop": target,
                "drive_s": drive_s,
                "drive_m": drive_m,
                "onboard": sorted(v.onboard),
            },
        )
        v.drive = (kind, request_id, action, v.stop, target)
        v.drive_eta = now + drive_s
        v.phase = _DRIVING
        v.instruction = None
        self._schedule(v.drive_eta, "arrival", v.id, v.token)

    # -- handlers -------------------------------------------------------------------

    def _h_sign_in(self, t: int, vid: str) -> None:
        v = self.vehicles[vid]
        if v.signed_in:
            # A new shift starting while the previous one is still winding
            # down keeps the vehicle online; the deferred sign-out lapses.
            v.pending_signout = False
            return
        if v.removed_at is not None and t < v.removed_at + self.s.removal_cooldown_s:
            rejoin = v.removed_at + self.s.removal_cooldown_s
            windows = self.s.shifts.windows.get(vid, [])
            if any(w.sign_in_s <= rejoin < w.sign_out_s for w in windows):
                self._schedule(rejoin, "sign_in", vid)
            return
        v.removed_at = None
        v.signed_in = True
        v.pending_signout = False
        if not v.stop:
            v.stop = v.start_stop
        v.phase = _IDLE
        v.token += 1
        self.lifecycle.sign_in(vid, t)
        self.log.emit(t, EventKind.SIGN_IN, vehicle_id=vid, zone_id=v.zone_id, stop_id=v.stop)
        self._after_task(v, t)
        self._retry_queue(v.zone_id, t)

    def _do_sign_out(self, v: VehicleRuntime, t: int) -> None:
        v.token += 1
        v.signed_in = False
        v.phase = _OFFLINE
        v.instruction = None
        v.pending_signout = False
        self.lifecycle.sign_out(v.id, t)
        self.log.emit(t, EventKind.SIGN_OUT, vehicle_id=v.id, zone_id=v.zone_id, stop_id=v.stop)

    def _h_sign_out(self, t: int, vid: str) -> None:
        v = self.vehicles[vid]
        if not v.signed_in:
            return
        if v.phase == _IDLE or (v.phase == _AWAIT and v.instruction[0] in ("relocate", "rebalance")):
            if v.phase == _AWAIT:
                self._cancel_instruction(v, t)
            self._do_sign_out(v, t)
        else:
            v.pending_signout = True

    def _h_submit(self, t: int, rid: str) -> None:
        req = self.requests[rid]
        self.log.emit(
            t,
            EventKind.REQUEST_SUBMITTED,
            request_id=rid,
            rider_id=req.rider_id,
            zone_id=req.zone_id,
            origin_stop=req.origin_stop,
            destination_stop=req.destination_stop,
            group_size=req.group_size,
            channel=req.channel.value,
        )
        if not self._try_assign(req, t):
            self._enqueue(req)

    def _h_cancel(self, t: int, rid: str) -> None:
        req = self.requests[rid]
        phase = req.state.phase
        if phase in TERMINAL_PHASES or phase == RequestPhase.RIDING:
            return  # too late to cancel
        if phase == RequestPhase.SUBMITTED:
            self.queues[req.zone_id] = [e for e in self.queues[req.zone_id] if e[1] != rid]
            req.state.phase = RequestPhase.CANCELED_BY_RIDER
            req.state.cancel_time = t
            self.log.emit(t, EventKind.CANCELED, request_id=rid, rider_id=req.rider_id, reason="rider")
            return
        outcome = dsp.handle_cancel(rid, self.requests, self.vehicles)
        req.state.phase = RequestPhase.CANCELED_BY_RIDER
        req.state.cancel_time = t
        self.log.emit(t, EventKind.CANCELED, request_id=rid, rider_id=req.rider_id, reason="rider")
        v = self.vehicles[outcome.vehicle_id]
        if v.phase == _AWAIT and v.instruction[0] == "leg" and v.instruction[1] == rid:
            self._cancel_instruction(v, t)
            self._after_task(v, t)
        elif v.phase == _SERVING and v.serving_request == rid:
            v.token += 1
            v.serving_request = None
            self._after_task(v, t)
        self._retry_queue(v.zone_id, t)

    def _h_response(self, t: int, vid: str, token: int, reaction: int) -> None:
        v = self.vehicles[vid]
        if token != v.token or not v.signed_in or v.phase != _AWAIT:
            return
        self.lifecycle.on_response(vid, t)
        self._begin_drive(v, t, reaction)

    def _h_removal(self, t: int, vid: str, ltoken: int) -> None:
        v = self.vehicles[vid]
        decision = self.lifecycle.on_timer_expiry(vid, t, ltoken)
        if decision != RemovalDecision.REMOVED:
            return
        requeued = sorted({leg.request_id for leg in v.plan})
        self.log.emit(
            t,
            EventKind.REMOVED_BY_SERVER,
            vehicle_id=vid,
            zone_id=v.zone_id,
            requeued=requeued,
        )
        v.plan = []
        v.token += 1
        v.signed_in = False
        v.phase = _OFFLINE
        v.instruction = None
        v.pending_signout = False
        v.removed_at = t
        self.log.emit(t, EventKind.SIGN_OUT, vehicle_id=vid, zone_id=v.zone_id, stop_id=v.stop)
        for rid in requeued:
            req = self.requests[rid]
            req.state.phase = RequestPhase.SUBMITTED
            req.state.assigned_vehicle = None
            self._enqueue(req)
        self._retry_queue(v.zone_id, t)

    def _do_admin_remove(self, v: VehicleRuntime, t: int) -> None:
        requeued = sorted({leg.request_id for leg in v.plan})
        self.lifecycle.admin_remove(v.id, t)
        self.log.emit(
            t, EventKind.REMOVED_BY_ADMIN, vehicle_id=v.id, zone_id=v.zone_id, requeued=requeued
        )
        v.plan = []
        v.token += 1
        v.signed_in = False
        v.phase = _OFFLINE
        v.instruction = None
        v.pending_admin = False
        v.pending_signout = False
        v.removed_at = t
        self.log.emit(t, EventKind.SIGN_OUT, vehicle_id=v.id, zone_id=v.zone_id, stop_id=v.stop)
        for rid in requeued:
            req = self.requests[rid]
            req.state.phase = RequestPhase.SUBMITTED
            req.state.assigned_vehicle = None
            self._enqueue(req)
        self._retry_queue(v.zone_id, t)

    def _h_admin_remove(self, t: int, vid: str) -> None:
        v = self.vehicles[vid]
        if not v.signed_in:
            return
        if not v.onboard and v.phase in (_IDLE, _AWAIT):
            if v.phase == _AWAIT:
                self._cancel_instruction(v, t)
            self._do_admin_remove(v, t)
        else:
            v.pending_admin = True

    def _h_arrival(self, t: int, vid: str, token: int) -> None:
        v = self.vehicles[vid]
        if token != v.token or v.phase != _DRIVING:
            return
        purpose, request_id, action, _, target = v.drive
        v.stop = target
        v.drive = None
        if purpose in ("relocate", "rebalance"):
            if v.plan:
                self._issue_next(v, t)
            elif v.pending_admin:
                self._do_admin_remove(v, t)
            elif v.pending_signout:
                self._do_sign_out(v, t)
            else:
                v.phase = _IDLE
            self._retry_queue(v.zone_id, t)
            return
        req = self.requests[request_id]
        leg_still_first = bool(v.plan) and v.plan[0].request_id == request_id
        if req.state.phase in TERMINAL_PHASES or not leg_still_first:
            self._after_task(v, t)  # leg was canceled mid-drive; continue with the rest
            self._retry_queue(v.zone_id, t)
            return
        if action == dsp.LegAction.PICKUP.value:
            self.log.emit(
                t,
                EventKind.ARRIVED_PICKUP,
                vehicle_id=vid,
                request_id=request_id,
                rider_id=req.rider_id,
                stop_id=target,
            )
            req.state.phase = RequestPhase.WAITING
            v.phase = _SERVING
            v.serving_request = request_id
            if self.rng.random() < self.s.p_noshow:
                v.serving_until = t + self.s.noshow_wait_s
                self._schedule(v.serving_until, "noshow", vid, v.token, request_id)
            else:
                v.serving_until = t + self.s.dispatch.dwell_s
                self._schedule(v.serving_until, "board", vid, v.token, request_id)
        else:
            v.phase = _SERVING
            v.serving_request = request_id
            v.serving_until = t + self.s.dispatch.dwell_s
            self._schedule(v.serving_until, "alight", vid, v.token, request_id)
        self._retry_queue(v.zone_id, t)

    def _h_board(self, t: int, vid: str, token: int, rid: str) -> None:
        v = self.vehicles[vid]
        if token != v.token or v.phase != _SERVING:
            return
        req = self.requests[rid]
        leg = v.plan.pop(0)
        v.onboard[rid] = (leg.group_size, t)
        v.serving_request = None
        req.state.phase = RequestPhase.RIDING
        req.state.board_time = t
        self.log.emit(
            t,
            EventKind.BOARDED,
            vehicle_id=vid,
            request_id=rid,
            rider_id=req.rider_id,
            stop_id=leg.stop_id,
            group_size=leg.group_size,
        )
        self._after_task(v, t)
        self._retry_queue(v.zone_id, t)

    def _h_alight(self, t: int, vid: str, token: int, rid: str) -> None:
        v = self.vehicles[vid]
        if token != v.token or v.phase != _SERVING:
            return
        req = self.requests[rid]
        leg = v.plan.pop(0)
        v.onboard.pop(rid, None)
        v.serving_request = None
        req.state.phase = RequestPhase.SERVED
        req.state.alight_time = t
        self.log.emit(
            t,
            EventKind.ALIGHTED,
            vehicle_id=vid,
            request_id=rid,
            rider_id=req.rider_id,
            stop_id=leg.stop_id,
            group_size=leg.group_size,
        )
        self._after_task(v, t)
        self._retry_queue(v.zone_id, t)

    def _h_noshow(self, t: int, vid: str, token: int, rid: str) -> None:
        v = self.vehicles[vid]
        if token != v.token or v.phase != _SERVING:
            return
        req = self.requests[rid]
        v.plan = [leg for leg in v.plan if leg.request_id != rid]
        v.serving_request = None
        req.state.phase = RequestPhase.NO_SHOW
        req.state.cancel_time = t
        self.log.emit(
            t, EventKind.NO_SHOW_REPORTED, vehicle_id=vid, request_id=rid, rider_id=req.rider_id
        )
        self._after_task(v, t)
        self._retry_queue(v.zone_id, t)

    def _h_day_end(self, t: int) -> None:
        for zid in sorted(self.queues):
            for _, rid in list(self.queues[zid]):
                req = self.requests[rid]
                if req.state.phase != RequestPhase.SUBMITTED:
                    continue
                req.state.phase = RequestPhase.CANCELED_BY_RIDER
                req.state.cancel_time = t
                self.log.emit(
                    t,
                    EventKind.CANCELED,
                    request_id=rid,
                    rider_id=req.rider_id,
                    reason="end_of_service",
                )
            self.queues[zid] = []

    def _h_rebalance_tick(self, t: int) -> None:
        hour = (t % DAY_S) // 3600
        for zid in sorted(self.s.zones):
            if self.queues[zid]:
                continue
            idle = [
                (v.id, v.stop)
                for v in (self.vehicles[k] for k in sorted(self.vehicles))
                if v.signed_in
                and v.zone_id == zid
                and v.phase == _IDLE
                and not v.plan
                and not v.pending_signout
                and not v.pending_admin
            ]
            weights = {
                stop_id: w
                for (stop_id, h), w in self.s.forecast.items()
                if h == hour and self.s.stops[stop_id].zone_id == zid and w > 0
            }
            idle_stops = sorted(
                st.id for st in self.s.stops.values() if st.zone_id == zid and st.is_idle_location
            )
            for cmd in dsp.rebalance(idle, weights, idle_stops, self.provider):
                v = self.vehicles[cmd.vehicle_id]
                self.log.emit(
                    t,
                    EventKind.REBALANCE_COMMAND,
                    vehicle_id=v.id,
                    from_stop=v.stop,
                    to_stop=cmd.target_stop,
                )
                self._issue_relocation(v, t, "rebalance", cmd.target_stop)

    # -- summary -------------------------------------------------------------------

    def _summary(self) -> dict:
        served = [r for r in self.requests.values() if r.state.phase == RequestPhase.SERVED]
        canceled = [
            r for r in self.requests.values() if r.state.phase == RequestPhase.CANCELED_BY_RIDER
        ]
        noshow = [r for r in self.requests.values() if r.state.phase == RequestPhase.NO_SHOW]
        waits = [r.state.board_time - r.submit_time for r in served]
        rides = [r.state.alight_time - r.state.board_time for r in served]
        online_s = 0
        sign_in_at: dict[str, int] = {}
        removals_server = removals_admin = 0
        shared_m = serving_m = 0.0
        for rec in self.log:
            if rec.kind == EventKind.SIGN_IN:
                sign_in_at[rec.vehicle_id] = rec.time
            elif rec.kind == EventKind.SIGN_OUT:
                online_s += rec.time - sign_in_at.pop(rec.vehicle_id)
            elif rec.kind == EventKind.REMOVED_BY_SERVER:
                removals_server += 1
            elif rec.kind == EventKind.REMOVED_BY_ADMIN:
                removals_admin += 1
            elif rec.kind == EventKind.DRIVER_RESPONDED:
                seg = rec.payload["segment"]
                if seg["onboard"]:
                    serving_m += seg["drive_m"]
                    if len(seg["onboard"]) >= 2:
                        shared_m += seg["drive_m"]
        return {
            "seed": self.seed,
            "requests": len(self.requests),
            "served": len(served),
            "canceled": len(canceled),
            "no_show": len(noshow),
            "riders_served": sum(r.group_size for r in served),
            "mean_wait_s": round(sum(waits) / len(waits), 2) if waits else None,
            "mean_ride_s": round(sum(rides) / len(rides), 2) if rides else None,
            "online_hours": round(online_s / 3600.0, 4),
            "removed_by_server": removals_server,
            "removed_by_admin": removals_admin,
            "shared_mileage_fraction": round(shared_m / serving_m, 6) if serving_m else 0.0,
            "events": len(self.log),
        }


def run_scenario(scenario: Scenario, seed: Optional[int] = None) -> SimResult:
    """Validate and run a scenario; identical (scenario, seed) pairs yield
    identical logs."""
    return Simulation(scenario, seed=seed).run()
