"""Online assignment of requests to shuttles with ride sharing, idle
relocation, and demand-weighted rebalancing.

Assignment evaluates every feasible splice of a pickup/dropoff pair into
every candidate vehicle's leg sequence (the hot loop lives in
:mod:`odtsim.kernels`). Feasibility means seat capacity holds at every prefix
and no already-planned rider's predicted ride time grows beyond
``stretch_factor`` times its current prediction. The objective is
``predicted_wait + ride_weight * added detour to other riders``; ties go to
the lowest vehicle id, then the earliest insertion position.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Optional

import numpy as np

from .domain import Request, RequestPhase, TERMINAL_PHASES, VirtualStop
from .errors import AlreadyTerminal, NoIdleStopInZone, UnknownRequest
from .kernels import best_insertion
from .travel import TravelProvider

_EPS = 1e-9


class LegAction(str, Enum):
    PICKUP = "pickup"
    DROPOFF = "dropoff"


@dataclass
class PlanLeg:
    request_id: str
    action: LegAction
    stop_id: str
    planned_arrival: int
    group_size: int


@dataclass(frozen=True)
class DispatchParams:
    stretch_factor: float = 1.5
    ride_weight: float = 0.5
    dwell_s: int = 30
    reaction_allowance_s: int = 0
    rebalance_period_s: int = 0


@dataclass
class VehicleSnapshot:
    """Dispatch-facing view of one vehicle.

    ``anchor_stop``/``anchor_time`` say where and when the vehicle is next
    free to start driving; legs before ``locked_legs`` are already underway
    and cannot be displaced. ``onboard`` maps request id to
    (group_size, board_time).
    """

    vehicle_id: str
    zone_id: str
    capacity: int
    anchor_stop: str
    anchor_time: int
    plan: list[PlanLeg] = field(default_factory=list)
    onboard: dict[str, tuple[int, int]] = field(default_factory=dict)
    locked_legs: int = 0


@dataclass(frozen=True)
class Assignment:
    request_id: str
    vehicle_id: str
    plan: list[PlanLeg]
    predicted_wait: int
    predicted_ride: int
    objective: float


def _plan_arrays(v: VehicleSnapshot, provider: TravelProvider):
    n = len(v.plan)
    stop_idx = np.empty(n, dtype=np.int32)
    load_delta = np.empty(n, dtype=np.int32)
    pair_pick = np.full(n, -1, dtype=np.int32)
    board_time = np.zeros(n, dtype=np.float64)
    pickup_pos: dict[str, int] = {}
    for k, leg in enumerate(v.plan):
        stop_idx[k] = provider.index_of(leg.stop_id)
        if leg.action == LegAction.PICKUP:
            load_delta[k] = leg.group_size
            pickup_pos[leg.request_id] = k
        else:
            load_delta[k] = -leg.group_size
            if leg.request_id in pickup_pos:
                pair_pick[k] = pickup_pos[leg.request_id]
            else:
                board_time[k] = float(v.onboard[leg.request_id][1])
    return stop_idx, load_delta, pair_pick, board_time


def plan_arrivals(
    v: VehicleSnapshot, plan: list[PlanLeg], provider: TravelProvider, dwell_s: int
) -> list[int]:
    """Predicted arrival time at each leg of ``plan`` driven from the
    vehicle's anchor, with one dwell after every completed leg."""
    out = []
    t = v.anchor_time
    prev = v.anchor_stop
    for leg in plan:
        t += provider.drive_time(prev, leg.stop_id)
        out.append(int(t))
        t += dwell_s
        prev = leg.stop_id
    return out


def assign(
    req: Request,
    fleet: Iterable[VehicleSnapshot],
    provider: TravelProvider,
    params: DispatchParams,
) -> Optional[Assignment]:
    """Best feasible insertion of ``req`` across the fleet, or None when no
    vehicle can take it (the request then queues; queueing is a normal
    outcome, not an error)."""
    candidates = sorted(
        (v for v in fleet if v.zone_id == req.zone_id), key=lambda v: v.vehicle_id
    )
    pu = provider.index_of(req.origin_stop)
    do = provider.index_of(req.destination_stop)
    best = None  # (core, vehicle, i, j, detour)
    for v in candidates:
        stop_idx, load_delta, pair_pick, board_time = _plan_arrays(v, provider)
        onboard0 = sum(g for g, _ in v.onboard.values())
        res = best_insertion(
            provider.seconds,
            provider.index_of(v.anchor_stop),
            float(v.anchor_time),
            float(params.dwell_s),
            stop_idx,
            load_delta,
            pair_pick,
            board_time,
            onboard0,
            v.capacity,
            pu,
            do,
            req.group_size,
            params.stretch_factor,
            params.ride_weight,
            v.locked_legs,
        )
        if res is None:
            continue
        core = res[0]
        if best is None or core < best[0] - _EPS:
            best = (core, v, res[1], res[2], res[5])
    if best is None:
        return None
    _, v, i, j, detour = best
    new_plan = list(v.plan)
    new_plan.insert(i, PlanLeg(req.id, LegAction.PICKUP, req.origin_stop, 0, req.group_size))
    new_plan.insert(j + 1, PlanLeg(req.id, LegAction.DROPOFF, req.destination_stop, 0, req.group_size))
    arrivals = plan_arrivals(v, new_plan, provider, params.dwell_s)
    for leg, arr in zip(new_plan, arrivals):
        leg.planned_arrival = arr
    predicted_wait = arrivals[i] - req.submit_time
    predicted_ride = arrivals[j + 1] - arrivals[i]
    objective = float(predicted_wait) + params.ride_weight * detour
    return Assignment(
        request_id=req.id,
        vehicle_id=v.vehicle_id,
        plan=new_plan,
        predicted_wait=predicted_wait,
        predicted_ride=predicted_ride,
        objective=objective,
    )


@dataclass(frozen=True)
class CancelOutcome:
    request_id: str
    vehicle_id: Optional[str]
    removed_legs: int
    plan_emptied: bool


def handle_cancel(request_id: str, requests: Mapping[str, Request], vehicles) -> CancelOutcome:
    """Drop a pending request's legs from its vehicle's plan.

    ``vehicles`` maps vehicle id to any object with a mutable ``plan`` list.
    A plan that empties signals the caller to issue an idle relocation.
    Queued (never-assigned) requests yield a zero-leg outcome; the caller
    owns dequeueing.
    """
    req = requests.get(request_id)
    if req is None:
        raise UnknownRequest(request_id)
    phase = req.state.phase
    if phase in TERMINAL_PHASES or phase == RequestPhase.RIDING:
        raise AlreadyTerminal(f"request {request_id} in state {phase.value}")
    vid = req.state.assigned_vehicle
    if vid is None:
        return CancelOutcome(request_id, None, 0, False)
    vehicle = vehicles[vid]
    before = len(vehicle.plan)
    vehicle.plan[:] = [leg for leg in vehicle.plan if leg.request_id != request_id]
    removed = before - len(vehicle.plan)
    return CancelOutcome(request_id, vid, removed, len(vehicle.plan) == 0)


def idle_relocation_target(
    current_stop: str,
    zone_id: str,
    stops: Mapping[str, VirtualStop],
    provider: TravelProvider,
) -> str:
    """Idle-flagged stop in the zone minimizing drive time from the current
    stop; ties broken by lowest stop id."""
    candidates = sorted(
        s.id for s in stops.values() if s.zone_id == zone_id and s.is_idle_location
    )
    if not candidates:
        raise NoIdleStopInZone(zone_id)
    return min(candidates, key=lambda sid: (provider.drive_time(current_stop, sid), sid))


@dataclass(frozen=True)
class RebalanceCommand:
    vehicle_id: str
    target_stop: str


def rebalance(
    idle_vehicles: list[tuple[str, str]],
    weights: Mapping[str, float],
    idle_stops: list[str],
    provider: TravelProvider,
    queued: int = 0,
) -> list[RebalanceCommand]:
    """Greedy repositioning of idle vehicles toward forecast demand.

    ``idle_vehicles`` is (vehicle_id, current_stop) for vehicles with empty
    plans; ``weights`` are nonnegative per-stop demand weights. Repeatedly
    applies the single relocation that most reduces the weighted expected
    pickup time (weight times drive from the nearest committed vehicle
    position), at most one move per vehicle, stopping when no strict
    improvement remains. Zones with queued requests are left alone so no
    queued request loses its serving fleet.
    """
    if queued > 0 or not idle_vehicles or not weights or not idle_stops:
        return []
    if any(w < 0 for w in weights.values()):
        raise ValueError("forecast weights must be nonnegative")
    positions = dict(idle_vehicles)

    def objective(pos: dict[str, str]) -> float:
        return sum(
            w * min(provider.drive_time(p, s) for p in pos.values())
            for s, w in weights.items()
            if w > 0
        )

    current = objective(positions)
    movable = sorted(positions)
    commands: list[RebalanceCommand] = []
    while movable:
        best = None  # (new_objective, vehicle_id, target)
        for vid in movable:
            origin = positions[vid]
            for target in sorted(idle_stops):
                if target == origin:
                    continue
                positions[vid] = target
                obj = objective(positions)
                positions[vid] = origin
                if obj >= current - _EPS:
                    continue
                if best is None or obj < best[0] - _EPS:
                    best = (obj, vid, target)
        if best is None:
            break
        current, vid, target = best
        commands.append(RebalanceCommand(vid, target))
        positions[vid] = target
        movable.remove(vid)
    return commands
