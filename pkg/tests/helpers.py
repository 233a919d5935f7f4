"""Shared builders and independent oracles for the test suite.

Oracles here deliberately re-derive behavior from first principles (brute
force, enumeration) rather than reusing engine code paths.
"""

from __future__ import annotations

import math
import random
from typing import Optional

from odtsim.dispatch import DispatchParams, LegAction, VehicleSnapshot
from odtsim.domain import (
    Channel,
    EventKind,
    EventLog,
    Request,
    StopKind,
    VirtualStop,
    Zone,
)
from odtsim.geo import haversine_m
from odtsim.lifecycle import RemovalPolicy, ShiftSchedule, ShiftWindow
from odtsim.sim import ReactionTimeModel, Scenario
from odtsim.travel import TravelProvider

BASE_LAT, BASE_LON = 33.75, -84.40
M_PER_DEG_LAT = 111_194.92664455873  # meridian meters per degree on the test sphere


def offset_latlon(north_m: float, east_m: float, base=(BASE_LAT, BASE_LON)):
    lat = base[0] + north_m / M_PER_DEG_LAT
    lon = base[1] + east_m / (M_PER_DEG_LAT * math.cos(math.radians(base[0])))
    return (lat, lon)


def square_zone(zone_id: str = "Z1", half_m: float = 5000.0, fleet_size: int = 1, base=(BASE_LAT, BASE_LON)) -> Zone:
    corners = [
        offset_latlon(-half_m, -half_m, base),
        offset_latlon(-half_m, half_m, base),
        offset_latlon(half_m, half_m, base),
        offset_latlon(half_m, -half_m, base),
    ]
    return Zone(id=zone_id, name=zone_id, boundary=corners, fleet_size=fleet_size)


def line_network(
    n_stops: int = 4,
    spacing_m: float = 500.0,
    zone_id: str = "Z1",
    idle: tuple[int, ...] = (0,),
    rail: tuple[int, ...] = (),
    fleet_size: int = 1,
    base=(BASE_LAT, BASE_LON),
):
    """One square zone with stops in a west-to-east line."""
    zone = square_zone(zone_id, half_m=max(5000.0, n_stops * spacing_m), fleet_size=fleet_size, base=base)
    stops = {}
    for k in range(n_stops):
        sid = f"{zone_id}-s{k}"
        lat, lon = offset_latlon(0.0, k * spacing_m, base)
        stops[sid] = VirtualStop(
            id=sid,
            zone_id=zone_id,
            lat=lat,
            lon=lon,
            kind=StopKind.EXISTING_TRANSIT if k in rail else StopKind.ON_DEMAND_ONLY,
            is_idle_location=k in idle,
            is_rail_station=k in rail,
        )
    return {zone_id: zone}, stops


def matrix_provider(stop_ids, seconds: dict[tuple[str, str], int], meters: Optional[dict] = None):
    entries = []
    for (a, b), s in seconds.items():
        m = meters[(a, b)] if meters else s * 8.0
        entries.append((a, b, s, m))
    return TravelProvider.from_entries(entries, sorted(stop_ids))


def full_matrix_provider(stop_ids, rng: random.Random, lo=60, hi=900):
    ids = sorted(stop_ids)
    entries = []
    for a in ids:
        for b in ids:
            if a != b:
                s = rng.randint(lo, hi)
                entries.append((a, b, s, float(s * rng.uniform(6.0, 12.0))))
    return TravelProvider.from_entries(entries, ids)


def make_request(rid, zone, origin, destination, submit, group=1, rider=None) -> Request:
    return Request(
        id=rid,
        rider_id=rider or f"rider-{rid}",
        zone_id=zone,
        origin_stop=origin,
        destination_stop=destination,
        group_size=group,
        submit_time=submit,
        channel=Channel.APP,
    )


def build_scenario(
    zones,
    stops,
    provider,
    vehicles,
    requests,
    shifts: Optional[ShiftSchedule] = None,
    service=(0, 86_400, 1),
    reaction: Optional[ReactionTimeModel] = None,
    dispatch: Optional[DispatchParams] = None,
    removal: Optional[RemovalPolicy] = None,
    scripted_cancels: Optional[dict] = None,
    **kw,
) -> Scenario:
    start_s, end_s, days = service
    if shifts is None:
        windows = {
            spec.id: [ShiftWindow(d * 86_400 + start_s, d * 86_400 + end_s) for d in range(days)]
            for spec in vehicles
        }
        shifts = ShiftSchedule(windows)
    return Scenario(
        zones=zones,
        stops=stops,
        vehicles=vehicles,
        requests=requests,
        scripted_cancels=scripted_cancels or {},
        shifts=shifts,
        provider=provider,
        dispatch=dispatch or DispatchParams(dwell_s=kw.pop("dwell_s", 0)),
        removal_policy=removal or RemovalPolicy.disabled(),
        reaction=reaction or ReactionTimeModel.constant(0),
        service_start_s=start_s,
        service_end_s=end_s,
        days=days,
        **kw,
    )


def write_scenario_files(
    directory,
    zones,
    stops,
    requests,
    vehicles=None,
    scripted_cancels=None,
    provider_doc=None,
    service=(0, 86_400, 1),
    shifts_rows=None,
    extra=None,
):
    """Write a runnable scenario (network.json, requests.csv, scenario.json,
    optional shifts.csv) into ``directory`` and return the scenario path."""
    import json
    import os

    os.makedirs(directory, exist_ok=True)
    network = {
        "zones": [
            {
                "id": z.id,
                "name": z.name,
                "polygon": [list(p) for p in z.boundary],
                "fleet_size": z.fleet_size,
                "phase": z.phase.value,
            }
            for z in zones.values()
        ],
        "stops": [
            {
                "id": s.id,
                "zone_id": s.zone_id,
                "lat": s.lat,
                "lon": s.lon,
                "kind": s.kind.value,
                "is_idle_location": s.is_idle_location,
                "is_rail_station": s.is_rail_station,
            }
            for s in stops.values()
        ],
    }
    with open(os.path.join(directory, "network.json"), "w") as fh:
        json.dump(network, fh, indent=1)
    scripted_cancels = scripted_cancels or {}
    with open(os.path.join(directory, "requests.csv"), "w") as fh:
        fh.write(
            "request_id,rider_id,zone_id,origin_stop,destination_stop,"
            "group_size,submit_time,channel,cancel_time\n"
        )
        for r in requests:
            cancel = scripted_cancels.get(r.id, "")
            fh.write(
                f"{r.id},{r.rider_id},{r.zone_id},{r.origin_stop},{r.destination_stop},"
                f"{r.group_size},{r.submit_time},{r.channel.value},{cancel}\n"
            )
    doc = {
        "network_file": "network.json",
        "requests_file": "requests.csv",
        "provider": provider_doc or {"mode": "grid", "speed_mps": 10.0, "detour_factor": 1.0},
        "service": {"start_s": service[0], "end_s": service[1], "days": service[2]},
        "seed": 0,
    }
    if vehicles is not None:
        doc["vehicles"] = [
            {"id": v.id, "zone_id": v.zone_id, "start_stop": v.start_stop} for v in vehicles
        ]
    if shifts_rows is not None:
        with open(os.path.join(directory, "shifts.csv"), "w") as fh:
            fh.write("vehicle_id,sign_in_s,sign_out_s\n")
            for vid, a, b in shifts_rows:
                fh.write(f"{vid},{a},{b}\n")
        doc["shifts_file"] = "shifts.csv"
    if extra:
        doc.update(extra)
    path = os.path.join(directory, "scenario.json")
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
    return path


# --- dispatch oracle -----------------------------------------------------------


def oracle_assign(req: Request, fleet, provider, params: DispatchParams):
    """Brute-force minimum objective over all vehicles and insertion pairs.

    Returns the minimal objective value or None when nothing is feasible.
    Independent re-derivation of the insertion semantics.
    """
    eps = 1e-9
    best = None
    for v in fleet:
        if v.zone_id != req.zone_id:
            continue

        def arrivals(seq):
            out = []
            t = float(v.anchor_time)
            prev = v.anchor_stop
            for stop_id, *_ in seq:
                t += provider.drive_time(prev, stop_id)
                out.append(t)
                t += params.dwell_s
                prev = stop_id
            return out

        def rides(seq, arr):
            # predicted ride per existing request with a dropoff in seq
            pick_at = {}
            out = {}
            for pos, (stop_id, rid, action, group) in enumerate(seq):
                if rid == req.id:
                    continue
                if action == LegAction.PICKUP:
                    pick_at[rid] = pos
                else:
                    if rid in pick_at:
                        out[rid] = arr[pos] - arr[pick_at[rid]]
                    else:
                        out[rid] = arr[pos] + params.dwell_s - v.onboard[rid][1]
            return out

        base_seq = [(leg.stop_id, leg.request_id, leg.action, leg.group_size) for leg in v.plan]
        base_rides = rides(base_seq, arrivals(base_seq))
        onboard0 = sum(g for g, _ in v.onboard.values())
        n = len(base_seq)
        pickup = (req.origin_stop, req.id, LegAction.PICKUP, req.group_size)
        dropoff = (req.destination_stop, req.id, LegAction.DROPOFF, req.group_size)
        for i in range(v.locked_legs, n + 1):
            for j in range(i, n + 1):
                seq = base_seq[:i] + [pickup] + base_seq[i:j] + [dropoff] + base_seq[j:]
                arr = arrivals(seq)
                load = onboard0
                ok = True
                for pos, (stop_id, rid, action, group) in enumerate(seq):
                    load += group if action == LegAction.PICKUP else -group
                    if load > v.capacity:
                        ok = False
                        break
                if not ok:
                    continue
                new_rides = rides(seq, arr)
                detour = 0.0
                for rid, ride in new_rides.items():
                    if ride > params.stretch_factor * base_rides[rid] + eps:
                        ok = False
                        break
                    detour += ride - base_rides[rid]
                if not ok:
                    continue
                arr_pick = arr[i]
                obj = (arr_pick - req.submit_time) + params.ride_weight * detour
                if best is None or obj < best - eps:
                    best = obj
    return best


def random_dispatch_instance(rng: random.Random):
    """A small random fleet/network for oracle-equivalence checks."""
    n_stops = rng.randint(2, 6)
    ids = [f"s{k}" for k in range(n_stops)]
    provider = full_matrix_provider(ids, rng)
    capacity = rng.choice([2, 3, 8])
    vehicles = [
        VehicleSnapshot(
            vehicle_id=f"{4000 + k}",
            zone_id="Z",
            capacity=capacity,
            anchor_stop=rng.choice(ids),
            anchor_time=rng.randint(0, 600),
        )
        for k in range(rng.randint(1, 3))
    ]
    n_requests = rng.randint(1, 5)
    requests = []
    t = 0
    for k in range(n_requests):
        o, d = rng.sample(ids, 2)
        t += rng.randint(0, 120)
        requests.append(make_request(f"r{k}", "Z", o, d, t, group=rng.randint(1, min(4, capacity))))
    params = DispatchParams(
        stretch_factor=rng.choice([1.2, 1.5, 2.0]),
        ride_weight=rng.choice([0.0, 0.5, 1.0]),
        dwell_s=rng.choice([0, 30]),
    )
    return provider, vehicles, requests, params


def evolve_fleet(rng: random.Random, vehicles: list[VehicleSnapshot]) -> None:
    """Random organic churn between assignments: time passes, riders board."""
    for v in vehicles:
        if rng.random() < 0.3:
            v.anchor_time += rng.randint(0, 300)
        if v.plan and rng.random() < 0.25:
            for pos, leg in enumerate(v.plan):
                if leg.action == LegAction.PICKUP:
                    v.plan.pop(pos)
                    v.onboard[leg.request_id] = (leg.group_size, int(v.anchor_time) - rng.randint(0, 200))
                    break
        v.locked_legs = rng.randint(0, 1) if v.plan else 0


# --- fixed-route oracle -----------------------------------------------------------


def oracle_earliest_arrival(
    origin,
    destination,
    depart,
    feed,
    walk_speed=1.4,
    max_walk_m=1500.0,
    transfer_buffer_s=0,
    horizon_s=3 * 3600,
):
    """Exhaustive earliest-arrival search over all walk/board sequences."""
    from odtsim.fixedroute import walk_seconds

    deadline = depart + horizon_s
    coords = {sid: s.location for sid, s in feed.stops.items()}
    best = [math.inf]
    seen: dict[str, int] = {}

    def walk_allowed(a_pt, b_pt, unrestricted=False):
        return unrestricted or haversine_m(a_pt, b_pt) <= max_walk_m

    def visit(stop_id, t):
        if t > deadline or t >= best[0]:
            return
        if stop_id in seen and seen[stop_id] <= t:
            return
        seen[stop_id] = t
        pt = coords[stop_id]
        if walk_allowed(pt, destination):
            cand = t + walk_seconds(pt, destination, walk_speed)
            if cand <= deadline:
                best[0] = min(best[0], cand)
        for other in feed.stops:
            if other != stop_id and walk_allowed(pt, coords[other]):
                visit(other, t + walk_seconds(pt, coords[other], walk_speed))
        for trip in feed.trips:
            sts = trip.stop_times
            for a in range(len(sts)):
                if sts[a].stop_id != stop_id or sts[a].departure_s < t + transfer_buffer_s:
                    continue
                for b in range(a + 1, len(sts)):
                    visit(sts[b].stop_id, sts[b].arrival_s)

    direct = depart + walk_seconds(origin, destination, walk_speed)
    if direct <= deadline:
        best[0] = direct
    for sid in feed.stops:
        if walk_allowed(origin, coords[sid]):
            visit(sid, depart + walk_seconds(origin, coords[sid], walk_speed))
    return None if math.isinf(best[0]) else int(best[0])


def random_feed(rng: random.Random, max_trips=5, base=(BASE_LAT, BASE_LON)):
    """A small random timetable over a handful of clustered stops."""
    from odtsim.fixedroute import FeedStop, FixedRouteFeed, StopTime, TransitTrip, TransitMode

    n_stops = rng.randint(2, 5)
    feed = FixedRouteFeed()
    for k in range(n_stops):
        lat, lon = offset_latlon(rng.uniform(-1200, 1200), rng.uniform(-1200, 1200), base)
        feed.stops[f"t{k}"] = FeedStop(id=f"t{k}", lat=lat, lon=lon)
    stop_ids = sorted(feed.stops)
    for tr in range(rng.randint(1, max_trips)):
        length = rng.randint(2, min(4, n_stops)) if n_stops >= 2 else 2
        route = rng.sample(stop_ids, length)
        t = rng.randint(0, 1800)
        sts = []
        for sid in route:
            arr = t
            dep = arr + rng.randint(0, 60)
            sts.append(StopTime(stop_id=sid, arrival_s=arr, departure_s=dep))
            t = dep + rng.randint(60, 900)
        feed.trips.append(
            TransitTrip(
                id=f"trip{tr}",
                route_id=f"route{tr}",
                mode=TransitMode.BUS if rng.random() < 0.7 else TransitMode.RAIL,
                stop_times=sts,
            )
        )
    feed.validate()
    return feed


# --- cancellation log builders -----------------------------------------------------

TABLE5_COUNTS = {
    15: {"ExactReturn": 461, "OtherReturn": 254, "RepeatedCancellations": 200, "NoReturn": 1657},
    30: {"ExactReturn": 481, "OtherReturn": 280, "RepeatedCancellations": 249, "NoReturn": 1562},
    60: {"ExactReturn": 488, "OtherReturn": 306, "RepeatedCancellations": 275, "NoReturn": 1503},
}

# Pattern mix that reproduces the 12 cells above. Gaps are minutes from the
# cancellation to the return request; chain patterns add one further
# cancellation whose own classification is NoReturn at every threshold.
TABLE5_PATTERNS = [
    ("exact", 10, 461),
    ("exact", 20, 20),
    ("exact", 45, 7),
    ("other", 10, 254),
    ("other", 20, 26),
    ("other", 45, 26),
    ("chain", 10, 200),
    ("chain", 20, 49),
    ("chain", 45, 26),
    ("none", 0, 1228),
]


def _emit_request(log: EventLog, t, rid, rider, origin, destination):
    log.emit(
        t,
        EventKind.REQUEST_SUBMITTED,
        request_id=rid,
        rider_id=rider,
        zone_id="Z1",
        origin_stop=origin,
        destination_stop=destination,
        group_size=1,
        channel="app",
    )


def _emit_served(log: EventLog, t, rid, rider, origin, destination):
    log.emit(t, EventKind.BOARDED, vehicle_id="4000", request_id=rid, rider_id=rider,
             stop_id=origin, group_size=1)
    log.emit(t + 300, EventKind.ALIGHTED, vehicle_id="4000", request_id=rid, rider_id=rider,
             stop_id=destination, group_size=1)


def build_table5_log(patterns=TABLE5_PATTERNS) -> EventLog:
    """Synthetic event log whose cancellation classification matches the
    reference marginals exactly."""
    log = EventLog()
    base = 0
    serial = 0
    for kind, gap_min, count in patterns:
        for _ in range(count):
            rider = f"rider{serial}"
            t0 = base
            cancel_rid = f"c{serial}"
            _emit_request(log, t0 - 300, cancel_rid, rider, "sA", "sB")
            log.emit(t0, EventKind.CANCELED, request_id=cancel_rid, rider_id=rider, reason="rider")
            gap = gap_min * 60
            if kind == "exact":
                rid = f"x{serial}"
                _emit_request(log, t0 + gap, rid, rider, "sA", "sB")
                _emit_served(log, t0 + gap + 120, rid, rider, "sA", "sB")
            elif kind == "other":
                rid = f"o{serial}"
                _emit_request(log, t0 + gap, rid, rider, "sA", "sC")
                _emit_served(log, t0 + gap + 120, rid, rider, "sA", "sC")
            elif kind == "chain":
                rid = f"k{serial}"
                _emit_request(log, t0 + gap, rid, rider, "sA", "sB")
                log.emit(t0 + gap + 60, EventKind.CANCELED, request_id=rid, rider_id=rider,
                         reason="rider")
            serial += 1
            base += 100_000
    return log


def random_cancellation_log(rng: random.Random) -> EventLog:
    """Random rider histories for the partition/monotonicity properties.

    Each cancellation episode has at most one served follow-up, so the
    window-nesting monotonicity argument applies (a same-pair and a
    different-pair served return in the same window could otherwise trade
    categories as the window grows).
    """
    log = EventLog()
    serial = 0
    for rider_idx in range(rng.randint(1, 6)):
        rider = f"rr{rider_idx}"
        t = rng.randint(0, 3600)
        for _ in range(rng.randint(1, 3)):
            rid = f"q{serial}"
            serial += 1
            origin, dest = "sA", "sB"
            _emit_request(log, t, rid, rider, origin, dest)
            cancel_t = t + rng.randint(60, 600)
            cancel_kind = rng.choice([EventKind.CANCELED, EventKind.NO_SHOW_REPORTED])
            log.emit(cancel_t, cancel_kind, request_id=rid, rider_id=rider, reason="rider")
            follow = rng.choice(["none", "served_same", "served_other", "chain", "late_served"])
            gap = rng.randint(60, 75 * 60)
            if follow in ("served_same", "served_other", "late_served"):
                rid2 = f"q{serial}"
                serial += 1
                d2 = dest if follow == "served_same" else "sC"
                gap2 = gap if follow != "late_served" else rng.randint(61 * 60, 3 * 3600)
                _emit_request(log, cancel_t + gap2, rid2, rider, origin, d2)
                _emit_served(log, cancel_t + gap2 + 60, rid2, rider, origin, d2)
            elif follow == "chain":
                prev_cancel = cancel_t
                for _ in range(rng.randint(1, 3)):
                    rid2 = f"q{serial}"
                    serial += 1
                    sub = prev_cancel + rng.randint(60, 40 * 60)
                    _emit_request(log, sub, rid2, rider, origin, dest)
                    prev_cancel = sub + rng.randint(30, 300)
                    log.emit(prev_cancel, EventKind.CANCELED, request_id=rid2, rider_id=rider,
                             reason="rider")
            t = cancel_t + 6 * 3600 + rng.randint(0, 3600)
    return log
