"""Schedule-based fixed-route router used for the comparison study.

The network is a small timetable feed (stops, trips, stop times). Queries run
earliest-arrival search over a time-expanded view with walking allowed to,
from, and between transit stops. Two reporting regimes exist:

* ``same``: every second of waiting is charged from the requested departure
  time onward.
* ``adjusted``: the itinerary is re-anchored at the latest feasible departure
  that still achieves the same arrival, so the initial synchronization wait
  is excluded from the reported duration.
"""

from __future__ import annotations

import csv
import heapq
import math
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .errors import FeedError
from .geo import Point, haversine_m

DEFAULT_WALK_SPEED_MPS = 1.4
DEFAULT_MAX_WALK_M = 1500.0
DEFAULT_HORIZON_S = 3 * 3600

_ORIGIN = "@origin"
_DEST = "@destination"


class Regime(str, Enum):
    ADJUSTED_DEPARTURE = "adjusted"
    SAME_DEPARTURE = "same"


class LegKind(str, Enum):
    WALK = "walk"
    TRANSIT = "transit"
    SHUTTLE = "shuttle"


class TransitMode(str, Enum):
    BUS = "bus"
    RAIL = "rail"


@dataclass(frozen=True)
class StopTime:
    stop_id: str
    arrival_s: int
    departure_s: int


@dataclass
class TransitTrip:
    id: str
    route_id: str
    mode: TransitMode
    stop_times: list[StopTime]


@dataclass(frozen=True)
class FeedStop:
    id: str
    lat: float
    lon: float

    @property
    def location(self) -> Point:
        return (self.lat, self.lon)


@dataclass
class FixedRouteFeed:
    stops: dict[str, FeedStop] = field(default_factory=dict)
    trips: list[TransitTrip] = field(default_factory=list)

    def validate(self) -> None:
        for trip in self.trips:
            prev_dep = None
            for st in trip.stop_times:
                if st.stop_id not in self.stops:
                    raise FeedError(f"trip {trip.id} references unknown stop {st.stop_id}")
                if st.departure_s < st.arrival_s:
                    raise FeedError(f"trip {trip.id}: departure before arrival at {st.stop_id}")
                if prev_dep is not None and st.arrival_s <= prev_dep:
                    raise FeedError(f"trip {trip.id}: stop times not strictly increasing")
                prev_dep = st.departure_s


def load_feed(directory: str) -> FixedRouteFeed:
    """Load a feed from ``stops.csv``, ``trips.csv``, ``stop_times.csv``."""
    feed = FixedRouteFeed()
    with open(os.path.join(directory, "stops.csv"), newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            feed.stops[row["stop_id"]] = FeedStop(
                id=row["stop_id"], lat=float(row["lat"]), lon=float(row["lon"])
            )
    trip_meta: dict[str, tuple[str, TransitMode]] = {}
    with open(os.path.join(directory, "trips.csv"), newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            trip_meta[row["trip_id"]] = (row["route_id"], TransitMode(row["mode"]))
    stop_time_rows: dict[str, list[tuple[int, StopTime]]] = {}
    with open(os.path.join(directory, "stop_times.csv"), newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            st = StopTime(
                stop_id=row["stop_id"],
                arrival_s=int(row["arrival_s"]),
                departure_s=int(row["departure_s"]),
            )
            stop_time_rows.setdefault(row["trip_id"], []).append((int(row["seq"]), st))
    for trip_id, rows in stop_time_rows.items():
        if trip_id not in trip_meta:
            raise FeedError(f"stop_times references unknown trip {trip_id}")
        route_id, mode = trip_meta[trip_id]
        rows.sort(key=lambda p: p[0])
        feed.trips.append(
            TransitTrip(id=trip_id, route_id=route_id, mode=mode, stop_times=[st for _, st in rows])
        )
    feed.validate()
    return feed


@dataclass(frozen=True)
class Leg:
    kind: LegKind
    start: int
    end: int
    origin: str
    destination: str
    trip_id: Optional[str] = None


@dataclass(frozen=True)
class Itinerary:
    legs: tuple[Leg, ...]
    total_duration: int
    initial_wait: int
    arrival: int
    regime: Regime


def walk_seconds(a: Point, b: Point, walk_speed: float) -> int:
    """Integer walk time between two points, rounded up."""
    return int(math.ceil(haversine_m(a, b) / walk_speed))


def _board_pairs(trip: TransitTrip):
    sts = trip.stop_times
    for i in range(len(sts)):
        for j in range(i + 1, len(sts)):
            yield sts[i], sts[j]


def plan_itinerary(
    origin: Point,
    destination: Point,
    depart: int,
    feed: FixedRouteFeed,
    regime: Regime,
    walk_speed: float = DEFAULT_WALK_SPEED_MPS,
    max_walk_m: float = DEFAULT_MAX_WALK_M,
    transfer_buffer_s: int = 0,
    horizon_s: int = DEFAULT_HORIZON_S,
) -> Optional[Itinerary]:
    """Earliest-arrival multimodal itinerary, or None when nothing arrives
    within the horizon.

    Access, egress, and transfer walks are capped at ``max_walk_m`` per leg;
    the direct origin-to-destination walk is always considered so a pure
    walking fallback exists whenever it fits the horizon. Boardings require
    being at the stop ``transfer_buffer_s`` before departure.
    """
    if walk_speed <= 0:
        raise ValueError("walk_speed must be positive")
    if origin == destination:
        return Itinerary((), 0, 0, depart, regime)

    deadline = depart + horizon_s
    coords: dict[str, Point] = {sid: s.location for sid, s in feed.stops.items()}
    coords[_ORIGIN] = origin
    coords[_DEST] = destination

    def walk_ok(frm: str, to: str) -> bool:
        if frm == _ORIGIN and to == _DEST:
            return True  # direct walk fallback is never capped
        return haversine_m(coords[frm], coords[to]) <= max_walk_m

    # Forward earliest-arrival labels. parent[loc] freezes the edge that set
    # the final label: ("walk", from, end) or ("transit", from, dep, arr, trip).
    best: dict[str, int] = {_ORIGIN: depart}
    parent: dict[str, tuple] = {}
    heap: list[tuple[int, int, str]] = [(depart, 0, _ORIGIN)]
    tiebreak = 1
    done: set[str] = set()
    while heap:
        t, _, loc = heapq.heappop(heap)
        if loc in done or t > best.get(loc, t):
            continue
        done.add(loc)
        if loc == _DEST:
            break
        targets = [_DEST] + sorted(feed.stops) if loc == _ORIGIN else [_DEST] + [
            s for s in sorted(feed.stops) if s != loc
        ]
        for to in targets:
            if to in done or not walk_ok(loc, to):
                continue
            t2 = t + walk_seconds(coords[loc], coords[to], walk_speed)
            if t2 <= deadline and t2 < best.get(to, t2 + 1):
                best[to] = t2
                parent[to] = ("walk", loc, t2)
                heapq.heappush(heap, (t2, tiebreak, to))
                tiebreak += 1
        if loc in feed.stops:
            for trip in feed.trips:
                for a, b in _board_pairs(trip):
                    if a.stop_id != loc or a.departure_s < t + transfer_buffer_s:
                        continue
                    if b.arrival_s <= deadline and b.arrival_s < best.get(b.stop_id, b.arrival_s + 1):
                        best[b.stop_id] = b.arrival_s
                        parent[b.stop_id] = ("transit", loc, a.departure_s, b.arrival_s, trip.id)
                        heapq.heappush(heap, (b.arrival_s, tiebreak, b.stop_id))
                        tiebreak += 1

    if _DEST not in best:
        return None
    arrival = best[_DEST]

    if regime == Regime.SAME_DEPARTURE:
        legs = _assemble_forward(parent, depart, arrival)
        return Itinerary(tuple(legs), arrival - depart, 0, arrival, regime)

    # Latest-departure pass: latest[loc] is the latest time one can be at loc
    # and still reach the destination by `arrival`. succ freezes the outgoing
    # edge used: ("walk", to, arrive_by) or ("transit", to, dep, arr, trip).
    latest: dict[str, int] = {_DEST: arrival}
    succ: dict[str, tuple] = {}
    mheap: list[tuple[int, int, str]] = [(-arrival, 0, _DEST)]
    mdone: set[str] = set()
    tiebreak = 1
    while mheap:
        neg, _, loc = heapq.heappop(mheap)
        t = -neg
        if loc in mdone or t < latest.get(loc, t):
            continue
        mdone.add(loc)
        if loc == _ORIGIN:
            break
        sources = [_ORIGIN] + [s for s in sorted(feed.stops) if s != loc]
        for frm in sources:
            if frm in mdone or not walk_ok(frm, loc):
                continue
            t2 = t - walk_seconds(coords[frm], coords[loc], walk_speed)
            if t2 >= depart and t2 > latest.get(frm, t2 - 1):
                latest[frm] = t2
                succ[frm] = ("walk", loc, t)
                heapq.heappush(mheap, (-t2, tiebreak, frm))
                tiebreak += 1
        if loc in feed.stops:
            for trip in feed.trips:
                for a, b in _board_pairs(trip):
                    if b.stop_id != loc or b.arrival_s > t:
                        continue
                    t2 = a.departure_s - transfer_buffer_s
                    frm = a.stop_id
                    if frm != loc and t2 >= depart and t2 > latest.get(frm, t2 - 1):
                        latest[frm] = t2
                        succ[frm] = ("transit", loc, a.departure_s, b.arrival_s, trip.id)
                        heapq.heappush(mheap, (-t2, tiebreak, frm))
                        tiebreak += 1

    depart_at = latest.get(_ORIGIN, depart)
    legs = _assemble_backward(succ, latest, depart_at)
    return Itinerary(tuple(legs), arrival - depart_at, depart_at - depart, arrival, regime)


def _assemble_forward(parent: dict, depart: int, arrival: int) -> list[Leg]:
    chain = []
    loc = _DEST
    while loc != _ORIGIN:
        edge = parent[loc]
        chain.append((edge, loc))
        loc = edge[1]
    chain.reverse()
    legs: list[Leg] = []
    t = depart
    for edge, to in chain:
        if edge[0] == "walk":
            end = edge[2]
            if end > t:
                legs.append(Leg(LegKind.WALK, t, end, edge[1], to))
            t = end
        else:
            _, frm, dep, arr, trip_id = edge
            legs.append(Leg(LegKind.TRANSIT, t, arr, frm, to, trip_id=trip_id))
            t = arr
    return legs


def _assemble_backward(succ: dict, latest: dict, depart_at: int) -> list[Leg]:
    legs: list[Leg] = []
    loc = _ORIGIN
    t = depart_at
    while loc != _DEST:
        edge = succ[loc]
        if edge[0] == "walk":
            _, to, arrive_by = edge
            if arrive_by > t:
                legs.append(Leg(LegKind.WALK, t, arrive_by, loc, to))
            t = arrive_by
            loc = to
        else:
            _, to, dep, arr, trip_id = edge
            legs.append(Leg(LegKind.TRANSIT, t, arr, loc, to, trip_id=trip_id))
            t = arr
            loc = to
    return legs
