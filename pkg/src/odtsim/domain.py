"""Shared vocabulary: zones, stops, vehicles, riders, requests, and the event log.

Timestamps are integer seconds from scenario start. Event ordering ties are
broken by a monotonically increasing sequence number assigned at emission.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional

from .errors import MissingReportedStop, ScenarioInvalid, UnknownStop
from .geo import Point, haversine_m, point_in_polygon, polygon_is_simple

MAX_GROUP_SIZE = 4
DEFAULT_CAPACITY = 8
WRONG_LOCATION_THRESHOLD_M = 400.0


class ZonePhase(Enum):
    PHASE_1 = 1
    PHASE_2 = 2


class StopKind(str, Enum):
    EXISTING_TRANSIT = "existing_transit"
    ON_DEMAND_ONLY = "on_demand_only"


class Channel(str, Enum):
    APP = "app"
    PHONE_CALL = "phone_call"


class RequestPhase(str, Enum):
    SUBMITTED = "Submitted"
    ASSIGNED = "Assigned"
    WAITING = "Waiting"
    RIDING = "Riding"
    SERVED = "Served"
    CANCELED_BY_RIDER = "CanceledByRider"
    NO_SHOW = "NoShow"


TERMINAL_PHASES = frozenset(
    {RequestPhase.SERVED, RequestPhase.CANCELED_BY_RIDER, RequestPhase.NO_SHOW}
)


class StatusTop(str, Enum):
    REGULAR = "Regular"
    WITH_RIDERS = "WithRiders"
    WRONG_LOCATION = "WrongLocation"


class RegularActivity(str, Enum):
    IDLING = "Idling"
    WAITING_FOR_DEPARTURE = "WaitingForDeparture"
    WAITING_FOR_PASSENGERS = "WaitingForPassengers"
    DRIVING_WITHOUT_PASSENGERS = "DrivingWithoutPassengers"


@dataclass
class VehicleStatus:
    """Monitor-style vehicle status: a top category plus, for Regular, an activity."""

    top: StatusTop = StatusTop.REGULAR
    regular_sub: Optional[RegularActivity] = RegularActivity.IDLING

    def __post_init__(self) -> None:
        if (self.top == StatusTop.REGULAR) != (self.regular_sub is not None):
            raise ValueError("regular_sub must be present exactly when top is Regular")


@dataclass
class Zone:
    id: str
    name: str
    boundary: list[Point]
    fleet_size: int
    phase: ZonePhase = ZonePhase.PHASE_1

    def validate(self) -> None:
        if self.fleet_size < 1:
            raise ScenarioInvalid(f"zone {self.id}: fleet_size must be >= 1")
        if not polygon_is_simple(self.boundary):
            raise ScenarioInvalid(f"zone {self.id}: boundary polygon is not simple")


@dataclass
class VirtualStop:
    id: str
    zone_id: str
    lat: float
    lon: float
    kind: StopKind
    is_idle_location: bool = False
    is_rail_station: bool = False

    @property
    def location(self) -> Point:
        return (self.lat, self.lon)

    def validate(self, zones: dict[str, Zone]) -> None:
        zone = zones.get(self.zone_id)
        if zone is None:
            raise ScenarioInvalid(f"stop {self.id}: unknown zone {self.zone_id}")
        if not point_in_zone(self.location, zone):
            raise ScenarioInvalid(f"stop {self.id}: located outside zone {self.zone_id}")
        if self.is_rail_station and self.kind != StopKind.EXISTING_TRANSIT:
            raise ScenarioInvalid(f"stop {self.id}: rail stations must be existing transit stops")


@dataclass
class Vehicle:
    """A shuttle as seen by the protocol: identity, position, status, plan."""

    id: str
    zone_id: str
    capacity: int = DEFAULT_CAPACITY
    status: VehicleStatus = field(default_factory=VehicleStatus)
    gps: Optional[Point] = None
    reported_stop: Optional[str] = None
    plan: list = field(default_factory=list)


@dataclass
class RequestState:
    phase: RequestPhase = RequestPhase.SUBMITTED
    assigned_vehicle: Optional[str] = None
    board_time: Optional[int] = None
    alight_time: Optional[int] = None
    cancel_time: Optional[int] = None


@dataclass
class Request:
    id: str
    rider_id: str
    zone_id: str
    origin_stop: str
    destination_stop: str
    group_size: int
    submit_time: int
    channel: Channel = Channel.APP
    state: RequestState = field(default_factory=RequestState)


# --- request validation -----------------------------------------------------

VIOLATION_UNKNOWN_STOP = "unknown_stop"
VIOLATION_CROSS_ZONE = "cross_zone"
VIOLATION_GROUP_TOO_LARGE = "group_too_large"
VIOLATION_DEGENERATE_TRIP = "degenerate_trip"


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    violation: Optional[str] = None
    detail: str = ""


def validate_request(
    req: Request, zones: dict[str, Zone], stops: dict[str, VirtualStop]
) -> ValidationResult:
    """Accept a request iff both stops exist in the request's zone, the group
    size is 1..4, and origin differs from destination.

    Pure function: checks run in a fixed order and the first violation wins.
    """
    for sid in (req.origin_stop, req.destination_stop):
        if sid not in stops:
            return ValidationResult(False, VIOLATION_UNKNOWN_STOP, f"stop {sid} not found")
    origin = stops[req.origin_stop]
    destination = stops[req.destination_stop]
    if not (origin.zone_id == destination.zone_id == req.zone_id) or req.zone_id not in zones:
        return ValidationResult(
            False,
            VIOLATION_CROSS_ZONE,
            f"origin in {origin.zone_id}, destination in {destination.zone_id}, "
            f"request zone {req.zone_id}",
        )
    if not 1 <= req.group_size <= MAX_GROUP_SIZE:
        return ValidationResult(
            False, VIOLATION_GROUP_TOO_LARGE, f"group_size {req.group_size} outside 1..{MAX_GROUP_SIZE}"
        )
    if req.origin_stop == req.destination_stop:
        return ValidationResult(False, VIOLATION_DEGENERATE_TRIP, "origin equals destination")
    return ValidationResult(True)


def point_in_zone(p: Point, zone: Zone) -> bool:
    """Boundary-inclusive containment of a (lat, lon) point in the zone polygon."""
    return point_in_polygon(p, zone.boundary)


def wrong_location_check(
    vehicle: Vehicle,
    stops: dict[str, VirtualStop],
    threshold_m: float = WRONG_LOCATION_THRESHOLD_M,
) -> bool:
    """Flag a vehicle whose GPS fix is farther than ``threshold_m`` from the
    stop the driver reported being at. Flagging transitions the status to
    WrongLocation."""
    if vehicle.reported_stop is None:
        raise MissingReportedStop(f"vehicle {vehicle.id} has no reported stop")
    stop = stops.get(vehicle.reported_stop)
    if stop is None:
        raise UnknownStop(f"vehicle {vehicle.id} reports unknown stop {vehicle.reported_stop}")
    if vehicle.gps is None:
        raise MissingReportedStop(f"vehicle {vehicle.id} has no GPS fix")
    flagged = haversine_m(vehicle.gps, stop.location) > threshold_m
    if flagged:
        vehicle.status = VehicleStatus(top=StatusTop.WRONG_LOCATION, regular_sub=None)
    return flagged


# --- event log ---------------------------------------------------------------


class EventKind(str, Enum):
    REQUEST_SUBMITTED = "RequestSubmitted"
    ASSIGNED = "Assigned"
    VEHICLE_DISPATCHED = "VehicleDispatched"
    DRIVER_RESPONDED = "DriverResponded"
    ARRIVED_PICKUP = "ArrivedPickup"
    BOARDED = "Boarded"
    ALIGHTED = "Alighted"
    CANCELED = "Canceled"
    NO_SHOW_REPORTED = "NoShowReported"
    SIGN_IN = "SignIn"
    SIGN_OUT = "SignOut"
    REMOVED_BY_ADMIN = "RemovedByAdmin"
    REMOVED_BY_SERVER = "RemovedByServer"
    RELOCATE_TO_IDLE = "RelocateToIdle"
    REBALANCE_COMMAND = "RebalanceCommand"
    WRONG_LOCATION_FLAG = "WrongLocationFlag"


@dataclass
class EventRecord:
    time: int
    seq: int
    kind: EventKind
    vehicle_id: Optional[str] = None
    request_id: Optional[str] = None
    rider_id: Optional[str] = None
    payload: dict = field(default_factory=dict)

    def sort_key(self) -> tuple[int, int]:
        return (self.time, self.seq)

    def to_json(self) -> str:
        doc: dict = {"time": self.time, "seq": self.seq, "kind": self.kind.value}
        if self.vehicle_id is not None:
            doc["vehicle_id"] = self.vehicle_id
        if self.request_id is not None:
            doc["request_id"] = self.request_id
        if self.rider_id is not None:
            doc["rider_id"] = self.rider_id
        doc["payload"] = self.payload
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str) -> "EventRecord":
        doc = json.loads(line)
        return cls(
            time=int(doc["time"]),
            seq=int(doc["seq"]),
            kind=EventKind(doc["kind"]),
            vehicle_id=doc.get("vehicle_id"),
            request_id=doc.get("request_id"),
            rider_id=doc.get("rider_id"),
            payload=doc.get("payload", {}),
        )


class EventLog:
    """Append-only event log; the single analytics source for a run."""

    def __init__(self) -> None:
        self.records: list[EventRecord] = []
        self._next_seq = 0

    def emit(
        self,
        time: int,
        kind: EventKind,
        vehicle_id: Optional[str] = None,
        request_id: Optional[str] = None,
        rider_id: Optional[str] = None,
        **payload,
    ) -> EventRecord:
        rec = EventRecord(
            time=int(time),
            seq=self._next_seq,
            kind=kind,
            vehicle_id=vehicle_id,
            request_id=request_id,
            rider_id=rider_id,
            payload=payload,
        )
        self._next_seq += 1
        self.records.append(rec)
        return rec

    def __iter__(self):
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def write_jsonl(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for rec in self.records:
                fh.write(rec.to_json())
                fh.write("\n")


def load_events_jsonl(path: str) -> list[EventRecord]:
    events = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                events.append(EventRecord.from_json(line))
    return events


# --- ingestion ---------------------------------------------------------------


def load_network(doc: dict) -> tuple[dict[str, Zone], dict[str, VirtualStop]]:
    """Parse the zones+stops document (already JSON-decoded) and enforce the
    structural invariants."""
    zones: dict[str, Zone] = {}
    for z in doc.get("zones", []):
        zone = Zone(
            id=str(z["id"]),
            name=z.get("name", str(z["id"])),
            boundary=[(float(lat), float(lon)) for lat, lon in z["polygon"]],
            fleet_size=int(z["fleet_size"]),
            phase=ZonePhase(int(z.get("phase", 1))),
        )
        zone.validate()
        if zone.id in zones:
            raise ScenarioInvalid(f"duplicate zone id {zone.id}")
        zones[zone.id] = zone
    stops: dict[str, VirtualStop] = {}
    for s in doc.get("stops", []):
        stop = VirtualStop(
            id=str(s["id"]),
            zone_id=str(s["zone_id"]),
            lat=float(s["lat"]),
            lon=float(s["lon"]),
            kind=StopKind(s["kind"]),
            is_idle_location=bool(s.get("is_idle_location", False)),
            is_rail_station=bool(s.get("is_rail_station", False)),
        )
        stop.validate(zones)
        if stop.id in stops:
            raise ScenarioInvalid(f"duplicate stop id {stop.id}")
        stops[stop.id] = stop
    return zones, stops


def load_network_file(path: str) -> tuple[dict[str, Zone], dict[str, VirtualStop]]:
    with open(path, "r", encoding="utf-8") as fh:
        return load_network(json.load(fh))


REQUEST_CSV_FIELDS = [
    "request_id",
    "rider_id",
    "zone_id",
    "origin_stop",
    "destination_stop",
    "group_size",
    "submit_time",
    "channel",
]


def load_requests_csv(path: str) -> tuple[list[Request], dict[str, int]]:
    """Read the request table. Returns the requests plus a map of scripted
    rider cancellation times (from the optional ``cancel_time`` column)."""
    requests: list[Request] = []
    cancellations: dict[str, int] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [f for f in REQUEST_CSV_FIELDS if f not in (reader.fieldnames or [])]
        if missing:
            raise ScenarioInvalid(f"request CSV missing columns: {', '.join(missing)}")
        for row in reader:
            req = Request(
                id=row["request_id"],
                rider_id=row["rider_id"],
                zone_id=row["zone_id"],
                origin_stop=row["origin_stop"],
                destination_stop=row["destination_stop"],
                group_size=int(row["group_size"]),
                submit_time=int(row["submit_time"]),
                channel=Channel(row["channel"]),
            )
            requests.append(req)
            cancel = (row.get("cancel_time") or "").strip()
            if cancel:
                cancellations[req.id] = int(cancel)
    return requests, cancellations


def replay_onboard_counts(events: Iterable[EventRecord]) -> dict[str, list[tuple[int, int]]]:
    """Reconstruct per-vehicle onboard rider counts over time from the log.

    Returns, per vehicle, the list of (time, onboard_count) after each
    boarding or alighting. Useful for capacity audits.
    """
    counts: dict[str, int] = {}
    trace: dict[str, list[tuple[int, int]]] = {}
    for rec in events:
        if rec.kind == EventKind.BOARDED:
            counts[rec.vehicle_id] = counts.get(rec.vehicle_id, 0) + int(rec.payload["group_size"])
        elif rec.kind == EventKind.ALIGHTED:
            counts[rec.vehicle_id] = counts.get(rec.vehicle_id, 0) - int(rec.payload["group_size"])
        else:
            continue
        trace.setdefault(rec.vehicle_id, []).append((rec.time, counts[rec.vehicle_id]))
    return trace
