"""Quantitative evaluation of an event log (simulated or recorded).

Every function is a pure computation over parsed events plus explicit
parameters. Statistics use population standard deviation: the log is the
full census of what happened, not a sample.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence

from .domain import EventKind, EventRecord, StopKind, VirtualStop
from .errors import UnknownMode, UnpairedSignIn, ZeroRiders
from .fixedroute import (
    DEFAULT_MAX_WALK_M,
    DEFAULT_WALK_SPEED_MPS,
    FixedRouteFeed,
    Regime,
    plan_itinerary,
)
from .travel import TravelProvider


def _mean(xs: Sequence[float]) -> float:
    return sum(xs) / len(xs)


def _pop_sd(xs: Sequence[float]) -> float:
    m = _mean(xs)
    return math.sqrt(sum((x - m) ** 2 for x in xs) / len(xs))


# --- trip extraction ------------------------------------------------------------


@dataclass
class TripRecord:
    request_id: str
    rider_id: str = ""
    zone_id: str = ""
    origin: str = ""
    destination: str = ""
    group_size: int = 1
    submit: Optional[int] = None
    board: Optional[int] = None
    alight: Optional[int] = None
    cancel_time: Optional[int] = None
    outcome: str = "open"  # served | canceled | no_show | open

    @property
    def served(self) -> bool:
        return self.outcome == "served"

    @property
    def is_cancellation(self) -> bool:
        # No-shows count as cancellations throughout the cancellation analysis.
        return self.outcome in ("canceled", "no_show")


def extract_trips(events: Iterable[EventRecord]) -> dict[str, TripRecord]:
    trips: dict[str, TripRecord] = {}

    def trip(rid: str) -> TripRecord:
        if rid not in trips:
            trips[rid] = TripRecord(request_id=rid)
        return trips[rid]

    for rec in events:
        if rec.kind == EventKind.REQUEST_SUBMITTED:
            t = trip(rec.request_id)
            t.rider_id = rec.rider_id or ""
            t.zone_id = rec.payload.get("zone_id", "")
            t.origin = rec.payload.get("origin_stop", "")
            t.destination = rec.payload.get("destination_stop", "")
            t.group_size = int(rec.payload.get("group_size", 1))
            t.submit = rec.time
        elif rec.kind == EventKind.BOARDED:
            trip(rec.request_id).board = rec.time
        elif rec.kind == EventKind.ALIGHTED:
            t = trip(rec.request_id)
            t.alight = rec.time
            t.outcome = "served"
        elif rec.kind == EventKind.CANCELED:
            t = trip(rec.request_id)
            t.cancel_time = rec.time
            t.outcome = "canceled"
        elif rec.kind == EventKind.NO_SHOW_REPORTED:
            t = trip(rec.request_id)
            t.cancel_time = rec.time
            t.outcome = "no_show"
    return trips


# --- cancellation classification -------------------------------------------------


class CancellationCategory(str, Enum):
    EXACT_RETURN = "ExactReturn"
    OTHER_RETURN = "OtherReturn"
    REPEATED_CANCELLATIONS = "RepeatedCancellations"
    NO_RETURN = "NoReturn"


def classify_cancellation(
    cancel: TripRecord, rider_history: Sequence[TripRecord], theta_min: int
) -> CancellationCategory:
    """Classify one cancellation against the rider's other requests.

    A *return* is any other request by the same rider submitted within
    ``theta_min`` minutes of the cancellation time (inclusive). Precedence:

    1. a served return with the identical origin/destination pair,
    2. a served return with a different pair,
    3. any further canceled return (the rider kept canceling with no served
       ride inside the window),
    4. otherwise no return.

    A served return outranks intermediate cancellations so the four
    categories partition all cancellations.
    """
    window_end = cancel.cancel_time + theta_min * 60
    exact = other = repeated = False
    for t in rider_history:
        if t.request_id == cancel.request_id or t.submit is None:
            continue
        if not cancel.cancel_time <= t.submit <= window_end:
            continue
        if t.served:
            if (t.origin, t.destination) == (cancel.origin, cancel.destination):
                exact = True
            else:
                other = True
        elif t.is_cancellation:
            repeated = True
    if exact:
        return CancellationCategory.EXACT_RETURN
    if other:
        return CancellationCategory.OTHER_RETURN
    if repeated:
        return CancellationCategory.REPEATED_CANCELLATIONS
    return CancellationCategory.NO_RETURN


def classify_cancellations(
    events: Iterable[EventRecord], thetas: Sequence[int] = (15, 30, 60)
) -> dict[int, Counter]:
    """Category counts per threshold over every cancellation in the log."""
    trips = extract_trips(events)
    by_rider: dict[str, list[TripRecord]] = defaultdict(list)
    for t in trips.values():
        by_rider[t.rider_id].append(t)
    out: dict[int, Counter] = {theta: Counter() for theta in thetas}
    for t in trips.values():
        if not t.is_cancellation or t.cancel_time is None:
            continue
        for theta in thetas:
            out[theta][classify_cancellation(t, by_rider[t.rider_id], theta)] += 1
    return out


# --- alternative-mode hierarchy ----------------------------------------------------


@dataclass(frozen=True)
class ModeHierarchy:
    """Ranked mode categories; a response takes the best-ranked category among
    the modes it lists."""

    ranked_categories: tuple[str, ...]
    mode_to_category: Mapping[str, str]

    def rank(self, category: str) -> int:
        return self.ranked_categories.index(category)


TRANSIT = "Transit"
AUTO = "Auto"
ACTIVE = "Active"
OTHER = "Other"
WOULD_NOT_MAKE_TRIP = "WouldNotMakeTrip"

DEFAULT_MODE_HIERARCHY = ModeHierarchy(
    ranked_categories=(TRANSIT, AUTO, ACTIVE, OTHER, WOULD_NOT_MAKE_TRIP),
    mode_to_category={
        "marta bus": TRANSIT,
        "bus": TRANSIT,
        "marta rail": TRANSIT,
        "rail": TRANSIT,
        "marta mobility": TRANSIT,
        "mobility": TRANSIT,
        "drive myself": AUTO,
        "ride with someone": AUTO,
        "taxi / uber / lyft": AUTO,
        "taxi/uber/lyft": AUTO,
        "taxi": AUTO,
        "uber": AUTO,
        "lyft": AUTO,
        "walk": ACTIVE,
        "e-scooter": ACTIVE,
        "bike": ACTIVE,
        "other": OTHER,
        "others": OTHER,
        "would not make the trip": WOULD_NOT_MAKE_TRIP,
        "n/a": WOULD_NOT_MAKE_TRIP,
    },
)


def classify_mode_response(
    modes: Iterable[str], hierarchy: ModeHierarchy = DEFAULT_MODE_HIERARCHY
) -> str:
    """Map a multi-select mode response to its highest-priority category.

    Order-independent in the input set; unknown mode strings raise.
    """
    modes = list(modes)
    if not modes:
        raise UnknownMode("empty mode response")
    best: Optional[str] = None
    for mode in modes:
        key = " ".join(mode.strip().lower().split())
        try:
            category = hierarchy.mode_to_category[key]
        except KeyError:
            raise UnknownMode(mode) from None
        if best is None or hierarchy.rank(category) < hierarchy.rank(best):
            best = category
    return best


# --- service quality ------------------------------------------------------------


@dataclass(frozen=True)
class HourStats:
    n: int
    wait_mean: float
    wait_sd: float
    ride_mean: float
    ride_sd: float
    total_mean: float
    total_sd: float


def service_quality_profile(events: Iterable[EventRecord]) -> dict[int, HourStats]:
    """Per submit-hour mean and population SD of wait (board minus submit),
    ride (alight minus board), and total travel (alight minus submit) over
    served trips. Hours with no served trips are absent."""
    trips = extract_trips(events)
    per_hour: dict[int, list[TripRecord]] = defaultdict(list)
    for t in trips.values():
        if t.served and t.submit is not None and t.board is not None and t.alight is not None:
            per_hour[(t.submit % 86_400) // 3600].append(t)
    out: dict[int, HourStats] = {}
    for hour, ts in sorted(per_hour.items()):
        waits = [t.board - t.submit for t in ts]
        rides = [t.alight - t.board for t in ts]
        totals = [t.alight - t.submit for t in ts]
        out[hour] = HourStats(
            n=len(ts),
            wait_mean=_mean(waits),
            wait_sd=_pop_sd(waits),
            ride_mean=_mean(rides),
            ride_sd=_pop_sd(rides),
            total_mean=_mean(totals),
            total_sd=_pop_sd(totals),
        )
    return out


# --- multimodal stop-type shares ----------------------------------------------------

STOP_TYPE_RAIL = "rail_station"
STOP_TYPE_BUS = "bus_stop"
STOP_TYPE_ON_DEMAND = "on_demand_only"
ALL_ZONES = "all"


def stop_type(stop: VirtualStop) -> str:
    if stop.is_rail_station:
        return STOP_TYPE_RAIL
    if stop.kind == StopKind.EXISTING_TRANSIT:
        return STOP_TYPE_BUS
    return STOP_TYPE_ON_DEMAND


@dataclass
class MultimodalShare:
    # zone -> hour -> stop type -> fraction of served trips
    origins: dict[str, dict[int, dict[str, float]]] = field(default_factory=dict)
    destinations: dict[str, dict[int, dict[str, float]]] = field(default_factory=dict)
    counts: dict[str, dict[int, int]] = field(default_factory=dict)


def multimodal_share(
    events: Iterable[EventRecord], stops: Mapping[str, VirtualStop]
) -> MultimodalShare:
    """Fractions of served trips by origin/destination stop type per zone and
    submit hour, plus an 'all' roll-up across zones. Fractions in each
    populated cell sum to 1."""
    trips = extract_trips(events)
    origin_counts: dict[tuple[str, int], Counter] = defaultdict(Counter)
    dest_counts: dict[tuple[str, int], Counter] = defaultdict(Counter)
    for t in trips.values():
        if not t.served or t.submit is None:
            continue
        hour = (t.submit % 86_400) // 3600
        for zone in (t.zone_id, ALL_ZONES):
            origin_counts[(zone, hour)][stop_type(stops[t.origin])] += 1
            dest_counts[(zone, hour)][stop_type(stops[t.destination])] += 1
    result = MultimodalShare()
    for table, target in ((origin_counts, result.origins), (dest_counts, result.destinations)):
        for (zone, hour), counter in table.items():
            total = sum(counter.values())
            target.setdefault(zone, {})[hour] = {
                kind: counter.get(kind, 0) / total
                for kind in (STOP_TYPE_RAIL, STOP_TYPE_BUS, STOP_TYPE_ON_DEMAND)
            }
            result.counts.setdefault(zone, {})[hour] = total
    return result


# --- shared mileage ---------------------------------------------------------------


def shared_mileage_fraction(events: Iterable[EventRecord]) -> float:
    """Meters driven with two or more distinct requests onboard divided by
    meters driven with at least one onboard. Segment labels come from the
    dispatch hook on DriverResponded events."""
    shared = serving = 0.0
    for rec in events:
        if rec.kind != EventKind.DRIVER_RESPONDED:
            continue
        seg = rec.payload.get("segment")
        if not seg:
            continue
        onboard = seg.get("onboard", [])
        if onboard:
            serving += float(seg["drive_m"])
            if len(set(onboard)) >= 2:
                shared += float(seg["drive_m"])
    return shared / serving if serving else 0.0


# --- fleet accounting ---------------------------------------------------------------


@dataclass
class FleetAccounting:
    planned_h: float
    online_h: float
    online_pct: float
    histogram: dict[int, float]  # concurrent online vehicles -> hours, overall
    zone_histograms: dict[str, dict[int, float]]


def fleet_accounting(
    events: Iterable[EventRecord],
    fleet_size: int,
    days: int,
    hours_per_day: float = 13.0,
    service_start_s: int = 6 * 3600,
) -> FleetAccounting:
    """Planned versus actual online hours plus the concurrency histogram.

    ``planned_h`` is days x fleet_size x hours_per_day; the caller states the
    basis explicitly. The histogram measures, inside each day's service
    window, how long exactly k vehicles were online (k=0 included), so per
    zone the durations sum to days x hours_per_day.
    """
    intervals: list[tuple[int, int, str]] = []  # (start, end, zone)
    open_sign_in: dict[str, tuple[int, str]] = {}
    online_s = 0
    for rec in events:
        if rec.kind == EventKind.SIGN_IN:
            if rec.vehicle_id in open_sign_in:
                raise UnpairedSignIn(f"vehicle {rec.vehicle_id} signed in twice")
            open_sign_in[rec.vehicle_id] = (rec.time, rec.payload.get("zone_id", ""))
        elif rec.kind == EventKind.SIGN_OUT:
            if rec.vehicle_id not in open_sign_in:
                raise UnpairedSignIn(f"vehicle {rec.vehicle_id} signed out while offline")
            start, zone = open_sign_in.pop(rec.vehicle_id)
            intervals.append((start, rec.time, zone))
            online_s += rec.time - start
    if open_sign_in:
        vid = sorted(open_sign_in)[0]
        raise UnpairedSignIn(f"vehicle {vid} never signed out")

    planned_h = days * fleet_size * hours_per_day
    online_h = online_s / 3600.0
    window_s = int(hours_per_day * 3600)
    zones = sorted({z for _, _, z in intervals}) or [""]

    def histogram_for(zone: Optional[str]) -> dict[int, float]:
        hist: dict[int, float] = defaultdict(float)
        for d in range(days):
            w0 = d * 86_400 + service_start_s
            w1 = w0 + window_s
            marks = {w0, w1}
            todays = [
                (max(a, w0), min(b, w1))
                for a, b, z in intervals
                if (zone is None or z == zone) and a < w1 and b > w0
            ]
            for a, b in todays:
                marks.add(a)
                marks.add(b)
            points = sorted(marks)
            for p, q in zip(points, points[1:]):
                k = sum(1 for a, b in todays if a <= p and q <= b)
                hist[k] += (q - p) / 3600.0
        return dict(hist)

    return FleetAccounting(
        planned_h=planned_h,
        online_h=online_h,
        online_pct=100.0 * online_h / planned_h if planned_h else 0.0,
        histogram=histogram_for(None),
        zone_histograms={z: histogram_for(z) for z in zones},
    )


# --- cost model -----------------------------------------------------------------


@dataclass(frozen=True)
class CostModelInput:
    cost_per_vehicle_hour: float
    fleet_size: int
    service_hours: float = 13.0
    riders_served: int = 0

    def __post_init__(self) -> None:
        if self.cost_per_vehicle_hour <= 0 or self.fleet_size <= 0 or self.service_hours <= 0:
            raise ValueError("cost model inputs must be positive")


def cost_per_rider(inp: CostModelInput) -> float:
    """Hourly vehicle cost times service hours times fleet size, divided by
    riders served. Exact value; round with round_cents() for reporting."""
    if inp.riders_served <= 0:
        raise ZeroRiders("riders_served must be positive")
    return inp.cost_per_vehicle_hour * inp.service_hours * inp.fleet_size / inp.riders_served


def round_cents(x: float) -> float:
    """Half-up rounding to cents, applied only at presentation time."""
    return float(Decimal(repr(x)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def cost_table(
    rates: Sequence[float],
    fleets: Sequence[int],
    riders: Sequence[int],
    service_hours: float = 13.0,
) -> list[dict]:
    """Sensitivity grid of cost per rider, one row per rate, one column per
    (ridership, fleet) combination, cells rounded to cents."""
    rows = []
    for rate in rates:
        row: dict = {"cost_per_vehicle_hour": rate}
        for r in riders:
            for f in fleets:
                row[f"r{r}_f{f}"] = round_cents(
                    cost_per_rider(CostModelInput(rate, f, service_hours, r))
                )
        rows.append(row)
    return rows


# --- driving distance statistics ------------------------------------------------------


@dataclass(frozen=True)
class DistanceStats:
    n: int
    mean_km: float
    sd_km: float
    mode_km: float


def distance_stats(
    events: Iterable[EventRecord], provider: TravelProvider
) -> dict[str, DistanceStats]:
    """Per-zone mean, population SD, and modal bin of the direct driving
    distance of served trips.

    The mode is the center of the most populated 0.1 km bin, with bins
    centered on multiples of 0.1 km; count ties go to the lower bin.
    """
    trips = extract_trips(events)
    per_zone: dict[str, list[float]] = defaultdict(list)
    for t in trips.values():
        if t.served:
            per_zone[t.zone_id].append(provider.drive_distance(t.origin, t.destination) / 1000.0)
    out = {}
    for zone, kms in sorted(per_zone.items()):
        bins = Counter(math.floor(d / 0.1 + 0.5) for d in kms)
        best_bin = max(sorted(bins), key=lambda b: (bins[b], -b))
        out[zone] = DistanceStats(
            n=len(kms),
            mean_km=_mean(kms),
            sd_km=_pop_sd(kms),
            mode_km=best_bin * 0.1,
        )
    return out


# --- fixed-route comparison -----------------------------------------------------------


@dataclass(frozen=True)
class ZoneComparison:
    n_trips: int
    n_no_option: int
    fixed_mean_s: Optional[float]
    fixed_sd_s: Optional[float]
    better_fraction: float  # share of comparable trips where on-demand was strictly faster


def compare_fixed_routes(
    events: Iterable[EventRecord],
    stops: Mapping[str, VirtualStop],
    feed: FixedRouteFeed,
    regime: Regime,
    walk_speed: float = DEFAULT_WALK_SPEED_MPS,
    max_walk_m: float = DEFAULT_MAX_WALK_M,
    horizon_s: int = 3 * 3600,
) -> dict[str, ZoneComparison]:
    """For each served trip, plan the same origin/destination pair on the
    fixed-route network at the trip's submit time and compare durations.

    Trips with no fixed-route option inside the horizon land in a counted
    bucket; the better-fraction is over comparable trips and requires the
    on-demand total to be strictly smaller.
    """
    trips = extract_trips(events)
    per_zone: dict[str, list[tuple[int, Optional[int]]]] = defaultdict(list)
    for t in trips.values():
        if not (t.served and t.submit is not None and t.alight is not None):
            continue
        itinerary = plan_itinerary(
            stops[t.origin].location,
            stops[t.destination].location,
            t.submit,
            feed,
            regime,
            walk_speed=walk_speed,
            max_walk_m=max_walk_m,
            horizon_s=horizon_s,
        )
        fixed = itinerary.total_duration if itinerary is not None else None
        actual = t.alight - t.submit
        for zone in (t.zone_id, ALL_ZONES):
            per_zone[zone].append((actual, fixed))
    out = {}
    for zone, pairs in sorted(per_zone.items()):
        comparable = [(a, f) for a, f in pairs if f is not None]
        durations = [f for _, f in comparable]
        better = sum(1 for a, f in comparable if a < f)
        out[zone] = ZoneComparison(
            n_trips=len(pairs),
            n_no_option=len(pairs) - len(comparable),
            fixed_mean_s=_mean(durations) if durations else None,
            fixed_sd_s=_pop_sd(durations) if durations else None,
            better_fraction=better / len(comparable) if comparable else 0.0,
        )
    return out
