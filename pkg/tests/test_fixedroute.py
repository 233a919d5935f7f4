import pytest

from odtsim.errors import FeedError
from odtsim.fixedroute import (
    FeedStop,
    FixedRouteFeed,
    LegKind,
    Regime,
    StopTime,
    TransitMode,
    TransitTrip,
    load_feed,
    plan_itinerary,
    walk_seconds,
)
from helpers import offset_latlon, oracle_earliest_arrival, random_feed


def one_line_feed(first_departure=600, in_vehicle=900, headway=None, n_departures=1):
    """Two stops, co-located with the query origin/destination, one bus line."""
    a = offset_latlon(0, 0)
    b = offset_latlon(0, 4000)
    feed = FixedRouteFeed(
        stops={
            "A": FeedStop(id="A", lat=a[0], lon=a[1]),
            "B": FeedStop(id="B", lat=b[0], lon=b[1]),
        }
    )
    for k in range(n_departures):
        dep = first_departure + (headway or 0) * k
        feed.trips.append(
            TransitTrip(
                id=f"t{k}",
                route_id="r1",
                mode=TransitMode.BUS,
                stop_times=[
                    StopTime(stop_id="A", arrival_s=dep, departure_s=dep),
                    StopTime(stop_id="B", arrival_s=dep + in_vehicle, departure_s=dep + in_vehicle),
                ],
            )
        )
    feed.validate()
    return feed, a, b


class TestSingleLine:
    def test_same_departure_charges_initial_wait(self):
        feed, a, b = one_line_feed(first_departure=600, in_vehicle=900)
        itin = plan_itinerary(a, b, 0, feed, Regime.SAME_DEPARTURE)
        assert itin.total_duration == 1500
        assert itin.initial_wait == 0
        assert itin.arrival == 1500

    def test_adjusted_departure_excludes_initial_wait(self):
        feed, a, b = one_line_feed(first_departure=600, in_vehicle=900)
        itin = plan_itinerary(a, b, 0, feed, Regime.ADJUSTED_DEPARTURE)
        assert itin.total_duration == 900
        assert itin.initial_wait == 600
        assert itin.arrival == 1500

    def test_legs_are_contiguous(self):
        feed, a, b = one_line_feed()
        for regime in Regime:
            itin = plan_itinerary(a, b, 0, feed, regime)
            assert itin.legs
            for prev, nxt in zip(itin.legs, itin.legs[1:]):
                assert prev.end == nxt.start
            assert itin.legs[-1].end == itin.arrival
            assert itin.total_duration == itin.legs[-1].end - itin.legs[0].start

    def test_zero_trip(self):
        feed, a, _ = one_line_feed()
        itin = plan_itinerary(a, a, 120, feed, Regime.SAME_DEPARTURE)
        assert itin.total_duration == 0 and itin.legs == ()


class TestWalking:
    def test_walk_only_fallback(self):
        feed = FixedRouteFeed()  # no service at all
        a = offset_latlon(0, 0)
        b = offset_latlon(0, 2000)
        itin = plan_itinerary(a, b, 0, feed, Regime.SAME_DEPARTURE, walk_speed=1.0)
        assert itin is not None
        assert itin.total_duration == walk_seconds(a, b, 1.0)
        assert [leg.kind for leg in itin.legs] == [LegKind.WALK]

    def test_unreachable_beyond_horizon(self):
        feed = FixedRouteFeed()
        a = offset_latlon(0, 0)
        b = offset_latlon(0, 20_000)  # ~4 h walk at 1.4 m/s
        assert plan_itinerary(a, b, 0, feed, Regime.SAME_DEPARTURE) is None

    def test_direct_walk_ignores_leg_cap_but_access_walks_do_not(self):
        # Stop pair 3 km from the origin: transit unusable under a 1.5 km
        # access cap, but the direct 2 km walk must still be offered.
        a = offset_latlon(0, 0)
        b = offset_latlon(0, 2000)
        far = offset_latlon(3000, 0)
        far_b = offset_latlon(3000, 2000)
        feed = FixedRouteFeed(
            stops={
                "F1": FeedStop(id="F1", lat=far[0], lon=far[1]),
                "F2": FeedStop(id="F2", lat=far_b[0], lon=far_b[1]),
            },
            trips=[
                TransitTrip(
                    id="t0",
                    route_id="r",
                    mode=TransitMode.BUS,
                    stop_times=[
                        StopTime(stop_id="F1", arrival_s=10, departure_s=10),
                        StopTime(stop_id="F2", arrival_s=20, departure_s=20),
                    ],
                )
            ],
        )
        itin = plan_itinerary(a, b, 0, feed, Regime.SAME_DEPARTURE)
        assert [leg.kind for leg in itin.legs] == [LegKind.WALK]


class TestTransfers:
    def two_leg_feed(self, transfer_gap):
        a = offset_latlon(0, 0)
        m = offset_latlon(0, 3000)
        b = offset_latlon(0, 6000)
        feed = FixedRouteFeed(
            stops={
                "A": FeedStop(id="A", lat=a[0], lon=a[1]),
                "M": FeedStop(id="M", lat=m[0], lon=m[1]),
                "B": FeedStop(id="B", lat=b[0], lon=b[1]),
            },
            trips=[
                TransitTrip(
                    id="t1",
                    route_id="r1",
                    mode=TransitMode.BUS,
                    stop_times=[
                        StopTime("A", 100, 100),
                        StopTime("M", 400, 400),
                    ],
                ),
                TransitTrip(
                    id="t2",
                    route_id="r2",
                    mode=TransitMode.RAIL,
                    stop_times=[
                        StopTime("M", 400 + transfer_gap, 400 + transfer_gap),
                        StopTime("B", 1000 + transfer_gap, 1000 + transfer_gap),
                    ],
                ),
            ],
        )
        return feed, a, b

    def test_zero_buffer_allows_tight_transfer(self):
        feed, a, b = self.two_leg_feed(transfer_gap=0)
        itin = plan_itinerary(a, b, 0, feed, Regime.SAME_DEPARTURE)
        trips = [leg.trip_id for leg in itin.legs if leg.kind == LegKind.TRANSIT]
        assert trips == ["t1", "t2"]
        assert itin.arrival == 1000

    def test_positive_buffer_blocks_tight_transfer(self):
        feed, a, b = self.two_leg_feed(transfer_gap=0)
        itin = plan_itinerary(a, b, 0, feed, Regime.SAME_DEPARTURE, transfer_buffer_s=60)
        trips = [leg.trip_id for leg in itin.legs if leg.kind == LegKind.TRANSIT]
        assert trips != ["t1", "t2"]


class TestFeedValidation:
    def test_unsorted_stop_times_rejected(self):
        a = offset_latlon(0, 0)
        feed = FixedRouteFeed(
            stops={"A": FeedStop(id="A", lat=a[0], lon=a[1])},
            trips=[
                TransitTrip(
                    id="t",
                    route_id="r",
                    mode=TransitMode.BUS,
                    stop_times=[StopTime("A", 100, 100), StopTime("A", 50, 50)],
                )
            ],
        )
        with pytest.raises(FeedError):
            feed.validate()

    def test_unknown_stop_rejected(self):
        feed = FixedRouteFeed(
            stops={},
            trips=[
                TransitTrip(
                    id="t",
                    route_id="r",
                    mode=TransitMode.BUS,
                    stop_times=[StopTime("ghost", 0, 0), StopTime("ghost2", 10, 10)],
                )
            ],
        )
        with pytest.raises(FeedError):
            feed.validate()

    def test_csv_loading(self, tmp_path):
        a = offset_latlon(0, 0)
        b = offset_latlon(0, 1000)
        (tmp_path / "stops.csv").write_text(
            f"stop_id,lat,lon\nA,{a[0]},{a[1]}\nB,{b[0]},{b[1]}\n"
        )
        (tmp_path / "trips.csv").write_text("trip_id,route_id,mode\nt1,r1,bus\n")
        (tmp_path / "stop_times.csv").write_text(
            "trip_id,seq,stop_id,arrival_s,departure_s\nt1,1,A,100,110\nt1,2,B,400,400\n"
        )
        feed = load_feed(str(tmp_path))
        assert len(feed.stops) == 2
        assert feed.trips[0].stop_times[0].departure_s == 110


class TestAgainstOracle:
    def test_regime_ordering_and_optimality_random_feeds(self, rng):
        for case in range(60):
            feed = random_feed(rng)
            origin = offset_latlon(rng.uniform(-1200, 1200), rng.uniform(-1200, 1200))
            destination = offset_latlon(rng.uniform(-1200, 1200), rng.uniform(-1200, 1200))
            depart = rng.randint(0, 1200)
            same = plan_itinerary(origin, destination, depart, feed, Regime.SAME_DEPARTURE)
            adjusted = plan_itinerary(origin, destination, depart, feed, Regime.ADJUSTED_DEPARTURE)
            expected = oracle_earliest_arrival(origin, destination, depart, feed)
            if expected is None:
                assert same is None and adjusted is None
                continue
            assert same.arrival == expected
            assert adjusted.arrival == expected
            assert adjusted.total_duration <= same.total_duration
            for itin in (same, adjusted):
                for prev, nxt in zip(itin.legs, itin.legs[1:]):
                    assert prev.end == nxt.start  # contiguous, non-overlapping
                if itin.legs:
                    assert itin.legs[-1].end == itin.arrival
            # The adjusted anchor is the latest departure achieving the arrival.
            t0 = depart + adjusted.initial_wait
            assert oracle_earliest_arrival(origin, destination, t0, feed) == expected
            later = oracle_earliest_arrival(origin, destination, t0 + 1, feed)
            assert later is None or later > expected
