#!/usr/bin/env python3
"""Regenerate the demo scenario under demo/ (deterministic)."""

import json
import math
import os
import random

BASE_LAT, BASE_LON = 33.78, -84.30
M_PER_DEG_LAT = 111_194.92664455873


def offset(north_m, east_m):
    lat = BASE_LAT + north_m / M_PER_DEG_LAT
    lon = BASE_LON + east_m / (M_PER_DEG_LAT * math.cos(math.radians(BASE_LAT)))
    return lat, lon


def main():
    out = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "demo")
    os.makedirs(out, exist_ok=True)
    rng = random.Random(2022)

    half = 2600.0
    polygon = [offset(-half, -half), offset(-half, half), offset(half, half), offset(half, -half)]
    stops = []
    k = 0
    for row in range(3):
        for col in range(3):
            lat, lon = offset((row - 1) * 1500.0, (col - 1) * 1500.0)
            rail = k == 4  # center stop doubles as the rail connection
            stops.append(
                {
                    "id": f"b{k}",
                    "zone_id": "belvedere",
                    "lat": round(lat, 6),
                    "lon": round(lon, 6),
                    "kind": "existing_transit" if rail or k in (0, 8) else "on_demand_only",
                    "is_idle_location": k in (0, 4, 8),
                    "is_rail_station": rail,
                }
            )
            k += 1
    network = {
        "zones": [
            {
                "id": "belvedere",
                "name": "Belvedere",
                "polygon": [[round(lat, 6), round(lon, 6)] for lat, lon in polygon],
                "fleet_size": 2,
                "phase": 2,
            }
        ],
        "stops": stops,
    }
    with open(os.path.join(out, "network.json"), "w") as fh:
        json.dump(network, fh, indent=1)

    lines = [
        "request_id,rider_id,zone_id,origin_stop,destination_stop,group_size,submit_time,channel,cancel_time"
    ]
    times = sorted(rng.randint(22_000, 67_000) for _ in range(14))
    for idx, submit in enumerate(times):
        o, d = rng.sample(range(9), 2)
        if idx in (2, 7):  # corridor trips where the bus line competes
            o, d = (3, 5) if idx == 2 else (5, 3)
        group = 1 if rng.random() < 0.9 else 2
        channel = "phone_call" if idx == 3 else "app"
        cancel = submit + 240 if idx == 9 else ""
        lines.append(
            f"t{idx:02d},rider{idx % 8},belvedere,b{o},b{d},{group},{submit},{channel},{cancel}"
        )
    with open(os.path.join(out, "requests.csv"), "w") as fh:
        fh.write("\n".join(lines) + "\n")

    with open(os.path.join(out, "shifts.csv"), "w") as fh:
        fh.write("vehicle_id,sign_in_s,sign_out_s\n")
        for vid in ("4540", "4541"):
            fh.write(f"{vid},21600,46800\n{vid},46800,68400\n")

    with open(os.path.join(out, "forecast.csv"), "w") as fh:
        fh.write("stop_id,hour,weight\n")
        for hour in range(6, 19):
            fh.write(f"b4,{hour},3.0\nb0,{hour},1.0\n")

    scenario = {
        "network_file": "network.json",
        "requests_file": "requests.csv",
        "shifts_file": "shifts.csv",
        "forecast_file": "forecast.csv",
        "vehicles": [
            {"id": "4540", "zone_id": "belvedere", "start_stop": "b4"},
            {"id": "4541", "zone_id": "belvedere", "start_stop": "b0"},
        ],
        "provider": {"mode": "grid", "speed_mps": 8.0, "detour_factor": 1.3},
        "dispatch": {"stretch_factor": 1.5, "ride_weight": 0.5, "rebalance_period_s": 1800},
        "removal_policy": [
            {"threshold_s": 300, "effective_from_s": 0},
            {"threshold_s": 240, "effective_from_s": 46800},
        ],
        "behavior": {
            "reaction": {"family": "lognormal", "mu": round(math.log(19), 6), "sigma": 1.313},
            "p_noshow": 0.05,
            "noshow_wait_s": 300,
        },
        "dwell_s": 30,
        "service": {"start_s": 21600, "end_s": 68400, "days": 1},
        "seed": 7,
    }
    with open(os.path.join(out, "scenario.json"), "w") as fh:
        json.dump(scenario, fh, indent=1)

    # small fixed-route feed for the comparison subcommands
    feed_dir = os.path.join(out, "feed")
    os.makedirs(feed_dir, exist_ok=True)
    fa = offset(0.0, -1500.0)
    fb = offset(0.0, 0.0)
    fc = offset(0.0, 1500.0)
    with open(os.path.join(feed_dir, "stops.csv"), "w") as fh:
        fh.write("stop_id,lat,lon\n")
        for sid, (lat, lon) in (("fa", fa), ("fb", fb), ("fc", fc)):
            fh.write(f"{sid},{round(lat, 6)},{round(lon, 6)}\n")
    n_bus = 52
    with open(os.path.join(feed_dir, "trips.csv"), "w") as fh:
        fh.write("trip_id,route_id,mode\n")
        for k in range(n_bus):
            fh.write(f"bus{k:02d},loop,bus\n")
        fh.write("rail0,main,rail\n")
    with open(os.path.join(feed_dir, "stop_times.csv"), "w") as fh:
        fh.write("trip_id,seq,stop_id,arrival_s,departure_s\n")
        for k in range(n_bus):
            dep = 21_600 + k * 900
            fh.write(f"bus{k:02d},1,fa,{dep},{dep}\n")
            fh.write(f"bus{k:02d},2,fb,{dep + 240},{dep + 270}\n")
            fh.write(f"bus{k:02d},3,fc,{dep + 510},{dep + 510}\n")
        fh.write("rail0,1,fb,21600,21660\n")
        fh.write("rail0,2,fc,21900,21900\n")
    print(f"demo written to {out}")


if __name__ == "__main__":
    main()
