"""Command-line entry point.

Subcommands: validate, simulate, analyze, compare-fixed, cost-table. Exit
codes: 0 success, 1 validation error (one machine-readable JSON line on
stderr), 2 I/O failure. All randomness flows from --seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import replace

from . import analytics
from .domain import EventKind, load_events_jsonl, load_network_file
from .errors import OdtsimError, ScenarioInvalid
from .fixedroute import Regime, load_feed
from .sim import Simulation, load_scenario, validate_scenario


def _fail(code: int, error: str, detail: str) -> int:
    sys.stderr.write(json.dumps({"error": error, "detail": detail}) + "\n")
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="odtsim",
        description="On-demand transit dispatch simulator and evaluation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("validate", help="check a scenario document", formatter_class=fmt)
    p.add_argument("--scenario", required=True, help="scenario JSON path")

    p = sub.add_parser("simulate", help="run one scenario", formatter_class=fmt)
    p.add_argument("--scenario", required=True, help="scenario JSON path")
    p.add_argument("--seed", type=int, default=None, help="RNG seed (overrides scenario seed)")
    p.add_argument("--out", required=True, help="output event log (JSONL)")
    p.add_argument("--dwell-s", type=int, default=None, help="dwell seconds override")
    p.add_argument("--stretch-factor", type=float, default=None, help="ride stretch bound override")
    p.add_argument(
        "--removal-threshold-s", type=int, default=None, help="single removal threshold override"
    )

    p = sub.add_parser("analyze", help="compute metrics from an event log", formatter_class=fmt)
    p.add_argument("--events", required=True, help="event log JSONL path")
    p.add_argument("--stops", required=True, help="zones+stops JSON path")
    p.add_argument("--feed", default=None, help="fixed-route feed directory (optional)")
    p.add_argument("--report", required=True, help="report output directory")
    p.add_argument("--matrix", default=None, help="travel matrix CSV for distance stats")
    p.add_argument("--fleet-size", type=int, default=None, help="fleet size basis (default: from log)")
    p.add_argument("--days", type=int, default=None, help="service days basis (default: from log)")
    p.add_argument("--hours-per-day", type=float, default=13.0, help="service hours per day")
    p.add_argument(
        "--service-start-s", type=int, default=6 * 3600, help="daily service start (seconds)"
    )

    p = sub.add_parser(
        "compare-fixed", help="compare served trips against fixed routes", formatter_class=fmt
    )
    p.add_argument("--events", required=True, help="event log JSONL path")
    p.add_argument("--stops", required=True, help="zones+stops JSON path")
    p.add_argument("--feed", required=True, help="fixed-route feed directory")
    p.add_argument(
        "--regime",
        choices=[r.value for r in Regime],
        default=Regime.ADJUSTED_DEPARTURE.value,
        help="departure-time regime",
    )
    p.add_argument("--walk-speed", type=float, default=1.4, help="walking speed m/s")
    p.add_argument("--report", default=None, help="optional report directory for CSV output")

    p = sub.add_parser("cost-table", help="cost-per-rider sensitivity table", formatter_class=fmt)
    p.add_argument("--rates", default="20:100:5", help="vehicle-hour rates start:stop:step")
    p.add_argument("--fleets", default="5,6,7", help="fleet sizes, comma separated")
    p.add_argument("--riders", required=True, help="riders-served counts, comma separated")
    p.add_argument("--hours", type=float, default=13.0, help="service hours per day")
    p.add_argument("--out", default=None, help="output CSV path (default: stdout)")

    return parser


def _parse_rates(spec: str) -> list[float]:
    start, stop, step = (float(x) for x in spec.split(":"))
    rates = []
    r = start
    while r <= stop + 1e-9:
        r_clean = round(r, 6)
        rates.append(int(r_clean) if r_clean == int(r_clean) else r_clean)
        r += step
    return rates


def _cmd_validate(args) -> int:
    scenario = load_scenario(args.scenario)
    validate_scenario(scenario)
    print(json.dumps({"ok": True, "zones": len(scenario.zones), "stops": len(scenario.stops),
                      "vehicles": len(scenario.vehicles), "requests": len(scenario.requests)}))
    return 0


def _cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    overrides = {}
    if args.dwell_s is not None:
        overrides["dwell_s"] = args.dwell_s
    if args.stretch_factor is not None:
        overrides["stretch_factor"] = args.stretch_factor
    if overrides:
        scenario.dispatch = replace(scenario.dispatch, **overrides)
    if args.removal_threshold_s is not None:
        from .lifecycle import RemovalPolicy, RemovalRegime

        scenario.removal_policy = RemovalPolicy([RemovalRegime(args.removal_threshold_s, 0)])
    result = Simulation(scenario, seed=args.seed).run()
    result.events.write_jsonl(args.out)
    print(json.dumps(result.summary, sort_keys=True))
    return 0


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _cmd_analyze(args) -> int:
    events = load_events_jsonl(args.events)
    zones, stops = load_network_file(args.stops)
    os.makedirs(args.report, exist_ok=True)

    quality = analytics.service_quality_profile(events)
    _write_csv(
        os.path.join(args.report, "service_quality.csv"),
        ["hour", "n", "wait_mean_s", "wait_sd_s", "ride_mean_s", "ride_sd_s", "total_mean_s", "total_sd_s"],
        [
            [h, st.n, f"{st.wait_mean:.1f}", f"{st.wait_sd:.1f}", f"{st.ride_mean:.1f}",
             f"{st.ride_sd:.1f}", f"{st.total_mean:.1f}", f"{st.total_sd:.1f}"]
            for h, st in quality.items()
        ],
    )

    share = analytics.multimodal_share(events, stops)
    for name, table in (("origins", share.origins), ("destinations", share.destinations)):
        rows = []
        for zone in sorted(table):
            for hour in sorted(table[zone]):
                cell = table[zone][hour]
                rows.append(
                    [zone, hour, share.counts[zone][hour],
                     f"{cell[analytics.STOP_TYPE_RAIL]:.4f}",
                     f"{cell[analytics.STOP_TYPE_BUS]:.4f}",
                     f"{cell[analytics.STOP_TYPE_ON_DEMAND]:.4f}"]
                )
        _write_csv(
            os.path.join(args.report, f"multimodal_{name}.csv"),
            ["zone", "hour", "n", "rail_station", "bus_stop", "on_demand_only"],
            rows,
        )

    cancels = analytics.classify_cancellations(events)
    _write_csv(
        os.path.join(args.report, "cancellations.csv"),
        ["theta_min", "exact_return", "other_return", "repeated_cancellations", "no_return", "total"],
        [
            [theta,
             counts[analytics.CancellationCategory.EXACT_RETURN],
             counts[analytics.CancellationCategory.OTHER_RETURN],
             counts[analytics.CancellationCategory.REPEATED_CANCELLATIONS],
             counts[analytics.CancellationCategory.NO_RETURN],
             sum(counts.values())]
            for theta, counts in cancels.items()
        ],
    )

    summary: dict = {
        "shared_mileage_fraction": round(analytics.shared_mileage_fraction(events), 6),
    }

    if args.matrix:
        from .travel import TravelProvider

        provider = TravelProvider.from_matrix_csv(args.matrix, stop_ids=sorted(stops))
        dstats = analytics.distance_stats(events, provider)
        _write_csv(
            os.path.join(args.report, "distance_stats.csv"),
            ["zone", "n", "mean_km", "sd_km", "mode_km"],
            [
                [z, st.n, f"{st.mean_km:.2f}", f"{st.sd_km:.2f}", f"{st.mode_km:.1f}"]
                for z, st in dstats.items()
            ],
        )

    sign_ins = {e.vehicle_id for e in events if e.kind == EventKind.SIGN_IN}
    fleet_size = args.fleet_size if args.fleet_size is not None else max(len(sign_ins), 1)
    days = args.days if args.days is not None else (max((e.time for e in events), default=0) // 86_400) + 1
    accounting = analytics.fleet_accounting(
        events, fleet_size, days, args.hours_per_day, args.service_start_s
    )
    _write_csv(
        os.path.join(args.report, "fleet_histogram.csv"),
        ["zone", "online_vehicles", "hours"],
        [["all", k, f"{v:.4f}"] for k, v in sorted(accounting.histogram.items())]
        + [
            [zone, k, f"{v:.4f}"]
            for zone, hist in sorted(accounting.zone_histograms.items())
            for k, v in sorted(hist.items())
        ],
    )
    summary["fleet_accounting"] = {
        "planned_h": accounting.planned_h,
        "online_h": round(accounting.online_h, 4),
        "online_pct": round(accounting.online_pct, 2),
    }

    if args.feed:
        feed = load_feed(args.feed)
        rows = []
        for regime in Regime:
            comparison = analytics.compare_fixed_routes(events, stops, feed, regime)
            for zone, zc in comparison.items():
                rows.append(
                    [regime.value, zone, zc.n_trips, zc.n_no_option,
                     "" if zc.fixed_mean_s is None else f"{zc.fixed_mean_s:.1f}",
                     "" if zc.fixed_sd_s is None else f"{zc.fixed_sd_s:.1f}",
                     f"{zc.better_fraction:.4f}"]
                )
        _write_csv(
            os.path.join(args.report, "fixed_route_comparison.csv"),
            ["regime", "zone", "n_trips", "n_no_option", "fixed_mean_s", "fixed_sd_s",
             "on_demand_better_fraction"],
            rows,
        )

    with open(os.path.join(args.report, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    print(json.dumps(summary, sort_keys=True))
    return 0


def _cmd_compare_fixed(args) -> int:
    events = load_events_jsonl(args.events)
    _, stops = load_network_file(args.stops)
    feed = load_feed(args.feed)
    regime = Regime(args.regime)
    comparison = analytics.compare_fixed_routes(
        events, stops, feed, regime, walk_speed=args.walk_speed
    )
    doc = {
        zone: {
            "n_trips": zc.n_trips,
            "n_no_option": zc.n_no_option,
            "fixed_mean_s": zc.fixed_mean_s,
            "fixed_sd_s": zc.fixed_sd_s,
            "on_demand_better_fraction": zc.better_fraction,
        }
        for zone, zc in comparison.items()
    }
    if args.report:
        os.makedirs(args.report, exist_ok=True)
        _write_csv(
            os.path.join(args.report, f"fixed_route_comparison_{regime.value}.csv"),
            ["zone", "n_trips", "n_no_option", "fixed_mean_s", "fixed_sd_s",
             "on_demand_better_fraction"],
            [
                [zone, zc.n_trips, zc.n_no_option,
                 "" if zc.fixed_mean_s is None else f"{zc.fixed_mean_s:.1f}",
                 "" if zc.fixed_sd_s is None else f"{zc.fixed_sd_s:.1f}",
                 f"{zc.better_fraction:.4f}"]
                for zone, zc in comparison.items()
            ],
        )
    print(json.dumps(doc, sort_keys=True))
    return 0


def _cmd_cost_table(args) -> int:
    rates = _parse_rates(args.rates)
    fleets = [int(x) for x in args.fleets.split(",") if x]
    riders = [int(x) for x in args.riders.split(",") if x]
    rows = analytics.cost_table(rates, fleets, riders, service_hours=args.hours)
    header = ["cost_per_vehicle_hour"] + [f"r{r}_f{f}" for r in riders for f in fleets]
    lines = [[row["cost_per_vehicle_hour"]] + [f"{row[c]:.2f}" for c in header[1:]] for row in rows]
    if args.out:
        _write_csv(args.out, header, lines)
    else:
        writer = csv.writer(sys.stdout)
        writer.writerow(header)
        writer.writerows(lines)
    return 0


_COMMANDS = {
    "validate": _cmd_validate,
    "simulate": _cmd_simulate,
    "analyze": _cmd_analyze,
    "compare-fixed": _cmd_compare_fixed,
    "cost-table": _cmd_cost_table,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        return _fail(2, "io_error", str(exc))
    except ScenarioInvalid as exc:
        return _fail(1, "scenario_invalid", str(exc))
    except OdtsimError as exc:
        return _fail(1, type(exc).__name__, str(exc))
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        return _fail(1, "invalid_input", str(exc))


if __name__ == "__main__":
    sys.exit(main())
