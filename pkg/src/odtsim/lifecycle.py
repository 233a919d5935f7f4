"""Vehicle lifecycle: sign-in/out, shifts, response deadlines, and removal.

Unresponsive-driver removal follows a time-indexed policy: each instruction
to an empty vehicle arms a deadline equal to the threshold in force at the
instruction time. If the driver has not responded by the deadline the vehicle
is signed off, unless it is the zone's last signed-in vehicle, which is
always exempt so a zone never empties through automatic removal alone.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .errors import ScenarioInvalid, VehicleOffline

DEFAULT_REMOVAL_THRESHOLD_S = 300


@dataclass(frozen=True)
class RemovalRegime:
    threshold_s: int
    effective_from_s: int

    def __post_init__(self) -> None:
        if self.threshold_s <= 0:
            raise ScenarioInvalid("removal threshold must be positive")


class RemovalPolicy:
    """Threshold schedule; removal is disabled before the first regime."""

    def __init__(self, regimes: list[RemovalRegime] | None = None) -> None:
        self.regimes = sorted(regimes or [], key=lambda r: r.effective_from_s)

    @classmethod
    def from_config(cls, entries: list[dict]) -> "RemovalPolicy":
        return cls(
            [
                RemovalRegime(int(e["threshold_s"]), int(e.get("effective_from_s", 0)))
                for e in entries
            ]
        )

    @classmethod
    def disabled(cls) -> "RemovalPolicy":
        return cls([])

    def threshold_at(self, t: int) -> Optional[int]:
        """Threshold in force at time t, or None while removal is disabled."""
        current = None
        for regime in self.regimes:
            if regime.effective_from_s <= t:
                current = regime.threshold_s
            else:
                break
        return current


@dataclass(frozen=True)
class ShiftWindow:
    sign_in_s: int
    sign_out_s: int


class ShiftSchedule:
    """Per-vehicle sign-in/sign-out windows inside the service day."""

    def __init__(self, windows: dict[str, list[ShiftWindow]] | None = None) -> None:
        self.windows = windows or {}

    @classmethod
    def from_csv(cls, path: str) -> "ShiftSchedule":
        windows: dict[str, list[ShiftWindow]] = {}
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            needed = {"vehicle_id", "sign_in_s", "sign_out_s"}
            if not needed.issubset(set(reader.fieldnames or [])):
                raise ScenarioInvalid(f"shift CSV must have columns {sorted(needed)}")
            for row in reader:
                windows.setdefault(row["vehicle_id"], []).append(
                    ShiftWindow(int(row["sign_in_s"]), int(row["sign_out_s"]))
                )
        for wins in windows.values():
            wins.sort(key=lambda w: w.sign_in_s)
        return cls(windows)

    def validate(self, service_windows: list[tuple[int, int]]) -> None:
        """Windows must not overlap per vehicle and must fit inside one of the
        given service windows."""
        for vid, wins in self.windows.items():
            prev_out = None
            for w in wins:
                if w.sign_out_s <= w.sign_in_s:
                    raise ScenarioInvalid(f"vehicle {vid}: empty shift window")
                if prev_out is not None and w.sign_in_s < prev_out:
                    raise ScenarioInvalid(f"vehicle {vid}: overlapping shift windows")
                if not any(a <= w.sign_in_s and w.sign_out_s <= b for a, b in service_windows):
                    raise ScenarioInvalid(
                        f"vehicle {vid}: shift {w.sign_in_s}-{w.sign_out_s} outside service hours"
                    )
                prev_out = w.sign_out_s


class RemovalDecision(str, Enum):
    REMOVED = "removed"
    EXEMPT_LAST_VEHICLE = "exempt_last_vehicle"
    STALE = "stale"


@dataclass
class _Pending:
    token: int
    issued_at: int
    deadline: Optional[int]


class FleetLifecycle:
    """Tracks sign-in state and pending response deadlines per vehicle.

    The caller drives it with protocol events; it answers what the protocol
    allows: whether a deadline is armed and whether an expiry removes the
    vehicle. Tokens invalidate deadlines that were superseded by a newer
    instruction or cleared by a response.
    """

    def __init__(self, policy: RemovalPolicy, vehicle_zones: dict[str, str]) -> None:
        self.policy = policy
        self.zone_of = dict(vehicle_zones)
        self.signed_in: set[str] = set()
        self._pending: dict[str, _Pending] = {}
        self._next_token = 0

    # -- sign-in state ---------------------------------------------------------

    def sign_in(self, vid: str, t: int) -> None:
        self.signed_in.add(vid)

    def sign_out(self, vid: str, t: int) -> None:
        self.signed_in.discard(vid)
        self._pending.pop(vid, None)

    def is_signed_in(self, vid: str) -> bool:
        return vid in self.signed_in

    def signed_in_in_zone(self, zone_id: str) -> int:
        return sum(1 for v in self.signed_in if self.zone_of.get(v) == zone_id)

    # -- instruction/response protocol ------------------------------------------

    def on_instruction(
        self, vid: str, t: int, onboard_empty: bool, arm_removal: bool = True
    ) -> tuple[Optional[int], int]:
        """Register an instruction at time t. Returns (deadline, token); the
        deadline is None when removal does not apply (policy inactive, riders
        onboard, or an instruction kind that never removes). A newer
        instruction resets any pending deadline."""
        if vid not in self.signed_in:
            raise VehicleOffline(vid)
        self._next_token += 1
        token = self._next_token
        threshold = self.policy.threshold_at(t) if (onboard_empty and arm_removal) else None
        deadline = t + threshold if threshold is not None else None
        self._pending[vid] = _Pending(token=token, issued_at=t, deadline=deadline)
        return deadline, token

    def on_response(self, vid: str, t: int) -> None:
        self._pending.pop(vid, None)

    def on_timer_expiry(self, vid: str, t: int, token: int) -> RemovalDecision:
        """Decide a removal when an armed deadline fires.

        Stale tokens (response arrived or a newer instruction took over) do
        nothing. The zone's last signed-in vehicle is exempt; its deadline is
        cleared so the pending response can still arrive late."""
        pending = self._pending.get(vid)
        if pending is None or pending.token != token or vid not in self.signed_in:
            return RemovalDecision.STALE
        if pending.deadline is None or t < pending.deadline:
            return RemovalDecision.STALE
        zone = self.zone_of.get(vid)
        if self.signed_in_in_zone(zone) <= 1:
            self._pending.pop(vid, None)
            return RemovalDecision.EXEMPT_LAST_VEHICLE
        self.sign_out(vid, t)
        return RemovalDecision.REMOVED

    def admin_remove(self, vid: str, t: int) -> None:
        """Manual sign-off by a dispatcher. No last-vehicle exemption."""
        if vid not in self.signed_in:
            raise VehicleOffline(vid)
        self.sign_out(vid, t)
