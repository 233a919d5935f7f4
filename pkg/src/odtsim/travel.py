"""Travel-time and distance providers for shuttle movements.

Two provider modes:

* ``matrix``: a dense stop-by-stop table loaded from CSV. No triangle
  inequality is assumed; nothing downstream may rely on it.
* ``grid``: synthetic times from great-circle distance scaled by a detour
  factor and divided by a constant speed.

Both expose the same dense integer-second / float-meter matrices so the
dispatch kernels can index them directly.
"""

from __future__ import annotations

import csv
from typing import Mapping

import numpy as np

from .errors import ScenarioInvalid, UnknownStopPair

MODE_MATRIX = "matrix"
MODE_GRID = "grid"

_MISSING = -1


class TravelProvider:
    """Dense lookup of drive seconds and meters between stops."""

    def __init__(
        self,
        stop_ids: list[str],
        seconds: np.ndarray,
        meters: np.ndarray,
        mode: str,
    ) -> None:
        self.mode = mode
        self.stop_ids = list(stop_ids)
        self._index = {sid: k for k, sid in enumerate(self.stop_ids)}
        self.seconds = np.ascontiguousarray(seconds, dtype=np.int32)
        self.meters = np.ascontiguousarray(meters, dtype=np.float64)
        n = len(self.stop_ids)
        if self.seconds.shape != (n, n) or self.meters.shape != (n, n):
            raise ScenarioInvalid("provider matrices must be square over the stop set")
        known = self.seconds != _MISSING
        if np.any(self.seconds[known] < 0) or np.any(self.meters[self.meters != _MISSING] < 0):
            raise ScenarioInvalid("provider entries must be nonnegative")
        if np.any(np.diagonal(self.seconds) != 0) or np.any(np.diagonal(self.meters) != 0):
            raise ScenarioInvalid("provider diagonal must be zero")

    # -- construction ---------------------------------------------------------

    @classmethod
    def synthetic_grid(
        cls,
        stops: Mapping[str, object],
        speed_mps: float,
        detour_factor: float,
    ) -> "TravelProvider":
        """Build a provider from stop coordinates: distance is haversine times
        ``detour_factor``; time is distance over ``speed_mps`` rounded to whole
        seconds."""
        if speed_mps <= 0:
            raise ScenarioInvalid("grid provider speed must be positive")
        if detour_factor < 1.0:
            raise ScenarioInvalid("detour factor must be >= 1")
        stop_ids = sorted(stops)
        lats = np.array([stops[s].lat for s in stop_ids], dtype=np.float64)
        lons = np.array([stops[s].lon for s in stop_ids], dtype=np.float64)
        phi = np.radians(lats)
        dphi = (np.radians(lats)[:, None] - np.radians(lats)[None, :]) / 2.0
        dlam = (np.radians(lons)[:, None] - np.radians(lons)[None, :]) / 2.0
        h = np.sin(dphi) ** 2 + np.cos(phi)[:, None] * np.cos(phi)[None, :] * np.sin(dlam) ** 2
        direct = 2.0 * 6_371_000.0 * np.arcsin(np.minimum(1.0, np.sqrt(h)))
        meters = direct * detour_factor
        np.fill_diagonal(meters, 0.0)
        seconds = np.rint(meters / speed_mps).astype(np.int32)
        return cls(stop_ids, seconds, meters, MODE_GRID)

    @classmethod
    def from_matrix_csv(cls, path: str, stop_ids: list[str] | None = None) -> "TravelProvider":
        """Load ``from_stop,to_stop,drive_seconds,drive_meters`` rows. Pairs
        absent from the file stay unknown and raise on lookup."""
        rows = []
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            needed = {"from_stop", "to_stop", "drive_seconds", "drive_meters"}
            if not needed.issubset(set(reader.fieldnames or [])):
                raise ScenarioInvalid(f"matrix CSV must have columns {sorted(needed)}")
            for row in reader:
                rows.append(
                    (
                        row["from_stop"],
                        row["to_stop"],
                        int(row["drive_seconds"]),
                        float(row["drive_meters"]),
                    )
                )
        if stop_ids is None:
            seen = {r[0] for r in rows} | {r[1] for r in rows}
            stop_ids = sorted(seen)
        return cls.from_entries(rows, stop_ids)

    @classmethod
    def from_entries(
        cls, entries: list[tuple[str, str, int, float]], stop_ids: list[str]
    ) -> "TravelProvider":
        n = len(stop_ids)
        index = {sid: k for k, sid in enumerate(stop_ids)}
        seconds = np.full((n, n), _MISSING, dtype=np.int32)
        meters = np.full((n, n), float(_MISSING), dtype=np.float64)
        np.fill_diagonal(seconds, 0)
        np.fill_diagonal(meters, 0.0)
        for frm, to, sec, m in entries:
            if frm not in index or to not in index:
                raise ScenarioInvalid(f"matrix references unknown stop: {frm} or {to}")
            if sec < 0 or m < 0:
                raise ScenarioInvalid(f"negative matrix entry for {frm}->{to}")
            seconds[index[frm], index[to]] = sec
            meters[index[frm], index[to]] = m
        return cls(stop_ids, seconds, meters, MODE_MATRIX)

    # -- queries --------------------------------------------------------------

    def index_of(self, stop_id: str) -> int:
        try:
            return self._index[stop_id]
        except KeyError:
            raise UnknownStopPair(f"stop {stop_id} unknown to travel provider") from None

    def covers(self, stop_id: str) -> bool:
        return stop_id in self._index

    def drive_time(self, a: str, b: str) -> int:
        """Drive seconds from stop a to stop b."""
        val = int(self.seconds[self.index_of(a), self.index_of(b)])
        if val == _MISSING:
            raise UnknownStopPair(f"no travel entry for {a}->{b}")
        return val

    def drive_distance(self, a: str, b: str) -> float:
        """Drive meters from stop a to stop b."""
        val = float(self.meters[self.index_of(a), self.index_of(b)])
        if val == float(_MISSING):
            raise UnknownStopPair(f"no travel entry for {a}->{b}")
        return val

    def complete_over(self, stop_ids: list[str]) -> bool:
        """True when every ordered pair of the given stops has an entry."""
        try:
            idx = [self._index[s] for s in stop_ids]
        except KeyError:
            return False
        sub = self.seconds[np.ix_(idx, idx)]
        return not np.any(sub == _MISSING)
