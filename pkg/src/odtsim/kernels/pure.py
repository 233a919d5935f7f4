"""Pure-Python insertion kernel; reference semantics for the native build.

Evaluates every position pair for splicing a pickup/dropoff pair into an
existing leg sequence, enforcing capacity at every prefix and a stretch bound
on every already-planned rider's predicted ride time. Returns the cheapest
feasible insertion under ``pickup_arrival + ride_weight * added_detour``.

All arrays are parallel over the current plan legs:

* ``stop_idx``     provider index of the leg's stop
* ``load_delta``   +group for pickups, -group for dropoffs
* ``pair_pick``    for dropoffs whose pickup is also planned: its leg index,
                   else -1 (rider already onboard)
* ``board_time``   actual board time for onboard dropoffs, else 0
"""

from __future__ import annotations

_EPS = 1e-9


def best_insertion(
    tt,
    anchor_idx: int,
    anchor_time: float,
    dwell: float,
    stop_idx,
    load_delta,
    pair_pick,
    board_time,
    onboard0: int,
    capacity: int,
    pu_idx: int,
    do_idx: int,
    group: int,
    stretch: float,
    ride_weight: float,
    first_pos: int = 0,
):
    """Return ``(core_objective, i, j, pickup_arr, dropoff_arr, detour)`` for
    the best feasible insertion, or None when no insertion is feasible.

    Position ``i`` inserts the pickup before current leg ``i``; ``j >= i``
    inserts the dropoff before current leg ``j`` (immediately after the
    pickup when ``j == i``). Ties prefer the lexicographically smallest
    ``(i, j)``.
    """
    n = len(stop_idx)

    # Baseline arrivals and current predicted ride per planned dropoff.
    arr0 = [0.0] * n
    t = anchor_time
    prev = anchor_idx
    for k in range(n):
        t += int(tt[prev, stop_idx[k]])
        arr0[k] = t
        t += dwell
        prev = stop_idx[k]
    ride0 = [0.0] * n
    for k in range(n):
        if load_delta[k] < 0:
            p = pair_pick[k]
            ride0[k] = arr0[k] - arr0[p] if p >= 0 else arr0[k] + dwell - board_time[k]

    best = None
    new_arr = [0.0] * n
    for i in range(first_pos, n + 1):
        for j in range(i, n + 1):
            t = anchor_time
            prev = anchor_idx
            load = onboard0
            arr_pick = 0.0
            arr_drop = 0.0
            detour = 0.0
            feasible = True
            k = 0
            for pos in range(n + 2):
                if pos == i:
                    stop = pu_idx
                    delta = group
                    which = -2
                elif pos == j + 1:
                    stop = do_idx
                    delta = -group
                    which = -3
                else:
                    stop = stop_idx[k]
                    delta = load_delta[k]
                    which = k
                    k += 1
                t += int(tt[prev, stop])
                arr = t
                t += dwell
                prev = stop
                load += delta
                if load > capacity:
                    feasible = False
                    break
                if which == -2:
                    arr_pick = arr
                elif which == -3:
                    arr_drop = arr
                else:
                    new_arr[which] = arr
                    if delta < 0:
                        p = pair_pick[which]
                        if p >= 0:
                            ride_new = arr - new_arr[p]
                        else:
                            ride_new = arr + dwell - board_time[which]
                        if ride_new > stretch * ride0[which] + _EPS:
                            feasible = False
                            break
                        detour += ride_new - ride0[which]
            if not feasible:
                continue
            core = arr_pick + ride_weight * detour
            if best is None or core < best[0] - _EPS:
                best = (core, i, j, arr_pick, arr_drop, detour)
    return best
