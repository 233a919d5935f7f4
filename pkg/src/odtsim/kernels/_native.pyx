# cython: boundscheck=False, wraparound=False, cdivision=True
"""Native insertion kernel. Mirrors kernels.pure.best_insertion exactly;
see that module for the contract."""

from libc.stdlib cimport free, malloc

DEF EPS = 1e-9


def best_insertion(
    int[:, ::1] tt,
    Py_ssize_t anchor_idx,
    double anchor_time,
    double dwell,
    int[::1] stop_idx,
    int[::1] load_delta,
    int[::1] pair_pick,
    double[::1] board_time,
    int onboard0,
    int capacity,
    Py_ssize_t pu_idx,
    Py_ssize_t do_idx,
    int group,
    double stretch,
    double ride_weight,
    Py_ssize_t first_pos=0,
):
    cdef Py_ssize_t n = stop_idx.shape[0]
    cdef double *arr0 = <double *> malloc(sizeof(double) * (n + 1))
    cdef double *ride0 = <double *> malloc(sizeof(double) * (n + 1))
    cdef double *new_arr = <double *> malloc(sizeof(double) * (n + 1))
    if arr0 == NULL or ride0 == NULL or new_arr == NULL:
        free(arr0)
        free(ride0)
        free(new_arr)
        raise MemoryError()

    cdef double t, arr, detour, ride_new, core, arr_pick, arr_drop
    cdef double best_core = 0.0, best_pick = 0.0, best_drop = 0.0, best_detour = 0.0
    cdef Py_ssize_t prev, k, i, j, pos, stop, which, p
    cdef Py_ssize_t best_i = -1, best_j = -1
    cdef int load, delta
    cdef bint feasible, have_best = False

    try:
        t = anchor_time
        prev = anchor_idx
        for k in range(n):
            t += tt[prev, stop_idx[k]]
            arr0[k] = t
            t += dwell
            prev = stop_idx[k]
        for k in range(n):
            ride0[k] = 0.0
            if load_delta[k] < 0:
                p = pair_pick[k]
                if p >= 0:
                    ride0[k] = arr0[k] - arr0[p]
                else:
                    ride0[k] = arr0[k] + dwell - board_time[k]

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
                    t += tt[prev, stop]
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
                            if ride_new > stretch * ride0[which] + EPS:
                                feasible = False
                                break
                            detour += ride_new - ride0[which]
                if not feasible:
                    continue
                core = arr_pick + ride_weight * detour
                if not have_best or core < best_core - EPS:
                    have_best = True
                    best_core = core
                    best_i = i
                    best_j = j
                    best_pick = arr_pick
                    best_drop = arr_drop
                    best_detour = detour
    finally:
        free(arr0)
        free(ride0)
        free(new_arr)

    if not have_best:
        return None
    return (best_core, best_i, best_j, best_pick, best_drop, best_detour)
