"""Timestep mission kernel.

One source file in Cython "pure Python" mode: compiled to a C extension by
setup.py for speed, and runnable unchanged under plain CPython as the
fallback. Both paths execute identical IEEE-754 double arithmetic in the
same order, so trial results are bit-identical either way (asserted by
tests and the kernel benchmark).

Per-step event ordering is fixed:
  1. recovery completions (CHARGING -> READY)
  2. battery decrement and movement/scan progress for airborne vehicles
  3. replacement-trigger evaluation and spare dispatch
  4. handover completions (TRANSIT arrivals become ACTIVE)
  5. trace recording and conservation audit
A recovery finishing in the same step as a request is therefore available
to serve it.
"""

import cython

COMPILED = cython.compiled

if cython.compiled:
    from cython.cimports.libc.math import sqrt  # type: ignore[attr-defined]
else:
    from math import sqrt

# vehicle roles
ACTIVE = 0
RETURNING = 1
CHARGING = 2
READY = 3
TRANSIT = 4
REMOVED = 5

# position states
WORKING = 0
FROZEN = 1
DONE = 2
DEAD = 3

# leg kinds (must match uavfleet.streams)
KIND_ROUTE = 0
KIND_RETURN = 1
KIND_TRANSIT = 2

# event codes for the optional event log
EV_REQUEST = 1
EV_DISPATCH = 2
EV_EXHAUST = 3
EV_ARRIVE = 4
EV_LAND = 5
EV_READY = 6
EV_SCAN = 7
EV_POSITION_DONE = 8

MASK64 = cython.declare(cython.ulonglong, 0xFFFFFFFFFFFFFFFF)
GAMMA = cython.declare(cython.ulonglong, 0x9E3779B97F4A7C15)
MIX1 = cython.declare(cython.ulonglong, 0xBF58476D1CE4E5B9)
MIX2 = cython.declare(cython.ulonglong, 0x94D049BB133111EB)
INV53 = cython.declare(cython.double, 1.0 / 9007199254740992.0)

TEPS = cython.declare(cython.double, 1e-9)


@cython.cfunc
@cython.inline
def _mix64(z: cython.ulonglong) -> cython.ulonglong:
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


@cython.cfunc
@cython.inline
def _leg_uniform(key: cython.ulonglong, a: cython.ulonglong, b: cython.ulonglong,
                 c: cython.ulonglong) -> cython.double:
    h: cython.ulonglong
    h = _mix64((key + GAMMA) & MASK64)
    h = _mix64((h + GAMMA + a) & MASK64)
    h = _mix64((h + GAMMA + b) & MASK64)
    h = _mix64((h + GAMMA + c) & MASK64)
    return (h >> 11) * INV53


def kernel_leg_factor(trial_key, position, kind, index, halfwidth):
    """Per-leg factor as the kernel computes it (exposed for equality tests)."""
    u = _leg_uniform(int(trial_key), int(position), int(kind), int(index))
    return 1.0 - halfwidth + 2.0 * halfwidth * u


def run_kernel(
    istate: cython.longlong[:], fstate: cython.double[:],
    role: cython.longlong[:], battery: cython.double[:], pos_of: cython.int[:],
    leg_total: cython.double[:], leg_rem: cython.double[:], charge_rem: cython.double[:],
    pstat: cython.longlong[:], vehicle_of: cython.int[:], cursor: cython.int[:],
    in_scan: cython.longlong[:], scan_rem: cython.double[:],
    wx: cython.double[:], wy: cython.double[:],
    in_leg: cython.longlong[:],
    wleg_ox: cython.double[:], wleg_oy: cython.double[:],
    wleg_tx: cython.double[:], wleg_ty: cython.double[:],
    wleg_total: cython.double[:], wleg_rem: cython.double[:],
    ret_count: cython.int[:], trans_count: cython.int[:],
    route_x: cython.double[:], route_y: cython.double[:], route_off: cython.int[:],
    scan_count: cython.longlong[:],
    m: cython.Py_ssize_t, n: cython.Py_ssize_t,
    dt: cython.double, t_active: cython.double, t_charge: cython.double,
    t_scan: cython.double, reserve_time: cython.double, speed: cython.double,
    bx: cython.double, by: cython.double,
    common: cython.double, halfwidth: cython.double, trial_key: cython.ulonglong,
    max_steps: cython.longlong, budget: cython.longlong,
    req_times: list, dispatch_times: list, exh_times: list, exh_ids: list,
    concurrency: list, events,
):
    """Advance the mission; returns 1 once every position is done or dead.

    istate: [step, positions_open, unique_scans, finished, initialized, _, _, _]
    fstate: [min_battery, duration, _, _]
    budget: number of steps to run, or -1 for run-to-completion.
    """
    v: cython.Py_ssize_t
    p: cython.Py_ssize_t
    w: cython.Py_ssize_t
    sl: cython.Py_ssize_t
    spare: cython.Py_ssize_t
    step: cython.longlong
    bud: cython.double
    seg: cython.double
    use: cython.double
    tnow: cython.double
    dx: cython.double
    dy: cython.double
    dist: cython.double
    ret_est: cython.double
    tt: cython.double
    u: cython.double
    frac: cython.double
    conc: cython.longlong
    tot: cython.longlong
    rr: cython.longlong
    log_events: cython.bint = events is not None

    if istate[4] == 0:
        # launch: m actives leave the base toward their first route slot
        istate[4] = 1
        istate[1] = m
        for p in range(m):
            role[p] = ACTIVE
            battery[p] = t_active
            pos_of[p] = cython.cast(cython.int, p)
            pstat[p] = WORKING
            vehicle_of[p] = cython.cast(cython.int, p)
            cursor[p] = route_off[p]
            wx[p] = bx
            wy[p] = by
            sl = route_off[p]
            dx = route_x[sl] - bx
            dy = route_y[sl] - by
            dist = sqrt(dx * dx + dy * dy)
            u = _leg_uniform(trial_key, int(p), KIND_ROUTE, int(sl))
            tt = dist / speed * common * (1.0 - halfwidth + 2.0 * halfwidth * u)
            if tt <= TEPS:
                wx[p] = route_x[sl]
                wy[p] = route_y[sl]
                in_leg[p] = 0
                in_scan[p] = 1
                scan_rem[p] = t_scan
            else:
                in_leg[p] = 1
                in_scan[p] = 0
                wleg_ox[p] = bx
                wleg_oy[p] = by
                wleg_tx[p] = route_x[sl]
                wleg_ty[p] = route_y[sl]
                wleg_total[p] = tt
                wleg_rem[p] = tt
        for v in range(m, n):
            role[v] = READY
            battery[v] = t_active
            pos_of[v] = -1

    while budget != 0 and istate[3] == 0:
        step = istate[0] + 1
        istate[0] = step
        if step > max_steps:
            raise RuntimeError(f"step limit exceeded ({max_steps} steps); mission is not terminating")
        tnow = step * dt

        # -- phase 1: recovery completions --------------------------------
        for v in range(n):
            if role[v] == CHARGING:
                charge_rem[v] = charge_rem[v] - dt
                if charge_rem[v] <= TEPS:
                    charge_rem[v] = 0.0
                    role[v] = READY
                    battery[v] = t_active
                    if log_events:
                        events.append((tnow, EV_READY, v, -1))

        # -- phase 2: airborne time advance -------------------------------
        for v in range(n):
            bud = dt
            if role[v] == ACTIVE:
                p = pos_of[v]
                while bud > TEPS and role[v] == ACTIVE:
                    if in_scan[p] != 0:
                        seg = scan_rem[p]
                        use = bud if bud < seg else seg
                        scan_rem[p] = seg - use
                        battery[v] -= use
                        bud -= use
                        if scan_rem[p] <= TEPS:
                            sl = cursor[p]
                            scan_count[sl] += 1
                            if scan_count[sl] == 1:
                                istate[2] += 1
                            if log_events:
                                events.append((tnow, EV_SCAN, v, sl))
                            in_scan[p] = 0
                            cursor[p] = cython.cast(cython.int, sl + 1)
                            if cursor[p] >= route_off[p + 1]:
                                # route complete: fly home, rejoin the pool
                                pstat[p] = DONE
                                istate[1] -= 1
                                vehicle_of[p] = -1
                                pos_of[v] = -1
                                if log_events:
                                    events.append((tnow, EV_POSITION_DONE, v, p))
                                dx = wx[p] - bx
                                dy = wy[p] - by
                                dist = sqrt(dx * dx + dy * dy)
                                u = _leg_uniform(trial_key, int(p), KIND_RETURN, int(ret_count[p]))
                                ret_count[p] += 1
                                tt = dist / speed * common * (1.0 - halfwidth + 2.0 * halfwidth * u)
                                if tt <= TEPS:
                                    role[v] = CHARGING
                                    charge_rem[v] = t_charge - bud
                                    bud = 0.0
                                else:
                                    role[v] = RETURNING
                                    leg_total[v] = tt
                                    leg_rem[v] = tt
                            else:
                                sl = cursor[p]
                                dx = route_x[sl] - wx[p]
                                dy = route_y[sl] - wy[p]
                                dist = sqrt(dx * dx + dy * dy)
                                u = _leg_uniform(trial_key, int(p), KIND_ROUTE, int(sl))
                                tt = dist / speed * common * (1.0 - halfwidth + 2.0 * halfwidth * u)
                                if tt <= TEPS:
                                    wx[p] = route_x[sl]
                                    wy[p] = route_y[sl]
                                    in_scan[p] = 1
                                    scan_rem[p] = t_scan
                                else:
                                    in_leg[p] = 1
                                    wleg_ox[p] = wx[p]
                                    wleg_oy[p] = wy[p]
                                    wleg_tx[p] = route_x[sl]
                                    wleg_ty[p] = route_y[sl]
                                    wleg_total[p] = tt
                                    wleg_rem[p] = tt
                    elif in_leg[p] != 0:
                        seg = wleg_rem[p]
                        use = bud if bud < seg else seg
                        wleg_rem[p] = seg - use
                        battery[v] -= use
                        bud -= use
                        if wleg_rem[p] <= TEPS:
                            in_leg[p] = 0
                            wx[p] = wleg_tx[p]
                            wy[p] = wleg_ty[p]
                            in_scan[p] = 1
                            scan_rem[p] = t_scan
                        else:
                            frac = 1.0 - wleg_rem[p] / wleg_total[p]
                            wx[p] = wleg_ox[p] + (wleg_tx[p] - wleg_ox[p]) * frac
                            wy[p] = wleg_oy[p] + (wleg_ty[p] - wleg_oy[p]) * frac
                    else:
                        # frozen work state handed over at a site boundary
                        in_scan[p] = 1
                        scan_rem[p] = t_scan
            if role[v] == RETURNING and bud > TEPS:
                seg = leg_rem[v]
                use = bud if bud < seg else seg
                leg_rem[v] = seg - use
                battery[v] -= use
                bud -= use
                if leg_rem[v] <= TEPS:
                    role[v] = CHARGING
                    charge_rem[v] = t_charge - bud
                    bud = 0.0
                    if log_events:
                        events.append((tnow, EV_LAND, v, -1))
            elif role[v] == TRANSIT:
                seg = leg_rem[v]
                use = bud if bud < seg else seg
                leg_rem[v] = seg - use
                battery[v] -= use

        for v in range(n):
            if role[v] != REMOVED and battery[v] < fstate[0]:
                fstate[0] = battery[v]

        # -- phase 3: replacement triggers and spare dispatch --------------
        for p in range(m):
            if pstat[p] != WORKING:
                continue
            v = vehicle_of[p]
            dx = wx[p] - bx
            dy = wy[p] - by
            ret_est = sqrt(dx * dx + dy * dy) / speed
            if battery[v] > ret_est + reserve_time + TEPS:
                continue
            req_times.append(tnow)
            if log_events:
                events.append((tnow, EV_REQUEST, v, p))
            spare = -1
            for w in range(n):
                if role[w] == READY:
                    spare = w
                    break
            if spare >= 0:
                dispatch_times.append(tnow)
                role[spare] = TRANSIT
                pos_of[spare] = cython.cast(cython.int, p)
                vehicle_of[p] = cython.cast(cython.int, spare)
                pstat[p] = FROZEN
                u = _leg_uniform(trial_key, int(p), KIND_TRANSIT, int(trans_count[p]))
                trans_count[p] += 1
                tt = ret_est * common * (1.0 - halfwidth + 2.0 * halfwidth * u)
                leg_total[spare] = tt
                leg_rem[spare] = tt
                if log_events:
                    events.append((tnow, EV_DISPATCH, spare, p))
                # departing vehicle flies home and enters the recovery pipeline
                u = _leg_uniform(trial_key, int(p), KIND_RETURN, int(ret_count[p]))
                ret_count[p] += 1
                tt = ret_est * common * (1.0 - halfwidth + 2.0 * halfwidth * u)
                pos_of[v] = -1
                if tt <= TEPS:
                    role[v] = CHARGING
                    charge_rem[v] = t_charge
                else:
                    role[v] = RETURNING
                    leg_total[v] = tt
                    leg_rem[v] = tt
            else:
                # spare exhaustion: the requester leaves service entirely
                exh_times.append(tnow)
                exh_ids.append(v)
                role[v] = REMOVED
                pos_of[v] = -1
                pstat[p] = DEAD
                vehicle_of[p] = -1
                istate[1] -= 1
                if log_events:
                    events.append((tnow, EV_EXHAUST, v, p))

        # -- phase 4: handover completions ---------------------------------
        for v in range(n):
            if role[v] == TRANSIT and leg_rem[v] <= TEPS:
                p = pos_of[v]
                role[v] = ACTIVE
                pstat[p] = WORKING
                if log_events:
                    events.append((tnow, EV_ARRIVE, v, p))

        # -- phase 5: trace recording and conservation audit ----------------
        conc = 0
        tot = 0
        for v in range(n):
            rr = role[v]
            if rr < ACTIVE or rr > REMOVED:
                raise RuntimeError(f"conservation violated: vehicle {v} has invalid role {rr}")
            if battery[v] > t_active + 1e-6:
                raise RuntimeError(f"battery bound violated for vehicle {v}")
            if rr == RETURNING or rr == CHARGING:
                conc += 1
            tot += 1
        if tot != n:
            raise RuntimeError("conservation violated: role-count sum differs from fleet size")
        concurrency.append(conc)

        if istate[1] == 0:
            istate[3] = 1
            fstate[1] = tnow
        if budget > 0:
            budget -= 1

    return 1 if istate[3] != 0 else 0
