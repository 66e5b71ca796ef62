"""Compiled kernels for the planner hot paths.

Every kernel mirrors a pure-Python function in geometry/uncertainty exactly;
tests assert both routes agree. Set ROUNDSIM_NO_NUMBA=1 to force the plain
Python versions (slow but dependency-free).
"""

from __future__ import annotations

import math
import os

import numpy as np

HAVE_NUMBA = False
if not os.environ.get("ROUNDSIM_NO_NUMBA"):
    try:
        from numba import njit
        HAVE_NUMBA = True
    except ImportError:      # pragma: no cover - mirror of the env-var path
        pass

if not HAVE_NUMBA:
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

# Mirrors risk.SAME_LEG_TOL (numba kernels bake globals at compile time, so
# the value is duplicated here rather than imported).
SAME_LEG_TOL = 0.6

# Index layout of the packed scoring-parameter vector passed to score_step /
# rollout_eval (numba rejects jitclass config objects in cached kernels).
SP_QTH_CC = 0
SP_QTH_CH = 1
SP_W1_CC = 2
SP_W2_CC = 3
SP_W1_CH = 4
SP_W2_CH = 5
SP_W3_CH = 6
SP_LAMBDA_T = 7
SP_LAMBDA_C = 8
SP_WC2C = 9
SP_WC2R = 10
SP_WC2H = 11
SP_DMIN = 12
SP_BETA_B = 13
SP_DSAFE_B = 14
SP_VDES = 15
SP_VTOL = 16
SP_ALPHA_V = 17
SP_BETA_V = 18
SP_WACC = 19
SP_ADES = 20
SP_WPATH = 21
SP_WJERK = 22
SP_WCURV = 23
SP_WCENT = 24
SP_ACENT = 25
SP_WINNER = 26
SP_WOUTER = 27
SP_WTRANS = 28
SP_WEXIT = 29
SP_SIGEXIT = 30
SP_W1 = 31
SP_W2 = 32
SP_W3 = 33
SP_W4 = 34
SP_LAMBDA_I = 35
SP_DT = 36
SP_GAMMA = 37
SP_SIZE = 38


@njit(cache=True)
def _seg_dist(p0x, p0y, p1x, p1y, q0x, q0y, q1x, q1y):
    ux, uy = p1x - p0x, p1y - p0y
    vx, vy = q1x - q0x, q1y - q0y
    wx, wy = p0x - q0x, p0y - q0y
    a = ux * ux + uy * uy
    b = ux * vx + uy * vy
    c = vx * vx + vy * vy
    d = ux * wx + uy * wy
    e = vx * wx + vy * wy
    den = a * c - b * b
    if den > 1e-12:
        s = (b * e - c * d) / den
    else:
        s = 0.0
    s = min(max(s, 0.0), 1.0)
    if c > 1e-12:
        t = (b * s + e) / c
    else:
        t = 0.0
    t = min(max(t, 0.0), 1.0)
    if a > 1e-12:
        s = min(max((b * t - d) / a, 0.0), 1.0)
    dx = p0x + s * ux - (q0x + t * vx)
    dy = p0y + s * uy - (q0y + t * vy)
    return math.hypot(dx, dy)


@njit(cache=True)
def _overlap(va, vb):
    for pick in range(2):
        verts = va if pick == 0 else vb
        for k in range(4):
            k2 = (k + 1) % 4
            ax = -(verts[k2, 1] - verts[k, 1])
            ay = verts[k2, 0] - verts[k, 0]
            a0 = 1e300
            a1 = -1e300
            b0 = 1e300
            b1 = -1e300
            for m in range(4):
                pa = va[m, 0] * ax + va[m, 1] * ay
                pb = vb[m, 0] * ax + vb[m, 1] * ay
                a0 = min(a0, pa)
                a1 = max(a1, pa)
                b0 = min(b0, pb)
                b1 = max(b1, pb)
            if a1 < b0 or b1 < a0:
                return False
    return True


@njit(cache=True)
def rect_dist(va, vb):
    """Exact distance between two rectangles, 0.0 when overlapping."""
    if _overlap(va, vb):
        return 0.0
    best = 1e300
    for i in range(4):
        i2 = (i + 1) % 4
        for j in range(4):
            j2 = (j + 1) % 4
            d = _seg_dist(va[i, 0], va[i, 1], va[i2, 0], va[i2, 1],
                          vb[j, 0], vb[j, 1], vb[j2, 0], vb[j2, 1])
            if d < best:
                best = d
    return best


@njit(cache=True)
def footprint_into(out, r, theta, phi, length, width):
    cx = r * math.cos(theta)
    cy = r * math.sin(theta)
    h = theta + 0.5 * math.pi + phi
    ux, uy = math.cos(h), math.sin(h)
    wx, wy = -uy, ux
    hl, hw = 0.5 * length, 0.5 * width
    out[0, 0] = cx + hl * ux + hw * wx
    out[0, 1] = cy + hl * uy + hw * wy
    out[1, 0] = cx + hl * ux - hw * wx
    out[1, 1] = cy + hl * uy - hw * wy
    out[2, 0] = cx - hl * ux - hw * wx
    out[2, 1] = cy - hl * uy - hw * wy
    out[3, 0] = cx - hl * ux + hw * wx
    out[3, 1] = cy - hl * uy + hw * wy


@njit(cache=True)
def footprints_batch(rs, thetas, phis, lengths, widths):
    n = rs.shape[0]
    out = np.empty((n, 4, 2))
    for i in range(n):
        footprint_into(out[i], rs[i], thetas[i], phis[i],
                       lengths[i], widths[i])
    return out


@njit(cache=True)
def pair_min_dists(verts):
    """Symmetric (m, m) matrix of exact rectangle distances; diagonal 0."""
    m = verts.shape[0]
    out = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            d = rect_dist(verts[i], verts[j])
            out[i, j] = d
            out[j, i] = d
    return out


@njit(cache=True)
def collision_hits(samples, av_verts, threshold, length, width):
    """Count samples whose footprint comes within threshold of av_verts.

    Mirrors uncertainty.collision_fraction; centroid bounds skip the exact
    rectangle test when they already decide the comparison.
    """
    acx = 0.25 * (av_verts[0, 0] + av_verts[1, 0]
                  + av_verts[2, 0] + av_verts[3, 0])
    acy = 0.25 * (av_verts[0, 1] + av_verts[1, 1]
                  + av_verts[2, 1] + av_verts[3, 1])
    hd_a = math.hypot(av_verts[0, 0] - acx, av_verts[0, 1] - acy)
    hd_b = 0.5 * math.hypot(length, width)
    hv = np.empty((4, 2))
    hits = 0
    for i in range(samples.shape[0]):
        r = samples[i, 0]
        th = samples[i, 1]
        ph = samples[i, 3]
        cx = r * math.cos(th)
        cy = r * math.sin(th)
        dc = math.hypot(cx - acx, cy - acy)
        if dc < threshold:
            hits += 1            # set distance <= centroid distance
            continue
        if dc - hd_a - hd_b >= threshold:
            continue
        footprint_into(hv, r, th, ph, length, width)
        if _overlap(av_verts, hv):
            hits += 1
            continue
        for a in range(4):
            a2 = (a + 1) % 4
            done = False
            for b in range(4):
                b2 = (b + 1) % 4
                d = _seg_dist(av_verts[a, 0], av_verts[a, 1],
                              av_verts[a2, 0], av_verts[a2, 1],
                              hv[b, 0], hv[b, 1], hv[b2, 0], hv[b2, 1])
                if d < threshold:
                    hits += 1
                    done = True
                    break
            if done:
                break
    return hits


@njit(cache=True)
def _wrap_pi(x):
    return (x + math.pi) % (2.0 * math.pi) - math.pi


@njit(cache=True)
def _point_to_seg(px, py, ax, ay, bx, by):
    ux, uy = bx - ax, by - ay
    den = ux * ux + uy * uy
    if den <= 1e-12:
        return math.hypot(px - ax, py - ay)
    t = ((px - ax) * ux + (py - ay) * uy) / den
    t = min(max(t, 0.0), 1.0)
    return math.hypot(px - (ax + t * ux), py - (ay + t * uy))


@njit(cache=True)
def _point_boundary(x, y, r_inner, r_outer, exit_angles,
                    leg_half_width, leg_end):
    rho = math.hypot(x, y)
    best = abs(rho - r_inner)
    a0 = math.sqrt(r_outer * r_outer - leg_half_width * leg_half_width)
    half_open = math.asin(leg_half_width / r_outer)
    theta_p = math.atan2(y, x)
    # outer circle: the point's radial projection is material only when it
    # faces no leg opening; inside an opening the nearest material on the
    # circle is the opening's edge
    min_off = math.inf
    ang_near = 0.0
    for k in range(exit_angles.shape[0]):
        off = abs(_wrap_pi(theta_p - exit_angles[k]))
        if off < min_off:
            min_off = off
            ang_near = exit_angles[k]
    if min_off >= half_open:
        d = abs(rho - r_outer)
        if d < best:
            best = d
    else:
        for si in range(2):
            sgn = -1.0 if si == 0 else 1.0
            ex = r_outer * math.cos(ang_near + sgn * half_open)
            ey = r_outer * math.sin(ang_near + sgn * half_open)
            d = math.hypot(x - ex, y - ey)
            if d < best:
                best = d
    for k in range(exit_angles.shape[0]):
        ang = exit_angles[k]
        along = x * math.cos(ang) + y * math.sin(ang)
        if along > 0.0:
            ca, sa = math.cos(ang), math.sin(ang)
            far = leg_end + 8.0
            for si in range(2):
                side = -leg_half_width if si == 0 else leg_half_width
                s0x = a0 * ca - side * sa
                s0y = a0 * sa + side * ca
                s1x = far * ca - side * sa
                s1y = far * sa + side * ca
                d = _point_to_seg(x, y, s0x, s0y, s1x, s1y)
                if d < best:
                    best = d
    return best


@njit(cache=True)
def _point_inside(x, y, r_inner, r_outer, exit_angles,
                  leg_half_width, leg_end):
    rho = math.hypot(x, y)
    if r_inner <= rho <= r_outer:
        return True
    if rho < r_inner:
        return False
    a0 = math.sqrt(r_outer * r_outer - leg_half_width * leg_half_width)
    for k in range(exit_angles.shape[0]):
        ang = exit_angles[k]
        along = x * math.cos(ang) + y * math.sin(ang)
        lat = -x * math.sin(ang) + y * math.cos(ang)
        if abs(lat) <= leg_half_width and a0 <= along:
            return True
    return False


@njit(cache=True)
def boundary_dist_verts(verts, r_inner, r_outer, exit_angles,
                        leg_half_width, leg_end):
    """Signed footprint-to-boundary clearance; mirrors
    geometry.boundary_distance."""
    best = 1e300
    worst_out = 0.0
    for k in range(4):
        x = verts[k, 0]
        y = verts[k, 1]
        d = _point_boundary(x, y, r_inner, r_outer, exit_angles,
                            leg_half_width, leg_end)
        if _point_inside(x, y, r_inner, r_outer, exit_angles,
                         leg_half_width, leg_end):
            if d < best:
                best = d
        else:
            if d > worst_out:
                worst_out = d
    if worst_out > 0.0:
        return -worst_out
    return best


@njit(cache=True)
def boundary_dists_batch(verts_batch, r_inner, r_outer, exit_angles,
                         leg_half_width, leg_end):
    n = verts_batch.shape[0]
    out = np.empty(n)
    for i in range(n):
        out[i] = boundary_dist_verts(verts_batch[i], r_inner, r_outer,
                                     exit_angles, leg_half_width, leg_end)
    return out


@njit(cache=True)
def _wrap_2pi(x):
    return x % (2.0 * math.pi)


@njit(cache=True)
def _step_av(r, theta, v, phi, lane, mode, a, pd, merge_r, entry_ang,
             dest_ang, length, lane_centers, dt, r_inner, r_outer, leg_end,
             v_max, kin_paper):
    """One controlled-vehicle step without lane change. Mirrors
    world.step_row exactly; returns (r, theta, v, phi, lane, mode)."""
    if mode == 0:                          # approach
        new_r = r - v * dt
        new_v = min(max(v + a * dt, 0.0), v_max)
        if new_r <= merge_r:
            return merge_r, entry_ang, new_v, 0.0, lane, 1
        frac = min((new_r - merge_r) / (r_outer - merge_r), 1.0)
        return new_r, entry_ang, new_v, 0.5 * math.pi * frac, lane, 0
    if mode == 1:                          # circulate
        before = _wrap_pi(theta - dest_ang)
        new_theta = _wrap_2pi(theta + v * math.cos(phi) / r * dt)
        after = _wrap_pi(new_theta - dest_ang)
        new_v = min(max(v + a * dt, 0.0), v_max)
        if -0.5 < before < 0.5 and 0.0 <= after < 0.5:
            lane_c = lane_centers[int(lane)]
            frac = min(max((r - lane_c) / (r_outer - lane_c), 0.0), 1.0)
            return r, dest_ang, new_v, -0.5 * math.pi * frac, lane, 2
        if kin_paper:
            new_r = r + v * math.sin(phi) / r * dt
        else:
            new_r = r + v * math.sin(phi) * dt
        return (min(max(new_r, r_inner), r_outer), new_theta, new_v,
                _wrap_pi(phi + pd * dt), lane, 1)
    if mode == 2:                          # exit
        new_r = r + v * dt
        new_v = min(max(v + a * dt, 0.0), v_max)
        lane_c = lane_centers[int(lane)]
        frac = min(max((new_r - lane_c) / (r_outer - lane_c), 0.0), 1.0)
        new_phi = -0.5 * math.pi * frac
        if new_r - 0.5 * length > leg_end:
            return new_r, theta, new_v, new_phi, lane, 3
        return new_r, theta, new_v, new_phi, lane, 2
    return r, theta, v, phi, lane, mode    # arrived / collided: frozen


@njit(cache=True)
def av_extrapolate(rows, modes, accels, phi_dots, merge_rs, entry_angles,
                   dest_angles, lengths, lane_centers, horizon, dt,
                   r_inner, r_outer, leg_end, v_max, kin_paper):
    """Propagate controlled vehicles *horizon* steps holding their incoming
    (accel, phi_dot) with no lane change. Mirrors world.step_row exactly.

    Returns (horizon+1, n, 5) rows and (horizon+1, n) modes; slice 0 is the
    input state.
    """
    n = rows.shape[0]
    out = np.empty((horizon + 1, n, 5))
    out_modes = np.empty((horizon + 1, n), dtype=np.int64)
    out[0] = rows
    out_modes[0] = modes
    for t in range(1, horizon + 1):
        for i in range(n):
            r, th, v, ph, ln, md = _step_av(
                out[t - 1, i, 0], out[t - 1, i, 1], out[t - 1, i, 2],
                out[t - 1, i, 3], out[t - 1, i, 4], out_modes[t - 1, i],
                accels[i], phi_dots[i], merge_rs[i], entry_angles[i],
                dest_angles[i], lengths[i], lane_centers, dt, r_inner,
                r_outer, leg_end, v_max, kin_paper)
            out[t, i, 0] = r
            out[t, i, 1] = th
            out[t, i, 2] = v
            out[t, i, 3] = ph
            out[t, i, 4] = ln
            out_modes[t, i] = md
    return out, out_modes


@njit(cache=True)
def _pair_safe_distance(thi, vi, phii, li, zi, thj, vj, phij, lj, zj,
                        d_base, kappa_v, beta1, beta2, beta3, v_ref, fixed):
    # fixed > 0 pins the threshold (risk-adaptivity ablation); 0 = adaptive
    if fixed > 0.0:
        return fixed
    dv = abs(vi - vj)
    d0 = max(d_base, kappa_v * dv)
    a1 = 1.0 + beta1 * dv / v_ref
    a2 = 1.0 + beta2 * abs(_wrap_pi(phii - phij)) / math.pi
    a3 = 1.0 + beta3 * abs(li - lj)
    a4 = 1.0
    # shared conflict space only: same leg outside the ring, same lane inside
    if zi == 0 and zj == 0 and abs(_wrap_pi(thi - thj)) < SAME_LEG_TOL:
        a4 += 1.0
    if zi == 1 and zj == 1 and li == lj:
        a4 += 1.0
    return d0 * a1 * a2 * a3 * a4


@njit(cache=True)
def risk_block(traj, active, is_av, lengths, widths,
               d_base, kappa_v, beta1, beta2, beta3, v_ref, fixed_ds,
               lambda_v, v_max, r_inner, r_outer):
    """Pairwise risk matrices over a joint trajectory stack.

    traj is (T+1, m, 5) with slice 0 the current states; rows [r, theta, v,
    phi, lane]. Returns (dist0, dsafe0, rinst0, rtemp, rinst_next) all (m, m):
    current-step footprint distances, adaptive safe distances, instantaneous
    risks, the 1/(1+t)-weighted mean future proximity over slices 1..T, and
    the cross-step instantaneous risk of i at t=0 against j at t=1 (only for
    controlled row i vs uncontrolled column j). Pairs where both vehicles are
    uncontrolled skip the future sweep; inactive rows are skipped entirely.
    Mirrors risk.instantaneous_risk / risk.temporal_risk /
    risk.adaptive_safe_distance.
    """
    horizon = traj.shape[0] - 1
    m = traj.shape[1]
    verts = np.empty((horizon + 1, m, 4, 2))
    zones = np.empty((horizon + 1, m), dtype=np.int64)
    for t in range(horizon + 1):
        for i in range(m):
            if not active[i]:
                continue
            footprint_into(verts[t, i], traj[t, i, 0], traj[t, i, 1],
                           traj[t, i, 3], lengths[i], widths[i])
            r = traj[t, i, 0]
            zones[t, i] = 1 if (r_inner <= r <= r_outer) else 0
    dist0 = np.zeros((m, m))
    dsafe0 = np.zeros((m, m))
    rinst0 = np.zeros((m, m))
    rtemp = np.zeros((m, m))
    rinst_next = np.zeros((m, m))
    for i in range(m):
        if not active[i]:
            continue
        for j in range(i + 1, m):
            if not active[j]:
                continue
            d = rect_dist(verts[0, i], verts[0, j])
            ds = _pair_safe_distance(
                traj[0, i, 1], traj[0, i, 2], traj[0, i, 3], traj[0, i, 4],
                zones[0, i],
                traj[0, j, 1], traj[0, j, 2], traj[0, j, 3], traj[0, j, 4],
                zones[0, j],
                d_base, kappa_v, beta1, beta2, beta3, v_ref, fixed_ds)
            dv = abs(traj[0, i, 2] - traj[0, j, 2])
            ri = math.exp(-d / ds) * (1.0 + lambda_v * dv / v_max)
            dist0[i, j] = d
            dist0[j, i] = d
            dsafe0[i, j] = ds
            dsafe0[j, i] = ds
            rinst0[i, j] = ri
            rinst0[j, i] = ri
            if not (is_av[i] or is_av[j]):
                continue
            acc = 0.0
            for t in range(1, horizon + 1):
                dt_ = rect_dist(verts[t, i], verts[t, j])
                dst = _pair_safe_distance(
                    traj[t, i, 1], traj[t, i, 2], traj[t, i, 3],
                    traj[t, i, 4], zones[t, i],
                    traj[t, j, 1], traj[t, j, 2], traj[t, j, 3],
                    traj[t, j, 4], zones[t, j],
                    d_base, kappa_v, beta1, beta2, beta3, v_ref, fixed_ds)
                if dt_ < dst:
                    rel = 1.0 - dt_ / dst
                    acc += rel * rel / (1.0 + t)
            if horizon > 0:
                rt = acc / horizon
                rtemp[i, j] = rt
                rtemp[j, i] = rt
    if horizon > 0:
        for i in range(m):
            if not (active[i] and is_av[i]):
                continue
            for j in range(m):
                if j == i or not active[j] or is_av[j]:
                    continue
                d = rect_dist(verts[0, i], verts[1, j])
                ds = _pair_safe_distance(
                    traj[0, i, 1], traj[0, i, 2], traj[0, i, 3],
                    traj[0, i, 4], zones[0, i],
                    traj[1, j, 1], traj[1, j, 2], traj[1, j, 3],
                    traj[1, j, 4], zones[1, j],
                    d_base, kappa_v, beta1, beta2, beta3, v_ref, fixed_ds)
                dv = abs(traj[0, i, 2] - traj[1, j, 2])
                rinst_next[i, j] = math.exp(-d / ds) * (
                    1.0 + lambda_v * dv / v_max)
    return dist0, dsafe0, rinst0, rtemp, rinst_next


@njit(cache=True)
def rollout_risk(traj, n_eval, is_av, lengths, widths,
                 d_base, kappa_v, beta1, beta2, beta3, v_ref, fixed_ds,
                 lambda_v, v_max, r_inner, r_outer, exit_angles,
                 leg_half_width, leg_end, t_risk):
    """Sliding-window risk evaluation for a rollout segment.

    traj is (1 + n_eval + t_risk, m, 5): row 0 the rollout start state, rows
    1..n_eval the evaluation points, the rest a held-control tail so the last
    window is full. Evaluation point k (1-based) uses row k for the
    instantaneous terms, rows k+1..k+t_risk for the temporal window, and row
    k+1 for the cross-step AV-vs-HDV term. Per-(step, pair) quantities are
    computed once and shared across overlapping windows; pairs with no
    controlled member are skipped. Also returns the boundary clearance of
    every controlled row at each evaluation point.
    """
    total = traj.shape[0]
    m = traj.shape[1]
    verts = np.empty((total, m, 4, 2))
    zones = np.empty((total, m), dtype=np.int64)
    for t in range(total):
        for i in range(m):
            footprint_into(verts[t, i], traj[t, i, 0], traj[t, i, 1],
                           traj[t, i, 3], lengths[i], widths[i])
            r = traj[t, i, 0]
            zones[t, i] = 1 if (r_inner <= r <= r_outer) else 0
    # per-step pair distances, safe distances, and proximity kernel values
    dist = np.zeros((total, m, m))
    rho = np.zeros((total, m, m))
    rinst = np.zeros((total, m, m))
    for t in range(1, total):
        for i in range(m):
            for j in range(i + 1, m):
                if not (is_av[i] or is_av[j]):
                    continue
                d = rect_dist(verts[t, i], verts[t, j])
                ds = _pair_safe_distance(
                    traj[t, i, 1], traj[t, i, 2], traj[t, i, 3],
                    traj[t, i, 4], zones[t, i],
                    traj[t, j, 1], traj[t, j, 2], traj[t, j, 3],
                    traj[t, j, 4], zones[t, j],
                    d_base, kappa_v, beta1, beta2, beta3, v_ref, fixed_ds)
                dist[t, i, j] = d
                dist[t, j, i] = d
                if d < ds:
                    rel = 1.0 - d / ds
                    rho[t, i, j] = rel * rel
                    rho[t, j, i] = rho[t, i, j]
                dv = abs(traj[t, i, 2] - traj[t, j, 2])
                ri = math.exp(-d / ds) * (1.0 + lambda_v * dv / v_max)
                rinst[t, i, j] = ri
                rinst[t, j, i] = ri
    rinst0 = np.zeros((n_eval, m, m))
    rtemp = np.zeros((n_eval, m, m))
    rinst_next = np.zeros((n_eval, m, m))
    n_av = 0
    for i in range(m):
        if is_av[i]:
            n_av += 1
    bdist = np.empty((n_eval, n_av))
    for k in range(1, n_eval + 1):
        for i in range(m):
            for j in range(i + 1, m):
                if not (is_av[i] or is_av[j]):
                    continue
                rinst0[k - 1, i, j] = rinst[k, i, j]
                rinst0[k - 1, j, i] = rinst[k, i, j]
                acc = 0.0
                for u in range(1, t_risk + 1):
                    acc += rho[k + u, i, j] / (1.0 + u)
                rt = acc / t_risk
                rtemp[k - 1, i, j] = rt
                rtemp[k - 1, j, i] = rt
        ai = 0
        for i in range(m):
            if not is_av[i]:
                continue
            bdist[k - 1, ai] = boundary_dist_verts(
                verts[k, i], r_inner, r_outer, exit_angles,
                leg_half_width, leg_end)
            ai += 1
            for j in range(m):
                if j == i or is_av[j]:
                    continue
                d = rect_dist(verts[k, i], verts[k + 1, j])
                ds = _pair_safe_distance(
                    traj[k, i, 1], traj[k, i, 2], traj[k, i, 3],
                    traj[k, i, 4], zones[k, i],
                    traj[k + 1, j, 1], traj[k + 1, j, 2], traj[k + 1, j, 3],
                    traj[k + 1, j, 4], zones[k + 1, j],
                    d_base, kappa_v, beta1, beta2, beta3, v_ref, fixed_ds)
                dv = abs(traj[k, i, 2] - traj[k + 1, j, 2])
                rinst_next[k - 1, i, j] = math.exp(-d / ds) * (
                    1.0 + lambda_v * dv / v_max)
    return rinst0, rtemp, rinst_next, bdist


@njit(cache=True)
def score_step(av_rows, modes, live, accels, phi_dots, prev_a, prev_pd,
               trans_pen, lane_centers, dest_idx, exit_angles, rinst0, rtemp,
               rinst_nx, cih, bdist, sp, shapley_mode):
    """Safety classification plus Shapley-weighted cooperative reward for one
    joint controlled state, given precomputed risk matrices.

    Mirrors risk.classify_node / boundary_penalty and the reward.q_* chain
    exactly (same accumulation order). trans_pen is the precomputed lane
    transition penalty per vehicle (0 when no change is commanded). The
    path-offset, centripetal, and exit-alignment terms only apply while a
    vehicle circulates; on the legs the reference path is the leg rail the
    kinematics ride exactly, so those deviations are zero by construction.
    Returns (safe, qcc_max, qch_max, immediate, rewards); rewards holds each
    live vehicle's cooperative reward at its own index, 0 elsewhere, and
    immediate is 0 whenever the state is unsafe or nobody is live.
    """
    n_av = av_rows.shape[0]
    n_h = cih.shape[1]
    safe = 1
    qcc_max = 0.0
    for i in range(n_av):
        if not live[i]:
            continue
        if bdist[i] <= sp[SP_DMIN]:
            safe = 0
        for j in range(i + 1, n_av):
            if not live[j]:
                continue
            q = sp[SP_W1_CC] * rinst0[i, j] + sp[SP_W2_CC] * rtemp[i, j]
            if q > qcc_max:
                qcc_max = q
    if qcc_max > sp[SP_QTH_CC]:
        safe = 0
    qch_max = 0.0
    for i in range(n_av):
        if not live[i]:
            continue
        for h in range(n_h):
            j = n_av + h
            q = (sp[SP_W1_CH] * rinst_nx[i, j] + sp[SP_W2_CH] * rtemp[i, j]
                 + sp[SP_W3_CH] * cih[i, h])
            if q > qch_max:
                qch_max = q
    if qch_max > sp[SP_QTH_CH]:
        safe = 0
    rewards = np.zeros(n_av)
    n_live = 0
    for i in range(n_av):
        if live[i]:
            n_live += 1
    if safe == 0 or n_live == 0:
        return safe, qcc_max, qch_max, 0.0, rewards
    q_self = np.zeros(n_av)
    q_other = np.zeros(n_av)
    total_other = 0.0
    for i in range(n_av):
        if not live[i]:
            continue
        r = av_rows[i, 0]
        theta = av_rows[i, 1]
        v = av_rows[i, 2]
        lane = av_rows[i, 4]
        a = accels[i]
        pd = phi_dots[i]
        circ = modes[i] == 1
        off = r - lane_centers[int(lane)] if circ else 0.0
        dv = v - sp[SP_VDES]
        if abs(dv) <= sp[SP_VTOL]:
            qv = 0.0
        elif dv > sp[SP_VTOL]:
            qv = -sp[SP_ALPHA_V] * (dv - sp[SP_VTOL])
        else:
            qv = -sp[SP_BETA_V] * abs(dv)
        q_eff = (qv - sp[SP_WACC] * (a - sp[SP_ADES]) ** 2
                 - sp[SP_WPATH] * off * off)
        jerk = (a - prev_a[i]) / sp[SP_DT]
        phidd = (pd - prev_pd[i]) / sp[SP_DT]
        cent = v * v / r - sp[SP_ACENT] if circ else 0.0
        q_com = (-sp[SP_WJERK] * jerk * jerk
                 - sp[SP_WCURV] * phidd * phidd
                 - sp[SP_WCENT] * cent * cent)
        w_pos = sp[SP_WINNER] if lane == 0 else sp[SP_WOUTER]
        q_lan = -w_pos * off * off - trans_pen[i]
        if circ:
            for k in range(exit_angles.shape[0]):
                g_k = 1.0 if k == dest_idx[i] else -1.0
                dth = _wrap_pi(theta - exit_angles[k])
                q_lan += sp[SP_WEXIT] * g_k * math.exp(
                    -(dth * dth) / (2.0 * sp[SP_SIGEXIT] ** 2))
        q_c2c = 0.0
        for j in range(n_av):
            if j == i or not live[j]:
                continue
            q_c2c -= (sp[SP_W1_CC] * rinst0[i, j]
                      + sp[SP_W2_CC] * rtemp[i, j]
                      + sp[SP_LAMBDA_T] * rtemp[i, j])
        q_c2h = 0.0
        for h in range(n_h):
            j = n_av + h
            q_c2h -= (sp[SP_W1_CH] * rinst_nx[i, j]
                      + sp[SP_W2_CH] * rtemp[i, j]
                      + sp[SP_W3_CH] * cih[i, h]
                      + sp[SP_LAMBDA_C] * cih[i, h])
        if bdist[i] <= sp[SP_DSAFE_B]:
            ratio = sp[SP_DMIN] / bdist[i]
            q_c2r = -sp[SP_BETA_B] * ratio * ratio
        else:
            q_c2r = 0.0
        q_saf = (sp[SP_WC2C] * q_c2c + sp[SP_WC2R] * q_c2r
                 + sp[SP_WC2H] * q_c2h)
        q_self[i] = (sp[SP_W1] * q_saf + sp[SP_W2] * q_eff
                     + sp[SP_W3] * q_com + sp[SP_W4] * q_lan)
        q_other[i] = q_saf + q_eff + q_lan
        total_other += q_other[i]
    lam = sp[SP_LAMBDA_I]
    denom = 1.0 + lam * (n_live - 1)
    for i in range(n_av):
        if live[i]:
            rewards[i] = (q_self[i]
                          + lam * (total_other - q_other[i])) / denom
    imm = 0.0
    if shapley_mode == 0:          # raw: weights are the rewards themselves
        for i in range(n_av):
            if live[i]:
                imm += rewards[i] * rewards[i]
    elif shapley_mode == 1:        # uniform
        w = 1.0 / n_live
        for i in range(n_av):
            if live[i]:
                imm += w * rewards[i]
    else:                          # normalized |phi| / sum|phi|
        total = 0.0
        for i in range(n_av):
            if live[i]:
                total += abs(rewards[i])
        if total < 1e-12:
            w = 1.0 / n_live
            for i in range(n_av):
                if live[i]:
                    imm += w * rewards[i]
        else:
            for i in range(n_av):
                if live[i]:
                    imm += (abs(rewards[i]) / total) * rewards[i]
    return safe, qcc_max, qch_max, imm, rewards


@njit(cache=True)
def rollout_eval(rows0, modes0, ctrl0, n_eval, hdv_block, merge_rs,
                 entry_angles, dest_angles, dest_idx, lengths, widths,
                 is_av, a_med, kin_paper, d_base, kappa_v, beta1, beta2,
                 beta3, v_ref, fixed_ds, lambda_v, v_max, r_inner, r_outer,
                 exit_angles, leg_half_width, leg_end, t_risk, lane_centers,
                 sp, shapley_mode, r_penalty, sent_r0, sent_spacing):
    """Discounted return of the heuristic rollout below a safe node and
    whether it was truncated by an unsafe state.

    Policy: hold lane, zero steering rate, bang-off toward the desired
    speed. Simulates n_eval steps plus a held-final-control tail of t_risk
    steps so every temporal window runs over the rollout's own continuation,
    scores the whole segment with one sliding-window risk pass, then walks
    the evaluation points discounting score_step rewards, truncating at the
    first unsafe state with -r_penalty. hdv_block is (n_h, 1+n_eval+t_risk,
    5), already sentinel-parked; ctrl0 seeds the jerk chain.
    """
    n_av = rows0.shape[0]
    n_h = hdv_block.shape[0]
    m = n_av + n_h
    total = 1 + n_eval + t_risk
    dt = sp[SP_DT]
    states = np.empty((total, n_av, 5))
    mode_seq = np.empty((total, n_av), dtype=np.int64)
    ctrls = np.zeros((n_eval, n_av, 2))
    states[0] = rows0
    mode_seq[0] = modes0
    for k in range(n_eval):
        for i in range(n_av):
            md = mode_seq[k, i]
            if md >= 3:
                for c in range(5):
                    states[k + 1, i, c] = states[k, i, c]
                mode_seq[k + 1, i] = md
                continue
            v = states[k, i, 2]
            if v < sp[SP_VDES] - sp[SP_VTOL]:
                ctrls[k, i, 0] = a_med
            elif v > sp[SP_VDES] + sp[SP_VTOL]:
                ctrls[k, i, 0] = -a_med
            r, th, vv, ph, ln, nm = _step_av(
                states[k, i, 0], states[k, i, 1], states[k, i, 2],
                states[k, i, 3], states[k, i, 4], md, ctrls[k, i, 0], 0.0,
                merge_rs[i], entry_angles[i], dest_angles[i], lengths[i],
                lane_centers, dt, r_inner, r_outer, leg_end, v_max,
                kin_paper)
            states[k + 1, i, 0] = r
            states[k + 1, i, 1] = th
            states[k + 1, i, 2] = vv
            states[k + 1, i, 3] = ph
            states[k + 1, i, 4] = ln
            mode_seq[k + 1, i] = nm
    for k in range(n_eval, n_eval + t_risk):
        for i in range(n_av):
            r, th, vv, ph, ln, nm = _step_av(
                states[k, i, 0], states[k, i, 1], states[k, i, 2],
                states[k, i, 3], states[k, i, 4], mode_seq[k, i],
                ctrls[n_eval - 1, i, 0], ctrls[n_eval - 1, i, 1],
                merge_rs[i], entry_angles[i], dest_angles[i], lengths[i],
                lane_centers, dt, r_inner, r_outer, leg_end, v_max,
                kin_paper)
            states[k + 1, i, 0] = r
            states[k + 1, i, 1] = th
            states[k + 1, i, 2] = vv
            states[k + 1, i, 3] = ph
            states[k + 1, i, 4] = ln
            mode_seq[k + 1, i] = nm
    traj = np.empty((total, m, 5))
    for t in range(total):
        for i in range(n_av):
            if mode_seq[t, i] >= 3:
                traj[t, i, 0] = sent_r0 + sent_spacing * i
                traj[t, i, 1] = 0.0
                traj[t, i, 2] = 0.0
                traj[t, i, 3] = 0.0
                traj[t, i, 4] = 0.0
            else:
                for c in range(5):
                    traj[t, i, c] = states[t, i, c]
        for h in range(n_h):
            for c in range(5):
                traj[t, n_av + h, c] = hdv_block[h, t, c]
    rinst0, rtemp, rinst_nx, bd_all = rollout_risk(
        traj, n_eval, is_av, lengths, widths, d_base, kappa_v, beta1,
        beta2, beta3, v_ref, fixed_ds, lambda_v, v_max, r_inner, r_outer,
        exit_angles, leg_half_width, leg_end, t_risk)
    cih = np.zeros((n_av, n_h))
    trans_pen = np.zeros(n_av)
    live = np.empty(n_av, dtype=np.bool_)
    bdist = np.empty(n_av)
    prev_a = np.empty(n_av)
    prev_pd = np.empty(n_av)
    for i in range(n_av):
        prev_a[i] = ctrl0[i, 0]
        prev_pd[i] = ctrl0[i, 1]
    tail = 0.0
    disc = 1.0
    for k in range(n_eval):
        disc *= sp[SP_GAMMA]
        for i in range(n_av):
            lv = mode_seq[k + 1, i] < 3
            live[i] = lv
            bdist[i] = bd_all[k, i] if lv else np.inf
        safe, qcc, qch, imm, rws = score_step(
            states[k + 1], mode_seq[k + 1], live, ctrls[k, :, 0],
            ctrls[k, :, 1], prev_a, prev_pd, trans_pen, lane_centers,
            dest_idx, exit_angles, rinst0[k], rtemp[k], rinst_nx[k], cih,
            bdist, sp, shapley_mode)
        if safe == 0:
            tail += disc * (-r_penalty)
            return tail, 1
        tail += disc * imm
        for i in range(n_av):
            prev_a[i] = ctrls[k, i, 0]
            prev_pd[i] = ctrls[k, i, 1]
    return tail, 0


@njit(cache=True)
def collision_hits_multi(samples, av_verts, thresholds, lengths, widths):
    """collision_hits over a batch of pairs: samples is (B, n, 5), av_verts
    (B, 4, 2), with per-pair thresholds and sampled-vehicle dimensions."""
    b = samples.shape[0]
    out = np.empty(b, dtype=np.int64)
    for k in range(b):
        out[k] = collision_hits(samples[k], av_verts[k], thresholds[k],
                                lengths[k], widths[k])
    return out


def warmup():
    """Trigger JIT compilation of every kernel with tiny inputs."""
    va = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    vb = va + 3.0
    rect_dist(va, vb)
    footprints_batch(np.array([20.0]), np.array([0.0]), np.array([0.0]),
                     np.array([4.0]), np.array([2.0]))
    pair_min_dists(np.stack((va, vb)))
    collision_hits(np.array([[24.0, 0.1, 3.0, 0.0, 0.5]]), va, 5.0, 4.0, 2.0)
    exits = np.array([0.0, 0.5 * math.pi, math.pi, 1.5 * math.pi])
    boundary_dists_batch(np.stack((va, vb)), 20.5, 28.0, exits, 3.75, 36.0)
    rows = np.array([[22.375, 0.0, 4.0, 0.0, 0.0],
                     [26.125, 1.0, 3.0, 0.0, 1.0]])
    modes = np.array([1, 1], dtype=np.int64)
    centers = np.array([22.375, 26.125])
    ext, _ = av_extrapolate(rows, modes, np.array([0.0, 0.5]),
                            np.array([0.0, 0.0]), np.array([22.375, 26.125]),
                            np.array([0.0, 0.0]), np.array([math.pi, math.pi]),
                            np.array([4.0, 4.0]), centers, 3, 0.1,
                            20.5, 28.0, 36.0, 5.0, False)
    risk_block(ext, np.array([True, True]), np.array([True, False]),
               np.array([4.0, 4.0]), np.array([2.0, 2.0]),
               5.0, 0.5, 0.5, 0.5, 0.5, 5.0, 0.0, 0.5, 5.0, 20.5, 28.0)
    rollout_risk(np.ascontiguousarray(np.concatenate((ext, ext))), 2,
                 np.array([True, False]), np.array([4.0, 4.0]),
                 np.array([2.0, 2.0]), 5.0, 0.5, 0.5, 0.5, 0.5, 5.0, 0.0,
                 0.5, 5.0, 20.5, 28.0, exits, 3.75, 36.0, 3)
    sp = np.full(SP_SIZE, 0.5)
    sp[SP_DT] = 0.5
    sp[SP_GAMMA] = 0.95
    dest = np.array([2, 2], dtype=np.int64)
    zeros2 = np.zeros(2)
    mat = np.zeros((3, 3))
    score_step(rows, modes, np.array([True, True]), zeros2, zeros2, zeros2,
               zeros2, zeros2, centers, dest, exits, mat, mat, mat,
               np.zeros((2, 1)), np.array([5.0, 5.0]), sp, 2)
    rollout_eval(rows, modes, np.zeros((2, 2)), 2,
                 np.zeros((1, 6, 5)) + 900.0, np.array([22.375, 26.125]),
                 np.array([0.0, 0.0]), np.array([math.pi, math.pi]), dest,
                 np.array([4.0, 4.0, 4.0]), np.array([2.0, 2.0, 2.0]),
                 np.array([True, True, False]), 1.5, False,
                 5.0, 0.5, 0.5, 0.5, 0.5, 5.0, 0.0, 0.5,
                 5.0, 20.5, 28.0, exits, 3.75, 36.0, 3, centers,
                 sp, 2, 1e3, 1000.0, 40.0)
    collision_hits_multi(np.array([[[24.0, 0.1, 3.0, 0.0, 0.5]]]),
                         va.reshape(1, 4, 2), np.array([5.0]),
                         np.array([4.0]), np.array([2.0]))
