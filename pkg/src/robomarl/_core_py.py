"""Pure-Python kernels.

Reference implementation of the hot loops (physics tick, A*, ray casting).
The compiled ``_core`` extension mirrors every function here operation for
operation, so both backends produce bit-identical results.
"""
import heapq
import math

import numpy as np

from ._layout import (
    CONTACT_EPS, E0, GRAVITY, I0, I_MAX, KD, KI, KP, LX, LY, MASS, MU_ROLL,
    MU_SLIDE, RADIUS, TAU_MAX, TH, V_MAX, VX, VY, W0, W_MAX, WHEEL_INERTIA,
    WHEEL_RADIUS, WZ, X, Y,
)

PI = math.pi
TWO_PI = 2.0 * math.pi
SQRT2 = math.sqrt(2.0)

# row-major 8-neighbourhood: (drow, dcol, diagonal)
NEIGHBORS = (
    (-1, -1, 1), (-1, 0, 0), (-1, 1, 1),
    (0, -1, 0), (0, 1, 0),
    (1, -1, 1), (1, 0, 0), (1, 1, 1),
)


def wrap_angle(a):
    return a - TWO_PI * math.floor((a + PI) / TWO_PI)


def _clamp(x, lo, hi):
    if x < lo:
        return lo
    if x > hi:
        return hi
    return x


def mecanum_inverse(vx, vy, wz, r, k):
    """Body twist -> wheel speeds (FL, FR, RL, RR); ``k = lx + ly``."""
    return (
        (vx - vy - k * wz) / r,
        (vx + vy + k * wz) / r,
        (vx + vy - k * wz) / r,
        (vx - vy + k * wz) / r,
    )


def mecanum_forward(w0, w1, w2, w3, r, k):
    return (
        r * (w0 + w1 + w2 + w3) / 4.0,
        r * (-w0 + w1 + w2 - w3) / 4.0,
        r * (-w0 + w1 - w2 + w3) / (4.0 * k),
    )


def pid_step(setpoint, measured, integral, prev_error, kp, ki, kd, i_max, tau_max, dt):
    """One PID update for a single wheel. Returns (torque, integral, error).

    The integral is frozen while the output is saturated in the direction of
    the error (clamping anti-windup).
    """
    e = setpoint - measured
    deriv = kd * (e - prev_error) / dt
    new_i = _clamp(integral + e * dt, -i_max, i_max)
    raw = kp * e + ki * new_i + deriv
    if (raw > tau_max or raw < -tau_max) and raw * e > 0.0:
        new_i = integral
        raw = kp * e + ki * new_i + deriv
    return _clamp(raw, -tau_max, tau_max), new_i, e


def _wheel_update(w, tau, friction, inertia, dt):
    if w > 0.0:
        nw = w + (tau - friction) * dt / inertia
        if nw < 0.0 and tau <= friction and tau >= -friction:
            nw = 0.0
        return nw
    if w < 0.0:
        nw = w + (tau + friction) * dt / inertia
        if nw > 0.0 and tau <= friction and tau >= -friction:
            nw = 0.0
        return nw
    if tau > friction:
        return (tau - friction) * dt / inertia
    if tau < -friction:
        return (tau + friction) * dt / inertia
    return 0.0


def _resolve_static(x, y, vxw, vyw, rad, rects, length, width):
    """Push a disc out of walls and rectangles; zero inward velocity.

    A non-positive ``length`` disables the field walls. Returns
    (x, y, vxw, vyw, touched).
    """
    touched = False
    for _ in range(8):
        moved = False
        if length > 0.0:
            if x < rad:
                x = rad
                if vxw < 0.0:
                    vxw = 0.0
                moved = True
            elif x > length - rad:
                x = length - rad
                if vxw > 0.0:
                    vxw = 0.0
                moved = True
            if y < rad:
                y = rad
                if vyw < 0.0:
                    vyw = 0.0
                moved = True
            elif y > width - rad:
                y = width - rad
                if vyw > 0.0:
                    vyw = 0.0
                moved = True
        for cx, cy, hx, hy in rects:
            dx = x - cx
            dy = y - cy
            sx = 1.0 if dx >= 0.0 else -1.0
            sy = 1.0 if dy >= 0.0 else -1.0
            px = dx * sx - hx
            py = dy * sy - hy
            if px > 0.0 or py > 0.0:
                qx = px if px > 0.0 else 0.0
                qy = py if py > 0.0 else 0.0
                d = math.sqrt(qx * qx + qy * qy)
                if d > rad:
                    continue
                nx = sx * qx / d
                ny = sy * qy / d
                push = rad + CONTACT_EPS - d
                x = x + nx * push
                y = y + ny * push
            else:
                if px > py:
                    nx = sx
                    ny = 0.0
                    x = cx + sx * (hx + rad + CONTACT_EPS)
                else:
                    nx = 0.0
                    ny = sy
                    y = cy + sy * (hy + rad + CONTACT_EPS)
            vn = vxw * nx + vyw * ny
            if vn < 0.0:
                vxw = vxw - vn * nx
                vyw = vyw - vn * ny
            moved = True
        if not moved:
            break
        touched = True
    return x, y, vxw, vyw, touched


def _tick_list(s, cvx, cvy, cwz, p, rects, length, width, dt):
    r = p[WHEEL_RADIUS]
    k = p[LX] + p[LY]
    vmax = p[V_MAX]
    wmax = p[W_MAX]
    cvx = _clamp(cvx, -vmax, vmax)
    cvy = _clamp(cvy, -vmax, vmax)
    cwz = _clamp(cwz, -wmax, wmax)
    sp = mecanum_inverse(cvx, cvy, cwz, r, k)

    mass = p[MASS]
    g = p[GRAVITY]
    friction = p[MU_ROLL] * (mass * g / 4.0) * r
    inertia = p[WHEEL_INERTIA] + mass * r * r / 4.0
    for j in range(4):
        tau, integ, err = pid_step(
            sp[j], s[W0 + j], s[I0 + j], s[E0 + j],
            p[KP], p[KI], p[KD], p[I_MAX], p[TAU_MAX], dt,
        )
        s[I0 + j] = integ
        s[E0 + j] = err
        s[W0 + j] = _wheel_update(s[W0 + j], tau, friction, inertia, dt)

    tvx, tvy, twz = mecanum_forward(s[W0], s[W0 + 1], s[W0 + 2], s[W0 + 3], r, k)
    a_max = p[MU_SLIDE] * g
    dvx = tvx - s[VX]
    dvy = tvy - s[VY]
    lim = a_max * dt
    n = math.sqrt(dvx * dvx + dvy * dvy)
    if n > lim:
        dvx = dvx * (lim / n)
        dvy = dvy * (lim / n)
    dwz = _clamp(twz - s[WZ], -(a_max / k) * dt, (a_max / k) * dt)
    vx = s[VX] + dvx
    vy = s[VY] + dvy
    wz = s[WZ] + dwz

    th = s[TH]
    c = math.cos(th)
    sn = math.sin(th)
    x = s[X] + (c * vx - sn * vy) * dt
    y = s[Y] + (sn * vx + c * vy) * dt
    th = wrap_angle(th + wz * dt)

    c = math.cos(th)
    sn = math.sin(th)
    vxw = c * vx - sn * vy
    vyw = sn * vx + c * vy
    x, y, vxw, vyw, touched = _resolve_static(x, y, vxw, vyw, p[RADIUS], rects, length, width)
    if touched:
        vx = c * vxw + sn * vyw
        vy = -sn * vxw + c * vyw
    s[X] = x
    s[Y] = y
    s[TH] = th
    s[VX] = vx
    s[VY] = vy
    s[WZ] = wz


def body_tick(state, cmd_vx, cmd_vy, cmd_wz, params, rects, length, width, dt):
    """Advance one robot body by ``dt`` in place (static geometry only)."""
    s = state.tolist()
    _tick_list(s, cmd_vx, cmd_vy, cmd_wz, params.tolist(), rects.tolist(), length, width, dt)
    state[:] = s


def _separate_pair(a, b, ra, rb, move_a, move_b):
    dx = b[X] - a[X]
    dy = b[Y] - a[Y]
    d = math.sqrt(dx * dx + dy * dy)
    gap = ra + rb
    if d >= gap:
        return False
    if d > 0.0:
        nx = dx / d
        ny = dy / d
    else:
        nx = 1.0
        ny = 0.0
    overlap = gap - d
    if move_a and move_b:
        share_a = overlap * 0.5
        share_b = overlap * 0.5
    elif move_a:
        share_a = overlap
        share_b = 0.0
    else:
        share_a = 0.0
        share_b = overlap
    for s, sign, share, movable in ((a, -1.0, share_a, move_a), (b, 1.0, share_b, move_b)):
        if not movable:
            continue
        s[X] = s[X] + sign * nx * share
        s[Y] = s[Y] + sign * ny * share
        c = math.cos(s[TH])
        sn = math.sin(s[TH])
        vxw = c * s[VX] - sn * s[VY]
        vyw = sn * s[VX] + c * s[VY]
        # inward means moving against the outward normal sign*n
        vn = (vxw * nx + vyw * ny) * sign
        if vn < 0.0:
            vxw = vxw - vn * sign * nx
            vyw = vyw - vn * sign * ny
            s[VX] = c * vxw + sn * vyw
            s[VY] = -sn * vxw + c * vyw
    return True


def world_tick(bodies, cmds, params, movable, rects, length, width, dt):
    """Advance every movable body, then resolve robot-robot and static contacts."""
    n = bodies.shape[0]
    rows = bodies.tolist()
    prm = params.tolist()
    cm = cmds.tolist()
    rl = rects.tolist()
    mv = [bool(m) for m in movable.tolist()]
    for i in range(n):
        if mv[i]:
            _tick_list(rows[i], cm[i][0], cm[i][1], cm[i][2], prm[i], rl, length, width, dt)
    hit = [False] * n
    for i in range(n):
        for j in range(i + 1, n):
            if not (mv[i] or mv[j]):
                continue
            if _separate_pair(rows[i], rows[j], prm[i][RADIUS], prm[j][RADIUS], mv[i], mv[j]):
                hit[i] = hit[i] or mv[i]
                hit[j] = hit[j] or mv[j]
    for i in range(n):
        if not hit[i]:
            continue
        s = rows[i]
        c = math.cos(s[TH])
        sn = math.sin(s[TH])
        vxw = c * s[VX] - sn * s[VY]
        vyw = sn * s[VX] + c * s[VY]
        x, y, vxw, vyw, touched = _resolve_static(
            s[X], s[Y], vxw, vyw, prm[i][RADIUS], rl, length, width)
        if touched:
            s[X] = x
            s[Y] = y
            s[VX] = c * vxw + sn * vyw
            s[VY] = -sn * vxw + c * vyw
    bodies[:, :] = rows


def astar(blocked, sr, sc, gr, gc):
    """8-connected A* without corner cutting.

    Returns ``(cells, n_straight, n_diagonal)``; ``cells`` is empty when the
    goal is unreachable. Ties on f are broken by push order.
    """
    rows, cols = blocked.shape
    grid = blocked.ravel().tolist()
    start = sr * cols + sc
    goal = gr * cols + gc
    if grid[start] or grid[goal]:
        return [], 0, 0
    inf = math.inf
    g = [inf] * (rows * cols)
    parent = [-1] * (rows * cols)
    closed = [False] * (rows * cols)
    g[start] = 0.0
    dr0 = float(sr - gr)
    dc0 = float(sc - gc)
    heap = [(math.sqrt(dr0 * dr0 + dc0 * dc0), 0, start)]
    counter = 1
    found = False
    while heap:
        _, _, u = heapq.heappop(heap)
        if closed[u]:
            continue
        closed[u] = True
        if u == goal:
            found = True
            break
        ur = u // cols
        uc = u - ur * cols
        gu = g[u]
        for dr, dc, diag in NEIGHBORS:
            vr = ur + dr
            vc = uc + dc
            if vr < 0 or vr >= rows or vc < 0 or vc >= cols:
                continue
            v = vr * cols + vc
            if grid[v] or closed[v]:
                continue
            if diag:
                if grid[vr * cols + uc] or grid[ur * cols + vc]:
                    continue
                ng = gu + SQRT2
            else:
                ng = gu + 1.0
            if ng < g[v]:
                g[v] = ng
                parent[v] = u
                hr = float(vr - gr)
                hc = float(vc - gc)
                heapq.heappush(heap, (ng + math.sqrt(hr * hr + hc * hc), counter, v))
                counter += 1
    if not found:
        return [], 0, 0
    cells = []
    u = goal
    while u != -1:
        cells.append((u // cols, u % cols))
        u = parent[u]
    cells.reverse()
    n_diag = 0
    for (r0, c0), (r1, c1) in zip(cells, cells[1:]):
        if r0 != r1 and c0 != c1:
            n_diag += 1
    return cells, len(cells) - 1 - n_diag, n_diag


def _slab(o, d, lo, hi):
    """Parametric entry/exit of a ray on one axis; None when it misses."""
    if d == 0.0:
        if o < lo or o > hi:
            return None
        return -math.inf, math.inf
    t1 = (lo - o) / d
    t2 = (hi - o) / d
    if t1 > t2:
        return t2, t1
    return t1, t2


def _ray_rect(ox, oy, dx, dy, cx, cy, hx, hy):
    """Entry parameter of the ray/segment into a closed rectangle, or None."""
    sx = _slab(ox, dx, cx - hx, cx + hx)
    if sx is None:
        return None
    sy = _slab(oy, dy, cy - hy, cy + hy)
    if sy is None:
        return None
    tn = sx[0] if sx[0] > sy[0] else sy[0]
    tf = sx[1] if sx[1] < sy[1] else sy[1]
    if tn > tf or tf < 0.0:
        return None
    return tn if tn > 0.0 else 0.0


def segment_clear(ax, ay, bx, by, rects):
    dx = bx - ax
    dy = by - ay
    for cx, cy, hx, hy in rects.tolist():
        t = _ray_rect(ax, ay, dx, dy, cx, cy, hx, hy)
        if t is not None and t <= 1.0:
            return False
    return True


def ray_cast(ox, oy, angles, max_range, rects, length, width, circles):
    out = np.empty(len(angles))
    rl = rects.tolist()
    cl = circles.tolist()
    for i, a in enumerate(angles.tolist()):
        dx = math.cos(a)
        dy = math.sin(a)
        t = max_range
        if dx > 0.0:
            tw = (length - ox) / dx
        elif dx < 0.0:
            tw = -ox / dx
        else:
            tw = math.inf
        if tw < t:
            t = tw
        if dy > 0.0:
            tw = (width - oy) / dy
        elif dy < 0.0:
            tw = -oy / dy
        else:
            tw = math.inf
        if tw < t:
            t = tw
        for cx, cy, hx, hy in rl:
            th = _ray_rect(ox, oy, dx, dy, cx, cy, hx, hy)
            if th is not None and th < t:
                t = th
        for cx, cy, rad in cl:
            fx = ox - cx
            fy = oy - cy
            b = fx * dx + fy * dy
            c = fx * fx + fy * fy - rad * rad
            if c <= 0.0:
                # origin inside the disc (overlapping robots): ignore it
                continue
            disc = b * b - c
            if disc < 0.0:
                continue
            th = -b - math.sqrt(disc)
            if th >= 0.0 and th < t:
                t = th
        out[i] = t
    return out


def pursuit(x, y, theta, waypoints, remaining, v_max, a_max, lookahead, tol, v_lim):
    """Holonomic pure pursuit along a polyline; returns body-frame (vx, vy)."""
    wp = waypoints.tolist()
    rem = remaining.tolist()
    n = len(wp)
    gx = wp[n - 1][0]
    gy = wp[n - 1][1]
    if math.sqrt((gx - x) * (gx - x) + (gy - y) * (gy - y)) <= tol:
        return 0.0, 0.0
    best = 0
    bd = math.inf
    for i in range(n):
        dx = wp[i][0] - x
        dy = wp[i][1] - y
        d = math.sqrt(dx * dx + dy * dy)
        if d < bd:
            bd = d
            best = i
    s_rem = bd + rem[best]
    tx = gx
    ty = gy
    for j in range(best, n):
        dx = wp[j][0] - x
        dy = wp[j][1] - y
        if math.sqrt(dx * dx + dy * dy) >= lookahead:
            tx = wp[j][0]
            ty = wp[j][1]
            break
    dx = tx - x
    dy = ty - y
    dist = math.sqrt(dx * dx + dy * dy)
    if dist == 0.0:
        return 0.0, 0.0
    speed = math.sqrt(2.0 * a_max * s_rem)
    if speed > v_max:
        speed = v_max
    wx = speed * dx / dist
    wy = speed * dy / dist
    c = math.cos(theta)
    s = math.sin(theta)
    return _clamp(c * wx + s * wy, -v_lim, v_lim), _clamp(-s * wx + c * wy, -v_lim, v_lim)


def points_free(xs, ys, rects, length, width, inflation):
    """1 where a point is inside the field shrunk by ``inflation`` and farther
    than ``inflation`` from every rectangle, else 0."""
    n = len(xs)
    out = np.zeros(n, dtype=np.uint8)
    rl = rects.tolist()
    xl, yl = xs.tolist(), ys.tolist()
    for i in range(n):
        x, y = xl[i], yl[i]
        if not (x >= inflation and x <= length - inflation
                and y >= inflation and y <= width - inflation):
            continue
        ok = 1
        for cx, cy, hx, hy in rl:
            qx = abs(x - cx) - hx
            qy = abs(y - cy) - hy
            if qx < 0.0:
                qx = 0.0
            if qy < 0.0:
                qy = 0.0
            if not math.sqrt(qx * qx + qy * qy) > inflation:
                ok = 0
                break
        out[i] = ok
    return out


def kmeans_lloyd(pts, k, first, max_iter):
    """Lloyd iterations from farthest-point seeding; returns (k, 2) centres.

    An empty cluster is moved to the point farthest from its own centre.
    """
    n = len(pts)
    px = pts[:, 0].tolist()
    py = pts[:, 1].tolist()
    cx = [0.0] * k
    cy = [0.0] * k
    cx[0], cy[0] = px[first], py[first]
    d2 = [0.0] * n
    for i in range(n):
        dx, dy = px[i] - cx[0], py[i] - cy[0]
        d2[i] = dx * dx + dy * dy
    for j in range(1, k):
        best = 0
        for i in range(1, n):
            if d2[i] > d2[best]:
                best = i
        cx[j], cy[j] = px[best], py[best]
        for i in range(n):
            dx, dy = px[i] - cx[j], py[i] - cy[j]
            e = dx * dx + dy * dy
            if e < d2[i]:
                d2[i] = e
    labels = _kmeans_assign(px, py, cx, cy)
    for _ in range(max_iter):
        counts = [0] * k
        sx = [0.0] * k
        sy = [0.0] * k
        for i in range(n):
            c = labels[i]
            counts[c] += 1
            sx[c] += px[i]
            sy[c] += py[i]
        if 0 in counts:
            far = 0
            far_d = -1.0
            for i in range(n):
                dx, dy = px[i] - cx[labels[i]], py[i] - cy[labels[i]]
                e = dx * dx + dy * dy
                if e > far_d:
                    far, far_d = i, e
            for j in range(k):
                if counts[j] == 0:
                    cx[j], cy[j] = px[far], py[far]
        for j in range(k):
            if counts[j] > 0:
                cx[j] = sx[j] / counts[j]
                cy[j] = sy[j] / counts[j]
        new = _kmeans_assign(px, py, cx, cy)
        if new == labels:
            break
        labels = new
    return np.array([cx, cy], dtype=np.float64).T.copy()


def _kmeans_assign(px, py, cx, cy):
    k = len(cx)
    labels = [0] * len(px)
    for i in range(len(px)):
        best, best_d = 0, math.inf
        for j in range(k):
            dx, dy = px[i] - cx[j], py[i] - cy[j]
            e = dx * dx + dy * dy
            if e < best_d:
                best, best_d = j, e
        labels[i] = best
    return labels
