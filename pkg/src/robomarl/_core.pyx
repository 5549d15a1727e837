# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels. Operation-for-operation mirror of ``_core_py``."""
from libc.math cimport sqrt, cos, sin, floor, fabs, INFINITY
from libc.stdlib cimport malloc, free

import numpy as np

cdef enum:
    X = 0
    Y = 1
    TH = 2
    VX = 3
    VY = 4
    WZ = 5
    W0 = 6
    I0 = 10
    E0 = 14
    BODY_SIZE = 18

cdef enum:
    MU_SLIDE = 0
    MU_ROLL = 1
    TAU_MAX = 2
    KP = 3
    KI = 4
    KD = 5
    MASS = 6
    WHEEL_INERTIA = 7
    WHEEL_RADIUS = 8
    LX = 9
    LY = 10
    I_MAX = 11
    GRAVITY = 12
    RADIUS = 13
    V_MAX = 14
    W_MAX = 15

cdef double PI = 3.141592653589793
cdef double TWO_PI = 2.0 * 3.141592653589793
cdef double SQRT2 = sqrt(2.0)
cdef double CONTACT_EPS = 1e-9

LAYOUT = {"BODY_SIZE": BODY_SIZE, "W0": W0, "I0": I0, "E0": E0, "W_MAX": W_MAX}


cdef inline double wrap_angle_c(double a) nogil:
    return a - TWO_PI * floor((a + PI) / TWO_PI)


cdef inline double clamp(double x, double lo, double hi) nogil:
    if x < lo:
        return lo
    if x > hi:
        return hi
    return x


def wrap_angle(double a):
    return wrap_angle_c(a)


def mecanum_inverse(double vx, double vy, double wz, double r, double k):
    return (
        (vx - vy - k * wz) / r,
        (vx + vy + k * wz) / r,
        (vx + vy - k * wz) / r,
        (vx - vy + k * wz) / r,
    )


def mecanum_forward(double w0, double w1, double w2, double w3, double r, double k):
    return (
        r * (w0 + w1 + w2 + w3) / 4.0,
        r * (-w0 + w1 + w2 - w3) / 4.0,
        r * (-w0 + w1 - w2 + w3) / (4.0 * k),
    )


cdef inline double pid_c(double setpoint, double measured, double* integral, double* prev_error,
                         double kp, double ki, double kd, double i_max, double tau_max,
                         double dt) nogil:
    cdef double e = setpoint - measured
    cdef double deriv = kd * (e - prev_error[0]) / dt
    cdef double new_i = clamp(integral[0] + e * dt, -i_max, i_max)
    cdef double raw = kp * e + ki * new_i + deriv
    if (raw > tau_max or raw < -tau_max) and raw * e > 0.0:
        new_i = integral[0]
        raw = kp * e + ki * new_i + deriv
    integral[0] = new_i
    prev_error[0] = e
    return clamp(raw, -tau_max, tau_max)


def pid_step(double setpoint, double measured, double integral, double prev_error,
             double kp, double ki, double kd, double i_max, double tau_max, double dt):
    cdef double tau = pid_c(setpoint, measured, &integral, &prev_error, kp, ki, kd,
                            i_max, tau_max, dt)
    return tau, integral, prev_error


cdef inline double wheel_update(double w, double tau, double friction, double inertia,
                                double dt) nogil:
    cdef double nw
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


cdef bint resolve_static(double* xs, double* ys, double* vxs, double* vys, double rad,
                         const double[:, ::1] rects, double length, double width) nogil:
    cdef double x = xs[0], y = ys[0], vxw = vxs[0], vyw = vys[0]
    cdef bint touched = False, moved
    cdef Py_ssize_t it, m
    cdef double cx, cy, hx, hy, dx, dy, sx, sy, px, py, qx, qy, d, nx, ny, push, vn
    for it in range(8):
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
        for m in range(rects.shape[0]):
            cx = rects[m, 0]
            cy = rects[m, 1]
            hx = rects[m, 2]
            hy = rects[m, 3]
            dx = x - cx
            dy = y - cy
            sx = 1.0 if dx >= 0.0 else -1.0
            sy = 1.0 if dy >= 0.0 else -1.0
            px = dx * sx - hx
            py = dy * sy - hy
            if px > 0.0 or py > 0.0:
                qx = px if px > 0.0 else 0.0
                qy = py if py > 0.0 else 0.0
                d = sqrt(qx * qx + qy * qy)
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
    xs[0] = x
    ys[0] = y
    vxs[0] = vxw
    vys[0] = vyw
    return touched


cdef void tick_row(double[::1] s, double cvx, double cvy, double cwz, const double[::1] p,
                   const double[:, ::1] rects, double length, double width, double dt) nogil:
    cdef double r = p[WHEEL_RADIUS]
    cdef double k = p[LX] + p[LY]
    cdef double vmax = p[V_MAX]
    cdef double wmax = p[W_MAX]
    cdef double sp[4]
    cdef double mass, g, friction, inertia, tau
    cdef double tvx, tvy, twz, a_max, dvx, dvy, lim, n, dwz, vx, vy, wz
    cdef double th, c, sn, x, y, vxw, vyw
    cdef int j
    cvx = clamp(cvx, -vmax, vmax)
    cvy = clamp(cvy, -vmax, vmax)
    cwz = clamp(cwz, -wmax, wmax)
    sp[0] = (cvx - cvy - k * cwz) / r
    sp[1] = (cvx + cvy + k * cwz) / r
    sp[2] = (cvx + cvy - k * cwz) / r
    sp[3] = (cvx - cvy + k * cwz) / r

    mass = p[MASS]
    g = p[GRAVITY]
    friction = p[MU_ROLL] * (mass * g / 4.0) * r
    inertia = p[WHEEL_INERTIA] + mass * r * r / 4.0
    for j in range(4):
        tau = pid_c(sp[j], s[W0 + j], &s[I0 + j], &s[E0 + j],
                    p[KP], p[KI], p[KD], p[I_MAX], p[TAU_MAX], dt)
        s[W0 + j] = wheel_update(s[W0 + j], tau, friction, inertia, dt)

    tvx = r * (s[W0] + s[W0 + 1] + s[W0 + 2] + s[W0 + 3]) / 4.0
    tvy = r * (-s[W0] + s[W0 + 1] + s[W0 + 2] - s[W0 + 3]) / 4.0
    twz = r * (-s[W0] + s[W0 + 1] - s[W0 + 2] + s[W0 + 3]) / (4.0 * k)
    a_max = p[MU_SLIDE] * g
    dvx = tvx - s[VX]
    dvy = tvy - s[VY]
    lim = a_max * dt
    n = sqrt(dvx * dvx + dvy * dvy)
    if n > lim:
        dvx = dvx * (lim / n)
        dvy = dvy * (lim / n)
    dwz = clamp(twz - s[WZ], -(a_max / k) * dt, (a_max / k) * dt)
    vx = s[VX] + dvx
    vy = s[VY] + dvy
    wz = s[WZ] + dwz

    th = s[TH]
    c = cos(th)
    sn = sin(th)
    x = s[X] + (c * vx - sn * vy) * dt
    y = s[Y] + (sn * vx + c * vy) * dt
    th = wrap_angle_c(th + wz * dt)

    c = cos(th)
    sn = sin(th)
    vxw = c * vx - sn * vy
    vyw = sn * vx + c * vy
    if resolve_static(&x, &y, &vxw, &vyw, p[RADIUS], rects, length, width):
        vx = c * vxw + sn * vyw
        vy = -sn * vxw + c * vyw
    s[X] = x
    s[Y] = y
    s[TH] = th
    s[VX] = vx
    s[VY] = vy
    s[WZ] = wz


def body_tick(double[::1] state, double cmd_vx, double cmd_vy, double cmd_wz,
              const double[::1] params, const double[:, ::1] rects, double length,
              double width, double dt):
    """Advance one robot body by ``dt`` in place (static geometry only)."""
    tick_row(state, cmd_vx, cmd_vy, cmd_wz, params, rects, length, width, dt)


cdef bint separate_pair(double[::1] a, double[::1] b, double ra, double rb,
                        bint move_a, bint move_b) nogil:
    cdef double dx = b[X] - a[X]
    cdef double dy = b[Y] - a[Y]
    cdef double d = sqrt(dx * dx + dy * dy)
    cdef double gap = ra + rb
    cdef double nx, ny, overlap, share_a, share_b
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
    if move_a:
        push_body(a, -1.0, share_a, nx, ny)
    if move_b:
        push_body(b, 1.0, share_b, nx, ny)
    return True


cdef inline void push_body(double[::1] s, double sign, double share, double nx,
                           double ny) nogil:
    cdef double c, sn, vxw, vyw, vn
    s[X] = s[X] + sign * nx * share
    s[Y] = s[Y] + sign * ny * share
    c = cos(s[TH])
    sn = sin(s[TH])
    vxw = c * s[VX] - sn * s[VY]
    vyw = sn * s[VX] + c * s[VY]
    vn = (vxw * nx + vyw * ny) * sign
    if vn < 0.0:
        vxw = vxw - vn * sign * nx
        vyw = vyw - vn * sign * ny
        s[VX] = c * vxw + sn * vyw
        s[VY] = -sn * vxw + c * vyw


def world_tick(double[:, ::1] bodies, const double[:, ::1] cmds, const double[:, ::1] params,
               const unsigned char[::1] movable, const double[:, ::1] rects, double length,
               double width, double dt):
    """Advance every movable body, then resolve robot-robot and static contacts."""
    cdef Py_ssize_t n = bodies.shape[0]
    cdef Py_ssize_t i, j
    cdef double c, sn, vxw, vyw, x, y
    cdef unsigned char hit[64]
    if n > 64:
        raise ValueError("at most 64 bodies")
    with nogil:
        for i in range(n):
            hit[i] = 0
            if movable[i]:
                tick_row(bodies[i], cmds[i, 0], cmds[i, 1], cmds[i, 2], params[i], rects,
                         length, width, dt)
        for i in range(n):
            for j in range(i + 1, n):
                if not (movable[i] or movable[j]):
                    continue
                if separate_pair(bodies[i], bodies[j], params[i, RADIUS], params[j, RADIUS],
                                 movable[i], movable[j]):
                    hit[i] = hit[i] or movable[i]
                    hit[j] = hit[j] or movable[j]
        for i in range(n):
            if not hit[i]:
                continue
            c = cos(bodies[i, TH])
            sn = sin(bodies[i, TH])
            vxw = c * bodies[i, VX] - sn * bodies[i, VY]
            vyw = sn * bodies[i, VX] + c * bodies[i, VY]
            x = bodies[i, X]
            y = bodies[i, Y]
            if resolve_static(&x, &y, &vxw, &vyw, params[i, RADIUS], rects, length, width):
                bodies[i, X] = x
                bodies[i, Y] = y
                bodies[i, VX] = c * vxw + sn * vyw
                bodies[i, VY] = -sn * vxw + c * vyw


# --------------------------------------------------------------------- A*

cdef struct HeapItem:
    double f
    long order
    int node


cdef inline bint item_less(HeapItem a, HeapItem b) nogil:
    return a.f < b.f or (a.f == b.f and a.order < b.order)


cdef void heap_push(HeapItem* heap, int* size, HeapItem item) nogil:
    cdef int i = size[0]
    cdef int parent
    size[0] += 1
    while i > 0:
        parent = (i - 1) >> 1
        if item_less(item, heap[parent]):
            heap[i] = heap[parent]
            i = parent
        else:
            break
    heap[i] = item


cdef HeapItem heap_pop(HeapItem* heap, int* size) nogil:
    cdef HeapItem top = heap[0]
    cdef HeapItem last
    cdef int i = 0, child, n
    size[0] -= 1
    n = size[0]
    if n > 0:
        last = heap[n]
        while True:
            child = 2 * i + 1
            if child >= n:
                break
            if child + 1 < n and item_less(heap[child + 1], heap[child]):
                child += 1
            if item_less(heap[child], last):
                heap[i] = heap[child]
                i = child
            else:
                break
        heap[i] = last
    return top


cdef int[8] NB_DR
cdef int[8] NB_DC
cdef int[8] NB_DIAG
NB_DR[:] = [-1, -1, -1, 0, 0, 1, 1, 1]
NB_DC[:] = [-1, 0, 1, -1, 1, -1, 0, 1]
NB_DIAG[:] = [1, 0, 1, 0, 0, 1, 0, 1]


def astar(const unsigned char[:, ::1] blocked, int sr, int sc, int gr, int gc):
    """8-connected A* without corner cutting.

    Returns ``(cells, n_straight, n_diagonal)``; ``cells`` is empty when the
    goal is unreachable. Ties on f are broken by push order.
    """
    cdef int rows = blocked.shape[0]
    cdef int cols = blocked.shape[1]
    cdef int total = rows * cols
    cdef int start = sr * cols + sc
    cdef int goal = gr * cols + gc
    if blocked[sr, sc] or blocked[gr, gc]:
        return [], 0, 0
    cdef double* g = <double*> malloc(total * sizeof(double))
    cdef int* parent = <int*> malloc(total * sizeof(int))
    cdef unsigned char* closed = <unsigned char*> malloc(total * sizeof(unsigned char))
    cdef HeapItem* heap = <HeapItem*> malloc((8 * total + 2) * sizeof(HeapItem))
    cdef int size = 0
    cdef long counter = 1
    cdef bint found = False
    cdef int i, u, ur, uc, vr, vc, v, nb
    cdef double gu, ng, hr, hc, dr0, dc0
    cdef HeapItem item
    if g == NULL or parent == NULL or closed == NULL or heap == NULL:
        free(g); free(parent); free(closed); free(heap)
        raise MemoryError()
    try:
        with nogil:
            for i in range(total):
                g[i] = INFINITY
                parent[i] = -1
                closed[i] = 0
            g[start] = 0.0
            dr0 = <double> (sr - gr)
            dc0 = <double> (sc - gc)
            item.f = sqrt(dr0 * dr0 + dc0 * dc0)
            item.order = 0
            item.node = start
            heap_push(heap, &size, item)
            while size > 0:
                item = heap_pop(heap, &size)
                u = item.node
                if closed[u]:
                    continue
                closed[u] = 1
                if u == goal:
                    found = True
                    break
                ur = u // cols
                uc = u - ur * cols
                gu = g[u]
                for nb in range(8):
                    vr = ur + NB_DR[nb]
                    vc = uc + NB_DC[nb]
                    if vr < 0 or vr >= rows or vc < 0 or vc >= cols:
                        continue
                    v = vr * cols + vc
                    if blocked[vr, vc] or closed[v]:
                        continue
                    if NB_DIAG[nb]:
                        if blocked[vr, uc] or blocked[ur, vc]:
                            continue
                        ng = gu + SQRT2
                    else:
                        ng = gu + 1.0
                    if ng < g[v]:
                        g[v] = ng
                        parent[v] = u
                        hr = <double> (vr - gr)
                        hc = <double> (vc - gc)
                        item.f = ng + sqrt(hr * hr + hc * hc)
                        item.order = counter
                        item.node = v
                        heap_push(heap, &size, item)
                        counter += 1
        if not found:
            return [], 0, 0
        cells = []
        u = goal
        while u != -1:
            cells.append((u // cols, u % cols))
            u = parent[u]
    finally:
        free(g)
        free(parent)
        free(closed)
        free(heap)
    cells.reverse()
    cdef int n_diag = 0
    cdef Py_ssize_t k
    for k in range(len(cells) - 1):
        if cells[k][0] != cells[k + 1][0] and cells[k][1] != cells[k + 1][1]:
            n_diag += 1
    return cells, len(cells) - 1 - n_diag, n_diag


# ------------------------------------------------------------ ray casting

cdef inline bint ray_rect(double ox, double oy, double dx, double dy, double cx, double cy,
                          double hx, double hy, double* t_out) nogil:
    cdef double tx0, tx1, ty0, ty1, t1, t2, tn, tf
    cdef double lo = cx - hx, hi = cx + hx
    if dx == 0.0:
        if ox < lo or ox > hi:
            return False
        tx0 = -INFINITY
        tx1 = INFINITY
    else:
        t1 = (lo - ox) / dx
        t2 = (hi - ox) / dx
        if t1 > t2:
            tx0 = t2
            tx1 = t1
        else:
            tx0 = t1
            tx1 = t2
    lo = cy - hy
    hi = cy + hy
    if dy == 0.0:
        if oy < lo or oy > hi:
            return False
        ty0 = -INFINITY
        ty1 = INFINITY
    else:
        t1 = (lo - oy) / dy
        t2 = (hi - oy) / dy
        if t1 > t2:
            ty0 = t2
            ty1 = t1
        else:
            ty0 = t1
            ty1 = t2
    tn = tx0 if tx0 > ty0 else ty0
    tf = tx1 if tx1 < ty1 else ty1
    if tn > tf or tf < 0.0:
        return False
    t_out[0] = tn if tn > 0.0 else 0.0
    return True


def segment_clear(double ax, double ay, double bx, double by, const double[:, ::1] rects):
    cdef double dx = bx - ax
    cdef double dy = by - ay
    cdef double t
    cdef Py_ssize_t m
    for m in range(rects.shape[0]):
        if ray_rect(ax, ay, dx, dy, rects[m, 0], rects[m, 1], rects[m, 2], rects[m, 3], &t):
            if t <= 1.0:
                return False
    return True


def ray_cast(double ox, double oy, const double[::1] angles, double max_range,
             const double[:, ::1] rects, double length, double width,
             const double[:, ::1] circles):
    cdef Py_ssize_t n = angles.shape[0]
    out = np.empty(n)
    cdef double[::1] res = out
    cdef Py_ssize_t i, m
    cdef double a, dx, dy, t, tw, th, fx, fy, b, c, disc, rad
    with nogil:
        for i in range(n):
            a = angles[i]
            dx = cos(a)
            dy = sin(a)
            t = max_range
            if dx > 0.0:
                tw = (length - ox) / dx
            elif dx < 0.0:
                tw = -ox / dx
            else:
                tw = INFINITY
            if tw < t:
                t = tw
            if dy > 0.0:
                tw = (width - oy) / dy
            elif dy < 0.0:
                tw = -oy / dy
            else:
                tw = INFINITY
            if tw < t:
                t = tw
            for m in range(rects.shape[0]):
                if ray_rect(ox, oy, dx, dy, rects[m, 0], rects[m, 1], rects[m, 2],
                            rects[m, 3], &th):
                    if th < t:
                        t = th
            for m in range(circles.shape[0]):
                fx = ox - circles[m, 0]
                fy = oy - circles[m, 1]
                rad = circles[m, 2]
                b = fx * dx + fy * dy
                c = fx * fx + fy * fy - rad * rad
                if c <= 0.0:
                    continue
                disc = b * b - c
                if disc < 0.0:
                    continue
                th = -b - sqrt(disc)
                if th >= 0.0 and th < t:
                    t = th
            res[i] = t
    return out


def pursuit(double x, double y, double theta, const double[:, ::1] waypoints,
            const double[::1] remaining, double v_max, double a_max, double lookahead,
            double tol, double v_lim):
    """Holonomic pure pursuit along a polyline; returns body-frame (vx, vy)."""
    cdef Py_ssize_t n = waypoints.shape[0], i, j, best = 0
    cdef double gx = waypoints[n - 1, 0], gy = waypoints[n - 1, 1]
    cdef double dx, dy, d, bd = INFINITY, s_rem, tx, ty, dist, speed, wx, wy, c, s
    if sqrt((gx - x) * (gx - x) + (gy - y) * (gy - y)) <= tol:
        return 0.0, 0.0
    for i in range(n):
        dx = waypoints[i, 0] - x
        dy = waypoints[i, 1] - y
        d = sqrt(dx * dx + dy * dy)
        if d < bd:
            bd = d
            best = i
    s_rem = bd + remaining[best]
    tx = gx
    ty = gy
    for j in range(best, n):
        dx = waypoints[j, 0] - x
        dy = waypoints[j, 1] - y
        if sqrt(dx * dx + dy * dy) >= lookahead:
            tx = waypoints[j, 0]
            ty = waypoints[j, 1]
            break
    dx = tx - x
    dy = ty - y
    dist = sqrt(dx * dx + dy * dy)
    if dist == 0.0:
        return 0.0, 0.0
    speed = sqrt(2.0 * a_max * s_rem)
    if speed > v_max:
        speed = v_max
    wx = speed * dx / dist
    wy = speed * dy / dist
    c = cos(theta)
    s = sin(theta)
    return clamp(c * wx + s * wy, -v_lim, v_lim), clamp(-s * wx + c * wy, -v_lim, v_lim)


def points_free(const double[::1] xs, const double[::1] ys, const double[:, ::1] rects,
                double length, double width, double inflation):
    cdef Py_ssize_t n = xs.shape[0]
    cdef Py_ssize_t i, m
    cdef double x, y, qx, qy
    cdef unsigned char ok
    out = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] o = out
    for i in range(n):
        x = xs[i]
        y = ys[i]
        if not (x >= inflation and x <= length - inflation
                and y >= inflation and y <= width - inflation):
            continue
        ok = 1
        for m in range(rects.shape[0]):
            qx = fabs(x - rects[m, 0]) - rects[m, 2]
            qy = fabs(y - rects[m, 1]) - rects[m, 3]
            if qx < 0.0:
                qx = 0.0
            if qy < 0.0:
                qy = 0.0
            if not sqrt(qx * qx + qy * qy) > inflation:
                ok = 0
                break
        o[i] = ok
    return out


cdef void kmeans_assign(const double[:, ::1] pts, double* cx, double* cy, int k,
                        int* labels) nogil:
    cdef Py_ssize_t i
    cdef int j, best
    cdef double dx, dy, e, best_d
    for i in range(pts.shape[0]):
        best = 0
        best_d = INFINITY
        for j in range(k):
            dx = pts[i, 0] - cx[j]
            dy = pts[i, 1] - cy[j]
            e = dx * dx + dy * dy
            if e < best_d:
                best = j
                best_d = e
        labels[i] = best


def kmeans_lloyd(const double[:, ::1] pts, int k, Py_ssize_t first, int max_iter):
    cdef Py_ssize_t n = pts.shape[0]
    cdef Py_ssize_t i, far
    cdef int j, c, it
    cdef double dx, dy, e, far_d
    cdef bint empty, same
    cdef double* cx = <double*>malloc(k * sizeof(double))
    cdef double* cy = <double*>malloc(k * sizeof(double))
    cdef double* sx = <double*>malloc(k * sizeof(double))
    cdef double* sy = <double*>malloc(k * sizeof(double))
    cdef long* counts = <long*>malloc(k * sizeof(long))
    cdef double* d2 = <double*>malloc(n * sizeof(double))
    cdef int* labels = <int*>malloc(n * sizeof(int))
    cdef int* new = <int*>malloc(n * sizeof(int))
    cdef Py_ssize_t best
    try:
        cx[0] = pts[first, 0]
        cy[0] = pts[first, 1]
        for i in range(n):
            dx = pts[i, 0] - cx[0]
            dy = pts[i, 1] - cy[0]
            d2[i] = dx * dx + dy * dy
        for j in range(1, k):
            best = 0
            for i in range(1, n):
                if d2[i] > d2[best]:
                    best = i
            cx[j] = pts[best, 0]
            cy[j] = pts[best, 1]
            for i in range(n):
                dx = pts[i, 0] - cx[j]
                dy = pts[i, 1] - cy[j]
                e = dx * dx + dy * dy
                if e < d2[i]:
                    d2[i] = e
        kmeans_assign(pts, cx, cy, k, labels)
        for it in range(max_iter):
            for j in range(k):
                counts[j] = 0
                sx[j] = 0.0
                sy[j] = 0.0
            for i in range(n):
                c = labels[i]
                counts[c] += 1
                sx[c] += pts[i, 0]
                sy[c] += pts[i, 1]
            empty = False
            for j in range(k):
                if counts[j] == 0:
                    empty = True
            if empty:
                far = 0
                far_d = -1.0
                for i in range(n):
                    dx = pts[i, 0] - cx[labels[i]]
                    dy = pts[i, 1] - cy[labels[i]]
                    e = dx * dx + dy * dy
                    if e > far_d:
                        far = i
                        far_d = e
                for j in range(k):
                    if counts[j] == 0:
                        cx[j] = pts[far, 0]
                        cy[j] = pts[far, 1]
            for j in range(k):
                if counts[j] > 0:
                    cx[j] = sx[j] / <double>counts[j]
                    cy[j] = sy[j] / <double>counts[j]
            kmeans_assign(pts, cx, cy, k, new)
            same = True
            for i in range(n):
                if new[i] != labels[i]:
                    same = False
                labels[i] = new[i]
            if same:
                break
        out = np.empty((k, 2), dtype=np.float64)
        for j in range(k):
            out[j, 0] = cx[j]
            out[j, 1] = cy[j]
        return out
    finally:
        free(cx)
        free(cy)
        free(sx)
        free(sy)
        free(counts)
        free(d2)
        free(labels)
        free(new)
