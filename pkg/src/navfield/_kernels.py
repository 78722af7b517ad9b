"""Scalar hot-path kernels over packed obstacle arrays.

Every function here is compiled with numba's ``@njit`` (or run as plain
Python when the numpy fallback backend is active, see ``_backend``).  The
packed representation is produced by ``scene.pack_workspace``:

* ``kinds``:  int64 array, one entry per primitive.  Codes: 0 workspace
  boundary, 1 sphere, 2 full cylinder, 3 capped cylinder.
* ``params``: float64 ``(n, 11)``; per row ``a=params[0:3]`` (center /
  axis point / first endpoint), ``b=params[3:6]`` (second endpoint),
  ``v=params[6:9]`` (unit axis), ``params[9]`` radius, ``params[10]``
  axis length.
* ``gstart``: int64 ``(n_terms+1,)``; repulsion term ``i`` folds primitives
  ``gstart[i]:gstart[i+1]`` with the Rvachev union (a single primitive when
  the slice has length one).  Term 0 is always the workspace boundary.
* ``gp``:     float64 ``(n_terms,)`` Rvachev exponent per term.

Implicit-function values follow the sign convention: positive in free
space, zero on the obstacle surface, negative inside.
"""

from __future__ import annotations

import numpy as np

from ._backend import njit

# Potential selector codes shared with the field module.
POT_FHAT = 0
POT_PHI = 1
POT_PSI = 2

# Integrator codes shared with the simulate module.
INT_SEMI_IMPLICIT = 0
INT_RK4 = 1

# Trajectory outcome codes shared with the simulate module.
OUT_CONVERGED = 0
OUT_LOCAL_MIN = 1
OUT_TIMEOUT = 2
OUT_COLLISION = 3
OUT_START_INVALID = 4

# log(1e-300): repulsion products below this are clamped (psi -> 1).
_LOG_FLOOR = -690.0


@njit
def _logaddexp(a, b):
    if a == -np.inf:
        return b
    if b == -np.inf:
        return a
    if a < b:
        a, b = b, a
    return a + np.log1p(np.exp(b - a))


@njit
def prim_beta(kind, row, x):
    """Implicit value of a single primitive at point ``x``."""
    if kind == 0:
        r = row[9]
        return r * r - (x[0] * x[0] + x[1] * x[1] + x[2] * x[2])
    dx = x[0] - row[0]
    dy = x[1] - row[1]
    dz = x[2] - row[2]
    r = row[9]
    if kind == 1:
        return dx * dx + dy * dy + dz * dz - r * r
    if kind == 2:
        s = dx * row[6] + dy * row[7] + dz * row[8]
        return dx * dx + dy * dy + dz * dz - s * s - r * r
    # capped cylinder: cap branch wins ties (s1 <= 0 or s1 >= L)
    s1 = dx * row[6] + dy * row[7] + dz * row[8]
    if s1 <= 0.0:
        return dx * dx + dy * dy + dz * dz - r * r
    if s1 >= row[10]:
        ex = x[0] - row[3]
        ey = x[1] - row[4]
        ez = x[2] - row[5]
        return ex * ex + ey * ey + ez * ez - r * r
    return dx * dx + dy * dy + dz * dz - s1 * s1 - r * r


@njit
def prim_beta_grad(kind, row, x, g):
    """Implicit value of a primitive; gradient written into ``g``."""
    if kind == 0:
        r = row[9]
        g[0] = -2.0 * x[0]
        g[1] = -2.0 * x[1]
        g[2] = -2.0 * x[2]
        return r * r - (x[0] * x[0] + x[1] * x[1] + x[2] * x[2])
    dx = x[0] - row[0]
    dy = x[1] - row[1]
    dz = x[2] - row[2]
    r = row[9]
    if kind == 1:
        g[0] = 2.0 * dx
        g[1] = 2.0 * dy
        g[2] = 2.0 * dz
        return dx * dx + dy * dy + dz * dz - r * r
    if kind == 2:
        s = dx * row[6] + dy * row[7] + dz * row[8]
        g[0] = 2.0 * (dx - s * row[6])
        g[1] = 2.0 * (dy - s * row[7])
        g[2] = 2.0 * (dz - s * row[8])
        return dx * dx + dy * dy + dz * dz - s * s - r * r
    s1 = dx * row[6] + dy * row[7] + dz * row[8]
    if s1 <= 0.0:
        g[0] = 2.0 * dx
        g[1] = 2.0 * dy
        g[2] = 2.0 * dz
        return dx * dx + dy * dy + dz * dz - r * r
    if s1 >= row[10]:
        ex = x[0] - row[3]
        ey = x[1] - row[4]
        ez = x[2] - row[5]
        g[0] = 2.0 * ex
        g[1] = 2.0 * ey
        g[2] = 2.0 * ez
        return ex * ex + ey * ey + ez * ez - r * r
    g[0] = 2.0 * (dx - s1 * row[6])
    g[1] = 2.0 * (dy - s1 * row[7])
    g[2] = 2.0 * (dz - s1 * row[8])
    return dx * dx + dy * dy + dz * dz - s1 * s1 - r * r


@njit
def rvachev_value(b1, b2, p):
    """p-Rvachev union value ``b1 + b2 - (|b1|^p + |b2|^p)^(1/p)``."""
    m = (np.abs(b1) ** p + np.abs(b2) ** p) ** (1.0 / p)
    return b1 + b2 - m


@njit
def rvachev_pair_grad(b1, g1, b2, g2, p, gout):
    """Union value of two implicit functions; gradient written to ``gout``."""
    a1 = np.abs(b1)
    a2 = np.abs(b2)
    bsum = a1 ** p + a2 ** p
    if bsum == 0.0:
        # both on their surfaces: limiting gradient is the sum
        gout[0] = g1[0] + g2[0]
        gout[1] = g1[1] + g2[1]
        gout[2] = g1[2] + g2[2]
        return 0.0
    c = bsum ** (1.0 / p - 1.0)
    w1 = c * a1 ** (p - 1.0)
    if b1 < 0.0:
        w1 = -w1
    w2 = c * a2 ** (p - 1.0)
    if b2 < 0.0:
        w2 = -w2
    gout[0] = (1.0 - w1) * g1[0] + (1.0 - w2) * g2[0]
    gout[1] = (1.0 - w1) * g1[1] + (1.0 - w2) * g2[1]
    gout[2] = (1.0 - w1) * g1[2] + (1.0 - w2) * g2[2]
    return b1 + b2 - bsum ** (1.0 / p)


@njit
def term_beta(kinds, params, i0, i1, p, x):
    """Value of a repulsion term: single primitive or left Rvachev fold."""
    b = prim_beta(kinds[i0], params[i0], x)
    for i in range(i0 + 1, i1):
        b2 = prim_beta(kinds[i], params[i], x)
        b = rvachev_value(b, b2, p)
    return b


@njit
def term_beta_grad(kinds, params, i0, i1, p, x, g):
    """Value and gradient of a repulsion term (gradient written to ``g``)."""
    b = prim_beta_grad(kinds[i0], params[i0], x, g)
    g2 = np.empty(3)
    acc = np.empty(3)
    for i in range(i0 + 1, i1):
        b2 = prim_beta_grad(kinds[i], params[i], x, g2)
        b = rvachev_pair_grad(b, g, b2, g2, p, acc)
        g[0] = acc[0]
        g[1] = acc[1]
        g[2] = acc[2]
    return b


@njit
def all_term_betas(kinds, params, gstart, gp, x, out):
    """Fill ``out`` with every term's value at ``x``; returns min value."""
    nt = gstart.shape[0] - 1
    mn = np.inf
    for t in range(nt):
        b = term_beta(kinds, params, gstart[t], gstart[t + 1], gp[t], x)
        out[t] = b
        if b < mn:
            mn = b
    return mn


@njit
def eval_field(x, target, k, pot, kinds, params, gstart, gp, betas, grad):
    """Evaluate the selected potential at ``x``.

    Writes per-term repulsion values into ``betas`` and the analytic
    gradient into ``grad``.  Returns ``(value, gamma, status)`` where
    status 0 = interior of free space, 1 = on the free-space boundary
    (some term exactly zero, or product under the 1e-300 floor),
    2 = inside an obstacle / outside the workspace ball.
    """
    nt = gstart.shape[0] - 1
    tg = np.empty((nt, 3))
    g1 = np.empty(3)

    nzero = 0
    nneg = 0
    logb = 0.0
    zidx = -1
    for t in range(nt):
        b = term_beta_grad(kinds, params, gstart[t], gstart[t + 1], gp[t], x, g1)
        betas[t] = b
        tg[t, 0] = g1[0]
        tg[t, 1] = g1[1]
        tg[t, 2] = g1[2]
        if b < 0.0:
            nneg += 1
        elif b == 0.0:
            nzero += 1
            zidx = t
        else:
            logb += np.log(b)

    dxt = x[0] - target[0]
    dyt = x[1] - target[1]
    dzt = x[2] - target[2]
    gamma = dxt * dxt + dyt * dyt + dzt * dzt

    grad[0] = 0.0
    grad[1] = 0.0
    grad[2] = 0.0

    if nneg > 0:
        # inside an obstacle: outside the evaluation domain
        if pot == POT_FHAT:
            return np.inf, gamma, 2
        return 1.0, gamma, 2

    if nzero > 0:
        if pot == POT_FHAT:
            return np.inf, gamma, 1
        if pot == POT_PHI and nzero == 1 and gamma > 0.0:
            # limiting boundary gradient: -(1/k) gamma^-k (prod_{j!=i} b_j) grad b_i
            lgamma = np.log(gamma)
            coef = np.exp(logb - k * lgamma) / k
            grad[0] = -coef * tg[zidx, 0]
            grad[1] = -coef * tg[zidx, 1]
            grad[2] = -coef * tg[zidx, 2]
        # psi's boundary gradient diverges; report the clamped value only.
        return 1.0, gamma, 1

    clamped = 0
    if logb < _LOG_FLOOR:
        logb = _LOG_FLOOR
        clamped = 1

    if pot == POT_PSI:
        bk = np.exp(logb / k)
        e = gamma + bk
        value = gamma / e
        if gamma > 0.0:
            sx = 0.0
            sy = 0.0
            sz = 0.0
            for t in range(nt):
                w = bk / betas[t]
                sx += w * tg[t, 0]
                sy += w * tg[t, 1]
                sz += w * tg[t, 2]
            ie2 = 1.0 / (e * e)
            gk = gamma / k
            grad[0] = (bk * 2.0 * dxt - gk * sx) * ie2
            grad[1] = (bk * 2.0 * dyt - gk * sy) * ie2
            grad[2] = (bk * 2.0 * dzt - gk * sz) * ie2
        if clamped == 1:
            return 1.0, gamma, 1
        return value, gamma, 0

    if gamma == 0.0:
        # target: value and gradient vanish for phi and fhat
        return 0.0, gamma, 0

    lgamma = np.log(gamma)

    if pot == POT_PHI:
        logs = _logaddexp(k * lgamma, logb)
        logd = logs / k
        value = np.exp(lgamma - logd)
        cg = np.exp(logb - logd - logs)
        base = lgamma - logd - logs + logb
        sx = 0.0
        sy = 0.0
        sz = 0.0
        for t in range(nt):
            cb = np.exp(base - np.log(betas[t]))
            sx += cb * tg[t, 0]
            sy += cb * tg[t, 1]
            sz += cb * tg[t, 2]
        ik = 1.0 / k
        grad[0] = cg * 2.0 * dxt - ik * sx
        grad[1] = cg * 2.0 * dyt - ik * sy
        grad[2] = cg * 2.0 * dzt - ik * sz
        return value, gamma, 0

    # fhat
    value = np.exp(k * lgamma - logb)
    cg = k * np.exp((k - 1.0) * lgamma - logb)
    base = k * lgamma - logb
    sx = 0.0
    sy = 0.0
    sz = 0.0
    for t in range(nt):
        cb = np.exp(base - np.log(betas[t]))
        sx += cb * tg[t, 0]
        sy += cb * tg[t, 1]
        sz += cb * tg[t, 2]
    grad[0] = cg * 2.0 * dxt - sx
    grad[1] = cg * 2.0 * dyt - sy
    grad[2] = cg * 2.0 * dzt - sz
    return value, gamma, 0


@njit
def batch_eval(pts, target, k, pot, kinds, params, gstart, gp, vals, grads, status):
    """Evaluate the potential at each row of ``pts`` (cold-path batching)."""
    nt = gstart.shape[0] - 1
    betas = np.empty(nt)
    g = np.empty(3)
    x = np.empty(3)
    for i in range(pts.shape[0]):
        x[0] = pts[i, 0]
        x[1] = pts[i, 1]
        x[2] = pts[i, 2]
        v, _, st = eval_field(x, target, k, pot, kinds, params, gstart, gp, betas, g)
        vals[i] = v
        grads[i, 0] = g[0]
        grads[i, 1] = g[1]
        grads[i, 2] = g[2]
        status[i] = st
    return 0


@njit
def batch_term_beta_grad(pts, kinds, params, i0, i1, p, out_b, out_g):
    """Batched value+gradient of one repulsion term over ``pts``."""
    g = np.empty(3)
    x = np.empty(3)
    for i in range(pts.shape[0]):
        x[0] = pts[i, 0]
        x[1] = pts[i, 1]
        x[2] = pts[i, 2]
        out_b[i] = term_beta_grad(kinds, params, i0, i1, p, x, g)
        out_g[i, 0] = g[0]
        out_g[i, 1] = g[1]
        out_g[i, 2] = g[2]
    return 0


@njit
def batch_term_betas(pts, kinds, params, gstart, gp, out):
    """Per-term repulsion values for each row of ``pts`` into ``out (N, nt)``."""
    nt = gstart.shape[0] - 1
    x = np.empty(3)
    for i in range(pts.shape[0]):
        x[0] = pts[i, 0]
        x[1] = pts[i, 1]
        x[2] = pts[i, 2]
        for t in range(nt):
            out[i, t] = term_beta(kinds, params, gstart[t], gstart[t + 1], gp[t], x)
    return 0


@njit
def simulate_kernel(start, target, k, pot, kinds, params, gstart, gp,
                    damping, dt, t_max, pos_tol, speed_tol, grad_tol,
                    stag_steps, integrator, stride, out):
    """Integrate ``x'' = -grad(potential) - c x'`` from rest at ``start``.

    Samples ``(t, x, v, a, value)`` are written into ``out`` every
    ``stride`` steps (plus the initial and final states).  Returns
    ``(outcome, n_rows, max_speed, max_accel, t_end)``.
    """
    nt = gstart.shape[0] - 1
    betas = np.empty(nt)
    g = np.empty(3)
    x = np.empty(3)
    v = np.empty(3)
    a = np.empty(3)
    for i in range(3):
        x[i] = start[i]
        v[i] = 0.0

    val, gamma, st = eval_field(x, target, k, pot, kinds, params, gstart, gp, betas, g)
    if st != 0:
        out[0, 0] = 0.0
        for i in range(3):
            out[0, 1 + i] = x[i]
            out[0, 4 + i] = 0.0
            out[0, 7 + i] = 0.0
        out[0, 10] = val
        return OUT_START_INVALID, 1, 0.0, 0.0, 0.0

    n_steps = int(np.ceil(t_max / dt))
    row = 0
    stag = 0
    max_speed = 0.0
    max_accel = 0.0
    t = 0.0
    outcome = OUT_TIMEOUT

    # RK4 scratch
    k1x = np.empty(3)
    k1v = np.empty(3)
    k2x = np.empty(3)
    k2v = np.empty(3)
    k3x = np.empty(3)
    k3v = np.empty(3)
    k4x = np.empty(3)
    k4v = np.empty(3)
    xt = np.empty(3)

    for step in range(n_steps + 1):
        a[0] = -g[0] - damping * v[0]
        a[1] = -g[1] - damping * v[1]
        a[2] = -g[2] - damping * v[2]
        speed = np.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
        accel = np.sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2])
        if speed > max_speed:
            max_speed = speed
        if accel > max_accel:
            max_accel = accel

        record = (step % stride) == 0
        dist = np.sqrt((x[0] - target[0]) ** 2 + (x[1] - target[1]) ** 2
                       + (x[2] - target[2]) ** 2)
        gnorm = np.sqrt(g[0] * g[0] + g[1] * g[1] + g[2] * g[2])

        done = False
        if dist <= pos_tol and speed <= speed_tol:
            outcome = OUT_CONVERGED
            done = True
        elif speed <= speed_tol and gnorm <= grad_tol and dist > pos_tol:
            stag += 1
            if stag >= stag_steps:
                outcome = OUT_LOCAL_MIN
                done = True
        else:
            stag = 0
        if step == n_steps:
            done = True

        if record or done:
            out[row, 0] = t
            for i in range(3):
                out[row, 1 + i] = x[i]
                out[row, 4 + i] = v[i]
                out[row, 7 + i] = a[i]
            out[row, 10] = val
            row += 1
        if done:
            break

        if integrator == INT_RK4:
            # k1
            for i in range(3):
                k1x[i] = v[i]
                k1v[i] = -g[i] - damping * v[i]
            # k2
            for i in range(3):
                xt[i] = x[i] + 0.5 * dt * k1x[i]
            val2, _, st = eval_field(xt, target, k, pot, kinds, params, gstart, gp, betas, g)
            if st != 0:
                outcome = OUT_COLLISION
                break
            for i in range(3):
                k2x[i] = v[i] + 0.5 * dt * k1v[i]
                k2v[i] = -g[i] - damping * k2x[i]
            # k3
            for i in range(3):
                xt[i] = x[i] + 0.5 * dt * k2x[i]
            val2, _, st = eval_field(xt, target, k, pot, kinds, params, gstart, gp, betas, g)
            if st != 0:
                outcome = OUT_COLLISION
                break
            for i in range(3):
                k3x[i] = v[i] + 0.5 * dt * k2v[i]
                k3v[i] = -g[i] - damping * k3x[i]
            # k4
            for i in range(3):
                xt[i] = x[i] + dt * k3x[i]
            val2, _, st = eval_field(xt, target, k, pot, kinds, params, gstart, gp, betas, g)
            if st != 0:
                outcome = OUT_COLLISION
                break
            for i in range(3):
                k4x[i] = v[i] + dt * k3v[i]
                k4v[i] = -g[i] - damping * k4x[i]
            for i in range(3):
                x[i] += dt / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i])
                v[i] += dt / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i])
        else:
            # semi-implicit Euler
            for i in range(3):
                v[i] += dt * a[i]
                x[i] += dt * v[i]
        t += dt

        val, gamma, st = eval_field(x, target, k, pot, kinds, params, gstart, gp, betas, g)
        if st != 0:
            outcome = OUT_COLLISION
            out[row, 0] = t
            for i in range(3):
                out[row, 1 + i] = x[i]
                out[row, 4 + i] = v[i]
                out[row, 7 + i] = a[i]
            out[row, 10] = val
            row += 1
            break

    return outcome, row, max_speed, max_accel, t
