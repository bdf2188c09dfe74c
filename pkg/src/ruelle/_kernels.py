"""Trajectory kernels for the linearized Hamiltonian flow.

Hot loops carry ``@njit``; setting ``RUELLE_NUMBA=0`` before import swaps in
an identity decorator so the same source runs as the pure-numpy fallback
(``benchmarks/bench_kernels.py`` compares the two).  ``RUELLE_THREADS``
caps the parallel batch width.

State per trajectory: the flow point z in R^{2n}, the cocycle frame W in
Sp(2n), and the lifted phase of det_C of the unitary part of W.  One RK4
step advances (z, W) under

    dz/dt = J grad H(z)        dW/dt = J hess H(z) W

and the phase is unwrapped each step from the complex determinant of the
complex-linear part of W, which shares its argument with det_C of the polar
unitary factor.  The frame is re-symplectified every ``resymp_every`` steps
by a quadratically convergent constraint projection.

Field descriptors: ``kind`` 0 is an ellipsoid (f = sum mu_i / a_i), kind 1
a p-family ((sum (mu_i/a_i)^p)^{1/p}); an optional orthogonal-symplectic
frame G evaluates the field in rotated coordinates.  Matrices are tiny
(2n <= 16), so matmuls are explicit loops rather than BLAS calls.
"""

import os

import numpy as np

NUMBA_ENABLED = os.environ.get("RUELLE_NUMBA", "1").strip().lower() not in (
    "0",
    "false",
    "off",
    "no",
)

if NUMBA_ENABLED:
    try:
        import numba
        from numba import njit, prange

        _threads = os.environ.get("RUELLE_THREADS")
        if _threads:
            numba.set_num_threads(max(1, int(_threads)))
    except ImportError:
        NUMBA_ENABLED = False

if not NUMBA_ENABLED:
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def deco(fn):
            return fn

        return deco

    prange = range

ENGINE = "numba" if NUMBA_ENABLED else "numpy"

FIELD_ELLIPSOID = 0
FIELD_PFAMILY = 1

STATUS_OK = 0
STATUS_ENERGY_DRIFT = 1
STATUS_UNDERSAMPLED = 2


@njit(cache=True, inline='always')
def _field_mu(kind, widths, p, mu, g, h):
    """f, df/dmu, d2f/dmu2 at the moment vector mu; returns f."""
    n = widths.shape[0]
    if kind == FIELD_ELLIPSOID:
        H = 0.0
        for i in range(n):
            g[i] = 1.0 / widths[i]
            H += mu[i] * g[i]
            for j in range(n):
                h[i, j] = 0.0
        return H
    s = 0.0
    u = np.empty(n)
    for i in range(n):
        u[i] = mu[i] / widths[i]
        s += u[i] ** p
    H = s ** (1.0 / p)
    c1 = s ** (1.0 / p - 1.0)
    c2 = (1.0 - p) * s ** (1.0 / p - 2.0)
    for i in range(n):
        g[i] = c1 * u[i] ** (p - 1.0) / widths[i]
    for i in range(n):
        ti = u[i] ** (p - 1.0) / widths[i]
        for j in range(n):
            tj = u[j] ** (p - 1.0) / widths[j]
            h[i, j] = c2 * ti * tj
        h[i, i] += (p - 1.0) * c1 * u[i] ** (p - 2.0) / (widths[i] * widths[i])
    return H


@njit(cache=True)
def field_value(kind, widths, p, G, use_g, z):
    """Hamiltonian value only (energy checks)."""
    n = widths.shape[0]
    pi = np.pi
    H = 0.0
    if use_g:
        d = 2 * n
        if kind == FIELD_ELLIPSOID:
            for i in range(n):
                zx = 0.0
                zy = 0.0
                for k in range(d):
                    zx += G[k, i] * z[k]
                    zy += G[k, n + i] * z[k]
                H += pi * (zx * zx + zy * zy) / widths[i]
            return H
        s = 0.0
        for i in range(n):
            zx = 0.0
            zy = 0.0
            for k in range(d):
                zx += G[k, i] * z[k]
                zy += G[k, n + i] * z[k]
            s += (pi * (zx * zx + zy * zy) / widths[i]) ** p
        return s ** (1.0 / p)
    if kind == FIELD_ELLIPSOID:
        for i in range(n):
            H += pi * (z[i] * z[i] + z[n + i] * z[n + i]) / widths[i]
        return H
    s = 0.0
    for i in range(n):
        s += (pi * (z[i] * z[i] + z[n + i] * z[n + i]) / widths[i]) ** p
    return s ** (1.0 / p)


@njit(cache=True, inline='always')
def _field_eval_ws(kind, widths, p, z, grad, hess, mu, g, h):
    """field_eval with caller-provided scratch (hot path, no allocation)."""
    n = widths.shape[0]
    pi = np.pi
    for i in range(n):
        mu[i] = pi * (z[i] * z[i] + z[n + i] * z[n + i])
    H = _field_mu(kind, widths, p, mu, g, h)
    for i in range(n):
        grad[i] = 2.0 * pi * g[i] * z[i]
        grad[n + i] = 2.0 * pi * g[i] * z[n + i]
    for i in range(n):
        for j in range(n):
            c = 4.0 * pi * pi * h[i, j]
            hess[i, j] = c * z[i] * z[j]
            hess[i, n + j] = c * z[i] * z[n + j]
            hess[n + i, j] = c * z[n + i] * z[j]
            hess[n + i, n + j] = c * z[n + i] * z[n + j]
    for i in range(n):
        hess[i, i] += 2.0 * pi * g[i]
        hess[n + i, n + i] += 2.0 * pi * g[i]
    return H


@njit(cache=True)
def field_eval(kind, widths, p, z, grad, hess):
    """Hamiltonian value at z; fills grad and hess in place."""
    n = widths.shape[0]
    return _field_eval_ws(
        kind, widths, p, z, grad, hess, np.empty(n), np.empty(n), np.empty((n, n))
    )


@njit(cache=True)
def field_eval_rot(kind, widths, p, G, use_g, z, grad, hess):
    """field_eval in coordinates rotated by the orthogonal frame G."""
    if not use_g:
        return field_eval(kind, widths, p, z, grad, hess)
    d = z.shape[0]
    zl = np.empty(d)
    for i in range(d):
        s = 0.0
        for k in range(d):
            s += G[k, i] * z[k]
        zl[i] = s
    gl = np.empty(d)
    hl = np.empty((d, d))
    H = field_eval(kind, widths, p, zl, gl, hl)
    for i in range(d):
        s = 0.0
        for k in range(d):
            s += G[i, k] * gl[k]
        grad[i] = s
    tmp = np.empty((d, d))
    for i in range(d):
        for j in range(d):
            s = 0.0
            for k in range(d):
                s += hl[i, k] * G[j, k]
            tmp[i, j] = s
    for i in range(d):
        for j in range(d):
            s = 0.0
            for k in range(d):
                s += G[i, k] * tmp[k, j]
            hess[i, j] = s
    return H


@njit(cache=True, inline='always')
def cdet_phase(W):
    """Phase of det_C of the complex-linear part of W (LU, partial pivoting)."""
    d = W.shape[0]
    n = d // 2
    A = np.empty((n, n), dtype=np.complex128)
    for i in range(n):
        for j in range(n):
            A[i, j] = complex(
                0.5 * (W[i, j] + W[n + i, n + j]),
                0.5 * (W[n + i, j] - W[i, n + j]),
            )
    ang = 0.0
    for k in range(n):
        piv = k
        best = abs(A[k, k])
        for i in range(k + 1, n):
            m = abs(A[i, k])
            if m > best:
                best = m
                piv = i
        if piv != k:
            for j in range(k, n):
                tmp = A[k, j]
                A[k, j] = A[piv, j]
                A[piv, j] = tmp
            ang += np.pi
        akk = A[k, k]
        ang += np.arctan2(akk.imag, akk.real)
        for i in range(k + 1, n):
            f = A[i, k] / akk
            for j in range(k + 1, n):
                A[i, j] -= f * A[k, j]
    return ang


@njit(cache=True)
def resymplectify(W):
    """Project W back to Sp(2n): two Newton steps on W^T S W = S."""
    d = W.shape[0]
    n = d // 2
    S = np.zeros((d, d))
    for i in range(n):
        S[i, n + i] = 1.0
        S[n + i, i] = -1.0
    O = -S
    for _ in range(2):
        E = W.T @ (S @ W) - S
        K = -0.5 * (O @ E)
        W[:] = W + W @ K


@njit(cache=True, inline='always')
def _stage(kind, widths, p, G, use_g, zin, Win, grad, hess, kz, kw, mu, gmu, hmu):
    """One RK4 stage: kz = J grad H(zin), kw = J hess H(zin) Win."""
    d = zin.shape[0]
    half = d // 2
    if use_g:
        field_eval_rot(kind, widths, p, G, use_g, zin, grad, hess)
    else:
        _field_eval_ws(kind, widths, p, zin, grad, hess, mu, gmu, hmu)
    for i in range(half):
        kz[i] = -grad[half + i]
        kz[half + i] = grad[i]
    for i in range(half):
        for j in range(d):
            s_top = 0.0
            s_bot = 0.0
            for k in range(d):
                w = Win[k, j]
                s_top += hess[i, k] * w
                s_bot += hess[half + i, k] * w
            kw[i, j] = -s_bot
            kw[half + i, j] = s_top


@njit(cache=True, inline='always')
def _rk4_step(kind, widths, p, G, use_g, z, W, h, ws):
    (grad, hess, ztmp, wtmp, kz1, kz2, kz3, kz4, kw1, kw2, kw3, kw4,
     mu, gmu, hmu) = ws
    d = z.shape[0]

    _stage(kind, widths, p, G, use_g, z, W, grad, hess, kz1, kw1, mu, gmu, hmu)
    for i in range(d):
        ztmp[i] = z[i] + 0.5 * h * kz1[i]
        for j in range(d):
            wtmp[i, j] = W[i, j] + 0.5 * h * kw1[i, j]
    _stage(kind, widths, p, G, use_g, ztmp, wtmp, grad, hess, kz2, kw2, mu, gmu, hmu)
    for i in range(d):
        ztmp[i] = z[i] + 0.5 * h * kz2[i]
        for j in range(d):
            wtmp[i, j] = W[i, j] + 0.5 * h * kw2[i, j]
    _stage(kind, widths, p, G, use_g, ztmp, wtmp, grad, hess, kz3, kw3, mu, gmu, hmu)
    for i in range(d):
        ztmp[i] = z[i] + h * kz3[i]
        for j in range(d):
            wtmp[i, j] = W[i, j] + h * kw3[i, j]
    _stage(kind, widths, p, G, use_g, ztmp, wtmp, grad, hess, kz4, kw4, mu, gmu, hmu)
    c = h / 6.0
    for i in range(d):
        z[i] += c * (kz1[i] + 2.0 * kz2[i] + 2.0 * kz3[i] + kz4[i])
        for j in range(d):
            W[i, j] += c * (kw1[i, j] + 2.0 * kw2[i, j] + 2.0 * kw3[i, j] + kw4[i, j])


@njit(cache=True)
def _make_workspace(d):
    n = d // 2
    return (
        np.empty(d),
        np.empty((d, d)),
        np.empty(d),
        np.empty((d, d)),
        np.empty(d),
        np.empty(d),
        np.empty(d),
        np.empty(d),
        np.empty((d, d)),
        np.empty((d, d)),
        np.empty((d, d)),
        np.empty((d, d)),
        np.empty(n),
        np.empty(n),
        np.empty((n, n)),
    )


@njit(cache=True)
def traj_lift(
    kind, widths, p, G, use_g, z0, T, nsteps, resymp_every, check_steps, energy_tol
):
    """Integrate one trajectory; returns lifted turns at the checkpoints.

    Returns (lifts, status, energy_drift); on failure the lift entries from
    the failing step onward keep their last value.
    """
    d = z0.shape[0]
    h = T / nsteps
    z = z0.copy()
    W = np.eye(d)
    ws = _make_workspace(d)
    H0 = field_value(kind, widths, p, G, use_g, z)
    lift = 0.0
    phase_prev = 0.0
    drift = 0.0
    status = STATUS_OK
    lifts = np.zeros(check_steps.shape[0])
    ci = 0
    two_pi = 2.0 * np.pi
    for step in range(1, nsteps + 1):
        _rk4_step(kind, widths, p, G, use_g, z, W, h, ws)

        phase = cdet_phase(W)
        dphi = phase - phase_prev
        dphi -= two_pi * np.round(dphi / two_pi)
        if abs(dphi) >= 0.5 * np.pi:
            status = STATUS_UNDERSAMPLED
            break
        lift += dphi / two_pi
        phase_prev = phase

        if step % resymp_every == 0:
            resymplectify(W)
            phase_prev = cdet_phase(W)

        e = abs(field_value(kind, widths, p, G, use_g, z) - H0)
        if e > drift:
            drift = e
        if e > energy_tol * H0:
            status = STATUS_ENERGY_DRIFT
            break

        while ci < check_steps.shape[0] and step == check_steps[ci]:
            lifts[ci] = lift
            ci += 1
    while ci < check_steps.shape[0]:
        lifts[ci] = lift
        ci += 1
    return lifts, status, drift


@njit(cache=True)
def traj_record(
    kind, widths, p, G, use_g, z0, T, nsteps, resymp_every, store_every, energy_tol
):
    """Like traj_lift but records (t, z, W, lift) every ``store_every`` steps."""
    d = z0.shape[0]
    h = T / nsteps
    nstore = nsteps // store_every + 2
    times = np.empty(nstore)
    zs = np.empty((nstore, d))
    Ws = np.empty((nstore, d, d))
    us = np.empty(nstore)
    times[0] = 0.0
    zs[0] = z0
    Ws[0] = np.eye(d)
    us[0] = 0.0
    z = z0.copy()
    W = np.eye(d)
    ws = _make_workspace(d)
    H0 = field_value(kind, widths, p, G, use_g, z)
    lift = 0.0
    phase_prev = 0.0
    drift = 0.0
    status = STATUS_OK
    idx = 1
    two_pi = 2.0 * np.pi
    for step in range(1, nsteps + 1):
        _rk4_step(kind, widths, p, G, use_g, z, W, h, ws)

        phase = cdet_phase(W)
        dphi = phase - phase_prev
        dphi -= two_pi * np.round(dphi / two_pi)
        if abs(dphi) >= 0.5 * np.pi:
            status = STATUS_UNDERSAMPLED
            break
        lift += dphi / two_pi
        phase_prev = phase

        if step % resymp_every == 0:
            resymplectify(W)
            phase_prev = cdet_phase(W)

        e = abs(field_value(kind, widths, p, G, use_g, z) - H0)
        if e > drift:
            drift = e
        if e > energy_tol * H0:
            status = STATUS_ENERGY_DRIFT
            break

        if step % store_every == 0 or step == nsteps:
            times[idx] = step * h
            zs[idx] = z
            # samples carry the exactly-symplectic representative
            Wp = W.copy()
            resymplectify(Wp)
            Ws[idx] = Wp
            us[idx] = lift
            idx += 1
    return times[:idx], zs[:idx], Ws[:idx], us[:idx], status, drift


@njit(parallel=True, cache=True)
def batch_lift(
    kind, widths, p, G, use_g, z0s, T, nsteps_arr, resymp_every, fracs, energy_tol
):
    """Independent trajectories for a batch of start points (parallel map)."""
    m = z0s.shape[0]
    nf = fracs.shape[0]
    lifts = np.zeros((m, nf))
    status = np.zeros(m, dtype=np.int64)
    drift = np.zeros(m)
    for i in prange(m):
        nsteps = nsteps_arr[i]
        checks = np.empty(nf, dtype=np.int64)
        for k in range(nf):
            c = int(np.round(fracs[k] * nsteps))
            checks[k] = c if c > 1 else 1
        li, st, dr = traj_lift(
            kind, widths, p, G, use_g, z0s[i], T, nsteps, resymp_every, checks, energy_tol
        )
        lifts[i] = li
        status[i] = st
        drift[i] = dr
    return lifts, status, drift
