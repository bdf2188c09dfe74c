"""Dynamical (definition-level) estimation of the Ruelle invariant.

A :class:`HamiltonianField` bundles evaluators for a degree-1 Liouville-
homogeneous Hamiltonian on R^{2n}.  Toric fields carry a packed descriptor
dispatched to the compiled kernels; arbitrary fields fall back to a python
integrator with the same algorithm.

``ruelle_estimate`` draws box proposals, integrates the linearized cocycle
along accepted trajectories and returns the Monte-Carlo volume integral of
the finite-time rotation rate u_T / T, which estimates the Ruelle invariant
directly (rejected proposals contribute zero, so the volume factor and its
binomial uncertainty are part of the estimator).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from . import _engine, toric
from .errors import (
    ComputationError,
    EnergyDriftExceeded,
    InputError,
    NotConvexField,
    SampleBudgetExhausted,
    UndersampledPath,
)

ENERGY_TOL = 1e-6


@dataclass(frozen=True)
class PackedField:
    kind: int
    widths: np.ndarray
    p: float
    frame: np.ndarray  # orthogonal-symplectic change of coordinates
    use_frame: bool


@dataclass(frozen=True)
class HamiltonianField:
    """Evaluators for H, grad H and hess H on R^{2n} (batched over points)."""

    n: int
    H: Callable
    grad: Callable
    hess: Callable
    box: np.ndarray  # half-widths of a sampling box containing H <= 1
    packed: PackedField | None = None
    region: object | None = None


def _toric_evaluators(region):
    cf = toric.canonical_function(region)
    n = region.n

    def moments(z):
        z = np.atleast_2d(z)
        return np.pi * (z[:, :n] ** 2 + z[:, n:] ** 2)

    def H(z):
        single = np.asarray(z).ndim == 1
        out = cf.f(moments(z))
        return out[0] if single else out

    def grad(z):
        single = np.asarray(z).ndim == 1
        zz = np.atleast_2d(z)
        g = cf.grad(moments(zz))
        out = 2 * np.pi * np.concatenate([g * zz[:, :n], g * zz[:, n:]], axis=1)
        return out[0] if single else out

    def hess(z):
        single = np.asarray(z).ndim == 1
        zz = np.atleast_2d(z)
        mu = moments(zz)
        g = cf.grad(mu)
        h = cf.hess(mu)
        w = np.concatenate([zz[:, :n], zz[:, n:]], axis=1)
        hh = np.tile(h, (1, 2, 2))
        out = 4 * np.pi**2 * hh * w[:, :, None] * w[:, None, :]
        idx = np.arange(2 * n)
        out[:, idx, idx] += 2 * np.pi * np.concatenate([g, g], axis=1)
        return out[0] if single else out

    return H, grad, hess


def toric_field(region):
    """Canonical Hamiltonian H = f o mu of a toric moment region."""
    n = region.n
    cf = toric.canonical_function(region)
    intercepts = np.array(
        [1.0 / cf.f(np.eye(n)[i]) for i in range(n)]
    )
    half = np.sqrt(intercepts / np.pi)
    box = np.concatenate([half, half])
    packed = None
    if isinstance(region, toric.Ellipsoid):
        packed = PackedField(
            _engine.FIELD_ELLIPSOID, np.asarray(region.widths), 0.0, np.eye(2 * n), False
        )
    elif isinstance(region, toric.PFamily):
        packed = PackedField(
            _engine.FIELD_PFAMILY, np.asarray(region.widths), region.p, np.eye(2 * n), False
        )
    H, grad, hess = _toric_evaluators(region)
    return HamiltonianField(
        n=n, H=H, grad=grad, hess=hess, box=box, packed=packed, region=region
    )


def field_from_hamiltonian(H, n, box, hess_step=1e-5):
    """Field from an energy evaluator alone; derivatives by central differences.

    ``H`` maps (N, 2n) arrays to (N,); gradients are 4th-order central
    differences and Hessians 2nd-order differences of the gradient, with a
    step relative to the point norm.  Suitable for smooth custom fields at
    desk scale; toric fields should use :func:`toric_field` instead.
    """
    d = 2 * n
    c1 = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0
    o1 = np.array([-2.0, -1.0, 1.0, 2.0])

    def grad(z):
        z = np.atleast_2d(np.asarray(z, dtype=float))
        h = hess_step * np.maximum(np.linalg.norm(z, axis=1), 1.0)
        out = np.empty_like(z)
        for k in range(d):
            acc = 0.0
            for c, o in zip(c1, o1):
                zp = z.copy()
                zp[:, k] += o * h
                acc = acc + c * np.asarray(H(zp))
            out[:, k] = acc / h
        return out

    def hess(z):
        z = np.atleast_2d(np.asarray(z, dtype=float))
        h = hess_step * np.maximum(np.linalg.norm(z, axis=1), 1.0)
        out = np.empty((z.shape[0], d, d))
        for k in range(d):
            zp = z.copy()
            zp[:, k] += h
            zm = z.copy()
            zm[:, k] -= h
            out[:, :, k] = (grad(zp) - grad(zm)) / (2 * h)[:, None]
        out = (out + np.swapaxes(out, 1, 2)) / 2
        return out

    def grad_dispatch(z):
        single = np.asarray(z).ndim == 1
        g = grad(np.atleast_2d(z))
        return g[0] if single else g

    def hess_dispatch(z):
        single = np.asarray(z).ndim == 1
        h = hess(np.atleast_2d(z))
        return h[0] if single else h

    def H_dispatch(z):
        single = np.asarray(z).ndim == 1
        v = np.asarray(H(np.atleast_2d(z)))
        return float(v[0]) if single else v

    return HamiltonianField(
        n=n, H=H_dispatch, grad=grad_dispatch, hess=hess_dispatch,
        box=np.asarray(box, dtype=float),
    )


def conjugated_field(field, G):
    """The field in rotated coordinates: H'(z) = H(G^T z) for orthogonal G."""
    G = np.asarray(G, dtype=float)
    if np.max(np.abs(G.T @ G - np.eye(2 * field.n))) > 1e-10:
        raise InputError("frame must be orthogonal")

    def H(z):
        return field.H(np.asarray(z) @ G)  # row-vector form of G^T z

    def grad(z):
        return field.grad(np.asarray(z) @ G) @ G.T

    def hess(z):
        h = field.hess(np.asarray(z) @ G)
        return G @ h @ G.T

    radius = float(np.linalg.norm(field.box))
    box = np.full(2 * field.n, radius)
    packed = None
    if field.packed is not None:
        base = field.packed
        frame = G @ base.frame if base.use_frame else G
        packed = PackedField(base.kind, base.widths, base.p, frame, True)
    return HamiltonianField(
        n=field.n, H=H, grad=grad, hess=hess, box=box, packed=packed, region=None
    )


def product_field(first, second):
    """Direct sum field H(z1, z2) = H1(z1) + H2(z2)."""
    n1, n2 = first.n, second.n
    n = n1 + n2

    def split(z):
        z = np.atleast_2d(z)
        z1 = np.concatenate([z[:, :n1], z[:, n : n + n1]], axis=1)
        z2 = np.concatenate([z[:, n1:n], z[:, n + n1 :]], axis=1)
        return z1, z2

    def H(z):
        single = np.asarray(z).ndim == 1
        z1, z2 = split(z)
        out = first.H(z1) + second.H(z2)
        return out[0] if single else out

    def grad(z):
        single = np.asarray(z).ndim == 1
        z1, z2 = split(z)
        g1, g2 = first.grad(z1), second.grad(z2)
        out = np.concatenate(
            [g1[:, :n1], g2[:, :n2], g1[:, n1:], g2[:, n2:]], axis=1
        )
        return out[0] if single else out

    def hess(z):
        single = np.asarray(z).ndim == 1
        z1, z2 = split(z)
        h1, h2 = first.hess(z1), second.hess(z2)
        m = z1.shape[0] if hasattr(z1, "shape") else 1
        out = np.zeros((m, 2 * n, 2 * n))
        ix1 = np.concatenate([np.arange(n1), n + np.arange(n1)])
        ix2 = np.concatenate([n1 + np.arange(n2), n + n1 + np.arange(n2)])
        out[np.ix_(np.arange(m), ix1, ix1)] = h1
        out[np.ix_(np.arange(m), ix2, ix2)] = h2
        return out[0] if single else out

    box = np.concatenate(
        [first.box[:n1], second.box[:n2], first.box[n1:], second.box[n2:]]
    )
    packed = None
    p1, p2 = first.packed, second.packed
    if (
        p1 is not None
        and p2 is not None
        and p1.kind == p2.kind == _engine.FIELD_ELLIPSOID
        and not (p1.use_frame or p2.use_frame)
    ):
        packed = PackedField(
            _engine.FIELD_ELLIPSOID,
            np.concatenate([p1.widths, p2.widths]),
            0.0,
            np.eye(2 * n),
            False,
        )
    return HamiltonianField(n=n, H=H, grad=grad, hess=hess, box=box, packed=packed)


@dataclass(frozen=True)
class CocycleTrajectory:
    """Sampled flow trajectory with its linearized cocycle and lifted phase."""

    times: np.ndarray
    points: np.ndarray
    frames: np.ndarray
    lift: np.ndarray  # turns
    energy_drift: float

    @property
    def u_T(self):
        return float(self.lift[-1])


def _status_raise(status, drift):
    if status == _engine.STATUS_ENERGY_DRIFT:
        raise EnergyDriftExceeded(f"relative energy drift {drift:.3e} exceeds budget")
    if status == _engine.STATUS_UNDERSAMPLED:
        raise UndersampledPath("cocycle phase jumped by a quarter turn; reduce dt")


def _python_record(field, z0, T, nsteps, resymp_every, store_every, energy_tol):
    # generic-field path: same stepping as the kernels, python evaluators
    d = 2 * field.n
    h = T / nsteps
    z = np.asarray(z0, dtype=float).copy()
    W = np.eye(d)
    half = d // 2

    def rhs(zc, Wc):
        g = field.grad(zc)
        Hs = field.hess(zc)
        dz = np.concatenate([-g[half:], g[:half]])
        M = Hs @ Wc
        dW = np.concatenate([-M[half:, :], M[:half, :]], axis=0)
        return dz, dW

    H0 = float(field.H(z))
    times = [0.0]
    zs = [z.copy()]
    Ws = [W.copy()]
    us = [0.0]
    lift = 0.0
    phase_prev = 0.0
    drift = 0.0
    status = _engine.STATUS_OK
    two_pi = 2 * np.pi
    for step in range(1, nsteps + 1):
        k1z, k1w = rhs(z, W)
        k2z, k2w = rhs(z + 0.5 * h * k1z, W + 0.5 * h * k1w)
        k3z, k3w = rhs(z + 0.5 * h * k2z, W + 0.5 * h * k2w)
        k4z, k4w = rhs(z + h * k3z, W + h * k3w)
        z = z + (h / 6) * (k1z + 2 * k2z + 2 * k3z + k4z)
        W = W + (h / 6) * (k1w + 2 * k2w + 2 * k3w + k4w)

        phase = _engine.cdet_phase(W)
        dphi = phase - phase_prev
        dphi -= two_pi * np.round(dphi / two_pi)
        if abs(dphi) >= np.pi / 2:
            status = _engine.STATUS_UNDERSAMPLED
            break
        lift += dphi / two_pi
        phase_prev = phase
        if step % resymp_every == 0:
            _engine.resymplectify(W)
            phase_prev = _engine.cdet_phase(W)
        e = abs(float(field.H(z)) - H0)
        drift = max(drift, e)
        if e > energy_tol * H0:
            status = _engine.STATUS_ENERGY_DRIFT
            break
        if step % store_every == 0 or step == nsteps:
            times.append(step * h)
            zs.append(z.copy())
            Wp = W.copy()
            _engine.resymplectify(Wp)
            Ws.append(Wp)
            us.append(lift)
    return (
        np.array(times),
        np.array(zs),
        np.array(Ws),
        np.array(us),
        status,
        drift,
    )


def _dt_from_norm(norm, T, energy_tol, target=0.1):
    # two constraints: resolve the fastest rotation (dt * |hess H| <= target)
    # and keep the cumulative RK4 energy decay ~ T h^5 w^6 / 72 under budget
    w = max(norm, 1e-12)
    dt = target / w
    if T and T > 0:
        dt = min(dt, 0.7 * (36.0 * energy_tol / (T * w**6)) ** 0.2)
    return dt


def suggest_dt(field, x0, T=None, energy_tol=ENERGY_TOL, target=0.1):
    """Step size resolving the fastest rotation within the energy budget.

    For toric fields the Hessian norm is constant along trajectories, so the
    value at x0 bounds the whole run.
    """
    norm = float(np.linalg.norm(field.hess(x0), 2))
    return _dt_from_norm(norm, T, energy_tol, target)


def integrate_cocycle(
    field,
    x0,
    T,
    dt=None,
    resymp_every=100,
    store_every=1,
    energy_tol=ENERGY_TOL,
):
    """Integrate the flow and its linearized cocycle from x0 for time T.

    Fixed-step RK4 on the coupled system; the cocycle is re-symplectified
    every ``resymp_every`` steps and the rotation lift is accumulated every
    step.  ``dt`` defaults to the fastest-rotation heuristic at x0.
    """
    x0 = np.asarray(x0, dtype=float)
    if float(field.H(x0)) <= 0:
        raise InputError("start point must have positive energy")
    if T == 0:
        d = 2 * field.n
        return CocycleTrajectory(
            times=np.zeros(1),
            points=x0[None, :].copy(),
            frames=np.eye(d)[None, :, :],
            lift=np.zeros(1),
            energy_drift=0.0,
        )
    dt = dt or suggest_dt(field, x0, T=T, energy_tol=energy_tol)
    nsteps = max(1, int(math.ceil(T / dt)))
    if field.packed is not None:
        pk = field.packed
        out = _engine.traj_record(
            pk.kind,
            pk.widths,
            pk.p,
            pk.frame,
            pk.use_frame,
            x0,
            float(T),
            nsteps,
            resymp_every,
            store_every,
            energy_tol,
        )
    else:
        out = _python_record(
            field, x0, float(T), nsteps, resymp_every, store_every, energy_tol
        )
    times, zs, Ws, us, status, drift = out
    _status_raise(status, drift)
    return CocycleTrajectory(
        times=times, points=zs, frames=Ws, lift=us, energy_drift=float(drift)
    )


class RuelleEstimate(NamedTuple):
    estimate: float
    stderr: float
    n_proposals: int
    n_accepted: int
    n_failed: int
    checkpoints: tuple  # ((time, estimate, stderr), ...) for T/4, T/2, T


def _propose(field, samples, seed):
    rng = np.random.default_rng(seed)
    box = np.asarray(field.box, dtype=float)
    pts = rng.uniform(-box, box, size=(samples, 2 * field.n))
    Hv = np.asarray(field.H(pts), dtype=float)
    accept = (Hv <= 1.0) & (Hv > 1e-12)
    vol_box = float(np.prod(2 * box))
    return pts, accept, vol_box


def ruelle_estimate(
    field,
    T,
    samples,
    seed=0,
    dt=None,
    resymp_every=100,
    fracs=(0.25, 0.5, 1.0),
    energy_tol=ENERGY_TOL,
    weight=None,
):
    """Monte-Carlo estimate of the Ruelle invariant at horizon T.

    Draws ``samples`` uniform proposals in the bounding box, integrates the
    cocycle on accepted points and averages ``1_X(x) * u_T(x) / T``; the
    result estimates ``Ru = int_X ru dvol`` with the quoted standard error
    (which includes the binomial volume uncertainty of rejection sampling).
    Checkpoint estimates at T/4 and T/2 serve as a convergence diagnostic.
    Deterministic for fixed seed and engine.

    ``weight`` hooks in invariant measures with a density against the
    volume: a callable on point batches, the estimate then targets
    ``int_X weight * ru dvol`` (only the flow-invariant volume-density
    measures make the limit meaningful; the default is the volume itself).

    With ``T = 0`` no trajectories are integrated and the estimate is NaN
    with zero-valued checkpoints (diagnostic-only mode).
    """
    if samples <= 0 or T < 0:
        raise InputError("samples must be positive and T nonnegative")
    pts, accept, vol_box = _propose(field, samples, seed)
    idx = np.flatnonzero(accept)
    if T == 0:
        return RuelleEstimate(
            estimate=float("nan"),
            stderr=float("nan"),
            n_proposals=samples,
            n_accepted=int(len(idx)),
            n_failed=0,
            checkpoints=(),
        )
    fracs = np.asarray(sorted(fracs), dtype=float)
    horizons = np.zeros((len(idx), len(fracs)))  # realized checkpoint times
    if field.packed is None:
        lifts = np.zeros((len(idx), len(fracs)))
        status = np.zeros(len(idx), dtype=int)
        for row, i in enumerate(idx):
            x0 = pts[i]
            dt_auto = suggest_dt(field, x0, T=T, energy_tol=energy_tol)
            dt_i = min(dt, dt_auto) if dt else dt_auto
            nsteps = max(1, int(math.ceil(T / dt_i)))
            store = max(1, nsteps // 256)
            try:
                tr = integrate_cocycle(
                    field, x0, T, dt=T / nsteps, resymp_every=resymp_every,
                    store_every=store, energy_tol=energy_tol,
                )
            except ComputationError:
                status[row] = 1
                continue
            for k, f in enumerate(fracs):
                j = int(np.searchsorted(tr.times, f * T, side="right")) - 1
                j = max(j, 1)
                lifts[row, k] = tr.lift[j]
                horizons[row, k] = tr.times[j]
    else:
        pk = field.packed
        hs = field.hess(pts[idx]) if len(idx) else np.zeros((0,))
        norms = np.array([np.linalg.norm(h, 2) for h in hs])
        dt_auto = np.array([_dt_from_norm(w, T, energy_tol) for w in norms])
        dt_eff = np.minimum(dt_auto, dt) if dt else dt_auto
        nsteps_arr = np.maximum(1, np.ceil(T / dt_eff)).astype(np.int64)
        lifts, status, _ = _engine.batch_lift(
            pk.kind,
            pk.widths,
            pk.p,
            pk.frame,
            pk.use_frame,
            pts[idx],
            float(T),
            nsteps_arr,
            resymp_every,
            fracs,
            energy_tol,
        )
        steps = np.maximum(np.round(fracs[None, :] * nsteps_arr[:, None]), 1)
        horizons = steps * (T / nsteps_arr)[:, None]

    ok = status == 0
    n_failed = int(np.sum(~ok))
    if len(idx) and n_failed > 0.5 * len(idx):
        raise SampleBudgetExhausted(
            f"{n_failed} of {len(idx)} accepted trajectories failed"
        )

    w_pts = np.ones(samples)
    if weight is not None and len(idx):
        w_pts[idx] = np.asarray(weight(pts[idx]), dtype=float)

    results = []
    for k, f in enumerate(fracs):
        contrib = np.zeros(samples)
        contrib[idx[ok]] = w_pts[idx[ok]] * lifts[ok, k] / horizons[ok, k]
        est = vol_box * float(np.mean(contrib))
        err = vol_box * float(np.std(contrib, ddof=1)) / math.sqrt(samples)
        results.append((float(f * T), est, err))
    final = results[-1]
    return RuelleEstimate(
        estimate=final[1],
        stderr=final[2],
        n_proposals=samples,
        n_accepted=int(len(idx)),
        n_failed=n_failed,
        checkpoints=tuple(results),
    )


class TraceBoundReport(NamedTuple):
    lhs: float
    lhs_stderr: float
    rhs: float
    rhs_err: float
    passed: bool


def trace_bound_check(field, samples=400, T=100.0, seed=0, hessian_probes=256):
    """Check Ru(X) <= (8 n^2 / pi) * int_X tr(hess H) dvol for a convex field.

    The left side comes from :func:`ruelle_estimate`; the right side uses
    the toric Laplacian quadrature when the field is region-backed and a
    Monte-Carlo average otherwise.  Raises :class:`NotConvexField` when a
    sampled Hessian has an eigenvalue below -1e-8.
    """
    n = field.n
    pts, accept, vol_box = _propose(field, hessian_probes, seed + 1)
    inside = pts[accept]
    if len(inside):
        eigs = np.linalg.eigvalsh(field.hess(inside))
        if float(np.min(eigs)) < -1e-8:
            raise NotConvexField(
                f"sampled Hessian eigenvalue {float(np.min(eigs)):.3e} < -1e-8"
            )
    est = ruelle_estimate(field, T=T, samples=samples, seed=seed)
    if field.region is not None:
        S, S_err = toric.laplacian_functional(field.region, return_error=True)
        rhs = (8 * n**2 / np.pi) * S
        rhs_err = (8 * n**2 / np.pi) * S_err
    else:
        pts2, accept2, vol_box2 = _propose(field, max(2048, samples), seed + 2)
        tr = np.zeros(len(pts2))
        if np.any(accept2):
            hs = field.hess(pts2[accept2])
            tr[accept2] = np.trace(hs, axis1=-2, axis2=-1)
        integral = vol_box2 * float(np.mean(tr))
        ierr = vol_box2 * float(np.std(tr, ddof=1)) / math.sqrt(len(pts2))
        rhs = (8 * n**2 / np.pi) * integral
        rhs_err = (8 * n**2 / np.pi) * ierr
    slack = 3 * (est.stderr + rhs_err)
    return TraceBoundReport(
        lhs=est.estimate,
        lhs_stderr=est.stderr,
        rhs=rhs,
        rhs_err=rhs_err,
        passed=bool(est.estimate <= rhs + slack),
    )


def check_liouville_homogeneity(field, probes=64, seed=0, tol=1e-6):
    """Type invariant: H(sqrt(s) x) = s H(x) on sampled scalings s in [0.5, 2]."""
    rng = np.random.default_rng(seed)
    pts, accept, _ = _propose(field, probes, seed)
    pts = pts[accept] if np.any(accept) else pts
    scales = rng.uniform(0.5, 2.0, size=len(pts))
    H1 = np.asarray(field.H(pts))
    H2 = np.asarray(field.H(np.sqrt(scales)[:, None] * pts))
    return bool(np.all(np.abs(H2 - scales * H1) <= tol * scales * H1))
