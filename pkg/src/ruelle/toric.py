"""Moment regions of star-shaped toric domains and their invariants.

A moment region Omega in the closed positive orthant is described by its
canonical function f: the unique 1-homogeneous function with f = 1 on the
outer boundary.  Everything computed here is a functional of f and its
derivatives: the Ruelle invariant and volume (simplex quadrature of
0-homogeneous densities), the Laplacian functional, monotonicity and
concavity certificates, the systole via the stratum bracket, and closed
orbits of the canonical flow with their index bounds.

Region kinds
------------
``Ellipsoid(widths)``        f = sum x_i / a_i  (widths ascending)
``PFamily(widths, p)``       f = (sum (x_i/a_i)^p)^{1/p}; concave for p <= 1,
                             convex toric for p >= 1
``RadialProfile(...)``       interpolated l1-radial profile R(u) on the
                             direction simplex
``SmoothedUnion(l, r, c)``   smooth concave blend of two regions by a
                             negative power mean of canonical functions;
                             contains the union and stays inside the
                             (1 + collar)-inflation of it
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.interpolate
import scipy.optimize

from ._quadrature import QuadratureSpec, integrate_simplex, simplex_lattice
from .errors import (
    EnumerationBudgetExceeded,
    EvaluationAtOrigin,
    InputError,
    NonIntegrableHessian,
    NotConcave,
    ResolutionTooCoarse,
)
from .paths import IndexResult, Loop, U1Rotation, UnipotentZeroRho, lcz_block_sum, lcz_u1


# ---------------------------------------------------------------------------
# region kinds


@dataclass(frozen=True)
class Ellipsoid:
    widths: tuple

    def __post_init__(self):
        w = tuple(float(a) for a in self.widths)
        object.__setattr__(self, "widths", w)
        if any(a <= 0 for a in w):
            raise InputError("ellipsoid widths must be positive")
        if list(w) != sorted(w):
            raise InputError("ellipsoid widths must be ascending")

    @property
    def n(self):
        return len(self.widths)


@dataclass(frozen=True)
class PFamily:
    widths: tuple
    p: float

    def __post_init__(self):
        w = tuple(float(a) for a in self.widths)
        object.__setattr__(self, "widths", w)
        object.__setattr__(self, "p", float(self.p))
        if any(a <= 0 for a in w):
            raise InputError("widths must be positive")
        if self.p <= 0:
            raise InputError("exponent p must be positive")

    @property
    def n(self):
        return len(self.widths)


@dataclass(frozen=True)
class RadialProfile:
    """l1-radial profile sampled on the direction simplex.

    For n = 2 the grid is the first barycentric coordinate (cubic spline
    interpolation); for n = 3 scattered points (u_1, u_2) interpolated with a
    Clough-Tocher element; higher n falls back to barycentric-linear
    interpolation.
    """

    dim: int
    grid: tuple
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if any(v <= 0 for v in self.values):
            raise InputError("radial profile values must be positive")

    @property
    def n(self):
        return self.dim


@dataclass(frozen=True)
class SmoothedUnion:
    left: object
    right: object
    collar: float = 0.01

    def __post_init__(self):
        if self.collar <= 0:
            raise InputError("collar must be positive")
        if self.left.n != self.right.n:
            raise InputError("dimension mismatch")

    @property
    def n(self):
        return self.left.n

    @property
    def blend_order(self):
        # negative power-mean order; collar is the allowed relative inflation
        return math.log(2.0) / math.log1p(self.collar)


# ---------------------------------------------------------------------------
# canonical function


@dataclass(frozen=True)
class CanonicalFunction:
    """Evaluators for f, grad f and hess f of a moment region.

    All evaluators accept points of shape (n,) or (N, n).  f is positively
    1-homogeneous with f = 1 on the outer boundary; the Euler relation
    sum x_i d_i f = f holds exactly for the closed-form kinds and to finite-
    difference accuracy for interpolated profiles.
    """

    region: object
    n: int
    f: object
    grad: object
    hess: object

    def boundary(self, u):
        """Boundary points R(u) * u for directions u on the simplex."""
        u = np.atleast_2d(np.asarray(u, dtype=float))
        return u / self.f(u)[:, None]


def _batched(fn):
    def wrapper(x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = np.atleast_2d(x)
        norms = np.sum(np.abs(pts), axis=1)
        if np.any(norms < 1e-12):
            raise EvaluationAtOrigin("canonical function evaluated at the origin")
        out = fn(pts)
        return out[0] if single else out

    return wrapper


def _ellipsoid_cf(region):
    w = np.asarray(region.widths)
    inv = 1.0 / w
    n = region.n

    def f(x):
        return x @ inv

    def grad(x):
        return np.broadcast_to(inv, x.shape).copy()

    def hess(x):
        return np.zeros(x.shape[:-1] + (n, n))

    return f, grad, hess


def _pfamily_cf(region):
    w = np.asarray(region.widths)
    p = region.p
    n = region.n

    def parts(x):
        u = np.maximum(x / w, 0.0)
        with np.errstate(divide="ignore"):
            up = u**p
        s = np.sum(up, axis=-1)
        return u, s

    def f(x):
        _, s = parts(x)
        return s ** (1.0 / p)

    def grad(x):
        u, s = parts(x)
        with np.errstate(divide="ignore"):
            g = s[..., None] ** (1.0 / p - 1.0) * u ** (p - 1.0) / w
        return g

    def hess(x):
        u, s = parts(x)
        # facet points carry non-finite entries in off-support rows/columns;
        # consumers only read the support block
        with np.errstate(divide="ignore", invalid="ignore"):
            t = u ** (p - 1.0) / w
            H = (1.0 - p) * s[..., None, None] ** (1.0 / p - 2.0) * (
                t[..., :, None] * t[..., None, :]
            )
            diag = (p - 1.0) * s[..., None] ** (1.0 / p - 1.0) * u ** (p - 2.0) / w**2
            H = H.copy()
            idx = np.arange(n)
            H[..., idx, idx] += diag
        return H

    return f, grad, hess


def _fd_derivatives(f, n):
    # 4th-order central differences, step relative to the l1 norm
    c1 = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0
    o1 = np.array([-2, -1, 1, 2])

    def grad(x):
        h = 1e-5 * np.sum(np.abs(x), axis=-1)
        out = np.empty(x.shape)
        for i in range(n):
            acc = 0.0
            for c, o in zip(c1, o1):
                xp = x.copy()
                xp[..., i] = xp[..., i] + o * h
                acc = acc + c * f(xp)
            out[..., i] = acc / h
        return out

    c2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
    o2 = np.array([-2, -1, 0, 1, 2])

    def hess(x):
        h = 1e-5 * np.sum(np.abs(x), axis=-1)
        out = np.empty(x.shape[:-1] + (n, n))
        for i in range(n):
            acc = 0.0
            for c, o in zip(c2, o2):
                xp = x.copy()
                xp[..., i] = xp[..., i] + o * h
                acc = acc + c * f(xp)
            out[..., i, i] = acc / h**2
            for j in range(i + 1, n):
                acc = 0.0
                for ci, oi in zip(c1, o1):
                    for cj, oj in zip(c1, o1):
                        xp = x.copy()
                        xp[..., i] = xp[..., i] + oi * h
                        xp[..., j] = xp[..., j] + oj * h
                        acc = acc + ci * cj * f(xp)
                out[..., i, j] = out[..., j, i] = acc / h**2
        return out

    return grad, hess


def _radial_profile_cf(region):
    n = region.n
    if n == 2:
        knots = np.asarray(region.grid, dtype=float)
        spline = scipy.interpolate.CubicSpline(knots, np.asarray(region.values))

        def profile(u):
            return spline(u[:, 0])

    elif n == 3:
        pts = np.asarray(region.grid, dtype=float)
        interp = scipy.interpolate.CloughTocher2DInterpolator(
            pts[:, :2], np.asarray(region.values)
        )

        def profile(u):
            return interp(u[:, 0], u[:, 1])

    else:
        pts = np.asarray(region.grid, dtype=float)
        interp = scipy.interpolate.LinearNDInterpolator(
            pts[:, : n - 1], np.asarray(region.values)
        )

        def profile(u):
            return interp(u[:, : n - 1])

    def f(x):
        norm = np.sum(np.abs(x), axis=-1)
        R = profile(x / norm[:, None])
        return norm / R

    grad, hess = _fd_derivatives(f, n)
    return f, grad, hess


def _smoothed_union_cf(region):
    left = canonical_function(region.left)
    right = canonical_function(region.right)
    q = region.blend_order

    def blend(a, b):
        m = np.minimum(a, b)
        r = m / np.maximum(a, b)
        return m * np.exp(-np.log1p(r**q) / q)

    def f(x):
        return blend(left.f(x), right.f(x))

    def partials(a, b, val):
        # phi_a = (phi/a)^(q+1), computed in log space to dodge under/overflow
        with np.errstate(divide="ignore"):
            pa = np.exp((q + 1.0) * (np.log(val) - np.log(a)))
            pb = np.exp((q + 1.0) * (np.log(val) - np.log(b)))
        return pa, pb

    def grad(x):
        a, b = left.f(x), right.f(x)
        val = blend(a, b)
        pa, pb = partials(a, b, val)
        return pa[..., None] * left.grad(x) + pb[..., None] * right.grad(x)

    def hess(x):
        a, b = left.f(x), right.f(x)
        val = blend(a, b)
        pa, pb = partials(a, b, val)
        ga, gb = left.grad(x), right.grad(x)
        paa = (q + 1.0) * pa * (pa / val - 1.0 / a)
        pbb = (q + 1.0) * pb * (pb / val - 1.0 / b)
        pab = (q + 1.0) * pa * pb / val
        H = pa[..., None, None] * left.hess(x) + pb[..., None, None] * right.hess(x)
        H = H + paa[..., None, None] * ga[..., :, None] * ga[..., None, :]
        H = H + pbb[..., None, None] * gb[..., :, None] * gb[..., None, :]
        cross = ga[..., :, None] * gb[..., None, :]
        H = H + pab[..., None, None] * (cross + np.swapaxes(cross, -1, -2))
        return H

    return f, grad, hess


def canonical_function(region):
    """Build f, grad f, hess f evaluators for a moment region."""
    if isinstance(region, Ellipsoid):
        f, g, h = _ellipsoid_cf(region)
    elif isinstance(region, PFamily):
        f, g, h = _pfamily_cf(region)
    elif isinstance(region, RadialProfile):
        f, g, h = _radial_profile_cf(region)
    elif isinstance(region, SmoothedUnion):
        f, g, h = _smoothed_union_cf(region)
    else:
        raise InputError(f"unknown region kind {type(region).__name__}")
    return CanonicalFunction(
        region=region, n=region.n, f=_batched(f), grad=_batched(g), hess=_batched(h)
    )


# ---------------------------------------------------------------------------
# integral quantities


def default_quadrature(region):
    """Kind-aware default tolerance.

    Closed-form kinds refine to 1e-9; blended and interpolated profiles have
    limited smoothness at their seams and grid scale, so the global doubling
    scheme targets 1e-4 there (the achieved error estimate is reported
    either way).
    """
    if isinstance(region, (SmoothedUnion, RadialProfile)):
        return QuadratureSpec(rel_tol=1e-4)
    return QuadratureSpec(rel_tol=1e-9)


def _integrate_density(region, density, spec, cf=None):
    cf = cf or canonical_function(region)
    n = region.n

    def weight(u):
        return density(cf, u) / (n * cf.f(u) ** n)

    return integrate_simplex(weight, n, spec)


def ruelle_invariant_toric(region, quadrature=None, return_error=False):
    """Ruelle invariant of the toric domain: sum_i int_Omega d_i f dvol.

    The integrand is 0-homogeneous, so only the direction-simplex factor is
    quadratured; the reported error estimate is the difference of the last
    two refinement levels.
    """
    spec = quadrature or default_quadrature(region)
    val, err = _integrate_density(
        region, lambda cf, u: np.sum(cf.grad(u), axis=-1), spec
    )
    return (val, err) if return_error else val


def volume_toric(region, quadrature=None, return_error=False):
    """Euclidean volume of the moment region (closed form for ellipsoids)."""
    if isinstance(region, Ellipsoid):
        val, err = np.prod(region.widths) / math.factorial(region.n), 0.0
    else:
        spec = quadrature or default_quadrature(region)
        val, err = _integrate_density(region, lambda cf, u: np.ones(len(u)), spec)
    return (val, err) if return_error else val


def laplacian_functional(region, quadrature=None, return_error=False):
    """Integral of the Laplacian of the canonical Hamiltonian over the domain.

    In Darboux coordinates Delta(f o mu) pushes down to
    4 pi sum_j (d_j f + mu_j d^2_jj f), again 0-homogeneous.
    """
    if isinstance(region, PFamily) and region.p < 0.5:
        raise NonIntegrableHessian(
            f"p = {region.p} < 1/2: Hessian integral not certified"
        )
    spec = quadrature or default_quadrature(region)

    def density(cf, u):
        g = cf.grad(u)
        H = cf.hess(u)
        diag = np.diagonal(H, axis1=-2, axis2=-1)
        return 4 * np.pi * np.sum(g + u * diag, axis=-1)

    val, err = _integrate_density(region, density, spec)
    return (val, err) if return_error else val


# ---------------------------------------------------------------------------
# predicates


class MonotoneResult(NamedTuple):
    monotone: bool
    witness: np.ndarray | None


def is_strictly_monotone(region, samples=10_000):
    """Sampled certificate that grad f > 0 componentwise on the boundary."""
    cf = canonical_function(region)
    n = region.n
    per_axis = max(2, int(round(samples ** (1 / max(n - 1, 1)))))
    u = simplex_lattice(n, per_axis, margin=1e-3)
    x = cf.boundary(u)
    g = cf.grad(x)
    bad = np.any(g <= 0, axis=-1)
    if np.any(bad):
        return MonotoneResult(False, x[np.argmax(bad)])
    return MonotoneResult(True, None)


def is_concave_sampled(region, chords=400, seed=0, tol=1e-9):
    """Sampled certificate of concavity (complement convexity).

    Checks midpoint convexity of the complement on random boundary chords:
    f(midpoint) >= 1 - tol for boundary points x, y.
    """
    cf = canonical_function(region)
    n = region.n
    rng = np.random.default_rng(seed)
    u = rng.dirichlet(np.ones(n), size=(chords, 2))
    x = cf.boundary(u[:, 0])
    y = cf.boundary(u[:, 1])
    mid = (x + y) / 2
    return bool(np.all(cf.f(mid) >= 1.0 - tol))


# ---------------------------------------------------------------------------
# systole


class BracketResult(NamedTuple):
    value: float
    point: np.ndarray


def systole_bracket(region, v, check_concave=True, refine_rounds=6, grid=65):
    """min of <x, v> over the closure of the boundary stratum matching supp v.

    The minimum is taken over the closed stratum; the infimum over the open
    stratum of the published definition has the same value by continuity of
    the radial profile.
    """
    v = np.asarray(v, dtype=float)
    if np.any(v < 0) or not np.any(v > 0):
        raise InputError("v must be a nonzero nonnegative vector")
    if check_concave and not is_concave_sampled(region):
        raise NotConcave("concavity certificate failed")
    cf = canonical_function(region)
    n = region.n
    support = np.flatnonzero(v > 0)
    k = len(support)

    def objective(u_face):
        u = np.zeros((len(u_face), n))
        u[:, support] = u_face
        return (u_face @ v[support]) / cf.f(u)

    if k == 1:
        u_face = np.ones((1, 1))
        val = float(objective(u_face)[0])
        x = np.zeros(n)
        x[support[0]] = val / v[support[0]]
        return BracketResult(val, x)

    # coarse lattice including the vertices, then local zooms
    lo = np.zeros(k - 1)
    hi = np.ones(k - 1)
    best_t, best_val = None, np.inf
    for _ in range(refine_rounds):
        axes = [np.linspace(a, b, grid) for a, b in zip(lo, hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        t = np.stack([m.ravel() for m in mesh], axis=-1)
        u_face = np.empty((len(t), k))
        rest = np.ones(len(t))
        for j in range(k - 1):
            u_face[:, j] = t[:, j] * rest
            rest = rest * (1.0 - t[:, j])
        u_face[:, k - 1] = rest
        vals = objective(u_face)
        i = int(np.argmin(vals))
        if vals[i] < best_val:
            best_val = float(vals[i])
            best_t = t[i]
        span = (hi - lo) / (grid - 1) * 4
        lo = np.maximum(best_t - span, 0.0)
        hi = np.minimum(best_t + span, 1.0)
    u_face = np.empty(k)
    rest = 1.0
    for j in range(k - 1):
        u_face[j] = best_t[j] * rest
        rest *= 1.0 - best_t[j]
    u_face[k - 1] = rest
    u = np.zeros(n)
    u[support] = u_face
    x = u / cf.f(u)
    return BracketResult(best_val, x)


class SystoleResult(NamedTuple):
    value: float
    vector: np.ndarray
    point: np.ndarray
    complete: bool


def systole_concave(region, budget=4096):
    """Systole of a concave region: min of the bracket over integer vectors.

    For fixed support S and integer v >= 1_S, <x, v> >= <x, 1_S> pointwise on
    the stratum closure, so only the 2^n - 1 support indicator vectors can
    attain the minimum; the enumeration reduces to them.
    """
    if not is_concave_sampled(region):
        raise NotConcave("concavity certificate failed")
    n = region.n
    supports = [
        s for r in range(1, n + 1) for s in itertools.combinations(range(n), r)
    ]
    if len(supports) > budget:
        raise EnumerationBudgetExceeded(
            f"{len(supports)} supports exceed budget {budget}", best=None
        )
    best = None
    for s in supports:
        v = np.zeros(n)
        v[list(s)] = 1.0
        res = systole_bracket(region, v, check_concave=False)
        if best is None or res.value < best[0]:
            best = (res.value, v, res.point)
    return SystoleResult(best[0], best[1], best[2], True)


# ---------------------------------------------------------------------------
# closed orbits and their indices


@dataclass(frozen=True)
class OrbitRecord:
    moment_point: np.ndarray
    support: tuple
    period: float
    rotation_vector: np.ndarray
    family: bool = False
    frame: str = "hamiltonian"
    index: IndexResult | None = None


def _axis_orbits(cf, n, j, T_max, tol_int):
    u = np.zeros(n)
    u[j] = 1.0
    x = u / cf.f(u)
    rate = cf.grad(x)[j]
    records = []
    k = 1
    while k / rate <= T_max + tol_int:
        T = k / rate
        theta = T * cf.grad(x)
        records.append(
            OrbitRecord(
                moment_point=x,
                support=(j,),
                period=T,
                rotation_vector=theta,
                family=False,
            )
        )
        k += 1
    return records


def _ellipsoid_orbits(region, T_max, tol_int):
    cf = canonical_function(region)
    n = region.n
    w = np.asarray(region.widths)
    records = []
    for j in range(n):
        records.extend(_axis_orbits(cf, n, j, T_max, tol_int))
    for r in range(2, n + 1):
        for s in itertools.combinations(range(n), r):
            a0 = w[s[0]]
            k = 1
            while k * a0 <= T_max + tol_int:
                T = k * a0
                ratios = T / w[list(s)]
                if np.all(np.abs(ratios - np.round(ratios)) <= tol_int) and np.all(
                    np.round(ratios) >= 1
                ):
                    u = np.zeros(n)
                    u[list(s)] = 1.0 / r
                    x = u / cf.f(u)
                    records.append(
                        OrbitRecord(
                            moment_point=x,
                            support=s,
                            period=T,
                            rotation_vector=T * cf.grad(x),
                            family=True,
                        )
                    )
                k += 1
    return records


def _edge_orbits(cf, n, s, T_max, grid, tol_int, budget=400):
    """Isolated closed orbits on a 2-coordinate face found by root bracketing."""
    j0, j1 = s
    m_nodes = max(64, int(round(1.0 / grid)))
    w = np.linspace(grid, 1.0 - grid, m_nodes)
    u = np.zeros((m_nodes, n))
    u[:, j0] = w
    u[:, j1] = 1.0 - w
    x = u / cf.f(u)[:, None]
    g = cf.grad(x)
    rho0, rho1 = g[:, j0], g[:, j1]
    records = []

    def theta_at(wval, k):
        uu = np.zeros(n)
        uu[j0], uu[j1] = wval, 1.0 - wval
        xx = uu / cf.f(uu)
        gg = cf.grad(xx)
        T = k / gg[j0]
        return xx, T, T * gg

    k_max = int(np.floor(T_max * np.max(rho0)))
    for k in range(1, k_max + 1):
        T = k / rho0
        h = T * rho1
        ok = T <= T_max + tol_int
        for i in range(m_nodes - 1):
            if not (ok[i] or ok[i + 1]):
                continue
            lo_m = int(np.ceil(min(h[i], h[i + 1])))
            hi_m = int(np.floor(max(h[i], h[i + 1])))
            for m in range(max(lo_m, 1), hi_m + 1):
                def res(wval):
                    uu = np.zeros(n)
                    uu[j0], uu[j1] = wval, 1.0 - wval
                    xx = uu / cf.f(uu)
                    gg = cf.grad(xx)
                    return (k / gg[j0]) * gg[j1] - m

                try:
                    wstar = scipy.optimize.brentq(res, w[i], w[i + 1], xtol=1e-13)
                except ValueError:
                    continue
                xx, T_star, theta = theta_at(wstar, k)
                if T_star > T_max + tol_int:
                    continue
                frac = np.abs(theta[[j0, j1]] - np.round(theta[[j0, j1]]))
                if np.max(frac) > tol_int:
                    raise ResolutionTooCoarse(
                        f"refinement left residual {np.max(frac):.2e} on face {s}"
                    )
                records.append(
                    OrbitRecord(
                        moment_point=xx,
                        support=s,
                        period=T_star,
                        rotation_vector=theta,
                        family=False,
                    )
                )
                if len(records) >= budget:
                    return records
    return records


def _face_orbits_nd(cf, n, s, T_max, grid, tol_int, budget=200):
    """Closed orbits on a face with >= 3 active coordinates via lattice scan."""
    k = len(s)
    per_axis = max(8, int(round((1.0 / grid) ** (1 / (k - 1)))))
    u_face = simplex_lattice(k, per_axis, margin=grid)
    u = np.zeros((len(u_face), n))
    u[:, list(s)] = u_face
    x = u / cf.f(u)[:, None]
    g = cf.grad(x)[:, list(s)]
    records = []
    seen = set()
    k1_max = int(np.floor(T_max * np.max(g[:, 0])))
    for k1 in range(1, k1_max + 1):
        T = k1 / g[:, 0]
        theta = T[:, None] * g
        frac = np.abs(theta - np.round(theta))
        cand = np.flatnonzero(
            (np.max(frac, axis=1) < 0.2) & (T <= T_max) & np.all(np.round(theta) >= 1, axis=1)
        )
        for i in cand:
            m_vec = np.round(theta[i]).astype(int)
            key = (s, tuple(m_vec))
            if key in seen:
                continue

            def residual(t_param):
                uu_face = np.empty(k)
                rest = 1.0
                for j in range(k - 1):
                    uu_face[j] = t_param[j] * rest
                    rest *= 1.0 - t_param[j]
                uu_face[k - 1] = rest
                uu = np.zeros(n)
                uu[list(s)] = uu_face
                xx = uu / cf.f(uu)
                gg = cf.grad(xx)[list(s)]
                TT = m_vec[0] / gg[0]
                return TT * gg[1:] - m_vec[1:]

            t0 = np.empty(k - 1)
            rest = 1.0
            for j in range(k - 1):
                t0[j] = u_face[i, j] / rest if rest > 0 else 0.0
                rest *= 1.0 - t0[j]
            sol = scipy.optimize.least_squares(
                residual, np.clip(t0, 1e-6, 1 - 1e-6), bounds=(1e-9, 1 - 1e-9)
            )
            if not sol.success or np.max(np.abs(sol.fun)) > tol_int:
                continue
            seen.add(key)
            t_param = sol.x
            uu_face = np.empty(k)
            rest = 1.0
            for j in range(k - 1):
                uu_face[j] = t_param[j] * rest
                rest *= 1.0 - t_param[j]
            uu_face[k - 1] = rest
            uu = np.zeros(n)
            uu[list(s)] = uu_face
            xx = uu / cf.f(uu)
            gg = cf.grad(xx)
            T_star = m_vec[0] / gg[s[0]]
            records.append(
                OrbitRecord(
                    moment_point=xx,
                    support=s,
                    period=T_star,
                    rotation_vector=T_star * gg,
                    family=False,
                )
            )
            if len(records) >= budget:
                return records
    return records


def enumerate_orbits(region, T_max, grid=1e-3, tol_int=1e-6):
    """Closed orbits of the canonical flow with period at most T_max.

    Boundary points and periods where every active rotation coordinate
    T * d_j f is within ``tol_int`` of a positive integer.  Ellipsoids are
    handled exactly (faces close simultaneously and are flagged as orbit
    families); other regions are scanned on a face lattice at the given
    resolution and candidates are polished by root finding.
    """
    mono = is_strictly_monotone(region, samples=2000)
    if not mono.monotone:
        raise InputError("orbit enumeration requires a strictly monotone region")
    if isinstance(region, Ellipsoid):
        return _ellipsoid_orbits(region, T_max, tol_int)
    cf = canonical_function(region)
    n = region.n
    records = []
    for j in range(n):
        records.extend(_axis_orbits(cf, n, j, T_max, tol_int))
    for r in range(2, n + 1):
        for s in itertools.combinations(range(n), r):
            if r == 2:
                records.extend(_edge_orbits(cf, n, s, T_max, grid, tol_int))
            else:
                records.extend(_face_orbits_nd(cf, n, s, T_max, grid, tol_int))
    return records


def lcz_toric_orbit(record, region, frame=None):
    """Index of a toric closed orbit from the block calculus.

    The support block contributes a Maslov loop of winding sum(theta_S); it
    is exact when the Hessian of f vanishes on the support block (the
    transverse shear is trivial), otherwise a unipotent correction block
    certifies the lower bound.  Off-support coordinates contribute U(1)
    rotations; a non-finite off-support rate (concave regions with p < 1 at
    a face) contributes its floor bound of 1 and leaves the result a bound.
    The Reeb-frame value is the Hamiltonian-frame value plus one.
    """
    frame = frame or record.frame
    theta = np.asarray(record.rotation_vector, dtype=float)
    support = list(record.support)
    m = len(support)
    theta_s = theta[support]
    if np.max(np.abs(theta_s - np.round(theta_s))) > 1e-8:
        raise InputError("support rotation entries are not integral")

    cf = canonical_function(region)
    Hs = cf.hess(record.moment_point)[np.ix_(support, support)]
    hessian_vanishes = bool(np.max(np.abs(Hs)) < 1e-10)

    blocks = []
    if hessian_vanishes:
        blocks.extend(U1Rotation(t) for t in theta_s)
    else:
        blocks.append(Loop(int(np.sum(np.round(theta_s)))))
        blocks.append(UnipotentZeroRho(m))

    extra = 0
    inexact_axes = False
    for j in range(region.n):
        if j in support:
            continue
        if np.isfinite(theta[j]):
            blocks.append(U1Rotation(theta[j]))
        else:
            # theta_j > 0 for monotone regions, so lcz_u1 >= 1
            extra += 1
            inexact_axes = True

    res = lcz_block_sum(blocks)
    value = res.value + extra
    exact = res.exact and not inexact_axes
    if frame == "reeb":
        value += 1
    elif frame != "hamiltonian":
        raise InputError(f"unknown frame {frame!r}")
    return IndexResult(value=value, exact=exact)


# ---------------------------------------------------------------------------
# serialization


def region_to_json(region):
    if isinstance(region, Ellipsoid):
        return {"n": region.n, "kind": "ellipsoid", "widths": list(region.widths)}
    if isinstance(region, PFamily):
        return {
            "n": region.n,
            "kind": "pfamily",
            "widths": list(region.widths),
            "p": region.p,
        }
    if isinstance(region, RadialProfile):
        grid = np.asarray(region.grid, dtype=float)
        return {
            "n": region.n,
            "kind": "radial_profile",
            "grid": grid.tolist(),
            "values": list(region.values),
        }
    if isinstance(region, SmoothedUnion):
        return {
            "n": region.n,
            "kind": "smoothed_union",
            "left": region_to_json(region.left),
            "right": region_to_json(region.right),
            "collar": region.collar,
        }
    raise InputError(f"unknown region kind {type(region).__name__}")


def region_from_json(obj):
    try:
        kind = obj["kind"]
        if kind == "ellipsoid":
            return Ellipsoid(tuple(obj["widths"]))
        if kind == "pfamily":
            return PFamily(tuple(obj["widths"]), obj["p"])
        if kind == "radial_profile":
            return RadialProfile(
                dim=int(obj["n"]),
                grid=tuple(map(tuple, obj["grid"]))
                if int(obj["n"]) > 2
                else tuple(obj["grid"]),
                values=tuple(obj["values"]),
            )
        if kind == "smoothed_union":
            return SmoothedUnion(
                left=region_from_json(obj["left"]),
                right=region_from_json(obj["right"]),
                collar=float(obj["collar"]),
            )
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed region spec: {exc}") from exc
    raise InputError(f"unknown region kind {obj.get('kind')!r}")
