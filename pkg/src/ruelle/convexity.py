"""Convexity-side quantities: ellipsoid closed forms, the systolic-type
inequality with its explicit constant, sandwich estimates for the Laplacian
functional, inscribed ellipsoids, and the strained-union generator of
non-convex dynamically-convex domains.

The dimensional constant equals 2^{2n+5} n^{2n+3} e^{8 n^4}; its linear
value overflows double precision quickly, so all verdicts compare in
log-space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import toric
from ._quadrature import QuadratureSpec, simplex_lattice
from .errors import (
    ConcavityLost,
    ContainmentCheckFailed,
    InputError,
    NoFeasibleA,
    SandwichHypothesisFailed,
    UnsortedWidths,
)


class EllipsoidQuantities(NamedTuple):
    c: float
    S: float
    vol: float


def ellipsoid_quantities(widths):
    """Systole period, Laplacian integral and metric volume of an ellipsoid.

    c = a_1,  S = (4 pi / n!) (sum 1/a_i) (prod a_i),  vol = (prod a_i) / n!.
    """
    w = [float(a) for a in widths]
    if any(a <= 0 for a in w):
        raise UnsortedWidths("widths must be positive")
    if w != sorted(w):
        raise UnsortedWidths("widths must be ascending")
    n = len(w)
    prod = math.prod(w)
    return EllipsoidQuantities(
        c=w[0],
        S=4 * math.pi / math.factorial(n) * sum(1 / a for a in w) * prod,
        vol=prod / math.factorial(n),
    )


class MainConstant(NamedTuple):
    n: int
    log_value: float  # natural log
    value: float      # inf when not representable
    overflow: bool


def main_constant(n):
    """The explicit dimensional constant, held in log-space.

    log C(n) = (2n+5) log 2 + (2n+3) log n + 8 n^4.
    """
    if n < 1:
        raise InputError("n must be at least 1")
    log_c = (2 * n + 5) * math.log(2.0) + (2 * n + 3) * math.log(n) + 8.0 * n**4
    try:
        value = math.exp(log_c)
        overflow = False
    except OverflowError:
        value = math.inf
        overflow = True
    return MainConstant(n=n, log_value=log_c, value=value, overflow=overflow)


def _is_convex_toric(region):
    if isinstance(region, toric.Ellipsoid):
        return True
    return isinstance(region, toric.PFamily) and region.p >= 1.0


def convex_toric_systole(region):
    """Systole of a convex toric region of the test family: min axis width.

    For ellipsoids and p >= 1 families the minimum-action orbit is the
    shortest coordinate circle (a family-specific fact, not a theorem for
    general convex toric domains).
    """
    if not _is_convex_toric(region):
        raise InputError("expected an ellipsoid or a p >= 1 family")
    return float(min(region.widths))


@dataclass(frozen=True)
class InequalityReport:
    n: int
    ru: float
    c: float
    vol: float
    log_constant: float
    constant_overflow: bool
    log_lhs: float   # log(Ru * c)
    log_rhs: float   # log C(n) + log vol
    margin: float    # log_rhs - log_lhs
    verdict: str

    def as_dict(self):
        return {
            "n": self.n,
            "ru": self.ru,
            "c": self.c,
            "vol": self.vol,
            "log_constant": self.log_constant,
            "constant_overflow": self.constant_overflow,
            "log_lhs": self.log_lhs,
            "log_rhs": self.log_rhs,
            "margin": self.margin,
            "verdict": self.verdict,
        }


def check_main_inequality(region, quadrature=None):
    """Verdict on Ru(X) * c(X) <= C(n) * vol(X) for a convex toric region."""
    if not _is_convex_toric(region):
        raise InputError("main inequality check expects a convex toric region")
    n = region.n
    if isinstance(region, toric.Ellipsoid):
        w = np.asarray(region.widths)
        ru = float(np.prod(w) / math.factorial(n) * np.sum(1.0 / w))
    else:
        ru = toric.ruelle_invariant_toric(region, quadrature)
    c = convex_toric_systole(region)
    vol = toric.volume_toric(region, quadrature)
    const = main_constant(n)
    log_lhs = math.log(ru * c)
    log_rhs = const.log_value + math.log(vol)
    margin = log_rhs - log_lhs
    return InequalityReport(
        n=n,
        ru=ru,
        c=c,
        vol=vol,
        log_constant=const.log_value,
        constant_overflow=const.overflow,
        log_lhs=log_lhs,
        log_rhs=log_rhs,
        margin=margin,
        verdict="SATISFIED" if margin >= 0 else "VIOLATED",
    )


class SandwichReport(NamedTuple):
    L: float
    S_inner: float
    S_outer: float
    bound: float
    passed: bool


def sandwich_check(inner, outer, L=None, grid=2000, quadrature=None):
    """Check S(H) <= exp(L d^2 / 2) S(G) for sandwiched canonical Hamiltonians.

    ``H`` and ``G`` are the canonical functions of ``inner`` and ``outer``;
    the hypothesis G <= H <= L G (i.e. inner inside outer inside L * inner,
    in domains) is verified on a direction grid, and both regions must be
    convex toric so the Hessians are positive semi-definite.
    """
    if inner.n != outer.n:
        raise InputError("dimension mismatch")
    if not (_is_convex_toric(inner) and _is_convex_toric(outer)):
        raise SandwichHypothesisFailed("sandwich check expects convex toric regions")
    n = inner.n
    cf_in = toric.canonical_function(inner)
    cf_out = toric.canonical_function(outer)
    per_axis = max(2, int(round(grid ** (1 / max(n - 1, 1)))))
    u = simplex_lattice(n, per_axis, margin=1e-6)
    ratio = cf_in.f(u) / cf_out.f(u)
    if np.min(ratio) < 1.0 - 1e-9:
        i = int(np.argmin(ratio))
        raise SandwichHypothesisFailed(
            f"inner region is not contained in outer (ratio {ratio[i]:.6f})",
            witness=u[i],
        )
    L_obs = float(np.max(ratio))
    if L is None:
        L = L_obs
    elif L_obs > L * (1 + 1e-9):
        raise SandwichHypothesisFailed(
            f"observed ratio {L_obs:.6f} exceeds declared L = {L}", witness=None
        )
    S_in = toric.laplacian_functional(inner, quadrature)
    S_out = toric.laplacian_functional(outer, quadrature)
    bound = math.exp(L * (2 * n) ** 2 / 2.0) * S_out
    return SandwichReport(
        L=float(L), S_inner=S_in, S_outer=S_out, bound=bound,
        passed=bool(S_in <= bound * (1 + 1e-12)),
    )


class InscribedEllipsoid(NamedTuple):
    widths: tuple
    factor: float        # smallest s with region inside s * E
    within_john: bool    # factor <= 2n


def inscribed_ellipsoid(region, grid=4000, sweeps=4):
    """Axis-aligned ellipsoid of maximal volume inscribed in a convex toric region.

    Coordinate search over widths with a containment check on a direction
    grid; also reports the covering factor needed for the region, which on
    the convex test family stays within the John bound 2n (reported, and
    asserted only by callers that know their input family).
    """
    if not _is_convex_toric(region):
        raise InputError("inscribed ellipsoid expects a convex toric region")
    n = region.n
    cf = toric.canonical_function(region)
    per_axis = max(2, int(round(grid ** (1 / max(n - 1, 1)))))
    u = simplex_lattice(n, per_axis, margin=1e-9)
    f_r = cf.f(u)

    def rho(a):
        # containment margin of E(a): max over boundary directions
        return float(np.max(f_r / (u @ (1.0 / np.asarray(a)))))

    a = np.array([1.0 / cf.f(np.eye(n)[i]) for i in range(n)])
    r = rho(a)
    if r > 1:
        a = a / r
    for _ in range(sweeps):
        for i in range(n):
            lo, hi = a[i], 4.0 * a[i]
            trial = a.copy()
            trial[i] = hi
            if rho(trial) <= 1.0:
                a = trial
                continue
            for _ in range(40):
                mid = 0.5 * (lo + hi)
                trial[i] = mid
                if rho(trial) <= 1.0:
                    lo = mid
                else:
                    hi = mid
            a[i] = lo
    if rho(a) > 1.0 + 1e-9:
        raise ContainmentCheckFailed(f"search left an infeasible ellipsoid: rho = {rho(a)}")
    factor = float(np.max((u @ (1.0 / a)) / f_r))
    return InscribedEllipsoid(
        widths=tuple(np.sort(a)), factor=factor, within_john=bool(factor <= 2 * n)
    )


@dataclass(frozen=True)
class CounterexampleSpec:
    base: object
    C_target: float
    epsilon: float
    A: float | None
    B: float | None
    region: object
    checks: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(entry["passed"] for entry in self.checks.values())

    def to_json(self):
        return {
            "base": toric.region_to_json(self.base),
            "C_target": self.C_target,
            "epsilon": self.epsilon,
            "A": self.A,
            "B": self.B,
            "region": toric.region_to_json(self.region),
            "checks": self.checks,
        }


def _strain_tail(A, B, n):
    # Ruelle mass of the flat-ellipsoid tail outside the slab of width B
    return (A ** -1.0 / math.factorial(n) - A ** -float(n) * B ** (n - 1)) * (
        A ** float(n) + (n - 1) * A ** -1.0
    )


def _min_a_satisfying(pred, A_max, binding):
    # doubling then bisection on log A; pred must be eventually true
    A = 2.0
    while not pred(A):
        A *= 2.0
        if A > A_max:
            raise NoFeasibleA(
                f"no admissible strain parameter below {A_max:.3e}", binding=binding
            )
    lo, hi = A / 2.0, A
    for _ in range(60):
        mid = math.sqrt(lo * hi)
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return hi


def build_counterexample(base, C_target, epsilon, collar=0.01, A_max=1e8):
    """Strain a concave region by a flat ellipsoid tail until Ru exceeds C_target.

    Chooses the slab width B (smallest power of two containing the base),
    solves for the strain parameter A by bisection so that the tail Ruelle
    mass reaches ``C_target`` while the volume overhead stays below
    ``epsilon``, and blends the union smoothly and concavely.  The returned
    spec carries the quadrature verification of the volume, Ruelle and
    systole claims.
    """
    if C_target < 0 or epsilon <= 0:
        raise InputError("C_target must be nonnegative and epsilon positive")
    if not toric.is_concave_sampled(base):
        raise InputError("base region must be concave")
    n = base.n
    cf = toric.canonical_function(base)
    vol_base = toric.volume_toric(base)
    c_base = toric.systole_concave(base).value

    if C_target == 0.0:
        checks = {
            "volume": {"value": vol_base, "low": vol_base, "high": vol_base + epsilon,
                       "passed": True},
            "ruelle": {"value": toric.ruelle_invariant_toric(base), "target": 0.0,
                       "passed": True},
            "systole": {"value": c_base, "target": c_base, "passed": True},
        }
        return CounterexampleSpec(
            base=base, C_target=0.0, epsilon=epsilon, A=None, B=None,
            region=base, checks=checks,
        )

    # smallest power of two B with the base inside the slab sum_{i>=2} x_i <= B
    if n < 2:
        raise InputError("the strain construction needs n >= 2")
    per_axis = max(2, int(round(4000 ** (1 / max(n - 1, 1)))))
    bdry = cf.boundary(simplex_lattice(n, per_axis, margin=1e-9))
    slab = float(np.max(np.sum(bdry[:, 1:], axis=1)))
    B = 2.0 ** math.ceil(math.log2(max(slab, 1e-9)))

    A_ru = _min_a_satisfying(
        lambda A: _strain_tail(A, B, n) >= C_target, A_max, binding="ruelle"
    )
    A_vol = _min_a_satisfying(
        lambda A: (1 + 1 / A) ** n * (vol_base + A ** -1.0 / math.factorial(n))
        <= vol_base + epsilon,
        A_max,
        binding="volume",
    )
    A = max(A_ru, A_vol)
    if not (
        _strain_tail(A, B, n) >= C_target
        and (1 + 1 / A) ** n * (vol_base + A ** -1.0 / math.factorial(n))
        <= vol_base + epsilon
    ):
        raise NoFeasibleA(
            "volume and Ruelle requirements conflict at every admissible A",
            binding="joint",
        )

    flat = toric.Ellipsoid(tuple([A ** -float(n)] + [float(A)] * (n - 1)))
    delta = min(collar, 1.0 / (A + 1.0))
    region = None
    for _ in range(4):
        candidate = toric.SmoothedUnion(left=base, right=flat, collar=delta)
        if toric.is_concave_sampled(candidate):
            region = candidate
            break
        delta /= 2.0
    if region is None:
        raise ConcavityLost("blended union failed the concavity certificate")

    spec_q = QuadratureSpec(rel_tol=1e-4)
    vol_hat, vol_err = toric.volume_toric(region, spec_q, return_error=True)
    ru_hat, ru_err = toric.ruelle_invariant_toric(region, spec_q, return_error=True)
    c_hat = toric.systole_concave(region).value
    tail = _strain_tail(A, B, n)
    checks = {
        "volume": {
            "value": vol_hat,
            "error": vol_err,
            "low": vol_base,
            "high": vol_base + epsilon,
            "passed": bool(
                vol_base - 1e-3 * vol_base - vol_err
                <= vol_hat
                <= vol_base + epsilon + 1e-3 * vol_base + vol_err
            ),
        },
        "ruelle": {
            "value": ru_hat,
            "error": ru_err,
            "target": C_target,
            "passed": bool(ru_hat + ru_err >= C_target * (1 - 1e-3)),
        },
        "systole": {
            "value": c_hat,
            "target": c_base,
            "passed": bool(c_hat >= c_base * (1 - 1e-9)),
        },
        "ruelle_tail_bound": {
            "value": ru_hat,
            "bound": tail,
            "passed": bool(ru_hat + ru_err >= tail * (1 - 2e-3)),
        },
    }
    return CounterexampleSpec(
        base=base, C_target=float(C_target), epsilon=float(epsilon),
        A=float(A), B=float(B), region=region, checks=checks,
    )
