import math

import numpy as np
import pytest

from ruelle import toric
from ruelle._quadrature import QuadratureSpec, integrate_simplex, simplex_nodes
from ruelle.errors import (
    EvaluationAtOrigin,
    InputError,
    NonIntegrableHessian,
    NotConcave,
)


def ellipsoid_ru(widths):
    w = np.asarray(widths)
    return np.prod(w) / math.factorial(len(w)) * np.sum(1.0 / w)


class TestCanonicalFunction:
    def test_ellipsoid_boundary_value(self):
        cf = toric.canonical_function(toric.Ellipsoid((1.0, 2.0)))
        assert cf.f(np.array([0.5, 1.0])) == pytest.approx(1.0, abs=1e-12)

    def test_pfamily_example(self):
        cf = toric.canonical_function(toric.PFamily((1.0, 1.0), 0.5))
        assert cf.f(np.array([0.25, 0.25])) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize(
        "region",
        [
            toric.Ellipsoid((1.0, 2.0)),
            toric.PFamily((1.0, 2.0), 0.5),
            toric.PFamily((0.7, 1.1, 2.0), 2.0),
            toric.RadialProfile(
                dim=2,
                grid=tuple(np.linspace(0.0, 1.0, 60)),
                values=tuple(1.0 + 0.3 * np.sin(2.5 * np.linspace(0.0, 1.0, 60))),
            ),
            toric.SmoothedUnion(
                toric.Ellipsoid((1.0, 1.0)), toric.Ellipsoid((0.25, 2.0)), 0.05
            ),
        ],
    )
    def test_euler_relation_and_homogeneity(self, region):
        cf = toric.canonical_function(region)
        rng = np.random.default_rng(0)
        x = rng.uniform(0.05, 2.0, size=(2000, region.n))
        f = cf.f(x)
        g = cf.grad(x)
        euler = np.abs(np.sum(x * g, axis=1) - f)
        assert np.max(euler / f) < 1e-7
        s = rng.uniform(0.5, 2.0, size=2000)
        assert np.max(np.abs(cf.f(s[:, None] * x) - s * f) / (s * f)) < 1e-9

    def test_boundary_is_level_one(self):
        for region in [toric.PFamily((1.0, 3.0), 0.5), toric.Ellipsoid((2.0, 5.0))]:
            cf = toric.canonical_function(region)
            u = np.linspace(0.01, 0.99, 50)
            dirs = np.stack([u, 1 - u], axis=1)
            x = cf.boundary(dirs)
            assert np.max(np.abs(cf.f(x) - 1)) < 1e-8

    def test_origin_rejected(self):
        cf = toric.canonical_function(toric.Ellipsoid((1.0, 2.0)))
        with pytest.raises(EvaluationAtOrigin):
            cf.f(np.zeros(2))

    def test_radial_profile_roundtrip(self):
        # a radial profile sampled from an ellipsoid reproduces its f
        E = toric.Ellipsoid((1.0, 2.0))
        cfE = toric.canonical_function(E)
        knots = np.linspace(0.0, 1.0, 120)
        dirs = np.stack([knots, 1 - knots], axis=1)
        values = 1.0 / cfE.f(dirs)
        prof = toric.RadialProfile(dim=2, grid=tuple(knots), values=tuple(values))
        cfP = toric.canonical_function(prof)
        x = np.random.default_rng(1).uniform(0.05, 1.0, size=(200, 2))
        assert np.max(np.abs(cfP.f(x) - cfE.f(x))) < 1e-6

    def test_smoothed_union_dominates_max(self):
        left = toric.Ellipsoid((1.0, 1.0))
        right = toric.Ellipsoid((0.25, 2.0))
        blend = toric.SmoothedUnion(left, right, collar=0.02)
        cfs = [toric.canonical_function(r) for r in (left, right, blend)]
        u = np.linspace(1e-4, 1 - 1e-4, 400)
        dirs = np.stack([u, 1 - u], axis=1)
        f_min = np.minimum(cfs[0].f(dirs), cfs[1].f(dirs))
        f_blend = cfs[2].f(dirs)
        # upward-only blend: contains the union, inside the collar inflation
        assert np.all(f_blend <= f_min + 1e-12)
        assert np.all(f_blend >= f_min / (1 + 0.02) - 1e-12)


class TestQuadrature:
    def test_simplex_volume(self):
        # weights integrate 1 over the simplex: 1/(n-1)!
        for n in (2, 3, 4):
            u, w = simplex_nodes(n, points=12, panels=4)
            assert np.sum(w) == pytest.approx(1.0 / math.factorial(n - 1), rel=1e-12)

    def test_polynomial_moment(self):
        # oracle: int_simplex u1^2 du over the triangle n=3 equals 1/12
        val, err = integrate_simplex(
            lambda u: u[:, 0] ** 2, 3, QuadratureSpec(rel_tol=1e-12)
        )
        assert val == pytest.approx(1.0 / 12.0, rel=1e-11)

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_ruelle_random_ellipsoids(self, n):
        rng = np.random.default_rng(10 + n)
        for _ in range(25):
            a = np.sort(rng.uniform(0.3, 4.0, n))
            E = toric.Ellipsoid(tuple(a))
            ru = toric.ruelle_invariant_toric(E)
            assert ru == pytest.approx(ellipsoid_ru(a), rel=1e-8)

    def test_ruelle_scale_invariance_1d(self):
        for a in (0.3, 1.0, 7.5):
            assert toric.ruelle_invariant_toric(toric.Ellipsoid((a,))) == pytest.approx(
                1.0, rel=1e-12
            )

    def test_volume_pfamily_against_mc_oracle(self):
        # oracle: Monte Carlo with 10^7 samples, tolerance 1e-3
        region = toric.PFamily((1.0, 1.0), 0.5)
        vol = toric.volume_toric(region)
        rng = np.random.default_rng(123)
        pts = rng.uniform(0.0, 1.0, size=(10**7, 2))
        cf = toric.canonical_function(region)
        mc = float(np.mean(cf.f(pts) <= 1.0))
        assert vol == pytest.approx(1.0 / 6.0, rel=1e-9)
        assert abs(mc - vol) < 1e-3

    def test_laplacian_ellipsoids(self):
        rng = np.random.default_rng(3)
        for n in (1, 2, 3):
            for _ in range(10):
                a = np.sort(rng.uniform(0.4, 3.0, n))
                S = toric.laplacian_functional(toric.Ellipsoid(tuple(a)))
                exact = (
                    4 * math.pi / math.factorial(n) * np.sum(1 / a) * np.prod(a)
                )
                assert S == pytest.approx(exact, rel=1e-8)

    def test_laplacian_examples(self):
        assert toric.laplacian_functional(
            toric.Ellipsoid((1.0, 2.0))
        ) == pytest.approx(6 * math.pi, rel=1e-9)
        assert toric.laplacian_functional(
            toric.Ellipsoid((1.0, 2.0, 3.0))
        ) == pytest.approx(22 * math.pi / 3, rel=1e-9)

    def test_laplacian_scaling(self):
        # oracle: closed form at both scales, S(cE) = c^n * sum(1/(c a_i)) * ...
        a = (1.0, 2.0)
        c = 1.7
        S1 = toric.laplacian_functional(toric.Ellipsoid(a))
        S2 = toric.laplacian_functional(toric.Ellipsoid(tuple(c * x for x in a)))
        assert S2 == pytest.approx(c ** (len(a) - 1) * S1, rel=1e-8)

    def test_hessian_guard(self):
        with pytest.raises(NonIntegrableHessian):
            toric.laplacian_functional(toric.PFamily((1.0, 1.0), 0.4))

    def test_pfamily_grid_doubling_stability(self):
        for p in (0.5, 1.0, 2.0):
            region = toric.PFamily((1.0, 2.0), p)
            # huge rel_tol stops after one doubling: err is the difference
            # between the 32- and 64-panel grids
            probe = QuadratureSpec(rel_tol=1e300, points=16, min_panels=32, max_panels=64)
            v, err = toric.ruelle_invariant_toric(region, probe, return_error=True)
            assert err < 1e-4 * abs(v)


class TestPredicates:
    def test_monotone_ellipsoid(self):
        assert toric.is_strictly_monotone(toric.Ellipsoid((1.0, 2.0))).monotone

    def test_monotone_convex_pfamily(self):
        # oracle: gradient formula is positive on the interior
        assert toric.is_strictly_monotone(toric.PFamily((1.0, 1.0), 2.0)).monotone

    def test_dented_profile_not_monotone(self):
        # dent the boundary so the normal leaves the positive orthant
        knots = np.linspace(0.0, 1.0, 81)
        values = 1.0 + 0.45 * np.exp(-((knots - 0.55) ** 2) / 0.002)
        prof = toric.RadialProfile(dim=2, grid=tuple(knots), values=tuple(values))
        res = toric.is_strictly_monotone(prof)
        assert not res.monotone
        assert res.witness is not None

    def test_concavity(self):
        assert toric.is_concave_sampled(toric.Ellipsoid((1.0, 2.0)))
        assert toric.is_concave_sampled(toric.PFamily((1.0, 2.0), 0.5))
        assert not toric.is_concave_sampled(toric.PFamily((1.0, 1.0), 2.0))


class TestSystole:
    def test_bracket_ellipsoid_full_support(self):
        res = toric.systole_bracket(toric.Ellipsoid((1.0, 2.0)), [1, 1])
        assert res.value == pytest.approx(1.0, abs=1e-10)

    def test_bracket_axis(self):
        res = toric.systole_bracket(toric.Ellipsoid((1.0, 2.0)), [1, 0])
        assert res.value == pytest.approx(1.0, abs=1e-12)

    def test_bracket_pfamily_interior_minimum(self):
        # oracle (dense boundary scan, frozen): for f = (sqrt x1 + sqrt x2)^2
        # the minimum of 2 x1 + 3 x2 over the arc is at (9/25, 4/25) -> 1.2,
        # strictly below both vertex values 2 and 3
        res = toric.systole_bracket(toric.PFamily((1.0, 1.0), 0.5), [2, 3])
        assert res.value == pytest.approx(1.2, abs=1e-9)
        assert np.allclose(res.point, [9 / 25, 4 / 25], atol=1e-5)
        cf = toric.canonical_function(toric.PFamily((1.0, 1.0), 0.5))
        u = np.linspace(1e-6, 1 - 1e-6, 200001)
        x = cf.boundary(np.stack([u, 1 - u], axis=1))
        dense = float(np.min(x @ np.array([2.0, 3.0])))
        assert res.value == pytest.approx(dense, abs=1e-7)

    def test_bracket_rejects_convex(self):
        with pytest.raises(NotConcave):
            toric.systole_bracket(toric.PFamily((1.0, 1.0), 2.0), [1, 1])

    def test_systole_ellipsoids_random(self):
        rng = np.random.default_rng(17)
        for n in (1, 2, 3, 4):
            for _ in range(8):
                a = np.sort(rng.uniform(0.3, 4.0, n))
                res = toric.systole_concave(toric.Ellipsoid(tuple(a)))
                assert res.value == pytest.approx(a[0], abs=1e-8)

    def test_systole_paper_example(self):
        assert toric.systole_concave(
            toric.Ellipsoid((3.0, 5.0, 7.0))
        ).value == pytest.approx(3.0, abs=1e-8)

    def test_systole_pfamily_oracle(self):
        # oracle (calculus + dense scan, frozen): min over integer v of
        # min_k,m 2km/(k+2m) = 2/3 at v = (1,1), below the axis widths
        res = toric.systole_concave(toric.PFamily((1.0, 2.0), 0.5))
        assert res.value == pytest.approx(2.0 / 3.0, abs=1e-8)

    def test_containment_monotonicity(self):
        rng = np.random.default_rng(29)
        for _ in range(20):
            a = np.sort(rng.uniform(0.4, 2.0, 2))
            scale = rng.uniform(1.05, 2.0)
            p = rng.uniform(0.4, 1.0)
            inner = toric.PFamily(tuple(a), p)
            outer = toric.PFamily(tuple(scale * a), p)
            ci = toric.systole_concave(inner).value
            co = toric.systole_concave(outer).value
            assert ci <= co + 1e-10


class TestOrbits:
    def test_ellipsoid_irrational_periods(self):
        E = toric.Ellipsoid((1.0, float(np.sqrt(2.0))))
        recs = toric.enumerate_orbits(E, T_max=3.0)
        periods = sorted(r.period for r in recs)
        expect = sorted([1.0, 2.0, 3.0, np.sqrt(2.0), 2 * np.sqrt(2.0)])
        assert np.allclose(periods, expect, atol=1e-9)
        assert all(not r.family for r in recs)

    def test_round_ellipsoid_family(self):
        recs = toric.enumerate_orbits(toric.Ellipsoid((1.0, 1.0)), T_max=1.5)
        fams = [r for r in recs if r.family]
        assert len(fams) == 1 and fams[0].period == pytest.approx(1.0)
        # every boundary point closes at T = 1: rotation vector is integral
        assert np.allclose(fams[0].rotation_vector, [1.0, 1.0], atol=1e-12)

    def test_pfamily_scan_families(self):
        region = toric.PFamily((1.0, 1.0), 0.5)
        recs = toric.enumerate_orbits(region, T_max=1.0, grid=1e-3)
        interior = [r for r in recs if len(r.support) == 2]
        assert interior, "expected interior torus orbits"
        cf = toric.canonical_function(region)
        for r in interior:
            theta = r.period * cf.grad(r.moment_point)
            assert np.max(np.abs(theta - np.round(theta))) < 1e-6
            assert cf.f(r.moment_point) == pytest.approx(1.0, abs=1e-9)

    def test_pfamily_n3_symmetric_orbit(self):
        # analytic oracle: at x = (1/9, 1/9, 1/9), grad f = (3, 3, 3), so the
        # full-support orbit closes with period 1/3 and theta = (1, 1, 1)
        region = toric.PFamily((1.0, 1.0, 1.0), 0.5)
        recs = toric.enumerate_orbits(region, T_max=0.5, grid=1e-2)
        full = [r for r in recs if r.support == (0, 1, 2)]
        assert full
        hit = min(full, key=lambda r: np.max(np.abs(r.moment_point - 1 / 9)))
        assert np.allclose(hit.moment_point, 1 / 9, atol=1e-8)
        assert hit.period == pytest.approx(1 / 3, abs=1e-9)
        assert toric.lcz_toric_orbit(hit, region).value >= 3

    def test_rejects_non_monotone(self):
        knots = np.linspace(0.0, 1.0, 81)
        values = 1.0 + 0.45 * np.exp(-((knots - 0.55) ** 2) / 0.002)
        prof = toric.RadialProfile(dim=2, grid=tuple(knots), values=tuple(values))
        with pytest.raises(InputError):
            toric.enumerate_orbits(prof, T_max=1.0)


class TestToricIndex:
    def test_e12_first_orbit(self):
        E = toric.Ellipsoid((1.0, 2.0))
        recs = toric.enumerate_orbits(E, T_max=1.0)
        gamma1 = [r for r in recs if r.support == (0,) and r.period == 1.0][0]
        ham = toric.lcz_toric_orbit(gamma1, E)
        assert ham == (2, True)  # equals n with equality
        reeb = toric.lcz_toric_orbit(gamma1, E, frame="reeb")
        assert reeb.value == 3  # n + 1

    def test_e12_second_orbit(self):
        E = toric.Ellipsoid((1.0, 2.0))
        recs = toric.enumerate_orbits(E, T_max=2.0)
        gamma2 = [r for r in recs if r.support == (1,)][0]
        assert toric.lcz_toric_orbit(gamma2, E).value == 4

    def test_lower_bound_on_monotone_regions(self):
        rng = np.random.default_rng(31)
        for p in (0.5, 1.0):
            for _ in range(4):
                a = tuple(np.sort(rng.uniform(0.5, 2.0, 2)))
                region = toric.PFamily(a, p) if p != 1.0 else toric.Ellipsoid(a)
                recs = toric.enumerate_orbits(region, T_max=2.0, grid=2e-3)
                for r in recs:
                    assert toric.lcz_toric_orbit(r, region).value >= 2
                    assert toric.lcz_toric_orbit(r, region, frame="reeb").value >= 3

    def test_ruelle_density_positive_on_monotone(self):
        for region in [toric.PFamily((1.0, 2.0), 0.5), toric.Ellipsoid((1.0, 3.0))]:
            cf = toric.canonical_function(region)
            u = np.linspace(1e-3, 1 - 1e-3, 500)
            x = cf.boundary(np.stack([u, 1 - u], axis=1))
            assert np.all(np.sum(cf.grad(x), axis=1) > 0)


class TestSerialization:
    @pytest.mark.parametrize(
        "region",
        [
            toric.Ellipsoid((1.0, 2.0)),
            toric.PFamily((1.0, 2.0), 0.5),
            toric.SmoothedUnion(
                toric.Ellipsoid((1.0, 1.0)), toric.Ellipsoid((0.5, 2.0)), 0.02
            ),
        ],
    )
    def test_roundtrip(self, region):
        again = toric.region_from_json(toric.region_to_json(region))
        assert again == region

    def test_malformed(self):
        with pytest.raises(InputError):
            toric.region_from_json({"kind": "dodecahedron"})
