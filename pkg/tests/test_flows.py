import numpy as np
import pytest

from ruelle import flows, symplin, toric
from ruelle.errors import InputError, NotConvexField


@pytest.fixture(scope="module")
def e12_field():
    return flows.toric_field(toric.Ellipsoid((1.0, 2.0)))


def boundary_point_e12():
    # mu = (0.5, 1.0) lies on f = mu1 + mu2/2 = 1
    return np.array([np.sqrt(0.5 / np.pi), np.sqrt(1.0 / np.pi), 0.0, 0.0])


class TestFieldConstruction:
    def test_liouville_homogeneity(self, e12_field):
        assert flows.check_liouville_homogeneity(e12_field)

    def test_liouville_homogeneity_pfamily(self):
        f = flows.toric_field(toric.PFamily((1.0, 1.5), 0.5))
        assert flows.check_liouville_homogeneity(f)

    def test_gradient_consistency(self, e12_field):
        rng = np.random.default_rng(0)
        z = rng.uniform(-0.3, 0.3, size=(5, 4))
        h = 1e-6
        for k in range(4):
            zp = z.copy()
            zp[:, k] += h
            zm = z.copy()
            zm[:, k] -= h
            fd = (e12_field.H(zp) - e12_field.H(zm)) / (2 * h)
            assert np.allclose(e12_field.grad(z)[:, k], fd, atol=1e-6)

    def test_hessian_consistency(self):
        f = flows.toric_field(toric.PFamily((1.0, 2.0), 2.0))
        rng = np.random.default_rng(1)
        z = rng.uniform(0.05, 0.3, size=(4, 4))
        h = 1e-5
        H = f.hess(z)
        for k in range(4):
            zp = z.copy()
            zp[:, k] += h
            zm = z.copy()
            zm[:, k] -= h
            fd = (f.grad(zp) - f.grad(zm)) / (2 * h)
            assert np.allclose(H[:, :, k], fd, atol=1e-5)


class TestIntegrateCocycle:
    def test_ellipsoid_closed_form(self, e12_field):
        # oracle: Lemma-style diagonal flow, U(t) = diag(e^{2pi i t}, e^{pi i t})
        tr = flows.integrate_cocycle(e12_field, boundary_point_e12(), T=4.0, store_every=16)
        assert tr.u_T == pytest.approx(6.0, abs=1e-5)
        t = tr.times[-1]
        U = symplin.real_from_complex(
            np.diag([np.exp(2j * np.pi * t), np.exp(1j * np.pi * t)])
        )
        assert np.max(np.abs(tr.frames[-1] - U)) < 1e-5
        assert tr.energy_drift <= 1e-6

    def test_time_zero(self, e12_field):
        tr = flows.integrate_cocycle(e12_field, boundary_point_e12(), T=0)
        assert tr.u_T == 0.0
        assert np.allclose(tr.frames[0], np.eye(4))

    def test_cocycle_symplectic_along_trajectory(self, e12_field):
        tr = flows.integrate_cocycle(e12_field, boundary_point_e12(), T=3.0, store_every=50)
        for W in tr.frames:
            assert symplin.symplectic_defect(W) < 1e-9

    def test_pfamily_density_convergence(self):
        # u(T)/T approaches the toric density within 1% at long horizon
        region = toric.PFamily((1.0, 1.0), 0.5)
        field = flows.toric_field(region)
        cf = toric.canonical_function(region)
        z0 = np.array([0.25, 0.2, 0.1, 0.15])
        mu = np.pi * np.array([z0[0] ** 2 + z0[2] ** 2, z0[1] ** 2 + z0[3] ** 2])
        density = float(np.sum(cf.grad(mu)))
        tr = flows.integrate_cocycle(field, z0, T=200.0, store_every=10**9)
        assert tr.u_T / 200.0 == pytest.approx(density, rel=0.01)

    def test_rejects_origin(self, e12_field):
        with pytest.raises(InputError):
            flows.integrate_cocycle(e12_field, np.zeros(4), T=1.0)


class TestRuelleEstimate:
    def test_ellipsoid_matches_toric(self, e12_field):
        est = flows.ruelle_estimate(e12_field, T=50.0, samples=400, seed=0)
        assert est.n_failed == 0
        assert abs(est.estimate - 1.5) <= 3 * est.stderr

    def test_deterministic(self, e12_field):
        a = flows.ruelle_estimate(e12_field, T=20.0, samples=100, seed=3)
        b = flows.ruelle_estimate(e12_field, T=20.0, samples=100, seed=3)
        assert a == b

    def test_t_zero_diagnostic_mode(self, e12_field):
        est = flows.ruelle_estimate(e12_field, T=0.0, samples=50, seed=0)
        assert np.isnan(est.estimate)
        assert est.checkpoints == ()

    def test_checkpoints_cover_quarter_and_half(self, e12_field):
        est = flows.ruelle_estimate(e12_field, T=40.0, samples=100, seed=1)
        times = [c[0] for c in est.checkpoints]
        assert times == [10.0, 20.0, 40.0]

    def test_direct_sum_additivity(self):
        # product of two n=1 ellipsoid factors: u_T of the product equals the
        # sum of the factor lifts along the same trajectory
        f1 = flows.toric_field(toric.Ellipsoid((1.0,)))
        f2 = flows.toric_field(toric.Ellipsoid((2.0,)))
        prod = flows.product_field(f1, f2)
        assert prod.packed is not None
        z1 = np.array([0.3, 0.1])
        z2 = np.array([0.2, 0.35])
        z = np.array([z1[0], z2[0], z1[1], z2[1]])
        T = 7.0
        dt = min(flows.suggest_dt(prod, z, T=T), 1e-3)
        u = flows.integrate_cocycle(prod, z, T=T, dt=dt, store_every=10**9).u_T
        u1 = flows.integrate_cocycle(f1, z1, T=T, dt=dt, store_every=10**9).u_T
        u2 = flows.integrate_cocycle(f2, z2, T=T, dt=dt, store_every=10**9).u_T
        assert u == pytest.approx(u1 + u2, abs=1e-8)

    def test_unitary_covariance(self, e12_field):
        # a unitary change of coordinates leaves the estimate invariant
        theta = 0.7
        c, s = np.cos(theta), np.sin(theta)
        R = np.array([[c, -s], [s, c]])
        G = symplin.real_from_complex(R.astype(complex))
        rotated = flows.conjugated_field(e12_field, G)
        assert flows.check_liouville_homogeneity(rotated)
        a = flows.ruelle_estimate(e12_field, T=50.0, samples=300, seed=0)
        b = flows.ruelle_estimate(rotated, T=50.0, samples=300, seed=0)
        assert abs(a.estimate - b.estimate) <= 3 * np.hypot(a.stderr, b.stderr)

    def test_measure_weight_hook(self):
        # weight H is invariant along the flow; for E(1,2) the target is
        # int_X H * ru dvol = 1.5 * vol * n/(n+1) = 1.0
        field = flows.toric_field(toric.Ellipsoid((1.0, 2.0)))
        est = flows.ruelle_estimate(
            field, T=50.0, samples=500, seed=0, weight=lambda z: field.H(z)
        )
        assert abs(est.estimate - 1.0) <= 3 * est.stderr

    def test_subadditivity_with_defect(self):
        # u_{S+T}(x) <= u_S(x) + u_T(phi_S x) + 2 turns along trajectories
        for region in [toric.Ellipsoid((1.0, 2.0)), toric.PFamily((1.0, 1.0), 0.5)]:
            field = flows.toric_field(region)
            rng = np.random.default_rng(11)
            pts, accept, _ = flows._propose(field, 200, seed=11)
            pts = pts[accept][:50]
            for x in pts:
                S = float(rng.uniform(1.0, 4.0))
                T = float(rng.uniform(1.0, 4.0))
                tr = flows.integrate_cocycle(field, x, T=S + T, store_every=1)
                j = int(np.searchsorted(tr.times, S, side="right")) - 1
                u_total = tr.u_T
                u_S = tr.lift[j]
                xmid = tr.points[j]
                u_T2 = flows.integrate_cocycle(field, xmid, T=T, store_every=10**9).u_T
                assert u_total <= u_S + u_T2 + 2.0


class TestTraceBound:
    def test_ellipsoid_round(self):
        rep = flows.trace_bound_check(
            flows.toric_field(toric.Ellipsoid((1.0, 1.0))), samples=200, T=50.0
        )
        assert rep.passed
        assert rep.rhs == pytest.approx(128.0, rel=1e-6)

    def test_flat_ellipsoid_large_slack(self):
        rep = flows.trace_bound_check(
            flows.toric_field(toric.Ellipsoid((1.0, 5.0))), samples=200, T=50.0
        )
        assert rep.passed
        assert rep.lhs < 0.2 * rep.rhs

    def test_convex_pfamily(self):
        rep = flows.trace_bound_check(
            flows.toric_field(toric.PFamily((1.0, 1.0), 2.0)), samples=200, T=50.0
        )
        assert rep.passed

    def test_rejects_nonconvex_field(self):
        # p < 1/2 gives |z|^{2p} terms, a genuinely non-convex Hamiltonian
        # (p = 1/2 itself is the l1-ball of the |z_i|, which is convex)
        with pytest.raises(NotConvexField):
            flows.trace_bound_check(
                flows.toric_field(toric.PFamily((1.0, 1.0), 0.3)), samples=50, T=10.0
            )


class TestFiniteDifferenceField:
    def test_fd_field_matches_analytic(self):
        analytic = flows.toric_field(toric.Ellipsoid((1.0, 2.0)))
        fd = flows.field_from_hamiltonian(analytic.H, n=2, box=analytic.box)
        rng = np.random.default_rng(4)
        z = rng.uniform(-0.3, 0.3, size=(6, 4))
        assert np.allclose(fd.grad(z), analytic.grad(z), atol=1e-8)
        assert np.allclose(fd.hess(z), analytic.hess(z), atol=1e-5)

    def test_fd_field_integrates(self):
        analytic = flows.toric_field(toric.Ellipsoid((1.0, 2.0)))
        fd = flows.field_from_hamiltonian(analytic.H, n=2, box=analytic.box)
        x0 = boundary_point_e12()
        tr = flows.integrate_cocycle(fd, x0, T=1.0, dt=2e-3, store_every=10**9)
        assert tr.u_T == pytest.approx(1.5, abs=1e-4)


class TestGenericPath:
    def test_python_integrator_matches_kernel(self, e12_field):
        # strip the packed descriptor to force the generic path
        generic = flows.HamiltonianField(
            n=e12_field.n,
            H=e12_field.H,
            grad=e12_field.grad,
            hess=e12_field.hess,
            box=e12_field.box,
            packed=None,
        )
        x0 = boundary_point_e12()
        a = flows.integrate_cocycle(e12_field, x0, T=2.0, dt=1e-3, store_every=10**9)
        b = flows.integrate_cocycle(generic, x0, T=2.0, dt=1e-3, store_every=10**9)
        assert a.u_T == pytest.approx(b.u_T, abs=1e-9)
        assert np.max(np.abs(a.frames[-1] - b.frames[-1])) < 1e-9
