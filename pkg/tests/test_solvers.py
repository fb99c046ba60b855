import numpy as np
import pytest

from igabeam.beam import Loads, ReferenceConfiguration
from igabeam.rotations import exp_so3, skew
from igabeam.sections import direct_section, square_section
from igabeam.solvers import (
    CLAMPED,
    FREE,
    HINGED,
    BeamDynamics,
    BoundaryCondition,
    MulticorrectorSettings,
    SolverError,
    assemble_mass_blocks,
    multicorrector_solve,
    spectral_radius,
)
from igabeam.splines import (
    SplineSpace,
    collocation_operators,
    greville_abscissae,
    make_open_uniform_knots,
)


def make_ops(p, nb, L=1.0):
    space = SplineSpace(p=p, knots=make_open_uniform_knots(p, nb))
    grid = greville_abscissae(space)
    ops = collocation_operators(space, grid, L)
    return space, grid, ops


def cantilever_dynamics(p=4, nb=21, h=1e-6, variant="lu-l", mc=None,
                        tip_force=(0.0, 0.0, -100.0)):
    space, grid, ops = make_ops(p, nb)
    ref = ReferenceConfiguration.straight(ops, grid, 1.0)
    sec = square_section(0.01, 210e9, 0.2, 7800.0)
    f = np.asarray(tip_force, dtype=float)
    loads = Loads(end_force=(lambda t: np.zeros(3), lambda t: f))
    dyn = BeamDynamics(space, grid, ops, ref, sec, loads, (CLAMPED, FREE),
                       h=h, variant=variant, multicorrector=mc)
    return dyn, ref, sec


class TestMassBlocks:
    def test_p1_dirichlet_dirichlet_is_identity(self):
        _, _, ops = make_ops(1, 2)
        mass = assemble_mass_blocks(ops, (CLAMPED, CLAMPED))
        assert np.allclose(mass.M_a, np.eye(2))
        assert spectral_radius(mass.M_a) == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("p,nb", [(2, 11), (4, 21), (6, 31)])
    def test_interior_rows_sum_to_one(self, p, nb):
        _, _, ops = make_ops(p, nb)
        mass = assemble_mass_blocks(ops, (FREE, FREE))
        assert np.allclose(mass.M_a[1:-1].sum(axis=1), 1.0, atol=1e-12)

    def test_bandwidth_bounded(self):
        p = 4
        _, _, ops = make_ops(p, 21)
        mass = assemble_mass_blocks(ops, (FREE, CLAMPED))
        i, j = np.nonzero(np.abs(mass.M_a) > 1e-14)
        assert np.abs(i - j).max() <= p + 1

    @pytest.mark.parametrize("bc", [(CLAMPED, CLAMPED), (FREE, FREE)])
    def test_homogeneous_bc_pairs_share_matrices(self, bc):
        _, _, ops = make_ops(4, 17)
        mass = assemble_mass_blocks(ops, bc)
        assert np.array_equal(mass.M_a, mass.M_alpha)

    def test_matrices_hold_only_basis_data(self):
        # same space, different geometry scaling and section: identical blocks
        _, _, ops_a = make_ops(4, 17, L=1.0)
        _, _, ops_b = make_ops(4, 17, L=7.3)
        for bc in [(CLAMPED, FREE), (HINGED, FREE)]:
            ma = assemble_mass_blocks(ops_a, bc)
            mb = assemble_mass_blocks(ops_b, bc)
            assert np.allclose(ma.M_a, mb.M_a, atol=1e-13)
            assert np.allclose(ma.M_alpha, mb.M_alpha, atol=1e-13)

    @pytest.mark.parametrize("bc", [(CLAMPED, CLAMPED), (CLAMPED, FREE),
                                    (FREE, FREE)])
    def test_spectral_radius_below_one_p4(self, bc):
        for n in (20, 40, 80):
            _, _, ops = make_ops(4, n + 1)
            mass = assemble_mass_blocks(ops, bc)
            assert spectral_radius(mass.M_a) < 1.0


class TestSpectralRadius:
    def test_identity(self):
        assert spectral_radius(np.eye(5)) == 0.0

    def test_diagonal(self):
        assert spectral_radius(np.diag([1.5, 1.0])) == pytest.approx(0.5,
                                                                     abs=1e-10)

    def test_matches_dense_eigensolver(self):
        rng = np.random.RandomState(3)
        for trial in range(12):
            n = rng.randint(3, 40)
            M = np.eye(n) + 0.5 * rng.normal(size=(n, n)) / np.sqrt(n)
            rho_pi = spectral_radius(M)
            rho_np = np.abs(np.linalg.eigvals(M - np.eye(n))).max()
            assert rho_pi == pytest.approx(rho_np, rel=1e-7, abs=1e-9)

    def test_complex_dominant_pair(self):
        # rotation-scaled block: eigenvalues 0.9 e^{+-i}
        th = 1.0
        B = 0.9 * np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
        M = np.eye(2) + B
        assert spectral_radius(M) == pytest.approx(0.9, abs=1e-8)

    def test_increases_with_degree(self):
        # Neumann-Neumann blocks at n = 40
        rhos = []
        for p in (2, 4, 6, 8):
            _, _, ops = make_ops(p, 41)
            mass = assemble_mass_blocks(ops, (FREE, FREE))
            rhos.append(spectral_radius(mass.M_alpha))
        assert all(b > a for a, b in zip(rhos, rhos[1:]))
        assert all(r < 1.0 for r in rhos)


class TestMulticorrector:
    def test_identity_converges_first_pass(self):
        b = np.array([[1.0, 2.0, 3.0], [0.0, -1.0, 0.5]])
        x, passes = multicorrector_solve(np.eye(2), b, MulticorrectorSettings())
        assert passes == 1
        assert np.array_equal(x, b)

    def test_2x2_against_direct_solve(self):
        M = np.array([[1.0, 0.2], [0.2, 1.0]])
        b = np.array([1.0, 1.0])
        x, passes = multicorrector_solve(M, b, MulticorrectorSettings())
        assert passes <= 40
        assert np.abs(x - np.linalg.solve(M, b)).max() < 1e-9

    def test_residual_decreases_monotonically(self):
        _, _, ops = make_ops(4, 21)
        M = assemble_mass_blocks(ops, (CLAMPED, CLAMPED)).M_a
        rng = np.random.RandomState(0)
        b = rng.normal(size=(21, 3))
        x = b.copy()
        r = b - M @ x
        prev = np.inf
        for _ in range(60):
            res = np.abs(r).max()
            assert res < prev or res < 1e-14
            prev = res
            x += r
            r = b - M @ x

    def test_contraction_bound_property(self):
        # residual after r passes <= rho^r * ||b|| * 1.1 on random rhs
        _, _, ops = make_ops(4, 31)
        M = assemble_mass_blocks(ops, (CLAMPED, FREE)).M_a
        rho = spectral_radius(M)
        rng = np.random.RandomState(1)
        b = rng.normal(size=(31, 3))
        for r in (40, 80, 120):
            x, _ = multicorrector_solve(
                M, b, MulticorrectorSettings(fixed_passes=r))
            res = np.abs(b - M @ x).max()
            # non-normal transients can add wiggle at small r; by these pass
            # counts the asymptotic rate must hold
            assert res <= 1.1 * rho**r * np.abs(b).max() * 31

    def test_divergence_detector_raises(self):
        M = np.diag([3.0, 1.0])  # rho(M - I) = 2
        with pytest.raises(SolverError):
            multicorrector_solve(M, np.ones(2), MulticorrectorSettings())

    def test_fixed_passes_mode(self):
        M = np.array([[1.0, 0.3], [0.0, 1.0]])
        _, passes = multicorrector_solve(M, np.ones(2),
                                         MulticorrectorSettings(fixed_passes=7))
        assert passes == 7


class TestTranslationalRhs:
    def test_rest_unloaded_neumann_is_zero(self):
        space, grid, ops = make_ops(4, 11)
        ref = ReferenceConfiguration.straight(ops, grid, 1.0)
        sec = square_section(0.01, 210e9, 0.2, 7800.0)
        dyn = BeamDynamics(space, grid, ops, ref, sec, Loads(), (FREE, FREE),
                           h=1e-6, variant="lu-l")
        st = dyn.initial_state()
        fields = dyn._collocate(st.c_ctrl, st.R, st.K, st.K_s)
        from igabeam.beam import translational_rhs
        psi = translational_rhs(fields, sec, np.zeros((11, 3)))
        ends = dyn._end_data(fields, 0.0, st.v_ctrl, st.w_ctrl, 1e-12)
        b = dyn.rhs_translational(psi, ends, st.v_ctrl, st.w_ctrl,
                                  st.al_ctrl, 1e-12)
        assert np.abs(b).max() == 0.0

    def test_tip_force_structure_at_rest(self):
        # free-end row = (psi2)^-1 n_c / h^2 (times the row-normalization
        # factor); interior rows zero
        dyn, ref, sec = cantilever_dynamics(p=4, nb=21, h=1e-6)
        st = dyn.initial_state()
        st.a_ctrl[:] = 0.0
        st.al_ctrl[:] = 0.0
        fields = dyn._collocate(ref.c_ctrl, ref.R0, ref.K0, ref.K0_s)
        from igabeam.beam import translational_rhs
        psi = translational_rhs(fields, sec, np.zeros((21, 3)))
        zeros = np.zeros_like(st.v_ctrl)
        h2 = dyn.h**2
        ends = dyn._end_data(fields, 0.0, zeros, zeros, h2)
        b = dyn.rhs_translational(psi, ends, zeros, zeros, zeros, h2)
        assert np.abs(b[1:-1]).max() == 0.0
        expected = (np.linalg.solve(np.diag(sec.c_n), [0.0, 0.0, -100.0])
                    / h2 * dyn.mass.scale_a[1])
        assert np.allclose(b[-1], expected)

    def test_uniform_gravity_interior_rows(self):
        space, grid, ops = make_ops(4, 11)
        ref = ReferenceConfiguration.straight(ops, grid, 1.0)
        sec = square_section(0.01, 210e9, 0.2, 7800.0)
        g = np.array([0.0, 0.0, -9.81])
        loads = Loads(distributed_force=lambda s, t: np.tile(sec.mu * g,
                                                             (s.size, 1)))
        dyn = BeamDynamics(space, grid, ops, ref, sec, loads, (FREE, FREE),
                           h=1e-6, variant="lu-l")
        st = dyn.initial_state()
        fields = dyn._collocate(st.c_ctrl, st.R, st.K, st.K_s)
        from igabeam.beam import translational_rhs
        psi = translational_rhs(fields, sec, loads.distributed_force(
            ref.arc_positions, 0.0))
        ends = dyn._end_data(fields, 0.0, st.v_ctrl, st.w_ctrl, 1e-12)
        b = dyn.rhs_translational(psi, ends, st.v_ctrl, st.w_ctrl,
                                  st.al_ctrl, 1e-12)
        assert np.allclose(b[1:-1], g)


class TestRotationalSolves:
    def setup_spin(self, w_spin, variant="lu-l"):
        space, grid, ops = make_ops(4, 11)
        ref = ReferenceConfiguration.straight(ops, grid, 1.0)
        sec = direct_section(1.0, [1e4, 1e4, 1e4], [500.0, 500.0, 500.0],
                             [10.0, 10.0, 10.0])
        dyn = BeamDynamics(space, grid, ops, ref, sec, Loads(), (FREE, FREE),
                           h=1e-5, variant=variant)
        w0 = np.tile(w_spin, (11, 1))
        return dyn, w0

    def test_gyroless_operator_is_inertia(self):
        dyn, _ = self.setup_spin([0.0, 0.0, 0.0])
        st = dyn.initial_state()
        fields = dyn._collocate(st.c_ctrl, st.R, st.K, st.K_s)
        chi = np.tile([0.1, -0.2, 0.3], (11, 1))
        ends = dyn._end_data(fields, 0.0, st.v_ctrl, st.w_ctrl, dyn.h**2)
        b = dyn.rhs_rotational_linearized(fields, chi, ends, st.w_ctrl,
                                          st.al_ctrl, dyn.h**2)
        # interior rows: j^-1 chi with j = J (identity rotations)
        expected = chi[1:-1] / 10.0
        assert np.allclose(b[1:-1], expected, atol=1e-15)

    def test_torque_free_principal_spin_gives_zero(self):
        # rigid steady spin about a principal axis: alpha = 0
        dyn, w0 = self.setup_spin([0.0, 0.0, 2.0])
        st = dyn.initial_state(w0_pts=w0)
        assert np.abs(st.al_ctrl).max() < 1e-9

    def test_spherical_inertia_kills_gyroscopic_rhs(self):
        dyn, w0 = self.setup_spin([1.0, -2.0, 0.5])
        st = dyn.initial_state(w0_pts=w0)
        # spherical inertia: w x (J w) = 0 for any w; unloaded -> alpha = 0
        assert np.abs(st.al_ctrl).max() < 1e-9

    def test_newton_tangent_matches_finite_differences(self):
        rng = np.random.RandomState(5)
        h = 1e-3
        j = exp_so3(rng.normal(size=3))
        j = j @ np.diag([1.0, 2.0, 3.0]) @ j.T
        wp = rng.normal(size=3)
        chi = rng.normal(size=3)

        def residual(al):
            wc = wp + 0.5 * h * al
            return j @ al + np.cross(wc, j @ wc) - chi

        al0 = rng.normal(size=3)
        wc0 = wp + 0.5 * h * al0
        T = j + 0.5 * h * (skew(wc0) @ j - skew(j @ wc0))
        for k in range(3):
            e = np.zeros(3)
            e[k] = 1.0
            d = 1e-6
            fd = (residual(al0 + d * e) - residual(al0 - d * e)) / (2 * d)
            assert np.abs(fd - T @ e).max() / np.abs(T).max() < 1e-6

    def test_newton_linear_problem_single_iteration(self):
        # omega_p = 0 makes the rotational balance linear: 1 iteration
        dyn, _ = self.setup_spin([0.0, 0.0, 0.0], variant="lu-nl")
        loads = Loads(end_couple=(lambda t: np.zeros(3),
                                  lambda t: np.array([0.0, 0.0, 1.0])))
        dyn.loads = loads
        st = dyn.initial_state()
        st, stats = dyn.step(st)
        assert stats.newton_iterations == 1


class TestStepConsistency:
    def test_p1_lumped_step_is_pointwise_update(self):
        # p=1 clamped-clamped: M = I, so the multicorrector reproduces the
        # pointwise explicit update in a single pass
        space, grid, ops = make_ops(1, 5)
        ref = ReferenceConfiguration.straight(ops, grid, 1.0)
        sec = square_section(0.01, 210e9, 0.2, 7800.0)
        g = np.array([0.0, 0.0, -9.81])
        loads = Loads(distributed_force=lambda s, t: np.tile(sec.mu * g,
                                                             (s.size, 1)))
        dyn = BeamDynamics(space, grid, ops, ref, sec, loads,
                           (CLAMPED, CLAMPED), h=1e-7, variant="lu-l")
        assert np.allclose(dyn.mass.M_a, np.eye(5))
        st = dyn.initial_state()
        st1, stats = dyn.step(st)
        assert stats.corrector_passes == 2  # one pass per field solve
        assert np.allclose(st1.a_ctrl[1:-1], g, atol=1e-12)

    def test_lu_nl_many_passes_matches_cn_nl(self):
        # tiny h: the lumped iteration at r=200 converges to the consistent
        # solve; accelerations match to 1e-9 relative after 2 steps
        mc = MulticorrectorSettings(tol=1e-16, max_passes=200)
        results = {}
        for variant in ("cn-nl", "lu-nl"):
            dyn, ref, sec = cantilever_dynamics(p=4, nb=11, h=1e-9,
                                                variant=variant,
                                                mc=mc if variant == "lu-nl" else None)
            st = dyn.initial_state()
            for _ in range(2):
                st, _ = dyn.step(st)
            results[variant] = (st.a_ctrl.copy(), st.al_ctrl.copy())
        for k in range(2):
            a_cn = results["cn-nl"][k]
            a_lu = results["lu-nl"][k]
            scale = np.abs(a_cn).max()
            assert np.abs(a_lu - a_cn).max() <= 1e-9 * max(scale, 1.0)

    def test_cross_variant_tip_agreement_short_run(self):
        # 2 ms of the cantilever: consistent vs fully explicit within 1e-3
        tips = {}
        for variant in ("cn-nl", "lu-l"):
            dyn, ref, _ = cantilever_dynamics(p=4, nb=21, h=1e-6,
                                              variant=variant)
            st = dyn.initial_state()
            trace = []
            for _ in range(2000):
                st, _ = dyn.step(st)
                trace.append(st.c_ctrl[-1].copy())
            tips[variant] = np.array(trace)
        scale = np.abs(tips["cn-nl"] - tips["cn-nl"][0]).max()
        dev = np.abs(tips["cn-nl"] - tips["lu-l"]).max()
        assert dev < 1e-3 * scale

    def test_nonfinite_state_raises_solver_error(self):
        # way above the stability limit: the guard must flag the blow-up
        dyn, _, _ = cantilever_dynamics(p=4, nb=21, h=1e-3)
        st = dyn.initial_state()
        with pytest.raises(SolverError):
            for _ in range(200):
                st, _ = dyn.step(st)
