import numpy as np
import pytest

from igabeam.beam import Loads, ReferenceConfiguration, material_strains
from igabeam.rotations import exp_so3
from igabeam.sections import square_section
from igabeam.solvers import CLAMPED, FREE, BeamDynamics
from igabeam.splines import (
    SplineSpace,
    collocation_operators,
    greville_abscissae,
    make_open_uniform_knots,
)
from igabeam.stepping import (
    KinematicState,
    StepSize,
    correct_velocities,
    fit_initial_rates,
    predict_increments,
    state_at_rest,
    update_configuration,
)


def setup(p=3, nb=9, L=1.0):
    space = SplineSpace(p=p, knots=make_open_uniform_knots(p, nb))
    grid = greville_abscissae(space)
    ops = collocation_operators(space, grid, L)
    ref = ReferenceConfiguration.straight(ops, grid, L)
    return space, grid, ops, ref


def test_step_size_positive():
    with pytest.raises(ValueError):
        StepSize(h=0.0)


class TestPredictor:
    def test_translation_formula(self):
        _, _, ops, ref = setup()
        st = state_at_rest(ref, 9)
        st.v_ctrl[:] = [1.0, 0.0, 0.0]
        eta, theta = predict_increments(st, 0.01)
        assert np.allclose(eta, [0.01, 0.0, 0.0])
        assert np.all(theta == 0.0)

    def test_rotation_formula(self):
        _, _, ops, ref = setup()
        st = state_at_rest(ref, 9)
        st.al_ctrl[:] = [0.0, 0.0, 2.0]
        eta, theta = predict_increments(st, 0.01)
        assert np.all(eta == 0.0)
        assert np.allclose(theta, [0.0, 0.0, 1e-4])

    def test_zero_rates_zero_increments(self):
        _, _, ops, ref = setup()
        st = state_at_rest(ref, 9)
        eta, theta = predict_increments(st, 0.01)
        assert np.all(eta == 0.0) and np.all(theta == 0.0)

    def test_translational_time_reversibility(self):
        # step with (v, a), then with (-v - h a, a): centroids return exactly
        _, _, ops, ref = setup()
        rng = np.random.RandomState(0)
        st = state_at_rest(ref, 9)
        st.v_ctrl = rng.normal(size=st.v_ctrl.shape)
        st.a_ctrl = rng.normal(size=st.a_ctrl.shape)
        h = 0.01
        c0 = st.c_ctrl.copy()
        eta1, _ = predict_increments(st, h)
        st.c_ctrl = st.c_ctrl + eta1
        st.v_ctrl = -st.v_ctrl - h * st.a_ctrl
        eta2, _ = predict_increments(st, h)
        assert np.abs(st.c_ctrl + eta2 - c0).max() < 1e-15


class TestConfigurationUpdate:
    def test_zero_increments_noop(self):
        _, _, ops, ref = setup()
        st = state_at_rest(ref, 9)
        z = np.zeros_like(st.c_ctrl)
        c, R, K, K_s = update_configuration(st, z, z, ops)
        assert np.all(c == st.c_ctrl)
        assert np.all(R == st.R)
        assert np.all(K == st.K)
        assert np.all(K_s == st.K_s)

    def test_rigid_translation_leaves_strains(self):
        _, _, ops, ref = setup()
        st = state_at_rest(ref, 9)
        eta = np.tile([0.3, -0.1, 2.0], (9, 1))
        c, R, K, K_s = update_configuration(st, eta, np.zeros_like(eta), ops)
        gamma, kappa = material_strains(ops.D1 @ c, R, K, ref)
        # bounded by |translation| times the D1 row-sum roundoff
        assert np.abs(gamma).max() < 1e-8
        assert np.abs(kappa).max() == 0.0

    def test_uniform_rotation_objectivity_second_order(self):
        # linearized rigid-rotation increments leave the strains invariant up
        # to O(delta^2)
        _, grid, ops, ref = setup(p=4, nb=12)
        axis = np.array([0.0, 0.0, 1.0])
        defects = []
        for delta in (1e-3, 5e-4, 2.5e-4):
            st = state_at_rest(ref, 12)
            theta = np.tile(delta * axis, (12, 1))
            eta = delta * np.cross(axis, st.c_ctrl)  # linearized spin of c
            c, R, K, K_s = update_configuration(st, eta, theta, ops)
            gamma, kappa = material_strains(ops.D1 @ c, R, K, ref)
            defects.append(max(np.abs(gamma).max(), np.abs(kappa).max()))
        rates = np.diff(np.log(defects)) / np.diff(np.log([1e-3, 5e-4, 2.5e-4]))
        assert np.all(rates > 1.9)

    def test_exact_rotation_increment_is_exactly_objective(self):
        _, _, ops, ref = setup(p=4, nb=12)
        st = state_at_rest(ref, 12)
        rot = exp_so3(np.array([0.0, 0.0, 0.2]))
        theta = np.tile([0.0, 0.0, 0.2], (12, 1))
        eta = st.c_ctrl @ rot.T - st.c_ctrl
        c, R, K, K_s = update_configuration(st, eta, theta, ops)
        gamma, kappa = material_strains(ops.D1 @ c, R, K, ref)
        assert np.abs(gamma).max() < 1e-13
        assert np.abs(kappa).max() < 1e-13


class TestVelocityCorrector:
    def test_trapezoid_on_constants(self):
        _, _, ops, ref = setup()
        st = state_at_rest(ref, 9)
        a = np.tile([2.0, 0.0, 0.0], (9, 1))
        st.a_ctrl = a.copy()
        h = 0.1
        v1, w1 = correct_velocities(st, a, np.zeros_like(a), h)
        assert np.allclose(v1, h * a)  # v grows by h*a per step for const a
        assert np.all(w1 == 0.0)

    def test_zero_acceleration_keeps_velocity(self):
        _, _, ops, ref = setup()
        st = state_at_rest(ref, 9)
        st.v_ctrl[:] = [0.0, 1.5, 0.0]
        z = np.zeros_like(st.v_ctrl)
        v1, _ = correct_velocities(st, z, z, 0.1)
        assert np.allclose(v1, st.v_ctrl)


class TestInitialConditions:
    def make_dyn(self, variant="lu-l", v0=None, w0=None, p=4, nb=11):
        space, grid, ops, ref = setup(p=p, nb=nb)
        sec = square_section(0.01, 210e9, 0.2, 7800.0)
        dyn = BeamDynamics(space, grid, ops, ref, sec, Loads(),
                           (FREE, FREE), h=1e-6, variant=variant)
        return dyn, grid

    def test_zero_initial_fields(self):
        dyn, _ = self.make_dyn()
        st = dyn.initial_state()
        for arr in (st.v_ctrl, st.w_ctrl, st.a_ctrl, st.al_ctrl):
            assert np.abs(arr).max() < 1e-12

    def test_constant_spin_reproduced_exactly(self):
        dyn, grid = self.make_dyn()
        w0 = np.tile([0.0, 0.0, 20 * np.pi], (grid.n_points, 1))
        st = dyn.initial_state(w0_pts=w0)
        assert np.allclose(st.w_ctrl, [0.0, 0.0, 20 * np.pi], atol=1e-9)

    def test_linear_velocity_profile_interpolated(self):
        dyn, grid = self.make_dyn()
        v0 = np.outer(grid.points, [0.0, 0.0, -3.0])
        st = dyn.initial_state(v0_pts=v0)
        assert np.abs(dyn.ops.D0 @ st.v_ctrl - v0).max() < 1e-12


class TestFreeFall:
    @pytest.mark.parametrize("variant", ["lu-l", "lu-nl", "cn-nl"])
    def test_rigid_free_fall_matches_closed_form(self, variant):
        # unconstrained beam under uniform gravity: the discrete scheme is
        # exact for a quadratic-in-time rigid motion
        space, grid, ops, ref = setup(p=4, nb=11)
        sec = square_section(0.01, 210e9, 0.2, 7800.0)
        g = np.array([0.0, 0.0, -9.81])
        loads = Loads(distributed_force=lambda s, t: np.tile(sec.mu * g,
                                                             (s.size, 1)))
        dyn = BeamDynamics(space, grid, ops, ref, sec, loads, (FREE, FREE),
                           h=1e-6, variant=variant)
        st = dyn.initial_state()
        for _ in range(100):
            st, _ = dyn.step(st)
        exact = ref.c_ctrl + 0.5 * g * st.t**2
        assert np.abs(st.c_ctrl - exact).max() < 1e-10
        assert np.abs(st.v_ctrl - g * st.t).max() < 1e-8
