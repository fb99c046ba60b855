"""Benchmark scenario definitions, the simulation runner, and global
diagnostics (momenta via quadrature of the interpolated fields).

Configs are flat, unit-suffixed key-value structures; loads can be constants
or piecewise-linear time tables. Everything is deterministic: no RNG
anywhere in the pipeline.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .beam import Loads, ReferenceConfiguration
from .rotations import cross3
from .sections import SectionProperties, circle_section, direct_section, square_section
from .solvers import (
    BC_PRESETS,
    BeamDynamics,
    MulticorrectorSettings,
    NewtonSettings,
    SolverVariant,
)
from .splines import (
    SplineSpace,
    collocation_operators,
    greville_abscissae,
    make_open_uniform_knots,
)


class ConfigError(ValueError):
    """Inconsistent or incomplete scenario configuration."""


@dataclass
class ScenarioConfig:
    """Complete description of one simulation run.

    Loads given as a 3-sequence are constant in time; a mapping with keys
    ``t_s`` and ``values`` is interpolated piecewise-linearly (clamped at the
    table ends). Gravity acts along -x3 on the distributed mass.
    """

    name: str = "custom"
    # geometry: a straight beam along `axis`, or an explicit polyline
    length_m: float = 1.0
    axis: tuple = (0.0, 1.0, 0.0)
    polyline_m: list | None = None
    # section and material
    section_shape: str = "square"  # square | circle | direct
    side_m: float | None = None
    diameter_m: float | None = None
    E_Pa: float | None = None
    nu: float | None = None
    rho_kgpm3: float | None = None
    torsion_model: str = "polar"
    shear_correction: float = 1.0
    mu_kgpm: float | None = None
    CN_N: tuple | None = None
    CM_Nm2: tuple | None = None
    J_kgm: tuple | None = None
    # boundary conditions per end
    bc_left: str = "clamped"
    bc_right: str = "free"
    # loads
    gravity_mps2: float = 0.0
    end_force_left_N: object = None
    end_force_right_N: object = None
    end_couple_left_Nm: object = None
    end_couple_right_Nm: object = None
    # initial conditions
    spin_radps: tuple | None = None          # rigid spin about the origin
    uniform_velocity_mps: tuple | None = None
    # discretization and solver
    p: int = 4
    n: int = 20                              # last collocation index (n+1 points)
    h_s: float = 1e-6
    T_s: float = 0.01
    variant: str = "lu-l"
    mc_tol: float = 1e-10
    mc_max_passes: int = 500
    mc_fixed_passes: int | None = None
    newton_tol: float = 1e-10
    newton_max_iterations: int = 12
    output_stride: int = 100
    store_snapshots: bool = False

    def __post_init__(self):
        # canonicalize sequence-valued fields so configs compare equal after
        # a serialization round trip
        for key in ("axis", "spin_radps", "uniform_velocity_mps", "CN_N",
                    "CM_Nm2", "J_kgm"):
            v = getattr(self, key)
            if v is not None:
                setattr(self, key, tuple(float(x) for x in v))
        if self.polyline_m is not None:
            self.polyline_m = [[float(x) for x in row]
                               for row in self.polyline_m]
        for key in ("end_force_left_N", "end_force_right_N",
                    "end_couple_left_Nm", "end_couple_right_Nm"):
            v = getattr(self, key)
            if v is None:
                continue
            if isinstance(v, dict):
                setattr(self, key, {
                    "t_s": [float(x) for x in v["t_s"]],
                    "values": [[float(x) for x in row] for row in v["values"]],
                })
            else:
                setattr(self, key, tuple(float(x) for x in v))
        if self.T_s <= 0 or self.h_s <= 0:
            raise ConfigError("T_s and h_s must be positive")
        if self.output_stride < 1:
            raise ConfigError("output_stride must be >= 1")
        if self.p < 1 or self.n < self.p:
            raise ConfigError("need n >= p >= 1")
        if self.variant not in {v.value for v in SolverVariant}:
            raise ConfigError(f"unknown variant {self.variant!r}")
        for end in (self.bc_left, self.bc_right):
            if end not in BC_PRESETS:
                raise ConfigError(f"unknown boundary preset {end!r}")
        if self.section_shape not in ("square", "circle", "direct"):
            raise ConfigError(f"unknown section shape {self.section_shape!r}")
        if self.section_shape == "direct":
            if self.mu_kgpm is None or self.CN_N is None or self.CM_Nm2 is None \
                    or self.J_kgm is None:
                raise ConfigError("direct sections need mu_kgpm, CN_N, CM_Nm2, J_kgm")
        else:
            missing = [k for k in ("E_Pa", "nu", "rho_kgpm3") if getattr(self, k) is None]
            if missing:
                raise ConfigError(f"material constants missing: {missing}")
            if self.rho_kgpm3 <= 0 or self.E_Pa <= 0:
                raise ConfigError("material constants must be positive")


def _as_load_function(spec):
    """Constant 3-vector, piecewise-linear table, or None -> callable(t)."""
    if spec is None:
        zero = np.zeros(3)
        return lambda t: zero
    if isinstance(spec, dict):
        ts = np.asarray(spec["t_s"], dtype=float)
        vals = np.asarray(spec["values"], dtype=float)
        if vals.shape != (ts.size, 3):
            raise ConfigError("load table values must be (len(t_s), 3)")

        def table(t):
            return np.array([np.interp(t, ts, vals[:, k]) for k in range(3)])

        return table
    vec = np.asarray(spec, dtype=float)
    if vec.shape != (3,):
        raise ConfigError("constant loads must be 3-vectors")
    return lambda t: vec


def build_section(config: ScenarioConfig) -> SectionProperties:
    if config.section_shape == "square":
        if config.side_m is None:
            raise ConfigError("square sections need side_m")
        return square_section(config.side_m, config.E_Pa, config.nu,
                              config.rho_kgpm3, torsion=config.torsion_model,
                              shear_correction=config.shear_correction)
    if config.section_shape == "circle":
        if config.diameter_m is None:
            raise ConfigError("circular sections need diameter_m")
        return circle_section(config.diameter_m, config.E_Pa, config.nu,
                              config.rho_kgpm3, torsion=config.torsion_model,
                              shear_correction=config.shear_correction)
    return direct_section(config.mu_kgpm, config.CN_N, config.CM_Nm2,
                          config.J_kgm)


def build_simulation(config: ScenarioConfig):
    """Assemble the discretization and solver for a config; returns the
    dynamics object and the initial state."""
    space = SplineSpace(p=config.p,
                        knots=make_open_uniform_knots(config.p, config.n + 1))
    grid = greville_abscissae(space)
    section = build_section(config)

    if config.polyline_m is not None:
        ops0 = collocation_operators(space, grid, 1.0)
        ref0 = ReferenceConfiguration.from_polyline(ops0, grid, config.polyline_m)
        jac = np.linalg.norm(ops0.D1_param @ ref0.c_ctrl, axis=1)
        ops = collocation_operators(space, grid, jac)
        ref = ReferenceConfiguration.from_polyline(ops, grid, config.polyline_m)
    else:
        ops = collocation_operators(space, grid, config.length_m)
        ref = ReferenceConfiguration.straight(ops, grid, config.length_m,
                                              axis=config.axis)

    mu = section.mu
    if config.gravity_mps2:
        g_vec = np.array([0.0, 0.0, -config.gravity_mps2 * mu])

        def distributed(s, t):
            return np.tile(g_vec, (np.asarray(s).size, 1))
    else:
        def distributed(s, t):
            return np.zeros((np.asarray(s).size, 3))

    loads = Loads(
        distributed_force=distributed,
        end_force=(_as_load_function(config.end_force_left_N),
                   _as_load_function(config.end_force_right_N)),
        end_couple=(_as_load_function(config.end_couple_left_Nm),
                    _as_load_function(config.end_couple_right_Nm)),
    )
    bc = (BC_PRESETS[config.bc_left], BC_PRESETS[config.bc_right])
    dyn = BeamDynamics(
        space, grid, ops, ref, section, loads, bc, h=config.h_s,
        variant=SolverVariant(config.variant),
        multicorrector=MulticorrectorSettings(
            tol=config.mc_tol, max_passes=config.mc_max_passes,
            fixed_passes=config.mc_fixed_passes),
        newton=NewtonSettings(tol=config.newton_tol,
                              max_iterations=config.newton_max_iterations))

    v0 = w0 = None
    if config.spin_radps is not None:
        w = np.asarray(config.spin_radps, dtype=float)
        pts = ops.D0 @ ref.c_ctrl
        v0 = cross3(np.tile(w, (pts.shape[0], 1)), pts)
        w0 = np.tile(w, (pts.shape[0], 1))
    if config.uniform_velocity_mps is not None:
        u = np.asarray(config.uniform_velocity_mps, dtype=float)
        v0 = (0.0 if v0 is None else v0) + np.tile(u, (ops.n, 1))
    state = dyn.initial_state(v0_pts=v0, w0_pts=w0)
    return dyn, state


@dataclass
class TimeSeriesOutput:
    """Sampled probe history plus solver statistics for one run."""

    t: np.ndarray
    tip_displacement: np.ndarray
    newton_iterations: np.ndarray
    corrector_passes: np.ndarray
    steps: int
    wall_time_s: float
    config: ScenarioConfig
    snapshots: list = field(default_factory=list)


def run_simulation(config: ScenarioConfig, n_steps: int | None = None,
                   state_hook=None) -> TimeSeriesOutput:
    """Run a scenario to T_s (or a given number of steps).

    ``state_hook(dyn, state)``, when given, is called at every sampled step
    for custom diagnostics.
    """
    dyn, state = build_simulation(config)
    if n_steps is None:
        n_steps = int(round(config.T_s / config.h_s))
    stride = config.output_stride
    tip0 = state.c_ctrl[-1].copy()

    ts = [state.t]
    tips = [state.c_ctrl[-1] - tip0]
    newts = [0]
    passes = [0]
    snapshots = []
    if config.store_snapshots:
        snapshots.append((state.t, state.c_ctrl.copy()))
    if state_hook is not None:
        state_hook(dyn, state)

    t0 = time.perf_counter()
    for k in range(1, n_steps + 1):
        state, stats = dyn.step(state)
        if k % stride == 0 or k == n_steps:
            ts.append(state.t)
            tips.append(state.c_ctrl[-1] - tip0)
            newts.append(stats.newton_iterations)
            passes.append(stats.corrector_passes)
            if config.store_snapshots:
                snapshots.append((state.t, state.c_ctrl.copy()))
            if state_hook is not None:
                state_hook(dyn, state)
    wall = time.perf_counter() - t0

    return TimeSeriesOutput(
        t=np.array(ts), tip_displacement=np.array(tips),
        newton_iterations=np.array(newts, dtype=int),
        corrector_passes=np.array(passes, dtype=int),
        steps=n_steps, wall_time_s=wall, config=config, snapshots=snapshots)


# -- global diagnostics ------------------------------------------------------

def _quadrature_weights(s):
    w = np.zeros_like(s)
    w[1:] += 0.5 * np.diff(s)
    w[:-1] += 0.5 * np.diff(s)
    return w


def linear_momentum(dyn: BeamDynamics, state) -> np.ndarray:
    """Integral of mu*v over the beam (trapezoid over collocation points)."""
    w = _quadrature_weights(dyn.ref.arc_positions)
    v = dyn.ops.D0 @ state.v_ctrl
    return dyn.section.mu * (w[:, None] * v).sum(axis=0)


def angular_momentum(dyn: BeamDynamics, state) -> np.ndarray:
    """Angular momentum about the instantaneous mass center."""
    w = _quadrature_weights(dyn.ref.arc_positions)
    c = dyn.ops.D0 @ state.c_ctrl
    v = dyn.ops.D0 @ state.v_ctrl
    omega = dyn.ops.D0 @ state.w_ctrl
    mu = dyn.section.mu
    mass = mu * w.sum()
    center = mu * (w[:, None] * c).sum(axis=0) / mass
    from .beam import spatial_inertia

    j = spatial_inertia(state.R, dyn.section.inertia)
    spin = np.einsum("nij,nj->ni", j, omega)
    orbital = mu * cross3(c - center, v)
    return (w[:, None] * (orbital + spin)).sum(axis=0)


def kinetic_energy(dyn: BeamDynamics, state) -> float:
    w = _quadrature_weights(dyn.ref.arc_positions)
    v = dyn.ops.D0 @ state.v_ctrl
    omega = dyn.ops.D0 @ state.w_ctrl
    from .beam import spatial_inertia

    j = spatial_inertia(state.R, dyn.section.inertia)
    e_tr = 0.5 * dyn.section.mu * (v * v).sum(axis=1)
    e_rot = 0.5 * np.einsum("ni,nij,nj->n", omega, j, omega)
    return float((w * (e_tr + e_rot)).sum())


# -- paper benchmark presets --------------------------------------------------

def preset_cantilever(**overrides) -> ScenarioConfig:
    """Straight steel cantilever, suddenly applied constant tip force."""
    cfg = dict(
        name="cantilever", length_m=1.0, section_shape="square", side_m=0.01,
        E_Pa=210e9, nu=0.2, rho_kgpm3=7800.0,
        bc_left="clamped", bc_right="free",
        end_force_right_N=(0.0, 0.0, -100.0),
        p=4, n=20, h_s=1e-6, T_s=0.5, variant="lu-l", output_stride=1000)
    cfg.update(overrides)
    return ScenarioConfig(**cfg)


def preset_pendulum(**overrides) -> ScenarioConfig:
    """Soft rubber-like pendulum swinging under self weight, hinged end."""
    cfg = dict(
        name="pendulum", length_m=1.0, section_shape="circle", diameter_m=0.01,
        E_Pa=5e6, nu=0.5, rho_kgpm3=1100.0, gravity_mps2=9.81,
        bc_left="hinged", bc_right="free",
        p=4, n=30, h_s=1e-5, T_s=1.0, variant="lu-l", output_stride=1000)
    cfg.update(overrides)
    return ScenarioConfig(**cfg)


# Default flying-beam load history: a 2.5 s triangular pulse of a spatially
# fixed end force and couple, then free flight. The magnitudes and the kink
# angle follow the classical free-flying beam setup; they are assumptions of
# this implementation (configurable), not normative values.
_FLY_T = [0.0, 1.25, 2.5]
_FLY_FORCE = [[0.0, 0.0, 0.0], [0.0, 0.0, 200.0], [0.0, 0.0, 0.0]]
_FLY_COUPLE = [[0.0, 0.0, 0.0], [100.0, -50.0, 150.0], [0.0, 0.0, 0.0]]


def flying_polyline():
    kink = np.sin(np.pi / 4)
    return [[0.0, 0.0, 0.0], [0.0, 6.0, 0.0],
            [4.0 * kink, 6.0 + 4.0 * kink, 0.0]]


def preset_flying(**overrides) -> ScenarioConfig:
    """Free-flying kinked beam: pulsed end loads, then momentum-conserving
    flight. Section constants are given directly."""
    cfg = dict(
        name="flying", section_shape="direct", mu_kgpm=1.0,
        CN_N=(1e4, 1e4, 1e4), CM_Nm2=(500.0, 500.0, 500.0),
        J_kgm=(10.0, 10.0, 10.0),
        polyline_m=flying_polyline(),
        bc_left="free", bc_right="free",
        end_force_left_N={"t_s": _FLY_T, "values": _FLY_FORCE},
        end_couple_left_Nm={"t_s": _FLY_T, "values": _FLY_COUPLE},
        p=6, n=60, h_s=5e-6, T_s=5.0, variant="lu-l", output_stride=1000)
    cfg.update(overrides)
    return ScenarioConfig(**cfg)


def preset_spinning(omega3_radps: float = 0.2 * np.pi,
                    **overrides) -> ScenarioConfig:
    """Hinged steel beam spinning about x3 in a gravity field."""
    cfg = dict(
        name="spinning", length_m=1.0, section_shape="square", side_m=0.0175,
        E_Pa=210e9, nu=0.2, rho_kgpm3=7800.0, gravity_mps2=9.81,
        bc_left="hinged", bc_right="free",
        spin_radps=(0.0, 0.0, omega3_radps),
        p=4, n=20, h_s=1e-6, T_s=1.0, variant="lu-l", output_stride=1000)
    cfg.update(overrides)
    return ScenarioConfig(**cfg)


PRESETS = {
    "cantilever": preset_cantilever,
    "pendulum": preset_pendulum,
    "flying": preset_flying,
    "spinning": preset_spinning,
}


def preset(name: str, **overrides) -> ScenarioConfig:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; "
                          f"available: {sorted(PRESETS)}") from None
    return factory(**overrides)
