"""Explicit isogeometric-collocation dynamics of geometrically exact,
shear-deformable beams: consistent and lumped (predictor-multicorrector)
solver variants with SO(3)-consistent central-difference time stepping."""

from .beam import (
    CollocatedFields,
    Loads,
    NeumannOperators,
    ReferenceConfiguration,
    material_strains,
    neumann_operators,
    rotational_rhs,
    spatial_inertia,
    strain_rates_of_change,
    translational_rhs,
)
from .rotations import axial, dexp_so3, exp_so3, skew, update_rotation
from .sections import (
    SectionProperties,
    circle_section,
    direct_section,
    square_section,
)
from .solvers import (
    BC_PRESETS,
    CLAMPED,
    FREE,
    HINGED,
    BeamDynamics,
    BoundaryCondition,
    MassBlocks,
    MulticorrectorSettings,
    NewtonSettings,
    SolverError,
    SolverVariant,
    StepStats,
    assemble_mass_blocks,
    multicorrector_solve,
    spectral_radius,
)
from .splines import (
    CollocationGrid,
    CollocationOperators,
    SplineSpace,
    collocation_operators,
    eval_basis,
    greville_abscissae,
    make_open_uniform_knots,
)
from .stepping import (
    KinematicState,
    StepSize,
    correct_velocities,
    predict_increments,
    update_configuration,
)

__version__ = "0.1.0"
