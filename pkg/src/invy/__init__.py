"""Exact dynamics of a five-level inverted-Y atom in a Kerr cavity with time-dependent coupling."""

from .dynamics import (
    DegenerateRoots,
    ManifoldSolution,
    StateTrajectory,
    evaluate_amplitudes,
    evolve_state,
    integrate_manifold_ode,
    solve_manifold_closed_form,
    uniform_grid,
)
from .model import (
    CoherentWeights,
    ManifoldCoefficients,
    ModelParams,
    build_manifold_coefficients,
    choose_cutoff,
    coherent_weights,
)
from .observables import (
    FieldDensityMatrix,
    PhaseDistribution,
    level_populations,
    phase_distribution,
    phase_moment,
    phase_variance,
    population_inversion,
    reduced_field_density,
)
from .quartic import QuarticRoots, solve_quartic_closed_form, solve_quartic_companion

__version__ = "0.1.0"
