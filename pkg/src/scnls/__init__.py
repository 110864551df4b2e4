"""Semiclassical nonlinear Schrödinger equations with quadratic potentials.

Exact algebra for quadratic potentials, Heisenberg observables, split-step
solvers, scattering states and a harness of convergence studies.
"""

from .errors import (
    AssumptionError, BoundaryMassError, ConfigError, ConvergenceError, GridError, ResolutionError,
    ScnlsError, SingularTimeError, SolverDivergenceError,
)
from .potential import (
    CanonicalPotential, PhasePoint, RawPotential, bicharacteristic, canonical, eval_potential,
    eval_raw, gh, moving_frame_transform, reduce_potential, stark_gauge,
    validate_potential_assumption,
)
from .spectral import (
    GaussianProfile, Grid, SigmaTriple, WaveField, concentrate_profile, make_grid, norms,
    spectral_derivative,
)
from .observables import (
    ObservableSpec, apply_observable, apply_observable_factored, commutator_residual,
    dispersion_factor, eikonal_residual, inverse_observable_reconstruction, lemma_p_integral,
    modified_gn_ratio,
)
from .propagators import (
    EvolutionProblem, GeneralPotential, StepperConfig, energy, evolve, free_group,
    linear_asymptotic_solution,
)
from .scattering import ScatteringResult, asymptotic_completeness_check, scattering_state

__version__ = "0.1.0"
