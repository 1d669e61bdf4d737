"""Coupled phonon-phason elastodynamics.

Phonons obey a wave-type equation; phasons a telegraph-type equation (waves
damped in time, finite propagation speed) whose damping is set by a symmetric
tensor of friction coefficients.  The package provides material construction
and validation, pointwise constitutive relations, closed-form 1D dispersion
analysis, the anisotropic quadratic eigenvalue problem of the coupled plane-
wave symbol, a periodic-grid time-domain solver with energy diagnostics, and
a CLI around JSON/CSV/raw-snapshot file formats.
"""

__version__ = "0.1.0"

from .errors import (EigensolverFailure, IndefiniteFriction,
                     MissingSourceDerivative, NonPositiveDensity,
                     NumericalBlowup, OutOfRegime, QcdynError, SchemaError,
                     ShapeMismatch, SingularFriction, SymmetryViolation)
from .material import (Dims, EnergyPdReport, MaterialSpec, build_material,
                       char_time_tensor, check_energy_pd, identity_rank4,
                       isotropic_c, scalar_model, sym_identity_rank4)
from .constitutive import (EnergyBreakdown, PointState, StressPair,
                           energy_density, friction_force, momenta, stresses)
from .dispersion_scalar import (DispersionRoot, Regime, classify_regime,
                                critical_thresholds, diffusion_dispersion,
                                modal_solution, phase_velocity,
                                telegraph_dispersion)
from .dispersion_aniso import (AcousticSymbol, BranchSet, SweepResult,
                               assemble_symbol, solve_branches, sweep)
from .solver import (Grid, RunResult, Scheme, SimState, SolverConfig,
                     SourceSet, Spatial, energy_report, field_equation_residual,
                     gaussian_state, run, single_mode_state, stability_bound,
                     step_compatible, step_incompatible, zero_state)
from .limits import (LimitStudy, LimitsReport, diffusion_limit_study,
                     run_limit_studies, wave_limit_study)
