"""homflow: effective coefficients and scaled-error verification for
elliptic flow problems in periodic media.

The toolkit solves periodic unit-cell problems, assembles effective
tensors and homogenized sources (including micro-structured fluxes that
converge only weakly), solves fine-scale and homogenized boundary-value
problems side by side, and verifies the scaled L2/H1/energy convergence
rates against a closed-form 1D benchmark.
"""

from .bench import (AnalyticOracle1D, RateFit, SweepPlan, fit_rate, oracle_eval,
                    predicted_constants, run_case, run_sweep, weak_averaging_rate)
from .cell import (CellSolution, EffectiveModel, MassBalance, SourceCorrector,
                   build_effective_model, effective_source, effective_tensor,
                   mass_balance_check, solve_cell, solve_corrector,
                   solve_source_corrector, voigt_reuss_bounds)
from .corrector import (ErrorReport, assemble_p1, energy_gap, scaled_h1_error,
                        scaled_l2_error)
from .errors import (CrossCheckFailure, DegenerateFit, EllipticityViolation,
                     HomflowError, NoConvergence, ResolutionError,
                     ValidationError, ZeroPivot)
from .fields import (CoefficientField, FieldCatalogEntry, FIELD_CATALOG,
                     TwoScaleSource, catalog_field, make_checkerboard,
                     make_constant, make_cosine1d, make_cosine2d, make_cross2d,
                     make_laminate, validate)
from .grid import (MacroGrid, ScalarField, UnitCellGrid, VectorField, gradient,
                   integrate, sample_periodic)
from .linalg import SolveOptions, SparseSymMatrix, cg_solve, tridiag_solve
from .macro import (FineProblem, HomogenizedProblem, boundary_flux_balance,
                    solve_fine, solve_homogenized)

__version__ = "0.1.0"
