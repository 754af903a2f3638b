"""BPX multilevel preconditioning for P1 finite elements on Freudenthal meshes of [0, 1]^d."""
from .assembly import DofMap, assemble, load_vector, local_mass, local_stiffness
from .bpx import VARIANTS, BpxOperator, KappaEstimate, apply_bpx, kappa, psc_infimum, psc_quadratic_form
from .errors import (BpxhdError, BudgetExceededError, DegenerateGeometryError, DomainError,
                     IndefiniteError, NotSPDError, SolverError)
from .interpolation import P1Function, build_averaging_sets, dual_function, interp_error, interpolate
from .krylov import SolveReport, pcg
from .mesh import Mesh, build, locate
from .multilevel import Hierarchy, build_hierarchy, prolongation_matrix
from .simplex import Simplex, freudenthal_simplex, reference_simplex, regular_simplex
from .spectral import OperatorPair, dense_generalized_eig, lanczos_extremes
from .verification import ConstantReport, run_checks, sweep

__version__ = "0.1.0"
