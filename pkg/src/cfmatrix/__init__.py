"""Rational matrix functions r(A)v via continued-fraction block systems."""

from . import confrac, errors, linalg, matfun, pencil, solvers
from .confrac import (
    ContinuedFraction,
    Polynomial,
    RationalFunction,
    approximant,
    builder_exp,
    builder_sqrt1p,
    cf_from_rational,
    contract,
    equivalence_transform,
    eval_backward,
    invert,
    tails,
)
from .linalg import CFOperator, laplace2d, random_mmatrix
from .matfun import FunctionSpec, SolverConfig, cf_apply, invsqrt_pencil, pfe_apply
from .pencil import (
    PartialFractionExpansion,
    PolyTridiag,
    Tridiag,
    TridiagPencil,
    entry11_inverse,
    pencil_from_cfraction,
    pencil_from_contracted,
    pencil_from_longdiv,
    pfe,
    poles,
)
from .solvers import SolveReport, gmres, ilu0, shifted_solver, tridiag_solve

__version__ = "0.1.0"
