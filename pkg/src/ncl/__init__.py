"""Constrained-optimization toolkit: an augmented-Lagrangian outer loop whose
subproblems carry explicit residual variables and are solved by a structured
primal-dual interior-point method, plus a least-squares pathway, a tax-policy
problem generator, a small modeling language, and a benchmarking harness."""

from .driver import (LOG_HEADER, LogRow, NclOptions, OuterState,
                     check_termination, format_log_row, mu_init_schedule,
                     ncl_solve, update_outer, warm_start_payload)
from .dsl import build_problem, diff, evaluate, load_model, parse_model
from .errors import (BadDimension, DegenerateMetric, DomainError,
                     EvaluationError, NclError, NoConstraints,
                     NonConstantExponent, NonInterior, NonPositiveRho,
                     ParseError, RegularizationFailed, SingularSystem,
                     SubsolverFailure, UndeclaredVariable, UnknownProblem)
from .interior import (IpOptions, IpState, KktSystem, SubResult, SubStats,
                       assemble_kkt, regularize, solve_kkt, solve_subproblem,
                       step_lengths)
from .model import (EvalCounters, Point, Problem, SlackProblem,
                    as_minimization, root_problem, to_slack_form)
from .nls import feasibility_residual, make_nc0, ncl_nls_solve
from .subproblem import NclProblem, make_ncl
from .tax import TaxConfig, TaxDims, build_tax_problem, dims as tax_dims, utility

__version__ = "0.1.0"
