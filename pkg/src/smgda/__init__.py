"""Retraction-free smoothed manifold GDA (sm-MGDA) for minimax problems."""
from .kernels import BACKEND
from .manifolds import GeneralizedStiefel, ManifoldKit, Oblique, Stiefel, make_kit
from .penalty import PenalizedProblem, lipschitz_constants, make_penalized
from .problems import (
    MinimaxProblem,
    QuadraticInstance,
    generate_quadratic,
    make_problem,
)
from .prox import Regularizer, project_ball

__version__ = "0.1.0"
