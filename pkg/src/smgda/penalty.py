"""Exact-penalty reformulation via constraint dissolving.

``f_pen(x, y) = f(A(x), y) + (rho/4) ||c(x)||^2`` minimized over the ball
``||x||_F <= C``, with ``f_pen_r = f_pen - h``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .manifolds import ManifoldKit, Stiefel
from .problems import Lipschitz, MinimaxProblem


@dataclass(frozen=True)
class PenaltyLipschitz:
    l_xx: float
    l_xy: float
    l_yx: float
    l_yy: float
    lbar_x: float

    @property
    def l(self) -> float:
        return max(self.l_xx, self.l_xy, self.l_yx, self.l_yy)


def lipschitz_constants(L: Lipschitz, rho: float, C: float, lbar_x: float) -> PenaltyLipschitz:
    """Lipschitz constants of the penalized gradient on ``X x Y`` (Stiefel)."""
    cross = 1.5 * (1.0 + C * C)
    l_xx = 3.0 * C * lbar_x + 2.25 * (1.0 + C * C) ** 2 * L.L_xx + rho * (3.0 * C * C + 1.0)
    return PenaltyLipschitz(
        l_xx=l_xx,
        l_xy=cross * L.L_xy,
        l_yx=cross * L.L_yx,
        l_yy=L.L_yy,
        lbar_x=lbar_x,
    )


def dissolved_radius(C: float) -> float:
    """Bound on ``||A(x)||`` over the ball of radius ``C`` (Stiefel)."""
    return 0.5 * C * (3.0 + C * C)


def quadratic_lbar_x(problem: MinimaxProblem, C: float) -> float:
    """Analytic bound on ``||grad_x f(A(x), y)||`` for the quadratic benchmarks."""
    inst = problem.quadratic
    if inst is None:
        raise ValueError("analytic bound only available for quadratic instances")
    nq = float(np.linalg.norm(inst.Q, 2))
    na = float(np.linalg.norm(inst.A, 2))
    ax = dissolved_radius(C)
    if inst.mu_y > 0:
        # iterates stay near y*(x) = A^T x / mu_y
        radius_y = na * ax / inst.mu_y
    else:
        radius_y = problem.h.radius
    return nq * ax + na * radius_y


def sample_lbar_x(problem: MinimaxProblem, kit: ManifoldKit, C: float,
                  rng: np.random.Generator, samples: int = 10_000,
                  safety: float = 2.0) -> float:
    """Sampled ``max ||grad_x f(A(x), y)||`` over ``X x Y`` times a safety factor."""
    ys = problem.h.sample(rng, problem.d2, samples)
    best = 0.0
    for y in ys:
        x = rng.standard_normal(kit.shape)
        x *= C * rng.uniform() ** (1.0 / x.size) / np.linalg.norm(x)
        best = max(best, float(np.linalg.norm(problem.grad_x(kit.dissolve(x), y))))
    return safety * best


@dataclass(frozen=True, eq=False)
class PenalizedProblem:
    base: MinimaxProblem
    kit: ManifoldKit
    rho: float
    C: float
    lconst: Optional[PenaltyLipschitz] = None

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if self.C <= 0:
            raise ValueError("C must be positive")
        if self.kit.shape != (self.base.d1, self.base.r):
            raise ValueError("manifold kit and problem dimensions differ")

    @property
    def radius_ok(self) -> bool:
        return self.C > 0.5 + self.kit.sup_norm()

    def value(self, x, y) -> float:
        c = self.kit.constraint(x)
        return self.base.eval_f(self.kit.dissolve(x), y) + 0.25 * self.rho * float(np.sum(c * c))

    def value_r(self, x, y) -> float:
        return self.value(x, y) - self.base.h.value(y)

    def grad_x(self, x, y) -> np.ndarray:
        kit = self.kit
        u = self.base.grad_x(kit.dissolve(x), y)
        return kit.dissolve_jtp(x, u) + (0.5 * self.rho) * kit.constraint_jtp(x, kit.constraint(x))

    def grad_y(self, x, y) -> np.ndarray:
        return self.base.grad_y(self.kit.dissolve(x), y)


def make_penalized(problem: MinimaxProblem, kit: ManifoldKit, rho: float, C: float,
                   lbar_x: Optional[float] = None, rng: Optional[np.random.Generator] = None
                   ) -> PenalizedProblem:
    """Build the penalized problem and attach its Lipschitz record.

    ``lbar_x`` falls back to the analytic quadratic bound, then to sampling
    when ``rng`` is given.  The Lipschitz formulas are the Stiefel ones; for
    other kits the record is left empty.
    """
    lconst = None
    if isinstance(kit, Stiefel):
        if lbar_x is None and problem.quadratic is not None:
            lbar_x = quadratic_lbar_x(problem, C)
        if lbar_x is None and rng is not None:
            lbar_x = sample_lbar_x(problem, kit, C, rng)
        if lbar_x is not None:
            lconst = lipschitz_constants(problem.lipschitz, rho, C, lbar_x)
    return PenalizedProblem(problem, kit, rho, C, lconst)


def Lx_of_y(problem: MinimaxProblem, y: np.ndarray) -> float:
    """Upper bound on ``max{||grad_x f(x, y)|| : ||x||_2 <= 1}``.

    Exact upper bound for the quadratic benchmarks, ``||Q||_2 + ||A y||``.
    """
    inst = problem.quadratic
    if inst is None:
        raise ValueError("L_x(y) bound only available for quadratic instances")
    return float(np.linalg.norm(inst.Q, 2) + np.linalg.norm(inst.A @ y))
