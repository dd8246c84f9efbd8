"""Stationarity residuals, constraint violation and trace rows."""
from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields
from typing import Optional, Sequence

import numpy as np

from .manifolds import DegenerateInputError

TRACE_COLUMNS = (
    "t", "Gx", "Gy", "c_norm", "dist_M", "primal_gap", "rel_grad", "x_norm",
    "manifold_residual", "dual_residual", "dual_dist", "ball_active", "far_from_manifold",
)


@dataclass(frozen=True)
class TraceRow:
    t: int
    Gx: float
    Gy: float
    c_norm: float
    dist_M: float
    primal_gap: float
    rel_grad: float
    x_norm: float
    manifold_residual: float
    dual_residual: float
    dual_dist: float
    ball_active: bool
    far_from_manifold: bool

    def as_tuple(self) -> tuple:
        return astuple(self)


assert tuple(f.name for f in fields(TraceRow)) == TRACE_COLUMNS


def penalized_residuals(pp, x_t, x_next, y_t, y_next, z_t, tau1: float, tau2: float,
                        p: float, theta: float = 0.0) -> tuple[float, float]:
    """Norms of the subgradient residuals of one sm-MGDA step.

    ``Gx = (x_t - x_next)/tau1 + grad_x f_pen(x_next, y_next) - grad_x f_pen(x_t, y_t)
    + p (z_t - x_t)`` and ``Gy = (y_next - y_t)/tau2 + grad_y f_pen(x_next, y_next)
    - grad_y f_pen(x_next, y_t) + theta y_t``.
    """
    Gx = (x_t - x_next) / tau1 + pp.grad_x(x_next, y_next) - pp.grad_x(x_t, y_t) + p * (z_t - x_t)
    Gy = (y_next - y_t) / tau2 + pp.grad_y(x_next, y_next) - pp.grad_y(x_next, y_t) + theta * y_t
    return float(np.linalg.norm(Gx)), float(np.linalg.norm(Gy))


@dataclass(frozen=True)
class OriginalResiduals:
    manifold_residual: float
    dual_residual: float
    dual_dist: float
    dist_M: float
    far_from_manifold: bool
    x_proj: Optional[np.ndarray]


def original_residuals(problem, kit, x, y, tau_check: float, h=None) -> OriginalResiduals:
    """Residuals of the manifold problem at ``(P_M(x), y)``.

    ``dual_residual`` is the prox-gradient surrogate
    ``||y - prox_{tau h}(y + tau grad_y f)|| / tau``; ``dual_dist`` is the
    exact ``dist(0, -grad_y f + dh(y))`` from the regularizer's closed form.
    """
    h = problem.h if h is None else h
    try:
        xp = kit.project(x)
    except DegenerateInputError:
        nan = float("nan")
        return OriginalResiduals(nan, nan, nan, nan, True, None)
    dist = float(np.linalg.norm(x - xp))
    gx = problem.grad_x(xp, y)
    mres = float(np.linalg.norm(kit.riemannian_grad(xp, gx)))
    gy = problem.grad_y(xp, y)
    dres = float(np.linalg.norm(y - h.prox(tau_check, y + tau_check * gy))) / tau_check
    ddist = h.subdiff_dist(y, gy)
    return OriginalResiduals(mres, dres, ddist, dist, dist > 0.5, xp)


def relative_gradient_norm(res_sq: Sequence[float]) -> tuple[np.ndarray, bool]:
    """Running minimum of ``||Gx||^2 + ||Gy||^2`` over its first value.

    Returns the sequence and a flag that is ``True`` when the first residual
    is zero (the sequence is then all zeros).
    """
    r = np.asarray(res_sq, dtype=float)
    if r.size == 0:
        return r, False
    if r[0] == 0.0:
        return np.zeros_like(r), True
    return np.minimum.accumulate(r) / r[0], False


def weighted_running_min(gx2, gy2, kappa_bar: float) -> np.ndarray:
    return np.minimum.accumulate(np.asarray(gx2) + kappa_bar * np.asarray(gy2))


def loglog_slope(values: np.ndarray, t_start: int, t_end: int) -> float:
    """Least-squares slope of ``log values`` against ``log t`` over ``[t_start, t_end]``.

    ``values[i]`` belongs to iteration ``i + 1``.
    """
    t = np.arange(t_start, t_end + 1)
    v = np.asarray(values)[t - 1]
    return float(np.polyfit(np.log(t), np.log(v), 1)[0])


def _primal_gap(problem, xp) -> float:
    if xp is None or problem.primal is None or problem.F_star is None:
        return float("nan")
    return problem.primal(xp) - problem.F_star


def build_trace(pp, cfg, rec_t, rec_x, rec_y, gx2, gy2, active, t0: int = 0) -> list[TraceRow]:
    """Trace rows at the recorded iterations (``rec_t`` relative to the run start)."""
    problem, kit = pp.base, pp.kit
    rel, _ = relative_gradient_norm(np.asarray(gx2) + np.asarray(gy2))
    rows = []
    for t, x, y in zip(rec_t, rec_x, rec_y):
        i = int(t) - 1
        orig = original_residuals(problem, kit, x, y, cfg.tau2)
        rows.append(TraceRow(
            t=t0 + int(t),
            Gx=math.sqrt(gx2[i]),
            Gy=math.sqrt(gy2[i]),
            rel_grad=float(rel[i]),
            c_norm=kit.constraint_norm(x),
            dist_M=orig.dist_M,
            x_norm=float(np.linalg.norm(x)),
            manifold_residual=orig.manifold_residual,
            dual_residual=orig.dual_residual,
            dual_dist=orig.dual_dist,
            primal_gap=_primal_gap(problem, orig.x_proj),
            ball_active=bool(active[i]),
            far_from_manifold=orig.far_from_manifold,
        ))
    return rows


def rgda_row(problem, kit, x, y, t: int, tau_check: float) -> TraceRow:
    """Trace row for the retraction baseline (``Gx``/``Gy`` are the original residuals)."""
    orig = original_residuals(problem, kit, x, y, tau_check)
    return TraceRow(
        t=t, Gx=orig.manifold_residual, Gy=orig.dual_residual, rel_grad=float("nan"),
        c_norm=kit.constraint_norm(x), dist_M=orig.dist_M, x_norm=float(np.linalg.norm(x)),
        manifold_residual=orig.manifold_residual, dual_residual=orig.dual_residual,
        dual_dist=orig.dual_dist, primal_gap=_primal_gap(problem, orig.x_proj),
        ball_active=False, far_from_manifold=orig.far_from_manifold,
    )


def transfer_bounds(pp, x, y, Lx: float) -> dict:
    """Check the penalized-to-manifold stationarity transfer at ``(x, y)`` (Stiefel).

    Returns the measured quantities and whether both bounds hold; only
    meaningful when ``rho >= 36 Lx`` and ``dist(x, M) <= 1/2``.
    """
    eps = float(np.linalg.norm(pp.grad_x(x, y)))
    xp = pp.kit.project(x)
    dist = float(np.linalg.norm(x - xp))
    rgrad = float(np.linalg.norm(pp.kit.riemannian_grad(xp, pp.base.grad_x(xp, y))))
    Lxx = pp.base.lipschitz.L_xx
    dist_bound = 3.0 / pp.rho * eps
    grad_bound = eps + 11.0 / pp.rho * (Lxx + Lx) * eps
    return {
        "eps": eps, "dist": dist, "dist_bound": dist_bound, "rgrad": rgrad,
        "grad_bound": grad_bound,
        "applicable": pp.rho >= 36.0 * Lx and dist <= 0.5,
        "ok": dist <= dist_bound * (1 + 1e-12) + 1e-15 and rgrad <= grad_bound * (1 + 1e-12) + 1e-15,
    }
