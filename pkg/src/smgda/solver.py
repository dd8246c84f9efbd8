"""Smoothed manifold GDA (sm-MGDA) and its baselines.

One sm-MGDA iteration on the penalized problem::

    g      = grad_x f_pen(x, y)
    x_new  = P_X(x - tau1_t * (g + p * (x - z)))
    y_new  = prox_{tau2 h}(y + tau2 * (grad_y f_pen(x_new, y) - theta_t * y))
    z_new  = z + beta * (x_new - z)

No retraction, SVD, QR or inverse of an x-sized matrix is taken in the step.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import kernels
from .manifolds import ManifoldKit, Stiefel
from .metrics import TraceRow, build_trace
from .penalty import PenalizedProblem, make_penalized
from .problems import MinimaxProblem, QuadraticInstance, practical_L
from .prox import project_ball

log = logging.getLogger(__name__)

REGIMES = ("practical", "pl", "merely_concave", "tikhonov")

STATUS_DONE = 0
STATUS_NONFINITE = 1
STATUS_TOL = 2


class NumericalFailure(RuntimeError):
    """Raised when an iterate becomes non-finite."""

    def __init__(self, msg, result=None):
        super().__init__(msg)
        self.result = result


@dataclass(frozen=True)
class SolverConfig:
    """Step sizes and schedules for one run.

    ``concave_b`` switches on the decreasing primal schedule
    ``tau1_t = 2 / (2 tau2 l^2 (1 + b sqrt(t+1)) - l)`` with ``l = schedule_l``;
    ``theta_coeff`` gives ``theta_t = theta_coeff * (t+1)^(-1/4)``.
    """

    tau1: float
    tau2: float
    p: float
    beta: float
    rho: float = 10.0
    C: float = 1000.0
    max_iters: int = 1000
    regime: str = "practical"
    theta_coeff: float = 0.0
    concave_b: Optional[float] = None
    schedule_l: Optional[float] = None
    tikhonov_eps: Optional[float] = None
    mu: Optional[float] = None
    kappa_bar: float = 1.0
    record_every: int = 100
    tol: float = 0.0
    seed: int = 0
    warm_dual_steps: int = 0
    label: str = "smgda"

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}")
        if self.tau1 <= 0 or self.tau2 <= 0:
            raise ValueError("step sizes must be positive")
        if self.p < 0:
            raise ValueError("p must be nonnegative")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")
        if self.rho <= 0 or self.C <= 0:
            raise ValueError("rho and C must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if self.concave_b is not None and self.schedule_l is None:
            raise ValueError("concave schedule needs schedule_l")
        if self.regime == "tikhonov" and not self.tikhonov_eps:
            raise ValueError("tikhonov regime needs tikhonov_eps > 0")

    def tau1_at(self, t: int) -> float:
        if self.concave_b is None:
            return self.tau1
        l = self.schedule_l
        return 2.0 / (2.0 * self.tau2 * l * l * (1.0 + self.concave_b * math.sqrt(t + 1)) - l)

    def theta_at(self, t: int) -> float:
        if self.theta_coeff == 0.0:
            return 0.0
        return self.theta_coeff * (t + 1) ** -0.25

    def schedules(self, T: Optional[int] = None) -> tuple[np.ndarray, np.ndarray]:
        T = self.max_iters if T is None else T
        t = np.arange(T, dtype=float)
        if self.concave_b is None:
            tau1s = np.full(T, self.tau1)
        else:
            l = self.schedule_l
            tau1s = 2.0 / (2.0 * self.tau2 * l * l * (1.0 + self.concave_b * np.sqrt(t + 1.0)) - l)
        thetas = self.theta_coeff * (t + 1.0) ** -0.25 if self.theta_coeff else np.zeros(T)
        return tau1s, thetas


# -- parameter presets ---------------------------------------------------------

def practical_config(L: float, **kw) -> SolverConfig:
    """Experiment defaults: tau1 = 1/(6L), tau2 = tau1/3, beta = 0.9, p = 2L."""
    tau1 = kw.pop("tau1", 1.0 / (6.0 * L))
    params = dict(tau1=tau1, tau2=tau1 / 3.0, p=2.0 * L, beta=0.9, rho=10.0, C=1000.0,
                  regime="practical", label="smgda")
    params.update(kw)
    return SolverConfig(**params)


def mgda_config(L: float, **kw) -> SolverConfig:
    """Plain manifold GDA baseline: sm-MGDA with ``p = 0`` and ``beta = 0``."""
    kw.setdefault("label", "mgda")
    return practical_config(L, p=0.0, beta=0.0, **kw)


def pl_config(l: float, mu: float, zeta: float = 0.0, tau1: Optional[float] = None,
              alpha: float = 1.0 / 4612, **kw) -> SolverConfig:
    """Theory parameters for the PL / strongly concave regime."""
    if not 0.0 < alpha < 1.0 / 2306:
        raise ValueError("alpha must lie in (0, 1/2306)")
    if mu <= 0:
        raise ValueError("PL regime needs mu > 0")
    tau1 = 1.0 / (3.0 * l) if tau1 is None else tau1
    if not 0.0 < tau1 <= 1.0 / (3.0 * l) * (1 + 1e-12):
        raise ValueError("tau1 must lie in (0, 1/(3l)]")
    tau2 = 1.0 / (16.0 * (3.0 / tau1 + zeta))
    params = dict(tau1=tau1, tau2=tau2, p=2.0 * l, beta=alpha * min(mu, l) * tau2,
                  regime="pl", mu=mu, kappa_bar=max(1.0, l / mu), label="smgda-pl")
    params.update(kw)
    return SolverConfig(**params)


def concave_config(l: float, l_yy: float, tau2: Optional[float] = None,
                   b: Optional[float] = None, **kw) -> SolverConfig:
    """Theory schedules for the merely concave regime (``p = 0``, ``beta = 1``).

    ``tau2`` defaults to ``1/(10 max(l_yy, l))`` which satisfies
    ``tau2 <= 1/(10 l_yy)`` also when ``l_yy = 0``.
    """
    tau2 = 1.0 / (10.0 * max(l_yy, l)) if tau2 is None else tau2
    if l_yy > 0 and tau2 > 1.0 / (10.0 * l_yy):
        raise ValueError("tau2 must be <= 1/(10 l_yy)")
    b_min = max(2.0 / (tau2 * l) - 1.0, 32.0 * 20.0 ** 2 / 19.0 ** 2)
    b = 1.01 * b_min if b is None else b
    if b <= b_min:
        raise ValueError(f"b must exceed {b_min}")
    tau1_0 = 2.0 / (2.0 * tau2 * l * l * (1.0 + b) - l)
    params = dict(tau1=tau1_0, tau2=tau2, p=0.0, beta=1.0, regime="merely_concave",
                  theta_coeff=0.95 / tau2, concave_b=b, schedule_l=l, label="smgda-concave")
    params.update(kw)
    return SolverConfig(**params)


def tikhonov_config(base: SolverConfig, eps: float) -> SolverConfig:
    """Wrap a config so the run regularizes the dual by ``eps/(4 D_Y)||y - y0||^2``."""
    return replace(base, regime="tikhonov", tikhonov_eps=eps,
                   label=base.label if base.label != "smgda" else "smgda-tikhonov")


def rgda_steps(L: float, mu_y: float = 0.0) -> tuple[float, float]:
    """Baseline RGDA step sizes ``(1/(16 (mu_y+1)^2 L), 1/L)``."""
    return 1.0 / (16.0 * (mu_y + 1.0) ** 2 * L), 1.0 / L


def select_rho(F_z0: float, F_lower: float, lbar_y: float, l_h: float, D_Y: float,
               Lx_bar: Optional[float] = None) -> float:
    """Penalty parameter keeping ``||c(x_t)|| <= 1/2`` along the run.

    ``16 (F(z0) - F_lower + (lbar_y + l_h) D_Y)``, raised to ``36 Lx_bar`` when
    a bound on ``max_y L_x(y)`` is supplied.
    """
    rho = 16.0 * (F_z0 - F_lower + (lbar_y + l_h) * D_Y)
    if Lx_bar is not None:
        rho = max(rho, 36.0 * Lx_bar)
    return rho


# -- state and steps -----------------------------------------------------------

@dataclass
class IterateState:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    t: int = 0

    def copy(self) -> "IterateState":
        return IterateState(self.x.copy(), self.y.copy(), self.z.copy(), self.t)


def smgda_step(pp: PenalizedProblem, cfg: SolverConfig, s: IterateState,
               h=None, g: Optional[np.ndarray] = None) -> tuple[IterateState, dict]:
    """One iteration; returns the new state and step diagnostics.

    ``g`` may carry a precomputed ``grad_x f_pen(x_t, y_t)``; ``h`` overrides
    the problem's regularizer (used by the Tikhonov wrapper).
    """
    h = pp.base.h if h is None else h
    tau1 = cfg.tau1_at(s.t)
    theta = cfg.theta_at(s.t)
    if g is None:
        g = pp.grad_x(s.x, s.y)
    trial = s.x - tau1 * (g + cfg.p * (s.x - s.z))
    x_new = project_ball(trial, cfg.C)
    gy_old = pp.grad_y(x_new, s.y)
    y_new = h.prox(cfg.tau2, s.y + cfg.tau2 * (gy_old - theta * s.y))
    z_new = s.z + cfg.beta * (x_new - s.z)
    info = {"g": g, "gy_old": gy_old, "tau1": tau1, "theta": theta,
            "ball_active": x_new is not trial}
    return IterateState(x_new, y_new, z_new, s.t + 1), info


def rgda_step(problem: MinimaxProblem, kit: ManifoldKit, tau1: float, tau2: float,
              s: IterateState) -> IterateState:
    """Retraction-based baseline: projected Riemannian step in x, prox ascent in y."""
    gx = problem.grad_x(s.x, s.y)
    x_new = kit.project(s.x - tau1 * kit.riemannian_grad(s.x, gx))
    y_new = problem.h.prox(tau2, s.y + tau2 * problem.grad_y(x_new, s.y))
    return IterateState(x_new, y_new, x_new, s.t + 1)


# -- initialization ------------------------------------------------------------

def initial_state(pp: PenalizedProblem, cfg: SolverConfig,
                  rng: Optional[np.random.Generator] = None) -> IterateState:
    """``x0 = z0`` random on the manifold, ``y0`` the center of ``dom h``.

    With ``warm_dual_steps > 0`` the dual is improved by that many prox-ascent
    steps at the fixed ``x0``.
    """
    rng = np.random.default_rng([1, cfg.seed]) if rng is None else rng
    x0 = pp.kit.random_point(rng)
    y0 = pp.base.h.domain_center(pp.base.d2)
    y0 = warm_dual(pp.base, x0, y0, cfg.tau2, cfg.warm_dual_steps)
    return IterateState(x0, y0, x0.copy(), 0)


def warm_dual(problem: MinimaxProblem, x0, y0, tau2: float, steps: int) -> np.ndarray:
    y = np.array(y0, dtype=float)
    for _ in range(steps):
        y = problem.h.prox(tau2, y + tau2 * problem.grad_y(x0, y))
    return y


# -- runs ----------------------------------------------------------------------

@dataclass
class RunResult:
    state: IterateState
    trace: list[TraceRow]
    iters: int
    status: int
    ball_active_count: int
    gx2: np.ndarray
    gy2: np.ndarray
    c_norm: np.ndarray
    x_norm: np.ndarray
    backend: str
    label: str = ""
    header: dict = field(default_factory=dict)

    @property
    def residual_sq(self) -> np.ndarray:
        return self.gx2 + self.gy2


def _tikhonov_h(pp: PenalizedProblem, cfg: SolverConfig, y0: np.ndarray):
    D = pp.base.h.diameter
    if not math.isfinite(D):
        raise ValueError("Tikhonov regime needs a bounded dual domain")
    return pp.base.h.with_tikhonov(cfg.tikhonov_eps / (4.0 * D), y0)


def _fast_path_ok(pp: PenalizedProblem, h) -> bool:
    inst = pp.base.quadratic
    return (inst is not None and isinstance(pp.kit, Stiefel) and pp.kit.r == 1
            and h.zeta == 0.0 and not h.has_simplex)


def run(pp: PenalizedProblem, cfg: SolverConfig, state: Optional[IterateState] = None,
        backend: Optional[str] = None, callback: Optional[Callable] = None,
        raise_on_failure: bool = True) -> RunResult:
    """Run ``cfg.max_iters`` sm-MGDA iterations and record the trace.

    ``backend`` selects ``"cython"``, ``"python"`` (fused kernels) or
    ``"generic"`` (closure-based loop, works for every problem and kit).  The
    default picks the compiled kernel for quadratic sphere problems.
    ``callback(t, state)`` is called at every record point (generic backend).
    """
    state = initial_state(pp, cfg) if state is None else state.copy()
    h = pp.base.h
    if cfg.regime == "tikhonov":
        h = _tikhonov_h(pp, cfg, state.y)
    if backend is None:
        backend = kernels.BACKEND if _fast_path_ok(pp, h) and callback is None else "generic"
    if backend != "generic" and not _fast_path_ok(pp, h):
        raise ValueError("fused kernels only cover quadratic problems on the sphere")

    if backend == "generic":
        out = _run_generic(pp, cfg, state, h, callback)
    else:
        out = _run_kernel(pp, cfg, state, h, backend)

    trace = build_trace(pp, cfg, out["rec_t"], out["rec_x"], out["rec_y"],
                        out["gx2"], out["gy2"], out["ball_active"], t0=state.t)
    final = IterateState(out["x"], out["y"], out["z"], state.t + out["iters"])
    res = RunResult(
        state=final, trace=trace, iters=out["iters"], status=out["status"],
        ball_active_count=int(np.sum(out["ball_active"])), gx2=out["gx2"], gy2=out["gy2"],
        c_norm=out["c_norm"], x_norm=out["x_norm"], backend=backend, label=cfg.label,
        header={"kappa_bar": cfg.kappa_bar, "regime": cfg.regime, "tau1": cfg.tau1,
                "tau2": cfg.tau2, "p": cfg.p, "beta": cfg.beta, "rho": pp.rho, "C": pp.C},
    )
    if res.status == STATUS_NONFINITE:
        log.error("non-finite iterate at t=%d", res.iters)
        if raise_on_failure:
            raise NumericalFailure(f"non-finite iterate at iteration {res.iters}", res)
    return res


def _run_kernel(pp, cfg, state, h, backend):
    inst: QuadraticInstance = pp.base.quadratic
    tau1s, thetas = cfg.schedules()
    if state.t:
        tau1s, thetas = cfg.schedules(state.t + cfg.max_iters)
        tau1s, thetas = tau1s[state.t:], thetas[state.t:]
    out = kernels.quadratic_smgda(
        inst.Q, inst.A, inst.mu_y, h.radius if h.has_ball else None,
        h.alpha if h.has_quadratic else 0.0, h.center if h.has_quadratic else None,
        state.x, state.y, state.z, tau1s, thetas, cfg.tau2, cfg.p, cfg.beta,
        pp.rho, pp.C, cfg.tol, cfg.record_every, backend=backend)
    shape = pp.kit.shape
    out["x"] = out["x"].reshape(shape)
    out["z"] = out["z"].reshape(shape)
    out["rec_x"] = [r.reshape(shape) for r in out["rec_x"]]
    out["rec_y"] = list(out["rec_y"])
    out["rec_t"] = [int(t) for t in out["rec_t"]]
    return out


def _run_generic(pp, cfg, state, h, callback):
    T = cfg.max_iters
    kit = pp.kit
    gx2 = np.zeros(T)
    gy2 = np.zeros(T)
    cn = np.zeros(T)
    xn = np.zeros(T)
    act = np.zeros(T, dtype=np.uint8)
    rec_t, rec_x, rec_y = [], [], []
    s = state
    g = pp.grad_x(s.x, s.y) if T else None
    status = STATUS_DONE
    done = 0
    for i in range(T):
        new, info = smgda_step(pp, cfg, s, h=h, g=g)
        g_new = pp.grad_x(new.x, new.y)
        gy_new = pp.grad_y(new.x, new.y)
        Gx = (s.x - new.x) / info["tau1"] + g_new - g + cfg.p * (s.z - s.x)
        Gy = (new.y - s.y) / cfg.tau2 + gy_new - info["gy_old"] + info["theta"] * s.y
        gx2[i] = float(np.sum(Gx * Gx))
        gy2[i] = float(Gy @ Gy)
        cn[i] = kit.constraint_norm(new.x)
        xn[i] = float(np.linalg.norm(new.x))
        act[i] = info["ball_active"]
        s, g = new, g_new
        done = i + 1
        if not np.isfinite(gx2[i] + gy2[i] + xn[i]):
            status = STATUS_NONFINITE
        elif math.sqrt(gx2[i] + gy2[i]) <= cfg.tol:
            status = STATUS_TOL
        if done == 1 or done % cfg.record_every == 0 or done == T or status != STATUS_DONE:
            rec_t.append(done)
            rec_x.append(s.x.copy())
            rec_y.append(s.y.copy())
            if callback is not None:
                callback(s.t, s)
        if status != STATUS_DONE:
            break
    return {"x": s.x, "y": s.y, "z": s.z, "iters": done, "status": status,
            "gx2": gx2[:done], "gy2": gy2[:done], "c_norm": cn[:done], "x_norm": xn[:done],
            "ball_active": act[:done], "rec_t": rec_t, "rec_x": rec_x, "rec_y": rec_y}


@dataclass
class RGDAResult:
    state: IterateState
    trace: list[TraceRow]
    c_norm: np.ndarray
    iters: int


def run_rgda(problem: MinimaxProblem, kit: ManifoldKit, tau1: float, tau2: float,
             max_iters: int, state: IterateState, record_every: int = 100,
             tol_check: Optional[float] = None) -> RGDAResult:
    """Baseline run; the trace uses the same columns as sm-MGDA.

    The penalized residuals ``Gx``/``Gy`` are replaced by the original-problem
    residuals at the record points since the baseline has no penalty.
    """
    from .metrics import rgda_row

    s = state.copy()
    cn = np.zeros(max_iters)
    trace = []
    for i in range(max_iters):
        s = rgda_step(problem, kit, tau1, tau2, s)
        cn[i] = kit.constraint_norm(s.x)
        done = i + 1
        if done == 1 or done % record_every == 0 or done == max_iters:
            trace.append(rgda_row(problem, kit, s.x, s.y, done, tau2))
    return RGDAResult(s, trace, cn, max_iters)


def make_default_penalized(problem: MinimaxProblem, kit: ManifoldKit,
                           cfg: SolverConfig) -> PenalizedProblem:
    return make_penalized(problem, kit, cfg.rho, cfg.C)


def quadratic_practical(inst: QuadraticInstance, **kw) -> SolverConfig:
    return practical_config(practical_L(inst), **kw)
