"""Minimax problem records and the quadratic sphere benchmarks.

Two benchmark families on the unit sphere ``{x in R^m : ||x|| = 1}``:

* NCMC: ``f(x, y) = 0.5 x^T Q x + x^T A y`` with ``y`` in the unit ball,
  primal ``F(x) = 0.5 x^T Q x + ||A^T x||``.
* NCSC: ``f(x, y) = 0.5 x^T Q x + x^T A y - (mu_y/2)||y||^2`` with ``h = 0``,
  primal ``F(x) = 0.5 x^T (Q + A A^T / mu_y) x``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .prox import Regularizer

INSTANCE_FORMAT = "smgda-quadratic-instance"


@dataclass(frozen=True)
class Lipschitz:
    L_xx: float
    L_xy: float
    L_yx: float
    L_yy: float
    estimated: bool = False

    @property
    def L(self) -> float:
        return max(self.L_xx, self.L_xy, self.L_yx, self.L_yy)


@dataclass(frozen=True)
class Concavity:
    mu: float = 0.0
    mode: str = "merely_concave"  # "pl" | "strongly_concave" | "merely_concave"

    def __post_init__(self):
        if self.mode not in ("pl", "strongly_concave", "merely_concave"):
            raise ValueError(f"unknown concavity mode {self.mode!r}")
        if self.mu < 0:
            raise ValueError("mu must be nonnegative")
        if self.mode == "merely_concave" and self.mu != 0:
            raise ValueError("merely concave problems have mu = 0")
        if self.mode != "merely_concave" and self.mu <= 0:
            raise ValueError(f"{self.mode} needs mu > 0")


@dataclass(frozen=True)
class MinimaxProblem:
    """``min_x max_y f(x, y) - h(y)`` with user supplied closures.

    ``x`` is a ``(d1, r)`` array, ``y`` a ``(d2,)`` array.  ``primal`` and
    ``F_star`` are optional and only used for primal-gap reporting.
    """

    d1: int
    r: int
    d2: int
    eval_f: Callable[[np.ndarray, np.ndarray], float]
    grad_x: Callable[[np.ndarray, np.ndarray], np.ndarray]
    grad_y: Callable[[np.ndarray, np.ndarray], np.ndarray]
    h: Regularizer
    lipschitz: Lipschitz
    concavity: Concavity = Concavity()
    primal: Optional[Callable[[np.ndarray], float]] = None
    F_star: Optional[float] = None
    quadratic: Optional["QuadraticInstance"] = field(default=None, repr=False)

    def eval_fr(self, x, y) -> float:
        return self.eval_f(x, y) - self.h.value(y)


@dataclass(frozen=True, eq=False)
class QuadraticInstance:
    Q: np.ndarray
    A: np.ndarray
    mu_y: float
    L_target: float
    F_star: float
    seed: Optional[int] = None

    @property
    def m(self) -> int:
        return self.Q.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def variant(self) -> str:
        return "ncsc" if self.mu_y > 0 else "ncmc"

    def primal_value(self, x) -> float:
        x = np.asarray(x, dtype=float).reshape(-1)
        quad = 0.5 * float(x @ self.Q @ x)
        if self.mu_y > 0:
            ax = self.A.T @ x
            return quad + 0.5 * float(ax @ ax) / self.mu_y
        return quad + float(np.linalg.norm(self.A.T @ x))

    def to_dict(self) -> dict:
        return {
            "format": INSTANCE_FORMAT,
            "version": 1,
            "variant": self.variant,
            "m": self.m,
            "n": self.n,
            "L_target": self.L_target,
            "mu_y": self.mu_y,
            "seed": self.seed,
            "F_star": self.F_star,
            "Q": self.Q.tolist(),
            "A": self.A.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QuadraticInstance":
        if d.get("format") != INSTANCE_FORMAT:
            raise ValueError("not a quadratic instance document")
        Q = np.array(d["Q"], dtype=float)
        A = np.array(d["A"], dtype=float)
        if Q.shape != (d["m"], d["m"]) or A.shape != (d["m"], d["n"]):
            raise ValueError("matrix shapes do not match the declared dims")
        return cls(Q=Q, A=A, mu_y=float(d["mu_y"]), L_target=float(d["L_target"]),
                   F_star=float(d["F_star"]), seed=d.get("seed"))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "QuadraticInstance":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _sym_sqrt(M: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(0.5 * (M + M.T))
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


def optimal_value(Q: np.ndarray, A: np.ndarray, mu_y: float) -> float:
    if mu_y > 0:
        M = Q + (A @ A.T) / mu_y
        return 0.5 * float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])
    M = 0.5 * Q + _sym_sqrt(A @ A.T)
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])


def instance_from_spectra(V, lam_q, lam_a, L_target: float, mu_y: float = 0.0,
                          W=None, seed: Optional[int] = None) -> QuadraticInstance:
    """Assemble ``Q = V diag(L*lam_q/|lam_q|_inf) V^T`` and ``A = V Lam_A W^T``.

    ``lam_a`` holds the ``min(m, n)`` diagonal entries of the rectangular
    ``Lam_A`` before normalization; ``W`` defaults to ``V`` (square case).
    """
    V = np.asarray(V, dtype=float)
    lam_q = np.asarray(lam_q, dtype=float)
    lam_a = np.asarray(lam_a, dtype=float)
    m = V.shape[0]
    W = V if W is None else np.asarray(W, dtype=float)
    n = W.shape[0]
    if lam_q.shape != (m,) or lam_a.shape != (min(m, n),):
        raise ValueError("spectrum sizes do not match")
    if not np.any(lam_q) or not np.any(lam_a):
        raise ValueError("all-zero spectrum draw")
    lq = L_target * lam_q / np.max(np.abs(lam_q))
    Q = (V * lq) @ V.T
    Q = 0.5 * (Q + Q.T)
    La = np.zeros((m, n))
    k = min(m, n)
    La[np.arange(k), np.arange(k)] = lam_a / np.max(np.abs(lam_a))
    A = V @ La @ W.T
    return QuadraticInstance(Q=Q, A=A, mu_y=float(mu_y), L_target=float(L_target),
                             F_star=optimal_value(Q, A, mu_y), seed=seed)


def generate_quadratic(m: int, n: int, L_target: float, mu_y: float = 0.0,
                       seed: int = 0) -> QuadraticInstance:
    """Random benchmark instance; identical seeds give identical instances."""
    if m < 1 or n < 1:
        raise ValueError("m and n must be positive")
    if L_target <= 0:
        raise ValueError("L_target must be positive")
    if mu_y < 0:
        raise ValueError("mu_y must be nonnegative")
    rng = np.random.default_rng(seed)
    V, R = np.linalg.qr(rng.standard_normal((m, m)))
    V = V * np.sign(np.where(np.diag(R) == 0, 1.0, np.diag(R)))
    k = min(m, n)
    lam_q = rng.uniform(-1.0, 1.0, size=m)
    while not np.any(lam_q):
        lam_q = rng.uniform(-1.0, 1.0, size=m)
    lam_a = rng.uniform(-1.0, 1.0, size=k)
    while not np.any(lam_a):
        lam_a = rng.uniform(-1.0, 1.0, size=k)
    W = None
    if n != m:
        W, R2 = np.linalg.qr(rng.standard_normal((n, n)))
        W = W * np.sign(np.where(np.diag(R2) == 0, 1.0, np.diag(R2)))
    return instance_from_spectra(V, lam_q, lam_a, L_target, mu_y, W=W, seed=seed)


def make_problem(inst: QuadraticInstance) -> MinimaxProblem:
    Q, A, mu = inst.Q, inst.A, inst.mu_y
    m, n = inst.m, inst.n

    def eval_f(x, y):
        x = x.reshape(-1)
        val = 0.5 * float(x @ Q @ x) + float(x @ A @ y)
        if mu > 0:
            val -= 0.5 * mu * float(y @ y)
        return val

    def grad_x(x, y):
        return (Q @ x.reshape(-1) + A @ y).reshape(m, 1)

    def grad_y(x, y):
        g = A.T @ x.reshape(-1)
        if mu > 0:
            g = g - mu * y
        return g

    norm_q = float(np.linalg.norm(Q, 2))
    norm_a = float(np.linalg.norm(A, 2))
    if mu > 0:
        h = Regularizer("zero")
        conc = Concavity(mu=mu, mode="strongly_concave")
    else:
        h = Regularizer("ball", radius=1.0)
        conc = Concavity()
    lip = Lipschitz(L_xx=norm_q, L_xy=norm_a, L_yx=norm_a, L_yy=mu)
    return MinimaxProblem(d1=m, r=1, d2=n, eval_f=eval_f, grad_x=grad_x, grad_y=grad_y,
                          h=h, lipschitz=lip, concavity=conc, primal=inst.primal_value,
                          F_star=inst.F_star, quadratic=inst)


def practical_L(inst: QuadraticInstance) -> float:
    """``max{||Q||_2, ||A||_2}``, the constant the experiment step sizes use."""
    return max(float(np.linalg.norm(inst.Q, 2)), float(np.linalg.norm(inst.A, 2)))


def estimate_lipschitz(grad_x, grad_y, sample_x, sample_y, rng: np.random.Generator,
                       pairs: int = 1000) -> Lipschitz:
    """Sampled difference quotients, flagged as estimates.

    ``sample_x(rng)`` / ``sample_y(rng)`` draw single points from X and Y.
    """
    lxx = lxy = lyx = lyy = 0.0
    for _ in range(pairs):
        x1, x2 = sample_x(rng), sample_x(rng)
        y1, y2 = sample_y(rng), sample_y(rng)
        dx = np.linalg.norm(x1 - x2)
        dy = np.linalg.norm(y1 - y2)
        if dx > 0:
            lxx = max(lxx, np.linalg.norm(grad_x(x1, y1) - grad_x(x2, y1)) / dx)
            lyx = max(lyx, np.linalg.norm(grad_y(x1, y1) - grad_y(x2, y1)) / dx)
        if dy > 0:
            lxy = max(lxy, np.linalg.norm(grad_x(x1, y1) - grad_x(x1, y2)) / dy)
            lyy = max(lyy, np.linalg.norm(grad_y(x1, y1) - grad_y(x1, y2)) / dy)
    return Lipschitz(float(lxx), float(lxy), float(lyx), float(lyy), estimated=True)
