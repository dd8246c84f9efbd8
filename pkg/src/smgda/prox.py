"""Proximal maps for the dual regularizer and the primal norm ball."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

KINDS = ("zero", "ball", "simplex", "quadratic", "simplex_quadratic", "ball_quadratic")


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort and threshold)."""
    v = np.asarray(v, dtype=float)
    n = v.size
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, n + 1)
    cond = u - css / k > 0
    rho = k[cond][-1]
    theta = css[rho - 1] / rho
    return np.maximum(v - theta, 0.0)


def project_ball_vec(v: np.ndarray, radius: float) -> np.ndarray:
    nrm = np.linalg.norm(v)
    if nrm <= radius:
        return np.array(v, dtype=float)
    return v * (radius / nrm)


def project_ball(x: np.ndarray, C: float) -> np.ndarray:
    """Projection onto the Frobenius ball ``{x : ||x||_F <= C}``."""
    if C <= 0:
        raise ValueError("ball radius must be positive")
    nrm = np.linalg.norm(x)
    if nrm <= C:
        return x
    return x * (C / nrm)


def project_spectral_ball(x: np.ndarray, C: float) -> np.ndarray:
    """Projection onto ``{x : ||x||_2 <= C}`` by clipping singular values."""
    if C <= 0:
        raise ValueError("ball radius must be positive")
    u, s, vt = np.linalg.svd(x, full_matrices=False)
    if s[0] <= C:
        return x
    return (u * np.minimum(s, C)) @ vt


@dataclass(frozen=True)
class Regularizer:
    """Dual regularizer ``h`` with closed-form prox.

    ``kind`` is one of ``zero``, ``ball`` (indicator of the ``radius`` ball),
    ``simplex`` (indicator of the probability simplex), ``quadratic``
    (``alpha * ||y - center||^2``) and the sums ``simplex_quadratic`` and
    ``ball_quadratic``.  ``zeta`` is the weak-convexity modulus (0 for all
    built-in kinds).
    """

    kind: str = "zero"
    radius: float = 1.0
    alpha: float = 0.0
    center: Optional[np.ndarray] = field(default=None, compare=False)
    zeta: float = 0.0
    lipschitz_h: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown regularizer kind {self.kind!r}")
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if self.alpha < 0 or self.zeta < 0:
            raise ValueError("alpha and zeta must be nonnegative")

    @property
    def has_ball(self) -> bool:
        return self.kind in ("ball", "ball_quadratic")

    @property
    def has_simplex(self) -> bool:
        return self.kind in ("simplex", "simplex_quadratic")

    @property
    def has_quadratic(self) -> bool:
        return self.kind in ("quadratic", "simplex_quadratic", "ball_quadratic")

    @property
    def diameter(self) -> float:
        if self.has_ball:
            return 2.0 * self.radius
        if self.has_simplex:
            return float(np.sqrt(2.0))
        return float("inf")

    def _center(self, n: int) -> np.ndarray:
        if self.center is None:
            return np.zeros(n)
        return np.asarray(self.center, dtype=float)

    def domain_center(self, n: int) -> np.ndarray:
        """A canonical interior-ish point of ``dom h``."""
        if self.has_simplex:
            return np.full(n, 1.0 / n)
        if self.kind == "quadratic":
            return self._center(n).copy()
        return np.zeros(n)

    def in_domain(self, y: np.ndarray, tol: float = 1e-12) -> bool:
        if self.has_ball:
            return bool(np.linalg.norm(y) <= self.radius + tol)
        if self.has_simplex:
            return bool(np.all(y >= -tol) and abs(y.sum() - 1.0) <= tol * max(1, y.size))
        return bool(np.all(np.isfinite(y)))

    def value(self, y: np.ndarray) -> float:
        y = np.asarray(y, dtype=float)
        if not self.in_domain(y, tol=1e-10):
            return float("inf")
        if self.has_quadratic:
            return float(self.alpha * np.sum((y - self._center(y.size)) ** 2))
        return 0.0

    def prox(self, tau: float, v: np.ndarray) -> np.ndarray:
        """``argmin_y tau*h(y) + 0.5*||y - v||^2``."""
        if tau <= 0:
            raise ValueError("prox step must be positive")
        if tau * self.zeta >= 1.0:
            raise ValueError(f"prox undefined: tau*zeta = {tau * self.zeta} >= 1")
        v = np.asarray(v, dtype=float)
        if self.has_quadratic:
            w = 2.0 * tau * self.alpha
            v = (v + w * self._center(v.size)) / (1.0 + w)
        if self.has_ball:
            return project_ball_vec(v, self.radius)
        if self.has_simplex:
            return project_simplex(v)
        return v

    def subdiff_dist(self, y: np.ndarray, g: np.ndarray, tol: float = 1e-9) -> float:
        """Exact ``dist(0, -g + dh(y))`` for ``y`` in the domain."""
        y = np.asarray(y, dtype=float)
        g = np.asarray(g, dtype=float)
        if self.has_quadratic:
            g = g - 2.0 * self.alpha * (y - self._center(y.size))
        if self.has_ball:
            ny = np.linalg.norm(y)
            if ny < self.radius - tol or ny == 0.0:
                return float(np.linalg.norm(g))
            s = max(0.0, float(g @ y) / (ny * ny))
            return float(np.linalg.norm(-g + s * y))
        if self.has_simplex:
            return _simplex_normal_dist(y, g, tol)
        return float(np.linalg.norm(g))

    def with_tikhonov(self, alpha: float, center: np.ndarray) -> "Regularizer":
        """``h + alpha * ||y - center||^2`` (only for kinds without a quadratic part)."""
        if self.has_quadratic:
            raise ValueError("regularizer already carries a quadratic term")
        kind = {"zero": "quadratic", "ball": "ball_quadratic", "simplex": "simplex_quadratic"}[self.kind]
        return Regularizer(kind=kind, radius=self.radius, alpha=alpha,
                           center=np.array(center, dtype=float), zeta=self.zeta)

    def sample(self, rng: np.random.Generator, n: int, count: int) -> np.ndarray:
        """Uniform-ish samples from ``dom h`` (bounded domains only)."""
        if self.has_ball:
            d = rng.standard_normal((count, n))
            d /= np.linalg.norm(d, axis=1, keepdims=True)
            rad = self.radius * rng.uniform(size=(count, 1)) ** (1.0 / n)
            return d * rad
        if self.has_simplex:
            return rng.dirichlet(np.ones(n), size=count)
        raise ValueError("cannot sample an unbounded domain")


def _simplex_normal_dist(y: np.ndarray, g: np.ndarray, tol: float) -> float:
    # N(y) = {lam*1 + nu : nu <= 0, nu_i = 0 on supp(y)}; minimize over lam the
    # convex piecewise quadratic sum_{S}(g_i-lam)^2 + sum_{off S} max(g_i-lam,0)^2
    supp = y > tol
    gs = g[supp]
    off = np.sort(g[~supp])[::-1]
    total, cnt = gs.sum(), gs.size
    lam = total / cnt
    for gi in off:
        if gi <= lam:
            break
        total += gi
        cnt += 1
        lam = total / cnt
    res_s = gs - lam
    res_off = np.maximum(g[~supp] - lam, 0.0)
    return float(np.sqrt(res_s @ res_s + res_off @ res_off))
