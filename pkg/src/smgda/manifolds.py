"""Compact submanifold operator kits.

Each kit bundles the defining map ``c``, the constraint dissolving map ``A``,
their Jacobian-transpose products, the nearest-point projection and the
tangent projection (Riemannian gradient) for one manifold family:

* Stiefel           ``x^T x = I_r``
* Oblique           ``diag(x^T x) = 1``
* GeneralizedStiefel ``x^T B x = I_r`` with ``B`` symmetric positive definite

Points are dense ``(d1, r)`` float arrays.  Kits are immutable and every
operation is a pure function of its arguments.
"""
from __future__ import annotations

from typing import Optional

import numpy as np

ON_MANIFOLD_TOL = 1e-8


class DimensionError(ValueError):
    pass


class DegenerateInputError(ValueError):
    pass


def sym(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


class ManifoldKit:
    """Base class; subclasses fill in the family specific formulas."""

    family: str = ""

    def __init__(self, d1: int, r: int):
        d1, r = int(d1), int(r)
        if d1 <= 0 or r <= 0:
            raise DimensionError("dimensions must be positive")
        if r > d1:
            raise DimensionError(f"r={r} cannot exceed d1={d1}")
        self.d1 = d1
        self.r = r

    @property
    def shape(self) -> tuple[int, int]:
        return (self.d1, self.r)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(d1={self.d1}, r={self.r})"

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != self.shape:
            raise DimensionError(f"expected shape {self.shape}, got {x.shape}")
        return x

    # -- interface -------------------------------------------------------
    def constraint(self, x):
        raise NotImplementedError

    def dissolve(self, x):
        raise NotImplementedError

    def dissolve_jtp(self, x, u):
        raise NotImplementedError

    def constraint_jtp(self, x, v):
        raise NotImplementedError

    def project(self, x):
        raise NotImplementedError

    def riemannian_grad(self, xbar, g):
        raise NotImplementedError

    def sup_norm(self) -> float:
        """sup of the Frobenius norm over the manifold."""
        raise NotImplementedError

    # -- shared ----------------------------------------------------------
    def constraint_norm(self, x) -> float:
        return float(np.linalg.norm(self.constraint(x)))

    def dist(self, x) -> float:
        x = self._check(x)
        return float(np.linalg.norm(x - self.project(x)))

    def contains(self, x, tol: float = ON_MANIFOLD_TOL) -> bool:
        return self.constraint_norm(x) <= tol

    def penalty_grad(self, x) -> np.ndarray:
        """Gradient of ``0.25 * ||c(x)||^2``, i.e. ``0.5 * J_c(x)^T c(x)``."""
        return 0.5 * self.constraint_jtp(x, self.constraint(x))

    def random_point(self, rng: np.random.Generator) -> np.ndarray:
        return self.project(rng.standard_normal(self.shape))

    def _require_on_manifold(self, xbar):
        if not self.contains(xbar):
            raise ValueError(
                f"point is off the manifold: ||c(x)|| = {self.constraint_norm(xbar):.3e}"
            )


class Stiefel(ManifoldKit):
    family = "stiefel"

    def constraint(self, x):
        x = self._check(x)
        return x.T @ x - np.eye(self.r)

    def dissolve(self, x):
        x = self._check(x)
        return x @ (1.5 * np.eye(self.r) - 0.5 * (x.T @ x))

    def dissolve_jtp(self, x, u):
        x = self._check(x)
        u = self._check(u)
        return u @ (1.5 * np.eye(self.r) - 0.5 * (x.T @ x)) - x @ sym(x.T @ u)

    def constraint_jtp(self, x, v):
        x = self._check(x)
        v = np.asarray(v, dtype=float)
        if v.shape != (self.r, self.r):
            raise DimensionError(f"expected ({self.r}, {self.r}) multiplier, got {v.shape}")
        return 2.0 * x @ sym(v)

    def project(self, x):
        x = self._check(x)
        u, s, vt = np.linalg.svd(x, full_matrices=False)
        if s[-1] <= 0.0:
            raise DegenerateInputError("rank-deficient point has no unique projection")
        return u @ vt

    def riemannian_grad(self, xbar, g):
        xbar = self._check(xbar)
        g = self._check(g)
        self._require_on_manifold(xbar)
        return g - xbar @ sym(xbar.T @ g)

    def sup_norm(self) -> float:
        return float(np.sqrt(self.r))


class Oblique(ManifoldKit):
    family = "oblique"

    def constraint(self, x):
        x = self._check(x)
        return np.einsum("ij,ij->j", x, x) - 1.0

    def dissolve(self, x):
        x = self._check(x)
        n = np.einsum("ij,ij->j", x, x)
        return 2.0 * x / (1.0 + n)

    def dissolve_jtp(self, x, u):
        # column j: J_j = 2/(1+n_j) I - 4/(1+n_j)^2 x_j x_j^T, which is symmetric
        x = self._check(x)
        u = self._check(u)
        n = np.einsum("ij,ij->j", x, x)
        xu = np.einsum("ij,ij->j", x, u)
        return 2.0 * u / (1.0 + n) - 4.0 * x * (xu / (1.0 + n) ** 2)

    def constraint_jtp(self, x, v):
        x = self._check(x)
        v = np.asarray(v, dtype=float)
        if v.shape != (self.r,):
            raise DimensionError(f"expected ({self.r},) multiplier, got {v.shape}")
        return 2.0 * x * v

    def project(self, x):
        x = self._check(x)
        norms = np.linalg.norm(x, axis=0)
        if np.any(norms <= 0.0):
            raise DegenerateInputError("zero column has no unique projection")
        return x / norms

    def riemannian_grad(self, xbar, g):
        xbar = self._check(xbar)
        g = self._check(g)
        self._require_on_manifold(xbar)
        return g - xbar * np.einsum("ij,ij->j", xbar, g)

    def sup_norm(self) -> float:
        return float(np.sqrt(self.r))


class GeneralizedStiefel(ManifoldKit):
    family = "generalized_stiefel"

    def __init__(self, d1: int, r: int, B):
        super().__init__(d1, r)
        B = np.array(B, dtype=float)
        if B.shape != (self.d1, self.d1):
            raise DimensionError(f"metric matrix must be {self.d1}x{self.d1}")
        if not np.allclose(B, B.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(B).max())):
            raise ValueError("metric matrix must be symmetric")
        B = sym(B)
        w, V = np.linalg.eigh(B)
        if w[-1] <= 0.0 or w[0] <= 1e-12 * w[-1]:
            raise ValueError("metric matrix must be positive definite")
        self.B = B
        self.B_half = (V * np.sqrt(w)) @ V.T
        self.B_inv_half = (V / np.sqrt(w)) @ V.T
        self._lam_min = float(w[0])
        for a in (self.B, self.B_half, self.B_inv_half):
            a.setflags(write=False)

    def constraint(self, x):
        x = self._check(x)
        return x.T @ self.B @ x - np.eye(self.r)

    def dissolve(self, x):
        x = self._check(x)
        return x @ (1.5 * np.eye(self.r) - 0.5 * (x.T @ self.B @ x))

    def dissolve_jtp(self, x, u):
        x = self._check(x)
        u = self._check(u)
        bx = self.B @ x
        return u @ (1.5 * np.eye(self.r) - 0.5 * (x.T @ bx)) - bx @ sym(x.T @ u)

    def constraint_jtp(self, x, v):
        x = self._check(x)
        v = np.asarray(v, dtype=float)
        if v.shape != (self.r, self.r):
            raise DimensionError(f"expected ({self.r}, {self.r}) multiplier, got {v.shape}")
        return 2.0 * (self.B @ x) @ sym(v)

    def project(self, x):
        # nearest point in the B-weighted norm, mapped back through B^{-1/2}
        x = self._check(x)
        u, s, vt = np.linalg.svd(self.B_half @ x, full_matrices=False)
        if s[-1] <= 0.0:
            raise DegenerateInputError("rank-deficient point has no unique projection")
        return self.B_inv_half @ (u @ vt)

    def riemannian_grad(self, xbar, g):
        # remove the normal component B x S, S symmetric, solving the Lyapunov
        # equation M S + S M = 2 sym(x^T B g) with M = x^T B^2 x
        xbar = self._check(xbar)
        g = self._check(g)
        self._require_on_manifold(xbar)
        bx = self.B @ xbar
        w, V = np.linalg.eigh(sym(bx.T @ bx))
        rhs = V.T @ (2.0 * sym(bx.T @ g)) @ V
        S = V @ (rhs / (w[:, None] + w[None, :])) @ V.T
        return g - bx @ S

    def sup_norm(self) -> float:
        return float(np.sqrt(self.r / self._lam_min))


FAMILIES = {
    "stiefel": Stiefel,
    "oblique": Oblique,
    "generalized_stiefel": GeneralizedStiefel,
}


def make_kit(family: str, d1: int, r: int, B: Optional[np.ndarray] = None) -> ManifoldKit:
    key = family.lower().replace("-", "_")
    if key not in FAMILIES:
        raise ValueError(f"unknown manifold family {family!r}")
    if key == "generalized_stiefel":
        if B is None:
            raise ValueError("generalized Stiefel kit needs a metric matrix B")
        return GeneralizedStiefel(d1, r, B)
    if B is not None:
        raise ValueError(f"{family} kit takes no metric matrix")
    return FAMILIES[key](d1, r)
