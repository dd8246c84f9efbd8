"""Quick invariant and oracle checks run by ``mmx check``.

Each check returns ``(ok, detail)``.  They are smaller versions of the test
suite that need nothing beyond the package itself.
"""
from __future__ import annotations

import numpy as np

from . import kernels
from . import solver as S
from .manifolds import GeneralizedStiefel, Oblique, Stiefel
from .penalty import make_penalized
from .problems import generate_quadratic, make_problem, practical_L
from .prox import Regularizer


def _kits(rng):
    d1, r = 8, 3
    M = rng.standard_normal((d1, d1))
    B = M @ M.T + d1 * np.eye(d1)
    return [Stiefel(d1, r), Oblique(d1, r), GeneralizedStiefel(d1, r, B)]


def _fd_jtp(fun, x, u, h=1e-6):
    """``J(x)^T u`` by central differences of ``<u, fun(x)>``."""
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        e = np.zeros_like(x)
        e[idx] = h
        g[idx] = (np.sum(u * fun(x + e)) - np.sum(u * fun(x - e))) / (2 * h)
    return g


def check_operator_identities(rng) -> tuple[bool, str]:
    worst = 0.0
    for kit in _kits(rng):
        for _ in range(20):
            x = kit.random_point(rng)
            worst = max(worst, np.abs(kit.dissolve(x) - x).max(),
                        np.abs(kit.constraint(x)).max())
    return worst <= 1e-10, f"max |A(x)-x|, |c(x)| on manifold = {worst:.2e}"


def check_jtp(rng) -> tuple[bool, str]:
    worst = 0.0
    for kit in _kits(rng):
        for _ in range(5):
            x = kit.random_point(rng) + 0.1 * rng.standard_normal(kit.shape)
            u = rng.standard_normal(kit.shape)
            v = rng.standard_normal(np.shape(kit.constraint(x)))
            if v.ndim == 2:
                v = 0.5 * (v + v.T)
            for exact, fd in ((kit.dissolve_jtp(x, u), _fd_jtp(kit.dissolve, x, u)),
                              (kit.constraint_jtp(x, v), _fd_jtp(kit.constraint, x, v))):
                worst = max(worst, np.linalg.norm(exact - fd) / max(np.linalg.norm(fd), 1e-12))
    return worst <= 1e-5, f"max relative JTP error vs finite differences = {worst:.2e}"


def check_penalized_gradient(rng) -> tuple[bool, str]:
    worst = 0.0
    for mu in (0.0, 1.0):
        inst = generate_quadratic(6, 6, 5.0, mu, seed=int(rng.integers(1 << 30)))
        pp = make_penalized(make_problem(inst), Stiefel(6, 1), 10.0, 1000.0)
        for _ in range(5):
            x = rng.standard_normal((6, 1))
            y = rng.standard_normal(6)
            gx = _fd_jtp(lambda z: pp.value(z, y), x, np.ones(()))
            gy = _fd_jtp(lambda w: pp.value(x, w), y, np.ones(()))
            for a, b in ((pp.grad_x(x, y), gx), (pp.grad_y(x, y), gy)):
                worst = max(worst, np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12))
    return worst <= 1e-5, f"max relative gradient error = {worst:.2e}"


def check_closed_form(rng, samples: int = 200_000) -> tuple[bool, str]:
    inst = generate_quadratic(2, 2, 5.0, 0.0, seed=int(rng.integers(1 << 30)))
    ang = np.linspace(0.0, 2 * np.pi, samples, endpoint=False)
    X = np.stack([np.cos(ang), np.sin(ang)])
    vals = 0.5 * np.sum(X * (inst.Q @ X), axis=0) + np.linalg.norm(inst.A.T @ X, axis=0)
    err = abs(vals.min() - inst.F_star)
    return err <= 1e-3, f"|F* - grid min| = {err:.2e}"


def check_prox(rng) -> tuple[bool, str]:
    worst = 0.0
    for h in (Regularizer("ball", radius=1.0), Regularizer("simplex"),
              Regularizer("ball_quadratic", radius=2.0, alpha=0.3)):
        for _ in range(20):
            v = 3 * rng.standard_normal(5)
            p = h.prox(0.5, v)
            # prox optimality: (v - p)/tau must lie in the subdifferential at p
            worst = max(worst, h.subdiff_dist(p, (v - p) / 0.5))
    return worst <= 1e-8, f"max prox optimality residual = {worst:.2e}"


def check_backends(rng) -> tuple[bool, str]:
    inst = generate_quadratic(10, 10, 5.0, 0.0, seed=int(rng.integers(1 << 30)))
    pp = make_penalized(make_problem(inst), Stiefel(10, 1), 10.0, 1000.0)
    cfg = S.practical_config(practical_L(inst), max_iters=300, record_every=50)
    ref = S.run(pp, cfg, backend="generic")
    worst = 0.0
    for b in kernels.available_backends():
        res = S.run(pp, cfg, backend=b)
        worst = max(worst, np.abs(res.state.x - ref.state.x).max(),
                    np.abs(res.state.y - ref.state.y).max())
    return worst <= 1e-9, f"max backend deviation = {worst:.2e} ({', '.join(kernels.available_backends())})"


CHECKS = {
    "operator_identities": check_operator_identities,
    "jtp_finite_difference": check_jtp,
    "penalized_gradient": check_penalized_gradient,
    "closed_form_optimum": check_closed_form,
    "prox_optimality": check_prox,
    "backend_agreement": check_backends,
}


def run_checks(seed: int = 0) -> list[tuple[str, bool, str]]:
    out = []
    for name, fn in CHECKS.items():
        ok, detail = fn(np.random.default_rng([2, seed]))
        out.append((name, bool(ok), detail))
    return out
