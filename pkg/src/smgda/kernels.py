"""Hot-loop kernel selection.

The compiled ``_ckernel`` extension is used when it was built; otherwise the
numpy implementation in ``_pykernel`` is used.  Setting the environment
variable ``SMGDA_PURE_PYTHON=1`` forces the fallback.
"""
from __future__ import annotations

import os

import numpy as np

from . import _pykernel

_BACKENDS = {"python": _pykernel.quadratic_smgda}

try:
    from . import _ckernel
except ImportError:  # extension not built
    _ckernel = None
else:
    _BACKENDS["cython"] = _ckernel.quadratic_smgda

if _ckernel is not None and os.environ.get("SMGDA_PURE_PYTHON", "") not in ("1", "true", "yes"):
    BACKEND = "cython"
else:
    BACKEND = "python"

H_ZERO = 0
H_BALL = 1


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def quadratic_smgda(Q, A, mu_y, y_ball_radius, alpha, center, x0, y0, z0, tau1s, thetas,
                    tau2, p, beta, rho, C, tol=0.0, record_every=1, backend=None):
    """Run the fused sm-MGDA loop for a quadratic problem on the unit sphere.

    ``y_ball_radius`` is ``None`` for ``h = alpha*||y - center||^2`` alone,
    otherwise the dual domain is the ball of that radius.  ``tau1s`` and
    ``thetas`` are per-iteration schedules whose length is the iteration
    budget.  Returns a dict with per-iteration squared residuals ``gx2``,
    ``gy2``, constraint violation ``c_norm``, ``x_norm``, ``ball_active``
    flags, and state snapshots ``rec_x``/``rec_y`` at iterations ``rec_t``
    (iteration 1, every ``record_every``-th, and the last).
    """
    fn = _BACKENDS[backend or BACKEND]
    Q = np.ascontiguousarray(Q, dtype=np.float64)
    A = np.ascontiguousarray(A, dtype=np.float64)
    n = A.shape[1]
    center = np.zeros(n) if center is None else np.ascontiguousarray(center, dtype=np.float64)
    h_code, radius = (H_ZERO, 1.0) if y_ball_radius is None else (H_BALL, float(y_ball_radius))
    tau1s = np.ascontiguousarray(tau1s, dtype=np.float64)
    thetas = np.ascontiguousarray(thetas, dtype=np.float64)
    if tau1s.shape != thetas.shape:
        raise ValueError("schedules must have equal length")
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    vec = lambda a: np.ascontiguousarray(np.asarray(a, dtype=np.float64).reshape(-1))
    return fn(Q, A, float(mu_y), h_code, radius, float(alpha), center,
              vec(x0), vec(y0), vec(z0), tau1s, thetas, float(tau2), float(p),
              float(beta), float(rho), float(C), float(tol), int(record_every))
