import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from smgda.prox import (Regularizer, project_ball, project_ball_vec, project_simplex,
                        project_spectral_ball)

vecs = arrays(np.float64, st.integers(1, 8), elements=st.floats(-50, 50))


def simplex_oracle(v, iters=200):
    # bisection on the threshold: sum max(v - t, 0) = 1
    lo, hi = v.min() - 1.0, v.max()
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if np.maximum(v - mid, 0).sum() > 1.0:
            lo = mid
        else:
            hi = mid
    return np.maximum(v - 0.5 * (lo + hi), 0)


@given(vecs)
def test_simplex_projection_matches_bisection(v):
    p = project_simplex(v)
    assert p.min() >= 0
    assert abs(p.sum() - 1) <= 1e-9
    assert np.allclose(p, simplex_oracle(v), atol=1e-9)


def test_simplex_projection_examples():
    assert np.allclose(project_simplex(np.array([0.5, 0.5])), [0.5, 0.5])
    assert np.allclose(project_simplex(np.array([2.0, 0.0])), [1.0, 0.0])
    assert np.allclose(project_simplex(np.array([1.0, 1.0, 1.0])), [1 / 3] * 3)


@given(vecs, st.floats(0.1, 10))
def test_ball_projection(v, R):
    p = project_ball_vec(v, R)
    assert np.linalg.norm(p) <= R * (1 + 1e-12)
    if np.linalg.norm(v) <= R:
        assert np.array_equal(p, v)
    else:
        assert np.allclose(p, v * R / np.linalg.norm(v))


def test_project_ball_returns_same_object_inside():
    x = np.ones((3, 2))
    assert project_ball(x, 10.0) is x
    y = project_ball(x, 1.0)
    assert y is not x and np.linalg.norm(y) == pytest.approx(1.0)


def test_spectral_ball_clips_singular_values(rng):
    x = rng.standard_normal((5, 3)) * 4
    y = project_spectral_ball(x, 2.0)
    s = np.linalg.svd(y, compute_uv=False)
    assert s.max() <= 2.0 + 1e-12
    s0 = np.linalg.svd(x, compute_uv=False)
    assert np.allclose(np.sort(s), np.sort(np.minimum(s0, 2.0)))


KINDS = [
    Regularizer("zero"),
    Regularizer("ball", radius=1.5),
    Regularizer("simplex"),
    Regularizer("quadratic", alpha=0.7, center=np.array([1.0, -1.0, 0.5, 0.0])),
    Regularizer("ball_quadratic", radius=2.0, alpha=0.3),
    Regularizer("simplex_quadratic", alpha=1.2),
]


def prox_objective(h, tau, v, y):
    return tau * h.value(y) + 0.5 * np.sum((y - v) ** 2)


@pytest.mark.parametrize("h", KINDS, ids=lambda h: h.kind)
def test_prox_beats_feasible_perturbations(h, rng):
    for _ in range(20):
        v = 2 * rng.standard_normal(4)
        p = h.prox(0.4, v)
        assert h.in_domain(p, tol=1e-10)
        best = prox_objective(h, 0.4, v, p)
        for _ in range(50):
            q = p + 0.05 * rng.standard_normal(4)
            if h.has_simplex:
                q = project_simplex(q)
            if h.has_ball:
                q = project_ball_vec(q, h.radius)
            assert prox_objective(h, 0.4, v, q) >= best - 1e-12


@pytest.mark.parametrize("h", KINDS, ids=lambda h: h.kind)
def test_prox_optimality_condition(h, rng):
    for _ in range(30):
        v = 3 * rng.standard_normal(4)
        p = h.prox(0.5, v)
        assert h.subdiff_dist(p, (v - p) / 0.5) <= 1e-10


def simplex_dist_oracle(y, g):
    # dist(g, N(y)) by dense scan over the multiplier
    supp = y > 1e-9
    lams = np.linspace(g.min() - 1, g.max() + 1, 200001)
    res = ((g[supp][None, :] - lams[:, None]) ** 2).sum(1)
    res += (np.maximum(g[~supp][None, :] - lams[:, None], 0) ** 2).sum(1)
    return np.sqrt(res.min())


def test_simplex_subdiff_dist_matches_scan(rng):
    h = Regularizer("simplex")
    for _ in range(20):
        y = project_simplex(2 * rng.standard_normal(5))
        g = rng.standard_normal(5)
        assert h.subdiff_dist(y, g) == pytest.approx(simplex_dist_oracle(y, g), abs=1e-4)


def test_ball_subdiff_dist():
    h = Regularizer("ball", radius=1.0)
    y = np.array([1.0, 0.0])
    # outward gradient is absorbed by the normal cone, the tangential part is not
    assert h.subdiff_dist(y, np.array([3.0, 0.0])) == pytest.approx(0.0)
    assert h.subdiff_dist(y, np.array([3.0, 2.0])) == pytest.approx(2.0)
    assert h.subdiff_dist(y, np.array([-3.0, 0.0])) == pytest.approx(3.0)
    assert h.subdiff_dist(np.zeros(2), np.array([3.0, 4.0])) == pytest.approx(5.0)


def test_quadratic_prox_closed_form():
    c = np.array([1.0, 2.0])
    h = Regularizer("quadratic", alpha=0.5, center=c)
    v = np.array([3.0, -1.0])
    # argmin tau*alpha|y-c|^2 + |y-v|^2/2  =>  y = (v + 2 tau alpha c)/(1 + 2 tau alpha)
    assert np.allclose(h.prox(2.0, v), (v + 2 * c) / 3)


def test_tikhonov_wrapping():
    h = Regularizer("ball", radius=1.0).with_tikhonov(0.25, np.zeros(3))
    assert h.kind == "ball_quadratic" and h.alpha == 0.25
    with pytest.raises(ValueError):
        h.with_tikhonov(0.1, np.zeros(3))


def test_weakly_convex_step_guard():
    h = Regularizer("ball", radius=1.0, zeta=2.0)
    h.prox(0.4, np.ones(2))
    with pytest.raises(ValueError):
        h.prox(0.5, np.ones(2))


def test_diameter_and_center():
    assert Regularizer("ball", radius=2.0).diameter == 4.0
    assert Regularizer("simplex").diameter == pytest.approx(np.sqrt(2))
    assert Regularizer("zero").diameter == np.inf
    assert np.allclose(Regularizer("simplex").domain_center(4), 0.25)


def test_invalid_regularizer():
    with pytest.raises(ValueError):
        Regularizer("l1")
    with pytest.raises(ValueError):
        Regularizer("ball", radius=-1.0)
