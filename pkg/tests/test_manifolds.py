import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import fd_jtp, spd
from smgda.manifolds import (DegenerateInputError, DimensionError, GeneralizedStiefel,
                             Oblique, Stiefel, make_kit, sym)


def kits(rng, d1=7, r=3):
    return [Stiefel(d1, r), Oblique(d1, r), GeneralizedStiefel(d1, r, spd(rng, d1))]


def multiplier(kit, rng, x):
    v = rng.standard_normal(np.shape(kit.constraint(x)))
    return sym(v) if v.ndim == 2 else v


dims = st.tuples(st.integers(1, 8), st.integers(1, 4)).filter(lambda t: t[1] <= t[0])


@given(dims, st.integers(0, 2**31), st.sampled_from(["stiefel", "oblique", "generalized_stiefel"]))
def test_dissolve_is_identity_on_manifold(dim, seed, fam):
    d1, r = dim
    rng = np.random.default_rng(seed)
    B = spd(rng, d1) if fam == "generalized_stiefel" else None
    kit = make_kit(fam, d1, r, B)
    x = kit.random_point(rng)
    assert np.abs(kit.constraint(x)).max() <= 1e-10
    assert np.abs(kit.dissolve(x) - x).max() <= 1e-10
    assert kit.contains(x)


@pytest.mark.parametrize("idx", [0, 1, 2])
def test_jtp_against_finite_differences(rng, idx):
    kit = kits(rng)[idx]
    for _ in range(10):
        x = kit.random_point(rng) + 0.2 * rng.standard_normal(kit.shape)
        u = rng.standard_normal(kit.shape)
        v = multiplier(kit, rng, x)
        fd = fd_jtp(kit.dissolve, x, u)
        assert np.linalg.norm(kit.dissolve_jtp(x, u) - fd) <= 1e-6 * np.linalg.norm(fd)
        fd = fd_jtp(kit.constraint, x, v)
        assert np.linalg.norm(kit.constraint_jtp(x, v) - fd) <= 1e-6 * np.linalg.norm(fd)


def test_stiefel_formulas_small_example():
    kit = Stiefel(2, 1)
    x = np.array([[2.0], [0.0]])
    # A(x) = x (1.5 - 0.5 * 4) = -0.5 x, c(x) = 3
    assert np.allclose(kit.dissolve(x), [[-1.0], [0.0]])
    assert np.allclose(kit.constraint(x), [[3.0]])
    assert np.allclose(kit.penalty_grad(x), 0.5 * 2 * x * 3)


def test_oblique_dissolve_formula(rng):
    kit = Oblique(4, 3)
    x = rng.standard_normal((4, 3))
    n = np.sum(x * x, axis=0)
    assert np.allclose(kit.dissolve(x), 2 * x / (1 + n))
    assert np.allclose(kit.constraint(x), n - 1)


def test_stiefel_projection_is_polar_factor(rng):
    kit = Stiefel(6, 3)
    for _ in range(5):
        x = rng.standard_normal((6, 3))
        w, V = np.linalg.eigh(x.T @ x)
        polar = x @ (V / np.sqrt(w)) @ V.T
        assert np.allclose(kit.project(x), polar, atol=1e-12)


def test_projection_is_nearest_among_samples(rng):
    kit = Stiefel(3, 2)
    x = rng.standard_normal((3, 2))
    d = np.linalg.norm(x - kit.project(x))
    others = [kit.random_point(rng) for _ in range(5000)]
    assert d <= min(np.linalg.norm(x - o) for o in others) + 1e-12


def test_oblique_projection_normalizes_columns(rng):
    kit = Oblique(5, 2)
    x = rng.standard_normal((5, 2))
    p = kit.project(x)
    assert np.allclose(p, x / np.linalg.norm(x, axis=0))


def test_generalized_projection_nearest_in_metric(rng):
    B = spd(rng, 3, cond=5.0)
    kit = GeneralizedStiefel(3, 1, B)
    x = rng.standard_normal((3, 1))
    p = kit.project(x)
    assert kit.contains(p)
    bnorm = lambda a: float(np.sqrt(np.sum(a * (B @ a))))
    best = min(bnorm(x - kit.random_point(rng)) for _ in range(20000))
    assert bnorm(x - p) <= best + 1e-12


@pytest.mark.parametrize("idx", [0, 1, 2])
def test_riemannian_grad_is_tangent_and_difference_normal(rng, idx):
    kit = kits(rng)[idx]
    x = kit.random_point(rng)
    g = rng.standard_normal(kit.shape)
    xi = kit.riemannian_grad(x, g)
    # tangent: directional derivative of c vanishes
    h = 1e-6
    dc = (kit.constraint(x + h * xi) - kit.constraint(x - h * xi)) / (2 * h)
    assert np.abs(dc).max() <= 1e-7
    # g - xi lies in the normal space, i.e. is orthogonal to every tangent vector
    for _ in range(5):
        t = kit.riemannian_grad(x, rng.standard_normal(kit.shape))
        assert abs(np.sum((g - xi) * t)) <= 1e-10


def test_riemannian_grad_rejects_off_manifold(rng):
    kit = Stiefel(4, 2)
    with pytest.raises(ValueError):
        kit.riemannian_grad(2 * kit.random_point(rng), np.ones((4, 2)))


def test_dimension_errors():
    with pytest.raises(DimensionError):
        Stiefel(2, 3)
    with pytest.raises(DimensionError):
        Stiefel(3, 2).constraint(np.zeros((2, 3)))
    with pytest.raises(DimensionError):
        Oblique(0, 1)


def test_degenerate_projection():
    with pytest.raises(DegenerateInputError):
        Stiefel(3, 2).project(np.zeros((3, 2)))
    with pytest.raises(DegenerateInputError):
        Oblique(3, 2).project(np.zeros((3, 2)))


def test_generalized_stiefel_rejects_bad_metric(rng):
    with pytest.raises(ValueError):
        GeneralizedStiefel(3, 1, rng.standard_normal((3, 3)) + 5 * np.eye(3) + np.triu(np.ones((3, 3))))
    with pytest.raises(ValueError):
        GeneralizedStiefel(2, 1, np.diag([1.0, -1.0]))
    with pytest.raises(DimensionError):
        GeneralizedStiefel(2, 1, np.eye(3))


def test_metric_is_read_only(rng):
    kit = GeneralizedStiefel(3, 1, spd(rng, 3))
    with pytest.raises(ValueError):
        kit.B[0, 0] = 1.0


def test_make_kit_validation():
    with pytest.raises(ValueError):
        make_kit("sphere", 3, 1)
    with pytest.raises(ValueError):
        make_kit("generalized_stiefel", 3, 1)
    with pytest.raises(ValueError):
        make_kit("stiefel", 3, 1, np.eye(3))


def test_sup_norm(rng):
    assert Stiefel(5, 3).sup_norm() == pytest.approx(np.sqrt(3))
    B = np.diag([4.0, 2.0, 1.0])
    kit = GeneralizedStiefel(3, 1, B)
    assert kit.sup_norm() == pytest.approx(1.0)
    pts = [kit.random_point(rng) for _ in range(200)]
    assert max(np.linalg.norm(p) for p in pts) <= kit.sup_norm() + 1e-12
