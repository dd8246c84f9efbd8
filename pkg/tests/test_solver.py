import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from smgda import kernels
from smgda import solver as S
from smgda.manifolds import Oblique, Stiefel
from smgda.penalty import make_penalized
from smgda.problems import (Lipschitz, MinimaxProblem, generate_quadratic, make_problem,
                            practical_L)
from smgda.prox import Regularizer


def quad_pp(m=8, mu=0.0, seed=0, L=5.0, rho=10.0, C=1000.0):
    inst = generate_quadratic(m, m, L, mu, seed=seed)
    return inst, make_penalized(make_problem(inst), Stiefel(m, 1), rho, C)


def test_practical_preset_values():
    cfg = S.practical_config(5.0)
    assert cfg.tau1 == pytest.approx(1 / 30) and cfg.tau2 == pytest.approx(1 / 90)
    assert (cfg.p, cfg.beta, cfg.rho, cfg.C) == (10.0, 0.9, 10.0, 1000.0)
    m = S.mgda_config(5.0)
    assert m.p == 0.0 and m.beta == 0.0 and m.tau1 == cfg.tau1 and m.tau2 == cfg.tau2


def test_rgda_steps():
    assert S.rgda_steps(5.0, 1.0) == pytest.approx((1 / 320, 1 / 5))
    assert S.rgda_steps(10.0) == pytest.approx((1 / 160, 1 / 10))


def test_pl_preset():
    cfg = S.pl_config(l=100.0, mu=2.0)
    assert cfg.tau1 == pytest.approx(1 / 300)
    assert cfg.tau2 == pytest.approx(1 / (16 * 900))
    assert cfg.p == 200.0
    assert cfg.beta == pytest.approx(2.0 * cfg.tau2 / 4612)
    assert cfg.kappa_bar == pytest.approx(50.0)
    with pytest.raises(ValueError):
        S.pl_config(l=1.0, mu=1.0, tau1=1.0)
    with pytest.raises(ValueError):
        S.pl_config(l=1.0, mu=1.0, alpha=0.01)


def test_concave_schedules():
    l, lyy = 20.0, 1.0
    cfg = S.concave_config(l, lyy, max_iters=500)
    b_min = max(2 / (cfg.tau2 * l) - 1, 32 * 400 / 361)
    assert cfg.concave_b > b_min and cfg.p == 0.0 and cfg.beta == 1.0
    assert cfg.tau2 <= 1 / (10 * lyy)
    tau1s, thetas = cfg.schedules()
    assert np.all(np.diff(tau1s) < 0) and np.all(np.diff(thetas) < 0)
    t = np.arange(500)
    expect = 2 / (2 * cfg.tau2 * l * l * (1 + cfg.concave_b * np.sqrt(t + 1)) - l)
    assert np.allclose(tau1s, expect)
    assert np.allclose(thetas, 0.95 / cfg.tau2 * (t + 1) ** -0.25)
    assert cfg.tau1_at(7) == pytest.approx(tau1s[7])
    assert cfg.theta_at(7) == pytest.approx(thetas[7])
    with pytest.raises(ValueError):
        S.concave_config(l, lyy, b=1.0)
    with pytest.raises(ValueError):
        S.concave_config(l, lyy, tau2=1.0)


def test_config_validation():
    with pytest.raises(ValueError):
        S.SolverConfig(tau1=0.0, tau2=1.0, p=0.0, beta=0.0)
    with pytest.raises(ValueError):
        S.SolverConfig(tau1=1.0, tau2=1.0, p=0.0, beta=1.5)
    with pytest.raises(ValueError):
        S.SolverConfig(tau1=1.0, tau2=1.0, p=-1.0, beta=0.5)
    with pytest.raises(ValueError):
        S.SolverConfig(tau1=1.0, tau2=1.0, p=0.0, beta=0.5, regime="fast")
    with pytest.raises(ValueError):
        S.SolverConfig(tau1=1.0, tau2=1.0, p=0.0, beta=0.5, regime="tikhonov")


def test_select_rho():
    assert S.select_rho(1.0, -1.0, 2.0, 0.5, 2.0) == pytest.approx(16 * (2 + 5))
    assert S.select_rho(1.0, -1.0, 2.0, 0.5, 2.0, Lx_bar=10.0) == pytest.approx(360.0)


def test_step_by_hand(rng):
    inst, pp = quad_pp(m=4, mu=1.0)
    cfg = S.practical_config(5.0)
    x = rng.standard_normal((4, 1))
    z = rng.standard_normal((4, 1))
    y = rng.standard_normal(4)
    new, info = S.smgda_step(pp, cfg, S.IterateState(x, y, z, 0))
    xn = x - cfg.tau1 * (pp.grad_x(x, y) + cfg.p * (x - z))
    yn = y + cfg.tau2 * pp.grad_y(xn, y)
    assert np.allclose(new.x, xn) and np.allclose(new.y, yn)
    assert np.allclose(new.z, z + 0.9 * (xn - z))
    assert new.t == 1 and not info["ball_active"]


def test_step_projects_onto_ball(rng):
    inst, pp = quad_pp(m=4, C=1.6)
    cfg = S.practical_config(5.0, C=1.6, tau1=5.0)
    x = 1.5 * Stiefel(4, 1).random_point(rng)
    new, info = S.smgda_step(pp, cfg, S.IterateState(x, np.zeros(4), x, 0))
    assert info["ball_active"] and np.linalg.norm(new.x) == pytest.approx(1.6)


@pytest.mark.parametrize("mu", [0.0, 1.0])
def test_backends_agree(mu):
    inst, pp = quad_pp(m=12, mu=mu, seed=5)
    cfg = S.practical_config(practical_L(inst), max_iters=800, record_every=100)
    ref = S.run(pp, cfg, backend="generic")
    for b in kernels.available_backends():
        res = S.run(pp, cfg, backend=b)
        assert res.iters == ref.iters
        assert np.allclose(res.state.x, ref.state.x, atol=1e-12, rtol=0)
        # squared residuals cancel near convergence, compare on the scale of the start
        scale = ref.gx2[0] + ref.gy2[0]
        assert np.allclose(res.gx2, ref.gx2, rtol=1e-9, atol=1e-12 * scale)
        assert np.allclose(res.gy2, ref.gy2, rtol=1e-9, atol=1e-12 * scale)
        assert [r.t for r in res.trace] == [r.t for r in ref.trace]


def test_backends_agree_with_schedules_and_tikhonov():
    inst, pp = quad_pp(m=6, mu=0.0, seed=1, C=1.6)
    base = S.concave_config(50.0, 0.0, max_iters=300, record_every=50, C=1.6)
    for cfg in (base, S.tikhonov_config(S.practical_config(5.0, max_iters=300), 1e-2)):
        ref = S.run(pp, cfg, backend="generic")
        for b in kernels.available_backends():
            res = S.run(pp, cfg, backend=b)
            assert np.allclose(res.state.y, ref.state.y, atol=1e-12, rtol=0)


def test_kernel_residuals_match_metric_formula():
    from smgda.metrics import penalized_residuals
    inst, pp = quad_pp(m=6, mu=1.0, seed=2)
    cfg = S.practical_config(5.0, max_iters=1)
    s0 = S.initial_state(pp, cfg)
    res = S.run(pp, cfg, state=s0)
    gx, gy = penalized_residuals(pp, s0.x, res.state.x, s0.y, res.state.y, s0.z,
                                 cfg.tau1, cfg.tau2, cfg.p)
    assert res.gx2[0] == pytest.approx(gx ** 2) and res.gy2[0] == pytest.approx(gy ** 2)


def test_run_is_deterministic():
    inst, pp = quad_pp(m=10, seed=3)
    cfg = S.practical_config(5.0, max_iters=500, seed=4)
    a, b = S.run(pp, cfg), S.run(pp, cfg)
    assert np.array_equal(a.state.x, b.state.x) and np.array_equal(a.gx2, b.gx2)
    c = S.run(pp, S.practical_config(5.0, max_iters=500, seed=5))
    assert not np.array_equal(a.state.x, c.state.x)


@pytest.mark.parametrize("backend", ["generic"] + kernels.available_backends())
def test_resume_matches_single_run(backend):
    inst, pp = quad_pp(m=6, seed=2)
    cfg = S.concave_config(40.0, 0.0, max_iters=200, C=1.6)
    full = S.run(pp, cfg, backend=backend)
    half = S.replace(cfg, max_iters=100)
    first = S.run(pp, half, backend=backend)
    second = S.run(pp, half, state=first.state, backend=backend)
    assert second.state.t == 200
    assert np.allclose(second.state.x, full.state.x, atol=1e-13)
    assert second.trace[-1].t == 200


def test_tolerance_stops_early():
    inst, pp = quad_pp(m=6, mu=1.0, seed=0)
    cfg = S.practical_config(5.0, max_iters=20000, tol=1e-6)
    res = S.run(pp, cfg)
    assert res.status == S.STATUS_TOL and res.iters < 20000
    assert np.sqrt(res.residual_sq[-1]) <= 1e-6


def test_nonfinite_raises_and_reports():
    inst, pp = quad_pp(m=6, mu=1.0, seed=0)
    cfg = S.practical_config(5.0, tau2=1e3, max_iters=2000)
    with pytest.raises(S.NumericalFailure) as exc:
        S.run(pp, cfg)
    res = exc.value.result
    assert res.status == S.STATUS_NONFINITE and res.trace[-1].t == res.iters
    quiet = S.run(pp, cfg, raise_on_failure=False)
    assert quiet.status == S.STATUS_NONFINITE


def test_generic_backend_on_oblique_with_simplex(rng):
    d1, r = 5, 2
    target = rng.standard_normal((d1, r))
    prob = MinimaxProblem(
        d1=d1, r=r, d2=3,
        eval_f=lambda x, y: 0.5 * float(np.sum((x - target) ** 2)) * float(y @ [1.0, 2.0, 3.0]),
        grad_x=lambda x, y: (x - target) * float(y @ [1.0, 2.0, 3.0]),
        grad_y=lambda x, y: 0.5 * float(np.sum((x - target) ** 2)) * np.array([1.0, 2.0, 3.0]),
        h=Regularizer("simplex_quadratic", alpha=0.5), lipschitz=Lipschitz(3, 3, 3, 1))
    kit = Oblique(d1, r)
    pp = make_penalized(prob, kit, 10.0, 10.0)
    cfg = S.SolverConfig(tau1=0.02, tau2=0.02, p=1.0, beta=0.9, C=10.0, max_iters=3000,
                         record_every=500)
    res = S.run(pp, cfg)
    assert res.backend == "generic"
    assert kit.constraint_norm(res.state.x) <= 1e-6
    assert pp.base.h.in_domain(res.state.y)
    with pytest.raises(ValueError):
        S.run(pp, cfg, backend="python")


def test_rgda_stays_on_manifold():
    inst, pp = quad_pp(m=8, mu=0.0, seed=1)
    tau1, tau2 = S.rgda_steps(5.0)
    s0 = S.initial_state(pp, S.practical_config(5.0))
    res = S.run_rgda(pp.base, pp.kit, tau1, tau2, 500, s0, record_every=100)
    assert res.c_norm.max() <= 1e-10
    assert [r.t for r in res.trace] == [1, 100, 200, 300, 400, 500]


def test_warm_dual_moves_towards_argmax():
    inst, pp = quad_pp(m=6, mu=0.0, seed=1)
    s = S.initial_state(pp, S.practical_config(5.0, warm_dual_steps=5000))
    ax = inst.A.T @ s.x.ravel()
    assert np.allclose(s.y, ax / np.linalg.norm(ax), atol=1e-6)


@given(st.integers(0, 10**6))
def test_initial_state_on_manifold(seed):
    inst, pp = quad_pp(m=5, seed=0)
    s = S.initial_state(pp, S.practical_config(5.0, seed=seed))
    assert pp.kit.contains(s.x) and np.array_equal(s.x, s.z)
    assert np.array_equal(s.y, np.zeros(5))


def test_pure_python_fallback_selected_at_import():
    import os
    import subprocess
    import sys
    env = dict(os.environ, SMGDA_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import smgda; print(smgda.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
    assert "python" in kernels.available_backends()
