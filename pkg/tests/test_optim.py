import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pinnlab.optim import (
    SKIP,
    AdamState,
    LbfgsState,
    LineSearchWarning,
    NumericError,
    adam_step,
    bfgs_inverse_update,
    lbfgs_direction,
    line_search,
    sgd_step,
)


def quad(A):
    return lambda th: (0.5 * th @ A @ th, A @ th)


# ---------------------------------------------------------------------------
# SGD


def test_sgd_square():
    out = sgd_step(np.array([1.0]), lambda th, _: 2 * th, [None], 0.1)
    assert out[0] == pytest.approx(0.8, abs=1e-15)


def test_sgd_zero_gradient():
    th = np.array([0.3, -2.0])
    assert np.array_equal(sgd_step(th, lambda t, _: np.zeros(2), [0, 1, 2], 0.5), th)


def test_sgd_batch_mean():
    g = {0: np.array([1.0, -4.0]), 1: np.array([3.0, 2.0])}
    th = np.array([0.5, 0.5])
    both = sgd_step(th, lambda t, i: g[i], [0, 1], 0.2)
    singles = 0.5 * (sgd_step(th, lambda t, i: g[i], [0], 0.2) + sgd_step(th, lambda t, i: g[i], [1], 0.2))
    assert np.allclose(both, singles, atol=1e-15)


def test_sgd_rejects_empty_batch_and_bad_rate():
    with pytest.raises(ValueError):
        sgd_step(np.zeros(1), lambda t, i: t, [], 0.1)
    with pytest.raises(ValueError):
        sgd_step(np.zeros(1), lambda t, i: t, [0], 0.0)


# ---------------------------------------------------------------------------
# ADAM


def test_adam_first_step_by_hand():
    st_ = AdamState.zeros(1, alpha=0.1)
    th, st_ = adam_step(st_, np.array([1.0]), np.array([2.0]))
    # m_hat = 2, v_hat = 4
    assert th[0] == pytest.approx(1 - 0.1 * 2 / (2 + 1e-8), abs=1e-15)
    assert st_.t == 1


def test_adam_zero_gradient_is_fixed_point():
    st_ = AdamState.zeros(3)
    th = np.array([1.0, 2.0, 3.0])
    for _ in range(10):
        th2, st_ = adam_step(st_, th, np.zeros(3))
        assert np.array_equal(th2, th)
    assert st_.t == 10


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(1e-6, 1e6) | st.floats(-1e6, -1e-6), min_size=1, max_size=8))
def test_adam_first_step_is_alpha_sign(g):
    g = np.array(g)
    st_ = AdamState.zeros(g.size, alpha=0.01)
    th, _ = adam_step(st_, np.zeros(g.size), g)
    # m_hat / sqrt(v_hat) = sign(g) exactly; delta only shrinks the step
    assert np.allclose(th, -0.01 * np.sign(g) * np.abs(g) / (np.abs(g) + 1e-8), rtol=1e-12, atol=0)


def test_adam_step_bound_over_random_steps():
    rng = np.random.default_rng(0)
    st_ = AdamState.zeros(5, alpha=1e-3)
    th = np.zeros(5)
    bound = st_.alpha / (1 - st_.beta1)
    for _ in range(10000):
        g = rng.standard_cauchy(5)
        new, st_ = adam_step(st_, th, g)
        assert np.all(np.abs(new - th) <= bound * (1 + 1e-12))
        th = new


def test_adam_non_finite_gradient_names_index():
    with pytest.raises(NumericError, match="index 2"):
        adam_step(AdamState.zeros(3), np.zeros(3), np.array([0.0, 1.0, np.nan]))


# ---------------------------------------------------------------------------
# L-BFGS


def test_direction_with_empty_history_is_steepest_descent():
    g = np.array([0.5, -3.0])
    assert np.array_equal(lbfgs_direction(LbfgsState(), g), -g)


def test_direction_with_identity_pair():
    s = np.array([1.0, 2.0, -1.0])
    state = LbfgsState()
    assert state.add_pair(s, s.copy())
    g = np.array([0.3, -0.1, 2.0])
    assert np.allclose(lbfgs_direction(state, g), -g, atol=1e-15)


def test_direction_on_2d_quadratic_points_at_minimizer():
    A = np.array([[3.0, 1.0], [1.0, 2.0]])
    state = LbfgsState()
    # two L-BFGS iterations with exact line search give A-conjugate pairs
    th = np.array([1.0, -1.0])
    g = A @ th
    for _ in range(2):
        p = lbfgs_direction(state, g)
        s = -(g @ p) / (p @ A @ p) * p
        th = th + s
        state.add_pair(s, A @ s)
        g = A @ th
    # at any other point the direction is the Newton step
    th = np.array([-0.4, 2.5])
    g = A @ th
    p = lbfgs_direction(state, g)
    target = -np.linalg.solve(A, g)
    angle = np.arctan2(abs(p[0] * target[1] - p[1] * target[0]), p @ target)
    assert angle <= 1e-8
    assert np.allclose(p, target, atol=1e-12)


def test_safeguard_rejects_bad_pairs_and_caps_history():
    state = LbfgsState(m=3)
    assert not state.add_pair(np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    assert not state.add_pair(np.array([1.0, 0.0]), np.array([-1.0, 0.0]))
    for k in range(5):
        assert state.add_pair(np.array([1.0, k]), np.array([1.0, k]))
    assert len(state) == 3
    for s, y, _ in state.history:
        assert y @ s > 1e-10 * np.linalg.norm(y) * np.linalg.norm(s)


@pytest.mark.parametrize("d", [2, 3, 5])
def test_lbfgs_exact_line_search_converges_in_d_plus_1(d):
    rng = np.random.default_rng(d)
    Q = np.linalg.qr(rng.normal(size=(d, d)))[0]
    A = Q @ np.diag(rng.uniform(0.5, 5.0, d)) @ Q.T
    th = rng.normal(size=d)
    state = LbfgsState(m=50)
    g = A @ th
    for it in range(d + 1):
        if np.linalg.norm(g) < 1e-8:
            break
        p = lbfgs_direction(state, g)
        alpha = -(g @ p) / (p @ A @ p)  # exact minimizer along p
        s = alpha * p
        th = th + s
        g_new = A @ th
        state.add_pair(s, g_new - g)
        g = g_new
    assert np.linalg.norm(g) < 1e-8


def test_line_search_square_halves_once():
    f = lambda th: (float(th @ th), 2 * th)  # noqa: E731
    res = line_search(f, np.array([1.0]), np.array([-2.0]))
    assert res.alpha == 0.5
    assert res.value == 0.0


def test_line_search_linear_accepts_unit_step():
    c = np.array([1.0, -2.0])
    f = lambda th: (float(c @ th), c.copy())  # noqa: E731
    res = line_search(f, np.zeros(2), -c)
    assert res.alpha == 1.0


@pytest.mark.parametrize("c1,c2", [(0.0, 0.9), (0.9, 0.5), (1e-4, 1.0), (0.5, 0.5)])
def test_line_search_constant_ordering(c1, c2):
    with pytest.raises(ValueError):
        line_search(quad(np.eye(2)), np.ones(2), -np.ones(2), c1=c1, c2=c2)


def test_line_search_rejects_ascent_direction():
    with pytest.raises(ValueError):
        line_search(quad(np.eye(2)), np.ones(2), np.ones(2))


def test_line_search_meets_strong_wolfe_on_nonquadratic():
    def f(th):
        return float(np.sum(np.cosh(th)) + th[0] ** 4), np.sinh(th) + np.array([4 * th[0] ** 3, 0.0])

    th = np.array([2.0, -1.5])
    f0, g0 = f(th)
    p = -0.01 * g0  # short step so backtracking alone would stop early
    res = line_search(f, th, p, f0=f0, g0=g0)
    assert res.value <= f0 + 1e-4 * res.alpha * (p @ g0)
    assert abs(p @ res.grad) <= 0.9 * abs(p @ g0)
    assert res.converged


def test_line_search_exhausted_halvings_warns():
    # a descent direction whose function jumps up everywhere off the origin
    def f(th):
        return (0.0 if th[0] == 0 else 1.0), np.array([1.0])

    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        res = line_search(f, np.array([0.0]), np.array([-1.0]), f0=0.0, g0=np.array([1.0]))
    assert any(issubclass(x.category, LineSearchWarning) for x in w)
    assert not res.converged
    assert res.alpha == 0.5**50


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6))
def test_line_search_monotone_decrease(seed):
    rng = np.random.default_rng(seed)
    d = 4
    M = rng.normal(size=(d, d))
    A = M @ M.T + 0.1 * np.eye(d)

    def f(th):
        return float(0.5 * th @ A @ th + np.sum(np.log(np.cosh(th)))), A @ th + np.tanh(th)

    th = rng.normal(size=d)
    state = LbfgsState()
    fv, g = f(th)
    for _ in range(10):
        p = lbfgs_direction(state, g)
        if not p @ g < 0:
            break
        res = line_search(f, th, p, f0=fv, g0=g)
        assert res.value <= fv
        state.add_pair(res.alpha * p, res.grad - g)
        th, fv, g = th + res.alpha * p, res.value, res.grad


# ---------------------------------------------------------------------------
# dense BFGS inverse update


def test_bfgs_identity_unchanged_when_y_equals_s():
    s = np.array([0.3, -1.0, 2.0])
    assert np.allclose(bfgs_inverse_update(np.eye(3), s, s), np.eye(3), atol=1e-15)


def test_bfgs_secant_condition():
    A = np.diag([1.0, 4.0])
    s = np.array([0.7, -0.2])
    y = A @ s
    H = bfgs_inverse_update(np.eye(2), s, y)
    assert np.allclose(H @ y, s, atol=1e-12)


def test_bfgs_skip_signal():
    assert bfgs_inverse_update(np.eye(2), np.array([1.0, 0.0]), np.array([0.0, 1.0])) is SKIP


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6))
def test_bfgs_secant_after_every_update(seed):
    rng = np.random.default_rng(seed)
    d = 5
    M = rng.normal(size=(d, d))
    A = M @ M.T + np.eye(d)
    H = np.eye(d)
    for _ in range(6):
        s = rng.normal(size=d)
        y = A @ s
        H = bfgs_inverse_update(H, s, y)
        assert np.allclose(H @ y, s, atol=1e-10 * max(1.0, np.abs(s).max()))
