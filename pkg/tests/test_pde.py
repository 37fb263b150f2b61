import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pinnlab import autodiff as ad
from pinnlab.network import init_params
from pinnlab.pde import (
    GridField,
    StabilityError,
    burgers_fd_solve,
    burgers_problem,
    burgers_residual,
    heat2d_fd_solve,
    heat2d_problem,
    heat2d_residual,
    heat2d_step,
    input_derivatives,
    input_jets,
    make_problem,
    membrane_problem,
    membrane_residual,
    membrane_series,
    wave1d_coefficient,
    wave1d_problem,
    wave1d_residual,
    wave1d_series,
)

NU = 0.01 / np.pi
rng = np.random.default_rng(2024)


def cole_hopf(x, t, nu=NU, nq=200):
    """Exact viscous Burgers solution for u0 = -sin(pi x) by Gauss-Hermite quadrature."""
    z, w = np.polynomial.hermite.hermgauss(nq)
    xe = np.asarray(x)[:, None] - np.sqrt(4 * nu * t) * z[None, :]
    logf = -np.cos(np.pi * xe) / (2 * np.pi * nu)
    f = np.exp(logf - logf.max(axis=1, keepdims=True))
    return -(w * np.sin(np.pi * xe) * f).sum(1) / (w * f).sum(1)


def cols(n, *ranges):
    return [rng.uniform(lo, hi, (n, 1)) for lo, hi in ranges]


# ---------------------------------------------------------------------------
# residual operators


def test_wave_residual_simple_nets():
    x, t = cols(20, (0, 2), (0, 4))
    assert np.all(wave1d_residual(lambda a, b: a, x, t) == 0)
    assert np.allclose(wave1d_residual(lambda a, b: b * b, x, t), 2.0, atol=1e-14)
    # c enters squared
    assert np.allclose(wave1d_residual(lambda a, b: a * a, x, t, c=3.0), -18.0, atol=1e-13)


def test_wave_residual_of_series_solution():
    x, t = cols(100, (0.01, 1.99), (0.01, 3.99))
    r = wave1d_residual(lambda a, b: wave1d_series(a, b, 1000), x, t)
    assert np.abs(r).max() <= 1e-6


def test_burgers_residual_simple_nets():
    x, t = cols(20, (-1, 1), (0, 1))
    assert np.all(np.asarray(burgers_residual(lambda a, b: 0.0 * a + 3.0, x, t, NU)) == 0)
    assert np.allclose(burgers_residual(lambda a, b: a, x, t, NU), x, atol=1e-15)


def test_burgers_residual_heat_part_cancels():
    # for -sin(pi x) exp(-nu pi^2 t) the linear terms cancel; what remains is
    # u u_x = pi sin(pi x) cos(pi x) exp(-2 nu pi^2 t)
    x, t = cols(30, (-1, 1), (0, 1))
    net = lambda a, b: -ad.sin(np.pi * a) * ad.exp(-NU * np.pi**2 * b)  # noqa: E731
    r = burgers_residual(net, x, t, NU)
    expect = np.pi * np.sin(np.pi * x) * np.cos(np.pi * x) * np.exp(-2 * NU * np.pi**2 * t)
    assert np.allclose(r, expect, atol=1e-13)
    r0 = burgers_residual(net, np.array([[0.5]]), np.array([[0.0]]), NU)
    assert abs(float(r0[0, 0])) <= 1e-15


def test_heat_residual_examples():
    x, y, t = cols(25, (0, 1), (0, 1), (0, 20))
    assert np.all(np.asarray(heat2d_residual(lambda a, b, c: 0.0 * a + 5.0, x, y, t, 1.0)) == 0)
    assert np.allclose(heat2d_residual(lambda a, b, c: a * a + b * b, x, y, t, 1.0), -4.0, atol=1e-14)
    alpha = 0.37
    exact = lambda a, b, c: ad.exp(-2 * alpha * c) * ad.sin(a) * ad.sin(b)  # noqa: E731
    assert np.abs(heat2d_residual(exact, x, y, t, alpha)).max() <= 1e-10


def test_membrane_residual_examples():
    x, y, t = cols(25, (0, 2), (0, 3), (0, 1))
    assert np.abs(membrane_residual(lambda a, b, c: 2 * a - b + 0.5 * c + 1, x, y, t)).max() == 0
    assert np.allclose(membrane_residual(lambda a, b, c: c * c, x, y, t), 2.0, atol=1e-14)
    x, y, t = cols(40, (0.05, 1.95), (0.05, 2.95), (0.0, 1.0))
    r = membrane_residual(lambda a, b, c: membrane_series(a, b, c, 50), x, y, t)
    assert np.abs(r).max() <= 1e-4


def test_jets_agree_with_nested_duals_on_a_network():
    p = init_params([3, 7, 5, 1], "softplus", seed=9)
    c = cols(15, (0, 2), (0, 3), (0, 1))
    u, d1, d2 = input_jets(p, c, [0, 1, 2])
    for k in range(3):
        v, a, aa = input_derivatives(p, c, k, order=2)
        assert np.allclose(u, v, atol=1e-15)
        assert np.allclose(d1[k], a, atol=1e-13)
        assert np.allclose(d2[k], aa, atol=1e-12)


def test_residual_dispatch_matches_operator():
    prob = make_problem("burgers")
    p = init_params([2, 6, 1], seed=1)
    x, t = cols(10, (-1, 1), (0, 1))
    assert np.allclose(prob.residual(p, x, t), burgers_residual(p, x, t, NU), atol=0)


def test_problem_validation():
    with pytest.raises(ValueError):
        make_problem("wave1d", c=-1.0)
    with pytest.raises(ValueError):
        make_problem("poisson")


# ---------------------------------------------------------------------------
# series solutions


def test_wave_coefficients():
    assert abs(wave1d_coefficient(2)) <= 1e-16
    assert wave1d_coefficient(1) == pytest.approx(32 / np.pi**3, rel=1e-15)
    assert round(float(wave1d_coefficient(1)), 6) == 1.032049
    n = np.arange(2, 200, 2)
    assert np.abs(wave1d_coefficient(n)).max() <= 1e-15


def test_wave_series_ic_value_and_boundaries():
    assert abs(wave1d_series(1.0, 0.0, 1000) - 1.0) <= 1e-6
    t = np.linspace(0, 4, 57)
    assert np.abs(wave1d_series(np.zeros_like(t), t)).max() <= 1e-12
    assert np.abs(wave1d_series(np.full_like(t, 2.0), t)).max() <= 1e-12
    x = np.linspace(0, 2, 200)
    assert np.abs(wave1d_series(x, np.zeros_like(x), 1000) - x * (2 - x)).max() <= 1e-6


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 2), st.floats(0, 4))
def test_wave_series_is_4_periodic(x, t):
    assert abs(wave1d_series(x, t + 4.0) - wave1d_series(x, t)) <= 1e-10


def test_membrane_series_boundary_and_center():
    t = rng.uniform(0, 1, 30)
    s = rng.uniform(0, 1, 30)
    for x, y in ((0 * s, 3 * s), (2 + 0 * s, 3 * s), (2 * s, 0 * s), (2 * s, 3 + 0 * s)):
        assert np.abs(membrane_series(x, y, t)).max() <= 1e-12
    assert abs(membrane_series(1.0, 1.5, 0.0, 100) - 2.25) <= 1e-3


def test_membrane_even_terms_vanish():
    # two-term and one-term partial sums agree: index 2 contributes nothing
    pts = rng.uniform(0, 1, (3, 20))
    a = membrane_series(2 * pts[0], 3 * pts[1], pts[2], n_terms=1)
    b = membrane_series(2 * pts[0], 3 * pts[1], pts[2], n_terms=2)
    assert np.array_equal(a, b)


def test_series_dual_path_matches_nested_duals():
    x, t = cols(9, (0, 2), (0, 4))
    fast = wave1d_series(ad.Dual(x, 1.0), t, 80)
    slow = wave1d_series(ad.Dual(x, ad.Dual(1.0, 0.0)), t, 80)
    assert np.allclose(fast.tangent, slow.tangent.primal, atol=1e-13)


# ---------------------------------------------------------------------------
# heat finite differences


def test_heat_step_hand_example():
    phi = np.array([[0.0, 100.0, 0.0], [25.0, 50.0, 200.0], [0.0, 0.0, 0.0]])
    out = heat2d_step(phi, h=0.1, dt=0.1, alpha=1.28e-4)
    assert abs(out[1, 1] - 50.16) <= 1e-12


def test_heat_step_fixed_point():
    phi = np.full((5, 5), 50.0)
    assert np.array_equal(heat2d_step(phi, 0.1, 0.1, 1.28e-4), phi)


def test_heat_constant_data_stays_constant():
    prob = heat2d_problem(bc=(7.0, 7.0, 7.0, 7.0), ic=7.0)
    fields = heat2d_fd_solve(prob, h=0.05, dt=1.0, steps=200, record_every=100)
    assert all(np.all(f.values == 7.0) for f in fields)


def test_heat_stability_gate_quotes_bound():
    prob = heat2d_problem()
    with pytest.raises(StabilityError, match=r"dt ≤ h²/\(4α\)"):
        heat2d_fd_solve(prob, h=0.02, dt=0.8, steps=1)
    heat2d_fd_solve(prob, h=0.02, dt=0.78, steps=1)


def test_heat_maximum_principle_and_records():
    prob = heat2d_problem()
    fields = heat2d_fd_solve(prob, h=0.02, dt=0.002, steps=10000, record_every=5000)
    assert len(fields) == 3
    for f in fields:
        assert f.values.min() >= 0.0 and f.values.max() <= 200.0
    assert fields[0].values[25, 25] == 50.0


# ---------------------------------------------------------------------------
# Burgers finite differences


def test_burgers_cfl_gate_quotes_bound():
    with pytest.raises(StabilityError, match=r"dt ≤ min\(h/max\|u\|, h²/\(2ν\)\)"):
        burgers_fd_solve(NU, 128, dt=0.1)


def test_burgers_large_viscosity_decays_monotonically():
    f = burgers_fd_solve(1.0, 64, T=0.2, n_records=21)
    sup = np.abs(f.values).max(axis=0)
    assert np.all(np.diff(sup) < 0)


def test_burgers_odd_symmetry():
    f = burgers_fd_solve(NU, 256, n_records=5)
    assert np.abs(f.values + f.values[::-1, :]).max() <= 1e-10


@pytest.fixture(scope="module")
def burgers_1024():
    return burgers_fd_solve(NU, 1024, n_records=5)


def test_burgers_against_cole_hopf(burgers_1024):
    f = burgers_1024
    for k, t in enumerate(f.axes[1]):
        if t == 0:
            continue
        assert np.abs(f.values[:, k] - cole_hopf(f.axes[0], t)).max() <= 2e-4


def test_burgers_self_convergence(burgers_1024):
    fine = burgers_fd_solve(NU, 2048, n_records=5)
    assert np.abs(burgers_1024.values[:, -1] - fine.values[::2, -1]).max() <= 1e-4


# ---------------------------------------------------------------------------
# grid fields


def test_gridfield_csv_round_trip(tmp_path):
    axes = (np.linspace(0, 2, 5), np.linspace(0, 4, 7))
    g = GridField.from_function(lambda x, t: np.sin(x) * np.exp(t) / 3, axes)
    g.to_csv(tmp_path / "g.csv")
    h = GridField.from_csv(tmp_path / "g.csv")
    assert h.congruent(g)
    assert np.array_equal(h.values, g.values)
    assert (tmp_path / "g.csv").read_text().splitlines()[0] == "axis0,axis1,value"


def test_gridfield_rejects_bad_input(tmp_path):
    with pytest.raises(ValueError):
        GridField((np.arange(3), np.arange(2)), np.zeros(5))
    with pytest.raises(ValueError):
        GridField((np.arange(2),), np.array([1.0, np.nan]))
    (tmp_path / "e.csv").write_text("")
    with pytest.raises(ValueError):
        GridField.from_csv(tmp_path / "e.csv")
    (tmp_path / "r.csv").write_text("axis0,axis1,value\n0,0,1\n0,1,2\n1,0,3\n")
    with pytest.raises(ValueError):
        GridField.from_csv(tmp_path / "r.csv")


def test_problem_domains():
    assert wave1d_problem().domain == [(0.0, 2.0), (0.0, 4.0)]
    assert burgers_problem().domain == [(-1.0, 1.0), (0.0, 1.0)]
    assert membrane_problem().domain == [(0.0, 2.0), (0.0, 3.0), (0.0, 1.0)]
    assert heat2d_problem().n_in == 3


def test_derivatives_of_input_independent_net():
    x, t = cols(5, (0, 1), (0, 1))
    for order in (1, 2):
        out = input_derivatives(lambda a, b: 2.0 * b, [x, t], 0, order=order)
        assert np.array_equal(out[0], 2.0 * t)
        assert all(np.all(np.asarray(d) == 0) for d in out[1:])
