"""Replicator dynamics on the simplex and the kernel-to-Laplacian limit."""

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from replidyn.mesh import Field, build_grid
from replidyn.replicator import (PayoffMatrix, SimplexState, integrate_replicator,
                                 kernel_laplacian_consistency,
                                 payoff_matrix_from_kernel, replicator_rhs)


def test_rhs_symmetric_fixed_point():
    rhs = replicator_rhs(SimplexState(np.array([0.5, 0.5])), PayoffMatrix(np.eye(2)))
    assert np.array_equal(rhs, np.zeros(2))


def test_rhs_hand_value():
    # (Ap) = (0.75, 0.25), average 0.625
    rhs = replicator_rhs(SimplexState(np.array([0.75, 0.25])), PayoffMatrix(np.eye(2)))
    assert np.array_equal(rhs, np.array([0.09375, -0.09375]))


def test_rhs_components_sum_to_zero():
    rng = np.random.default_rng(11)
    for _ in range(20):
        m = rng.integers(2, 8)
        p = rng.random(m)
        p /= p.sum()
        a = rng.standard_normal((m, m))
        rhs = replicator_rhs(SimplexState(p), PayoffMatrix(a))
        assert abs(rhs.sum()) <= 1e-14 * max(1.0, np.abs(rhs).max() * m)


def test_payoff_shift_invariance_exact():
    # dyadic payoffs and frequencies keep the cancellation bit-exact
    p = SimplexState(np.array([0.5, 0.25, 0.25]))
    a = PayoffMatrix(np.array([[1.0, 2.0, 0.0], [0.5, 1.5, 4.0], [2.0, 0.0, 1.0]]))
    shifted = PayoffMatrix(a.a + 2.0)
    assert np.array_equal(replicator_rhs(p, a), replicator_rhs(p, shifted))


def test_simplex_state_validation():
    with pytest.raises(ValueError):
        SimplexState(np.array([0.7, 0.2]))
    with pytest.raises(ValueError):
        SimplexState(np.array([1.2, -0.2]))


def test_uniform_point_of_constant_game_is_stationary():
    p0 = SimplexState(np.full(4, 0.25))
    payoff = PayoffMatrix(np.full((4, 4), 1.3))
    times, states, clip = integrate_replicator(p0, payoff, 2.0, 0.01)
    assert np.max(np.abs(states - 0.25)) <= 1e-12
    assert clip == 0.0


def test_simplex_invariance_random_games():
    rng = np.random.default_rng(23)
    for _ in range(5):
        m = int(rng.integers(2, 6))
        p0 = rng.random(m)
        p0 /= p0.sum()
        a = rng.standard_normal((m, m))
        times, states, clip = integrate_replicator(SimplexState(p0),
                                                   PayoffMatrix(a), 3.0, 0.005)
        sums = states.sum(axis=1)
        assert np.max(np.abs(sums - 1.0)) <= 1e-9
        assert states.min() >= 0.0


def test_coordination_game_matches_scalar_ode_oracle():
    # p1' = p1 (1 - p1) (2 p1 - 1), the winner-take-all logistic mechanism
    p0 = SimplexState(np.array([0.6, 0.4]))
    payoff = PayoffMatrix(np.eye(2))
    times, states, _ = integrate_replicator(p0, payoff, 10.0, 0.01)
    oracle = solve_ivp(lambda t, p: [p[0] * (1 - p[0]) * (2 * p[0] - 1)],
                       [0.0, 10.0], [0.6], t_eval=times, rtol=1e-11, atol=1e-13)
    assert np.max(np.abs(states[:, 0] - oracle.y[0])) <= 1e-4
    assert np.all(np.diff(states[:, 0]) >= -1e-15)  # monotone approach to 1


def test_integrator_rejects_bad_dt():
    p0 = SimplexState(np.array([0.6, 0.4]))
    with pytest.raises(ValueError):
        integrate_replicator(p0, PayoffMatrix(np.eye(2)), 1.0, 0.0)


def test_clip_limit_triggers_on_oversized_steps():
    # very stiff anti-coordination payoff with a huge step clips probability
    a = PayoffMatrix(200.0 * (np.ones((2, 2)) - np.eye(2)))
    p0 = SimplexState(np.array([0.999, 0.001]))
    with pytest.raises(ValueError, match="dt too large"):
        integrate_replicator(p0, a, 5.0, 0.5)


def test_kernel_payoff_matrix_structure():
    g = build_grid(1, [1.0], [201])
    sigma = 0.05
    payoff = payoff_matrix_from_kernel(g, sigma)
    h = g.h[0]
    expected_diag = h / (sigma * np.sqrt(2 * np.pi))
    assert np.allclose(np.diag(payoff.a), expected_diag, rtol=1e-14)
    assert np.array_equal(payoff.a, payoff.a.T)
    # rows for nodes at least 5 sigma from both ends carry nearly unit mass
    x = g.axes[0]
    deep = (x >= 5 * sigma) & (x <= 1 - 5 * sigma)
    row_sums = payoff.a.sum(axis=1)
    assert np.all(row_sums[deep] >= 0.999)


def test_kernel_consistency_vanishes_on_affine_fields():
    g = build_grid(1, [1.0], [801])
    u = Field(g, 0.3 + 0.7 * g.axes[0])
    assert kernel_laplacian_consistency(u, 0.05) <= 1e-8


def test_kernel_consistency_moment_bound_on_sine():
    # next term of the moment expansion: sigma^2 u'''' / 4 = 2 * (pi^4 sigma^2 / 8)
    g = build_grid(1, [1.0], [801])
    u = Field(g, np.sin(np.pi * g.axes[0]))
    sigma = 0.05
    defect = kernel_laplacian_consistency(u, sigma)
    assert defect <= 2.0 * np.pi**4 * sigma**2 / 8.0


def test_kernel_consistency_quadratic_decay_in_sigma():
    g = build_grid(1, [1.0], [801])
    u = Field(g, np.sin(np.pi * g.axes[0]))
    d1 = kernel_laplacian_consistency(u, 0.05)
    d2 = kernel_laplacian_consistency(u, 0.025)
    assert 3.5 <= d1 / d2 <= 4.5


def test_kernel_consistency_rejects_underresolved_kernel():
    g = build_grid(1, [1.0], [41])
    u = Field(g, np.sin(np.pi * g.axes[0]))
    with pytest.raises(ValueError, match="under-resolved"):
        kernel_laplacian_consistency(u, 1.5 * g.h[0])
