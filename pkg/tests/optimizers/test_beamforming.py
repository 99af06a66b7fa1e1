import numpy as np
import pytest

from beamforming import (
    BeamformingError,
    beamformer_objective,
    build_quadratics,
    effective_channels,
    mrt_beamformer,
    solve_beamformer,
)
from channel_model import ChannelSet
from fp_solver import fp_objective, update_auxiliaries


def random_channels(rng, num_elements=4, num_antennas=3, num_users=2, noise=1e-2):
    def cn(*shape):
        return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)

    return ChannelSet(
        bs_ris=cn(num_elements, num_antennas),
        ris_ue=cn(num_elements, num_users),
        noise_power=noise,
    )


def random_problem(rng, num_antennas=4, num_users=2):
    G = rng.standard_normal((num_antennas, num_antennas)) + 1j * rng.standard_normal(
        (num_antennas, num_antennas)
    )
    q = rng.standard_normal((num_antennas, num_users)) + 1j * rng.standard_normal(
        (num_antennas, num_users)
    )
    return G @ G.conj().T, q


def test_zero_linear_term_gives_zero_beamformer():
    """Test that q = 0 yields W = 0"""
    solution = solve_beamformer(np.eye(3), np.zeros((3, 2), dtype=complex), 1.0)
    assert np.array_equal(solution.W, np.zeros((3, 2)))
    assert solution.power == 0.0


def test_zero_power_budget():
    """Test that P = 0 yields W = 0"""
    Q, q = random_problem(np.random.default_rng(0))
    solution = solve_beamformer(Q, q, 0.0)
    assert not np.any(solution.W)


def test_negative_power_budget():
    """Test that a negative budget raises BeamformingError"""
    Q, q = random_problem(np.random.default_rng(0))
    with pytest.raises(BeamformingError, match="non-negative"):
        solve_beamformer(Q, q, -1.0)


def test_identity_quadratic_with_loose_budget():
    """Test that Q = I with a slack budget returns W = q and lambda = 0"""
    q = np.array([[1.0 + 1j, 0.0], [0.0, 2.0]])
    budget = 2.0 * np.sum(np.abs(q) ** 2)
    solution = solve_beamformer(np.eye(2), q, budget)
    assert solution.multiplier == 0.0
    assert np.allclose(solution.W, q)


def test_active_budget_is_met_with_equality():
    """Test that the power lands on P within the bisection tolerance"""
    rng = np.random.default_rng(1)
    for _ in range(20):
        Q, q = random_problem(rng)
        budget = 1e-5
        solution = solve_beamformer(Q, q, budget, tol=1e-8)
        assert solution.multiplier > 0
        assert solution.power <= budget * (1 + 1e-9)
        assert solution.power >= budget * (1 - 1e-8) - 1e-15


def test_first_order_optimality():
    """Test (Q + lambda I) w_k = q_k at the returned multiplier"""
    rng = np.random.default_rng(2)
    Q, q = random_problem(rng)
    solution = solve_beamformer(Q, q, 1e-2)
    residual = (Q + solution.multiplier * np.eye(Q.shape[0])) @ solution.W - q
    assert np.linalg.norm(residual) <= 1e-8 * np.linalg.norm(q)


def test_singular_quadratic():
    """Test a rank-deficient Q still gives a budget-feasible solution"""
    a = np.array([[1.0], [1j], [0.0]])
    Q = a @ a.conj().T
    q = np.array([[0.0], [0.0], [1.0]])
    solution = solve_beamformer(Q, q, 0.5)
    assert solution.power <= 0.5 * (1 + 1e-9)
    assert solution.power == pytest.approx(0.5, rel=1e-5)


def test_solution_beats_feasible_alternatives():
    """Test that random budget-feasible beamformers never score higher"""
    rng = np.random.default_rng(3)
    Q, q = random_problem(rng)
    budget = 1e-2
    best = beamformer_objective(Q, q, solve_beamformer(Q, q, budget, tol=1e-10).W)
    for _ in range(200):
        W = rng.standard_normal(q.shape) + 1j * rng.standard_normal(q.shape)
        W *= np.sqrt(budget * rng.uniform()) / np.linalg.norm(W)
        assert beamformer_objective(Q, q, W) <= best + 1e-9


def test_larger_budget_never_hurts():
    """Test that the optimal value is non-decreasing in P"""
    Q, q = random_problem(np.random.default_rng(4))
    values = [
        beamformer_objective(Q, q, solve_beamformer(Q, q, budget, tol=1e-10).W)
        for budget in [1e-4, 1e-3, 1e-2, 1e-1, 1.0]
    ]
    assert all(b >= a - 1e-9 for a, b in zip(values, values[1:]))


def test_effective_channels_identity_scattering():
    """Test a_k = H^H h_k for Theta = I"""
    channels = random_channels(np.random.default_rng(5))
    a = effective_channels(channels, np.eye(4))
    assert np.allclose(a, channels.bs_ris.conj().T @ channels.ris_ue)


def test_quadratics_reproduce_fp_objective():
    """Test that the W-block objective matches the full FP objective up to W-free terms"""
    rng = np.random.default_rng(6)
    channels = random_channels(rng)
    theta = np.diag(np.exp(1j * rng.uniform(0, 2 * np.pi, 4)))
    W = mrt_beamformer(channels, theta, 1.0)
    rho, psi = update_auxiliaries(channels, theta, W)

    Q, q = build_quadratics(channels, theta, rho, psi)
    assert np.allclose(Q, Q.conj().T)

    constant = np.sum(np.log1p(rho) - rho - np.abs(psi) ** 2 * channels.noise_power)
    expected = (constant + beamformer_objective(Q, q, W)) / np.log(2.0)
    assert fp_objective(channels, theta, W, rho, psi) == pytest.approx(expected, rel=1e-10)


def test_mrt_uses_full_budget():
    """Test that MRT spends exactly P"""
    channels = random_channels(np.random.default_rng(7))
    W = mrt_beamformer(channels, np.eye(4), 0.25)
    assert np.sum(np.abs(W) ** 2) == pytest.approx(0.25)
    assert not np.any(mrt_beamformer(channels, np.eye(4), 0.0))


def test_multiplier_matches_power_curve_scan():
    """Test the bisected lambda against a fine scan of the power curve"""
    rng = np.random.default_rng(7)
    grid = np.geomspace(1e-6, 1e6, 4001)
    for _ in range(10):
        Q, q = random_problem(rng)
        budget = 1e-5
        solution = solve_beamformer(Q, q, budget, tol=1e-8)

        powers = np.array(
            [
                np.sum(np.abs(np.linalg.solve(Q + lam * np.eye(4), q)) ** 2)
                for lam in grid
            ]
        )
        crossing = int(np.argmax(powers <= budget))
        assert crossing > 0
        assert grid[crossing - 1] <= solution.multiplier <= grid[crossing]
