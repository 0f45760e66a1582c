import numpy as np
import pytest

from mcbeam import (RandomizationExhausted, RandomizationOptions, SystemConfig, generate_channels,
                    power_opt_centralized, power_opt_distributed, randomize_centralized)
from mcbeam.centralized import check_rank, solve_relaxation
from mcbeam.randomization import covariance_factor, draw_candidate, meets_targets


def single(gamma=1.0, noise=1.0, A=1):
    return SystemConfig(num_antennas=A, group_owner=[0], user_group=[0], sinr_target=gamma,
                        noise_var=noise)


def test_draw_degenerate_and_rank_one():
    rng = np.random.default_rng(0)
    assert np.allclose(draw_candidate(np.zeros((1, 3, 3)), rng), 0.0)
    w = np.array([1.0, 2j, -1.0])
    for _ in range(5):
        c = draw_candidate(np.outer(w, w.conj())[None], rng)[0]
        assert abs(abs(np.vdot(w, c)) - np.linalg.norm(w) * np.linalg.norm(c)) < 1e-9


def test_empirical_covariance():
    rng = np.random.default_rng(1)
    v = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    W = v @ v.conj().T
    F = covariance_factor(W)
    z = (rng.standard_normal((3, 100000)) + 1j * rng.standard_normal((3, 100000))) / np.sqrt(2)
    x = F @ z
    emp = x @ x.conj().T / x.shape[1]
    assert np.linalg.norm(emp - W) / np.linalg.norm(W) < 0.05


def test_factor_clips_negative_eigenvalues():
    F = covariance_factor(np.diag([1.0, -1e-9]))
    assert np.allclose(F @ F.conj().T, np.diag([1.0, 0.0]))


def test_centralized_lp_examples():
    cfg = single()
    h = np.array([[[1.0 + 0j]]])
    out = power_opt_centralized(np.array([[np.sqrt(2)]], complex), h, cfg)
    assert out.feasible and out.powers == pytest.approx([0.5])
    h2 = np.array([[[1.0, 0.0]]], complex)
    out = power_opt_centralized(np.array([[0.0, 1.0]], complex), h2, single(A=2))
    assert not out.feasible and out.beams is None


def test_rank_one_optimum_is_lp_fixed_point():
    cfg = SystemConfig.symmetric(2, 4, 8, 8, gamma_db=0.0)
    h = generate_channels(cfg, 0)
    W, _ = solve_relaxation(h, cfg)
    from mcbeam import extract_rank_one
    w = np.array([extract_rank_one(Wg) for Wg in W])
    out = power_opt_centralized(w, h, cfg)
    assert out.powers == pytest.approx(np.ones(4), rel=1e-5)


def test_distributed_lp_examples():
    cfg = SystemConfig(num_antennas=1, group_owner=[0, 1], user_group=[0, 1], sinr_target=1.0,
                       noise_var=1.0)
    local = np.array([[1.0], [0.0]], complex)  # BS 0 -> users 0, 1
    theta = np.array([[0.0, 1e6], [1.0, 0.0]])
    out = power_opt_distributed(np.array([[np.sqrt(2)]], complex), 0, theta, local, cfg)
    assert out.powers == pytest.approx([1.0])
    # cap binding: unit gain towards user 1 capped at 0.1, SINR needs p = 1
    local = np.array([[1.0], [1.0]], complex)
    theta = np.array([[0.0, 0.1], [0.0, 0.0]])
    out = power_opt_distributed(np.array([[1.0]], complex), 0, theta, local, cfg)
    assert not out.feasible
    theta = np.array([[0.0, 2.0], [0.0, 0.0]])
    out = power_opt_distributed(np.array([[1.0]], complex), 0, theta, local, cfg)
    assert out.feasible and out.powers == pytest.approx([1.0])


def test_distributed_lp_without_cross_gain_matches_cell_lp():
    cfg = SystemConfig.symmetric(2, 2, 4, 3, gamma_db=0.0)
    h = generate_channels(cfg, 5)
    h[0, cfg.users_of(1)] = 0.0
    theta = np.zeros((2, 4))
    cand = np.array([h[0, 0] + h[0, 1]])
    dist = power_opt_distributed(cand, 0, theta, h[0], cfg)
    sub = SystemConfig(num_antennas=3, group_owner=[0], user_group=[0, 0], sinr_target=1.0,
                       noise_var=1.0)
    cen = power_opt_centralized(cand, h[:1, :2], sub)
    assert dist.objective == pytest.approx(cen.objective, rel=1e-9)


def _loose_instance():
    # single-group multicast: every candidate is LP-feasible
    cfg = SystemConfig.symmetric(1, 1, 8, 3, gamma_db=0.0)
    for seed in range(20):
        h = generate_channels(cfg, seed)
        W, lb = solve_relaxation(h, cfg)
        if check_rank(W[0]) > 1:
            return cfg, h, W, lb
    raise AssertionError("no loose instance")


def test_exhausted_with_orthogonal_candidate():
    cfg = single(A=2)
    h = np.array([[[1.0, 0.0]]], complex)
    W = np.array([np.diag([0.0, 1.0])])
    with pytest.raises(RandomizationExhausted):
        randomize_centralized(W, h, cfg, RandomizationOptions(num_candidates=1))


def test_nested_candidates_and_bound():
    cfg, h, W, lb = _loose_instance()
    small = randomize_centralized(W, h, cfg, RandomizationOptions(10, seed=4), lb)
    assert small.num_feasible == 10
    large = randomize_centralized(W, h, cfg, RandomizationOptions(100, seed=4), lb)
    assert large.best.objective <= small.best.objective
    assert np.array_equal(large.objectives[:10], small.objectives)
    assert small.best.objective >= lb * (1 - 1e-6)
    assert meets_targets(h, large.best.beams, cfg)
    assert large.best.objective == pytest.approx(np.sum(np.abs(large.best.beams) ** 2), rel=1e-9)
    again = randomize_centralized(W, h, cfg, RandomizationOptions(100, seed=4), lb)
    assert again.best.index == large.best.index
    assert np.array_equal(again.best.beams, large.best.beams)


def test_options_validation():
    with pytest.raises(ValueError):
        RandomizationOptions(num_candidates=0)
