import io
import json

import numpy as np
import pytest

from mcbeam import (NumericalFailure, SensitivityBundle, SubgradientSchedule, SubproblemInfeasible,
                    SystemConfig, build_subproblem, evaluate_all_sinr, extract_sensitivities,
                    generate_channels, master_update, run_distributed, signaling_load,
                    solve_centralized, solve_subproblem, subgradient)
from mcbeam.distributed import (CAP_DUAL, RAND_POWER, RANK_BIT, SINR_DUAL, coupling_mask,
                                initial_allocation)
from mcbeam.model import group_gains
from mcbeam.randomization import respects_caps

FAST = SubgradientSchedule(max_rounds=30)


def two_cell(A=1):
    return SystemConfig(num_antennas=A, group_owner=[0, 1], user_group=[0, 1], sinr_target=1.0,
                        noise_var=1.0)


def total_value(theta, h, cfg):
    return sum(solve_subproblem(b, theta, h[b], cfg).objective for b in range(cfg.num_bs))


def all_sensitivities(theta, h, cfg):
    sens = SensitivityBundle.empty(cfg)
    for b in range(cfg.num_bs):
        sens = sens.merge(extract_sensitivities(solve_subproblem(b, theta, h[b], cfg), b, cfg))
    return sens


def test_subproblem_counts():
    cfg = two_cell(A=2)
    h = generate_channels(cfg, 0)
    prob = build_subproblem(1, initial_allocation(cfg), h[1], cfg)
    assert prob.block_dims == [2]
    assert [c.label for c in prob.constraints] == [("sinr", 1), ("cap", 0)]


def test_incoming_allowance_shifts_rhs_only(small_instance):
    cfg, h = small_instance
    theta = initial_allocation(cfg)
    doubled = theta.copy()
    doubled[1] *= 2  # BS 1's caps are the incoming allowance of BS 0's users
    p1 = build_subproblem(0, theta, h[0], cfg)
    p2 = build_subproblem(0, doubled, h[0], cfg)
    for c1, c2 in zip(p1.constraints, p2.constraints):
        kind, u = c1.label
        if kind == "sinr":
            gamma = cfg.sinr_target[u]
            assert c2.rhs - c1.rhs == pytest.approx(gamma * theta[1, u])
        else:
            assert c2.rhs == c1.rhs
        for g in c1.coeffs:
            assert np.array_equal(c1.coeffs[g], c2.coeffs[g])


def test_locality(small_instance):
    cfg, h = small_instance
    theta = initial_allocation(cfg)
    corrupted = h.copy()
    corrupted[1] = 1e3 * np.random.default_rng(9).standard_normal(h[1].shape)
    a = solve_subproblem(0, theta, h[0], cfg)
    b = solve_subproblem(0, theta, corrupted[0], cfg)
    assert a.objective == b.objective
    with pytest.raises(ValueError):
        build_subproblem(0, theta, h, cfg)


def test_huge_cap_has_zero_multiplier(small_instance):
    cfg, h = small_instance
    theta = np.where(coupling_mask(cfg), 1e6, 0.0)
    theta[1] = 1.0
    sens = extract_sensitivities(solve_subproblem(0, theta, h[0], cfg), 0, cfg)
    assert np.allclose(sens.mu[0, cfg.out_of_cell_users(0)], 0.0, atol=1e-8)
    assert np.all(sens.lam[cfg.users_of(0)] > 0)


def test_rejects_non_optimal(small_instance):
    cfg, h = small_instance
    theta = np.zeros((2, 8))
    h0 = h[0].copy()
    sol = solve_subproblem(0, theta, h0, cfg)
    sol.status = type(sol.status)("infeasible")
    with pytest.raises(ValueError):
        extract_sensitivities(sol, 0, cfg)


@pytest.mark.parametrize("seed", range(3))
def test_sensitivities_match_finite_differences(seed):
    cfg = SystemConfig.symmetric(2, 2, 4, 4)
    h = generate_channels(cfg, seed)
    theta = initial_allocation(cfg)
    s = subgradient(all_sensitivities(theta, h, cfg), cfg)
    fd = np.zeros_like(s)
    for b, u in zip(*np.nonzero(coupling_mask(cfg))):
        d = 1e-4 * theta[b, u]
        up, dn = theta.copy(), theta.copy()
        up[b, u] += d
        dn[b, u] -= d
        fd[b, u] = (total_value(up, h, cfg) - total_value(dn, h, cfg)) / (2 * d)
    assert np.max(np.abs(fd - s)) <= 1e-2 * np.max(np.abs(s))


def test_master_update_examples():
    cfg = two_cell()
    sched = SubgradientSchedule(rule="constant", step0=0.5)
    theta = np.array([[0.0, 1.0], [0.1, 0.0]])
    sens = SensitivityBundle(np.array([10.0, 0.3]), np.array([[np.nan, 0.1], [0.0, np.nan]]))
    new = master_update(theta, sens, sched, 0, cfg)
    assert new[0, 1] == pytest.approx(0.9)
    assert new[1, 0] == sched.theta_floor  # projection active
    assert new[0, 0] == 0.0 and new[1, 1] == 0.0
    even = SensitivityBundle(np.array([0.2, 0.2]), np.array([[np.nan, 0.2], [0.2, np.nan]]))
    assert np.array_equal(master_update(theta, even, sched, 0, cfg), theta)


def test_step_rules():
    assert SubgradientSchedule(rule="diminishing", step0=1.0).step(3) == pytest.approx(0.5)
    assert SubgradientSchedule(rule="constant", step0=2.0).step(7) == 2.0
    norm = SubgradientSchedule(step0=1.0)
    assert norm.step(1, [0.5, -2.0]) == pytest.approx(0.25)
    assert norm.step(0, [0.0]) == 0.0
    assert SubgradientSchedule().resolve([1.0, 3.0]).step0 == pytest.approx(2.0)
    assert SubgradientSchedule(rule="diminishing").resolve([1.0, 3.0]).step0 == pytest.approx(0.2)
    for bad in (dict(rule="x"), dict(step0=0.0), dict(theta_floor=0.0), dict(max_rounds=0)):
        with pytest.raises(ValueError):
            SubgradientSchedule(**bad)


def test_decoupled_cells_reach_mrt():
    cfg = two_cell(A=3)
    h = generate_channels(cfg, 2)
    h[0, 1] = 0.0
    h[1, 0] = 0.0
    res = run_distributed(h, cfg, FAST)
    mrt = sum(1.0 / np.linalg.norm(h[b, b]) ** 2 for b in range(2))
    assert res.achieved_power == pytest.approx(mrt, rel=1e-6)
    assert res.trace[-1].sum_power == pytest.approx(mrt, rel=1e-6)


def test_nulling_policy(small_instance):
    cfg, h = small_instance
    res = run_distributed(h, cfg, policy="nulling")
    assert res.rounds_used == 1
    assert res.backhaul.count(kinds=(SINR_DUAL, CAP_DUAL)) == 0
    gains = group_gains(h, res.beams, cfg)
    for b in range(2):
        leak = gains[np.ix_(cfg.out_of_cell_users(b), cfg.groups_of(b))]
        assert np.all(leak <= 1e-8)
    opt = run_distributed(h, cfg, FAST)
    assert res.achieved_power >= opt.achieved_power * (1 - 1e-6)


def test_nulling_infeasible_single_antenna():
    cfg = two_cell(A=1)
    h = generate_channels(cfg, 0)
    with pytest.raises(SubproblemInfeasible) as info:
        run_distributed(h, cfg, policy="nulling")
    assert info.value.bs in (0, 1)


def test_messages_and_trace(small_instance):
    cfg, h = small_instance
    res = run_distributed(h, cfg, FAST)
    per_round = res.backhaul.per_round_counts()
    assert len(per_round) == res.rounds_used
    assert set(per_round.values()) == {signaling_load(cfg, "distributed_per_round")}
    assert res.backhaul.count(kinds=(RANK_BIT,)) == 2 * 1
    lb = solve_centralized(h, cfg).lower_bound
    assert np.all(res.sum_power_trace >= lb * (1 - 1e-6))
    assert np.all(evaluate_all_sinr(h, res.beams, cfg) >= cfg.sinr_target * (1 - 1e-6))
    assert respects_caps(h, res.beams, cfg, res.theta)
    routed = [m for m in res.backhaul.messages if m.kind == CAP_DUAL]
    assert all(m.receiver == cfg.serving_bs[m.user] for m in routed)
    fh = io.StringIO()
    res.backhaul.dump_jsonl(fh)
    lines = fh.getvalue().splitlines()
    assert len(lines) == res.backhaul.cumulative
    assert set(json.loads(lines[0])) == {"round", "sender", "receiver", "kind", "user", "value"}


def test_randomized_distributed_shares_powers():
    # multicast groups of 4 users on 3 antennas; this seed gives a loose relaxation
    cfg = SystemConfig.symmetric(2, 2, 8, 3, gamma_db=-3.0)
    h = generate_channels(cfg, 3)
    res = run_distributed(h, cfg, SubgradientSchedule(max_rounds=20),
                          theta0=np.full((2, 8), 5.0))
    assert not res.all_rank_one
    n = res.randomization.objectives.size
    assert res.backhaul.count(kinds=(RAND_POWER,)) == 2 * 1 * n
    assert res.achieved_power >= res.relaxed_power * (1 - 1e-6)
    assert np.all(evaluate_all_sinr(h, res.beams, cfg) >= cfg.sinr_target * (1 - 1e-6))
    assert respects_caps(h, res.beams, cfg, res.theta)


def test_uniform_start_can_be_infeasible():
    # the centralized problem is feasible, but no BS can meet uniform
    # noise-scale caps at round 0
    cfg = SystemConfig.symmetric(2, 2, 8, 3, gamma_db=-3.0)
    h = generate_channels(cfg, 0)
    solve_centralized(h, cfg)
    with pytest.raises(SubproblemInfeasible):
        run_distributed(h, cfg, FAST)


def test_common_and_fixed_policies(tiny_instance):
    cfg, h = tiny_instance
    opt = run_distributed(h, cfg, FAST)
    common = run_distributed(h, cfg, FAST, policy="common")
    theta = common.theta[coupling_mask(cfg)]
    assert np.allclose(theta, theta[0])
    assert common.achieved_power >= opt.relaxed_power * (1 - 1e-3)
    fixed = run_distributed(h, cfg, policy="fixed", fixed_caps=0.5)
    assert fixed.rounds_used == 1
    assert np.allclose(fixed.theta[coupling_mask(cfg)], 0.5)
    with pytest.raises(ValueError):
        run_distributed(h, cfg, policy="fixed")
    with pytest.raises(ValueError):
        run_distributed(h, cfg, policy="bogus")


def test_backtracking_recovers_from_oversized_steps(tiny_instance):
    cfg, h = tiny_instance
    sched = SubgradientSchedule(rule="constant", step0=50.0, max_rounds=5)
    res = run_distributed(h, cfg, sched)
    assert np.all(evaluate_all_sinr(h, res.beams, cfg) >= cfg.sinr_target * (1 - 1e-6))


def test_signaling_load_table():
    assert signaling_load(2, "centralized", 8, 8) == 256
    assert signaling_load(2, "distributed_per_round", 8, 8) == 16
    assert signaling_load(3, "centralized", 12, 12) == 1728
    assert signaling_load(3, "distributed_per_round", 12, 12) == 48
    assert signaling_load(4, "centralized", 16, 16) == 6144
    assert signaling_load(4, "distributed_per_round", 16, 16) == 96
    with pytest.raises(ValueError):
        signaling_load(3, "centralized", 8, 8)
