import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mcbeam import (SystemConfig, db_to_linear, evaluate_all_sinr, evaluate_sinr,
                    generate_channels, linear_to_db, sum_power)
from mcbeam.model import is_hermitian, is_psd, outer_products

from conftest import naive_sinr


def test_symmetric_partition():
    cfg = SystemConfig.symmetric(2, 4, 8, 8)
    assert cfg.shape == (2, 4, 8, 8)
    assert list(cfg.group_owner) == [0, 0, 1, 1]
    assert list(cfg.user_group) == [0, 0, 1, 1, 2, 2, 3, 3]
    assert list(cfg.users_of(1)) == [4, 5, 6, 7]
    assert list(cfg.out_of_cell_users(0)) == [4, 5, 6, 7]
    assert sum(len(cfg.groups_of(b)) for b in range(2)) == cfg.num_groups


@pytest.mark.parametrize("kwargs", [
    dict(group_owner=[0], user_group=[1], sinr_target=1.0, noise_var=1.0),
    dict(group_owner=[0], user_group=[0], sinr_target=0.0, noise_var=1.0),
    dict(group_owner=[0], user_group=[0], sinr_target=1.0, noise_var=-1.0),
])
def test_config_rejects_invalid(kwargs):
    with pytest.raises(ValueError):
        SystemConfig(num_antennas=2, **kwargs)


def test_channels_deterministic_and_seed_sensitive():
    cfg = SystemConfig.symmetric(2, 2, 4, 3)
    a, b = generate_channels(cfg, 7), generate_channels(cfg, 7)
    assert np.array_equal(a, b)
    assert a.shape == (2, 4, 3)
    assert not np.array_equal(a, generate_channels(cfg, 8))


def test_channel_statistics():
    # 1e5 draws of two antenna entries: unit variance, zero correlation, circular
    cfg = SystemConfig(num_antennas=2, group_owner=[0], user_group=[0] * 100000,
                       sinr_target=1.0, noise_var=1.0)
    h = generate_channels(cfg, 123).reshape(-1, 2)
    assert h.shape[0] == 100000
    assert abs(np.mean(np.abs(h[:, 0]) ** 2) - 1.0) < 0.02
    assert abs(np.mean(np.abs(h[:, 1]) ** 2) - 1.0) < 0.02
    assert abs(np.mean(h[:, 0] * np.conj(h[:, 1]))) < 0.02
    assert abs(np.mean(h[:, 0] ** 2)) < 0.02  # circular symmetry
    assert abs(np.mean(h)) < 0.02


def test_sinr_examples():
    cfg = SystemConfig(num_antennas=1, group_owner=[0], user_group=[0], sinr_target=1.0,
                       noise_var=2.0)
    h = np.array([[[1.0 + 0j]]])
    assert evaluate_sinr(h, np.array([[2.0 + 0j]]), cfg, 0) == pytest.approx(2.0)
    assert evaluate_sinr(h, np.zeros((1, 1), complex), cfg, 0) == 0.0


def test_sinr_orthogonal_interference_is_single_cell():
    cfg = SystemConfig(num_antennas=2, group_owner=[0, 1], user_group=[0, 1],
                       sinr_target=1.0, noise_var=1.0)
    h = np.zeros((2, 2, 2), complex)
    h[0, 0] = [1, 0]
    h[1, 1] = [0, 1]
    h[1, 0] = [1, 0]  # cross channel to user 0, orthogonal to BS 1's beam
    w = np.array([[3, 0], [0, 5]], complex)
    assert evaluate_sinr(h, w, cfg, 0) == pytest.approx(9.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 3), st.integers(1, 2), st.integers(1, 4))
def test_sinr_matches_literal_formula(seed, B, gpb, A):
    cfg = SystemConfig.symmetric(B, B * gpb, B * gpb * 2, A)
    rng = np.random.default_rng(seed)
    h = generate_channels(cfg, seed)
    w = rng.standard_normal((cfg.num_groups, A)) + 1j * rng.standard_normal((cfg.num_groups, A))
    vec = evaluate_all_sinr(h, w, cfg)
    for u in range(cfg.num_users):
        ref = naive_sinr(h, w, cfg.group_owner, cfg.user_group, cfg.noise_var, u)
        assert vec[u] == pytest.approx(ref, rel=1e-12)
        assert evaluate_sinr(h, w, cfg, u) == pytest.approx(ref, rel=1e-12)


def test_sum_power():
    assert sum_power(np.zeros((2, 3))) == 0.0
    assert sum_power(np.array([[1, 1], [0, 2]], complex)) == pytest.approx(6.0)
    rng = np.random.default_rng(0)
    w = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
    W = outer_products(w)
    assert sum_power(W) == pytest.approx(sum_power(w), rel=1e-12)
    assert all(is_hermitian(Wg) and is_psd(Wg) for Wg in W)
    assert not is_psd(np.diag([1.0, -1e-3]))


def test_db_conversion():
    assert db_to_linear(0) == pytest.approx(1.0)
    assert db_to_linear(10) == pytest.approx(10.0)
    assert db_to_linear(20) == pytest.approx(100.0)
    assert linear_to_db(100.0) == pytest.approx(20.0)


def test_with_targets():
    cfg = SystemConfig.symmetric(1, 1, 2, 2, gamma_db=0.0)
    assert np.allclose(cfg.with_targets(3.0).sinr_target, 3.0)
    assert np.allclose(cfg.sinr_target, 1.0)
