import numpy as np
import pytest

from mcbeam import SystemConfig, generate_channels


def naive_sinr(h, w, group_owner, user_group, noise, u):
    """Literal SINR fraction, loop by loop."""
    g = user_group[u]
    num = abs(np.vdot(h[group_owner[g], u], w[g])) ** 2
    den = noise[u]
    for k in range(len(w)):
        if k != g:
            den += abs(np.vdot(h[group_owner[k], u], w[k])) ** 2
    return num / den


@pytest.fixture
def small_instance():
    cfg = SystemConfig.symmetric(2, 4, 8, 8, gamma_db=0.0)
    return cfg, generate_channels(cfg, 0)


@pytest.fixture
def tiny_instance():
    cfg = SystemConfig.symmetric(2, 2, 4, 4, gamma_db=0.0)
    return cfg, generate_channels(cfg, 3)
