"""
System model for multi-cell multigroup multicast downlinks.

Channels, beamformers and covariances are plain numpy arrays:

* channels ``h`` have shape ``(B, U, A)``; ``h[b, u]`` is the vector from
  BS ``b`` to user ``u``,
* beamformers ``w`` have shape ``(G, A)``, one row per multicast group,
* covariances ``W`` have shape ``(G, A, A)``, one Hermitian PSD matrix per
  group.

All powers are normalized: unit-variance channels and (by default) unit
noise variance, so sum powers are dimensionless ratios.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "SystemConfig",
    "generate_channels",
    "evaluate_sinr",
    "evaluate_all_sinr",
    "group_gains",
    "sum_power",
    "outer_products",
    "is_hermitian",
    "is_psd",
    "db_to_linear",
    "linear_to_db",
]


def _frozen_array(values, dtype=float):
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SystemConfig:
    """
    Network topology and QoS targets.

    Parameters
    ----------
    num_antennas : int
        Transmit antennas per BS.
    group_owner : sequence of int
        ``group_owner[g]`` is the BS serving group ``g``.
    user_group : sequence of int
        ``user_group[u]`` is the multicast group of user ``u``.
    sinr_target : float or sequence of float
        Linear SINR target per user (a scalar is broadcast).
    noise_var : float or sequence of float
        Receiver noise variance per user (a scalar is broadcast).
    num_bs : int, optional
        Number of BSs; inferred from ``group_owner`` when omitted.  Needed
        only when some BS serves no group.
    """

    num_antennas: int
    group_owner: Sequence[int]
    user_group: Sequence[int]
    sinr_target: float | Sequence[float] = 1.0
    noise_var: float | Sequence[float] = 1.0
    num_bs: int | None = None
    _derived: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        owner = _frozen_array(self.group_owner, dtype=int)
        ugroup = _frozen_array(self.user_group, dtype=int)
        if owner.ndim != 1 or owner.size == 0:
            raise ValueError("group_owner must be a non-empty 1-d sequence")
        if ugroup.ndim != 1 or ugroup.size == 0:
            raise ValueError("user_group must be a non-empty 1-d sequence")
        num_bs = int(owner.max()) + 1 if self.num_bs is None else int(self.num_bs)
        G, U = owner.size, ugroup.size
        if owner.min() < 0 or owner.max() >= num_bs:
            raise ValueError("group_owner entries must lie in [0, num_bs)")
        if ugroup.min() < 0 or ugroup.max() >= G:
            raise ValueError("user_group entries must lie in [0, num_groups)")
        if np.any(np.bincount(ugroup, minlength=G) == 0):
            raise ValueError("every group needs at least one user")
        if int(self.num_antennas) < 1:
            raise ValueError("num_antennas must be positive")

        gamma = _frozen_array(np.broadcast_to(np.asarray(self.sinr_target, float), (U,)))
        noise = _frozen_array(np.broadcast_to(np.asarray(self.noise_var, float), (U,)))
        if np.any(~np.isfinite(gamma)) or np.any(gamma <= 0):
            raise ValueError("SINR targets must be positive and finite")
        if np.any(~np.isfinite(noise)) or np.any(noise <= 0):
            raise ValueError("noise variances must be positive and finite")

        set_ = object.__setattr__
        set_(self, "num_antennas", int(self.num_antennas))
        set_(self, "group_owner", owner)
        set_(self, "user_group", ugroup)
        set_(self, "sinr_target", gamma)
        set_(self, "noise_var", noise)
        set_(self, "num_bs", num_bs)
        set_(self, "_derived", {"serving_bs": _frozen_array(owner[ugroup], dtype=int)})

    @classmethod
    def symmetric(cls, num_bs, num_groups, num_users, num_antennas,
                  gamma_db=0.0, noise_var=1.0):
        """
        Equal split of groups over BSs and of users over groups.

        Groups ``0 .. G/B - 1`` belong to BS 0, and so on; users are assigned
        to groups in contiguous blocks of ``U/G``.
        """
        if num_groups % num_bs:
            raise ValueError("num_groups must be a multiple of num_bs")
        if num_users % num_groups:
            raise ValueError("num_users must be a multiple of num_groups")
        owner = np.repeat(np.arange(num_bs), num_groups // num_bs)
        ugroup = np.repeat(np.arange(num_groups), num_users // num_groups)
        return cls(num_antennas=num_antennas, group_owner=owner, user_group=ugroup,
                   sinr_target=db_to_linear(gamma_db), noise_var=noise_var,
                   num_bs=num_bs)

    # sizes
    @property
    def num_groups(self) -> int:
        return self.group_owner.size

    @property
    def num_users(self) -> int:
        return self.user_group.size

    @property
    def shape(self):
        """``(B, G, U, A)``."""
        return (self.num_bs, self.num_groups, self.num_users, self.num_antennas)

    # partitions
    @property
    def serving_bs(self) -> np.ndarray:
        """BS serving each user, shape ``(U,)``."""
        return self._derived["serving_bs"]

    def groups_of(self, b) -> np.ndarray:
        return np.flatnonzero(self.group_owner == b)

    def users_of_group(self, g) -> np.ndarray:
        return np.flatnonzero(self.user_group == g)

    def users_of(self, b) -> np.ndarray:
        """Users served by BS ``b``."""
        return np.flatnonzero(self.serving_bs == b)

    def out_of_cell_users(self, b) -> np.ndarray:
        """Users not served by BS ``b`` (the ones it interferes with)."""
        return np.flatnonzero(self.serving_bs != b)

    def with_targets(self, sinr_target):
        """Copy of the configuration with new (linear) SINR targets."""
        return SystemConfig(self.num_antennas, self.group_owner, self.user_group,
                            sinr_target, self.noise_var, self.num_bs)

    def __repr__(self):
        B, G, U, A = self.shape
        return f"SystemConfig(B={B}, G={G}, U={U}, A={A})"


def generate_channels(config: SystemConfig, seed) -> np.ndarray:
    """
    Draw i.i.d. Rayleigh channels, every entry CN(0, 1).

    Returns an array of shape ``(B, U, A)``.  The real and imaginary parts
    are independent normals with variance 1/2, drawn in that order from
    ``numpy.random.default_rng(seed)``.
    """
    rng = np.random.default_rng(seed)
    B, _, U, A = config.shape
    re = rng.standard_normal((B, U, A))
    im = rng.standard_normal((B, U, A))
    return (re + 1j * im) / np.sqrt(2.0)


def group_gains(channels, beams, config: SystemConfig) -> np.ndarray:
    """
    Received power of every group's beam at every user.

    ``gains[u, k] = |h_{owner(k), u}^H w_k|^2``, shape ``(U, G)``.
    """
    beams = np.asarray(beams)
    h_owner = np.asarray(channels)[config.group_owner]  # (G, U, A)
    amp = np.einsum("kua,ka->uk", h_owner.conj(), beams)
    return np.abs(amp) ** 2


def evaluate_all_sinr(channels, beams, config: SystemConfig) -> np.ndarray:
    """SINR of every user, shape ``(U,)``."""
    gains = group_gains(channels, beams, config)
    users = np.arange(config.num_users)
    signal = gains[users, config.user_group]
    interference = gains.sum(axis=1) - signal
    return signal / (config.noise_var + interference)


def evaluate_sinr(channels, beams, config: SystemConfig, u: int) -> float:
    """
    SINR of user ``u`` for the beamformers ``beams``.

    Desired power over noise plus the power of every other group's beam,
    intra-cell and inter-cell alike.
    """
    h = np.asarray(channels)
    beams = np.asarray(beams)
    g = config.user_group[u]
    signal = 0.0
    interference = 0.0
    for k in range(config.num_groups):
        p = abs(np.vdot(h[config.group_owner[k], u], beams[k])) ** 2
        if k == g:
            signal = p
        else:
            interference += p
    return float(signal / (config.noise_var[u] + interference))


def sum_power(x) -> float:
    """
    Total transmit power.

    Accepts beamformers of shape ``(G, A)`` (sum of squared norms) or
    covariances of shape ``(G, A, A)`` (sum of traces).
    """
    x = np.asarray(x)
    if x.ndim == 3:
        return float(np.einsum("gii->", x).real)
    return float(np.sum(np.abs(x) ** 2))


def outer_products(beams) -> np.ndarray:
    """Rank-one covariances ``w_g w_g^H`` for every group."""
    beams = np.asarray(beams)
    return np.einsum("ga,gb->gab", beams, beams.conj())


def is_hermitian(W, rtol=1e-9) -> bool:
    W = np.asarray(W)
    scale = max(np.abs(W).max(initial=0.0), 1e-300)
    return bool(np.abs(W - W.conj().T).max(initial=0.0) <= rtol * scale)


def is_psd(W, rtol=1e-7) -> bool:
    """Smallest eigenvalue no lower than ``-rtol`` times the largest."""
    ev = np.linalg.eigvalsh(0.5 * (W + np.conj(W).T))
    return bool(ev[0] >= -rtol * max(ev[-1], 0.0))


def db_to_linear(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))
