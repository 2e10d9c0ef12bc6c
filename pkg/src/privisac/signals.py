"""Symbols, transmit/receive signal synthesis and the two SINR measures."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigurationError
from .scenario import (STREAM_ECHO_NOISE, STREAM_FRAME, STREAM_USER_NOISE, ApConfiguration, Scenario,
                       array_response, crandn, rng_for, sensing_geometry)


def qam_constellation(order: int) -> np.ndarray:
    """Square QAM points normalized to unit average power."""
    root = math.isqrt(int(order))
    if order < 4 or root * root != order:
        raise ConfigurationError(f"mod_order must be a square >= 4, got {order}")
    levels = np.arange(-(root - 1), root, 2, dtype=float)
    pts = (levels[:, None] + 1j * levels[None, :]).ravel()
    return pts / np.sqrt(np.mean(np.abs(pts) ** 2))


QPSK = qam_constellation(4)


@dataclass(frozen=True, eq=False)
class SymbolFrame:
    """User data symbols and the sensing probe for ``n`` samples.

    ``symbols`` is ``(n_ue + 1, n)``; column ``n`` is the stacked vector
    s[n] = [s_1[n], ..., s_U[n], s_s[n]].
    """

    symbols: np.ndarray

    @property
    def user_symbols(self) -> np.ndarray:
        return self.symbols[:-1]

    @property
    def sensing_symbols(self) -> np.ndarray:
        return self.symbols[-1]

    @property
    def n_samples(self) -> int:
        return self.symbols.shape[1]

    def s_vec(self, n: int) -> np.ndarray:
        return self.symbols[:, n]

    @property
    def covariance(self) -> np.ndarray:
        """Sum over samples of s[n] s[n]^H."""
        return self.symbols @ self.symbols.conj().T


def generate_frame(n_ue: int, n: int, mod_order: int, seed: int) -> SymbolFrame:
    """Uniform QAM data symbols for each user plus a unit-modulus QPSK probe."""
    const = qam_constellation(mod_order)
    rng = rng_for(seed, STREAM_FRAME)
    data = const[rng.integers(0, const.size, size=(n_ue, n))]
    probe = QPSK[rng.integers(0, 4, size=n)]
    return SymbolFrame(np.vstack([data, probe[None, :]]))


@dataclass(frozen=True, eq=False)
class PrecoderMatrix:
    """Aggregate precoder W of shape ``(m * n_tx, n_ue + 1)``.

    Row block ``b`` belongs to AP ``transmitters[b]``; the last column is the
    sensing precoder.
    """

    w: np.ndarray
    transmitters: tuple
    m: int

    def __post_init__(self):
        if self.w.ndim != 2 or self.w.shape[0] != self.m * len(self.transmitters):
            raise ValueError(f"precoder shape {self.w.shape} does not match "
                             f"{len(self.transmitters)} transmitters x {self.m} antennas")

    @property
    def n_ue(self) -> int:
        return self.w.shape[1] - 1

    def block(self, ap: int) -> np.ndarray:
        """W_j, the ``(m, n_ue + 1)`` precoder of AP ``ap``."""
        b = self.transmitters.index(ap)
        return self.w[b * self.m:(b + 1) * self.m]

    def sensing_column(self, ap: int) -> np.ndarray:
        return self.block(ap)[:, -1]

    @property
    def row_powers(self) -> np.ndarray:
        return np.sum(np.abs(self.w) ** 2, axis=1)

    def full(self, n_ap: int) -> np.ndarray:
        """W over all APs with zero rows for non-transmitting ones."""
        out = np.zeros((n_ap * self.m, self.w.shape[1]), dtype=complex)
        for b, j in enumerate(self.transmitters):
            out[j * self.m:(j + 1) * self.m] = self.w[b * self.m:(b + 1) * self.m]
        return out

    def with_sensing_zeroed(self) -> "PrecoderMatrix":
        w = self.w.copy()
        w[:, -1] = 0
        return PrecoderMatrix(w, self.transmitters, self.m)


def transmit_signal(w_j: np.ndarray, s_vec: np.ndarray) -> np.ndarray:
    """x_j = W_j s, for one stacked symbol vector or an ``(n_ue+1, n)`` block."""
    w_j = np.asarray(w_j)
    s_vec = np.asarray(s_vec)
    if w_j.shape[1] != s_vec.shape[0]:
        raise ValueError(f"precoder has {w_j.shape[1]} columns but symbol vector has {s_vec.shape[0]} rows")
    return w_j @ s_vec


def transmit_all(w: PrecoderMatrix, frame: SymbolFrame) -> np.ndarray:
    """Transmit signals of every transmitter, shape ``(n_tx, m, n)``."""
    x = w.w @ frame.symbols
    return x.reshape(len(w.transmitters), w.m, -1)


class UserSignal(NamedTuple):
    total: np.ndarray
    desired: np.ndarray
    comm_interference: np.ndarray
    sensing_interference: np.ndarray
    noise: np.ndarray


def received_user_signal(scenario: Scenario, w: PrecoderMatrix, frame: SymbolFrame, i: int,
                         noise_seed: int, noise: bool = True) -> UserSignal:
    """Samples at the ``k_antennas`` antennas of user ``i`` split into their four terms.

    Every array is ``(k_antennas, n)``; antenna ``k`` uses its own channel draw.
    """
    cfg = scenario.config
    tx = list(w.transmitters)
    h = scenario.h[tx, i]  # (n_tx, K, m)
    blocks = w.w.reshape(len(tx), w.m, -1)  # (n_tx, m, U+1)
    # effective scalar gain of every column at every antenna, summed over APs
    g = np.einsum("jkm,jmc->kc", h.conj(), blocks)  # (K, U+1)
    s = frame.symbols
    desired = g[:, [i]] * s[i]
    others = [k for k in range(w.n_ue) if k != i]
    comm = g[:, others] @ s[others]
    sens = g[:, [-1]] * s[-1]
    if noise:
        nz = crandn(rng_for(noise_seed, STREAM_USER_NOISE, i), desired.shape, cfg.noise_power)
    else:
        nz = np.zeros_like(desired)
    return UserSignal(desired + comm + sens + nz, desired, comm, sens, nz)


def received_sensing_signal(scenario: Scenario, ap_config: ApConfiguration, x: np.ndarray,
                            noise_seed: int, noise: bool = True) -> np.ndarray:
    """Echo samples at every receiver of ``ap_config``, shape ``(n_rx, m, n)``.

    ``x`` holds the transmit signals ``(n_tx, m, n)`` ordered like
    ``ap_config.transmitters``.
    """
    cfg = scenario.config
    m = cfg.m_antennas
    geo = sensing_geometry(scenario, ap_config)
    a_tx = array_response(geo.theta_tx, m)  # (n_tx, m)
    a_rx = array_response(geo.theta_rx, m)  # (n_rx, m)
    # a(theta_j)^T x_j[n] for every transmitter
    beam = np.einsum("jm,jmn->jn", a_tx, x)
    coef = geo.alpha * np.sqrt(geo.beta_tr)  # (n_tx, n_rx)
    y = a_rx[:, :, None] * np.einsum("jr,jn->rn", coef, beam)[:, None, :]
    if scenario.clutter is not None:
        hc = scenario.clutter[np.ix_(list(ap_config.transmitters), list(ap_config.receivers))]
        y = y + np.einsum("jrab,jbn->ran", hc, x)
    if noise:
        y = y + crandn(rng_for(noise_seed, STREAM_ECHO_NOISE), y.shape, cfg.noise_power)
    return y


def user_sinr(w: np.ndarray, h: np.ndarray, i: int, noise_power: float) -> float:
    """SINR of user ``i`` from concatenated channels ``h`` ``(n_ue, L)``.

    Interference is the power sum over the other user columns and the
    sensing column, i.e. the expected interference for independent
    unit-power symbols.
    """
    w = np.asarray(w)
    g = h[i].conj() @ w  # h_i^H w_c for every column
    num = np.abs(g[i]) ** 2
    den = np.sum(np.abs(np.delete(g, i)) ** 2) + noise_power
    return float(num / den)


def user_sinrs(w: np.ndarray, h: np.ndarray, noise_power: float) -> np.ndarray:
    return np.array([user_sinr(w, h, i, noise_power) for i in range(h.shape[0])])


def sensing_sinr(w: PrecoderMatrix, scenario: Scenario, ap_config: ApConfiguration,
                 frame: SymbolFrame, noise_power: float, quadratic=None) -> float:
    """Quadratic-form sensing SINR averaged over receivers, samples and antennas."""
    from .precoder import build_sensing_quadratic, sensing_objective

    if quadratic is None:
        quadratic = build_sensing_quadratic(scenario, ap_config)
    return sensing_objective(quadratic, w.w, frame, noise_power)
