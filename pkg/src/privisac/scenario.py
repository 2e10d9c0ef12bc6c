"""Random system realizations: geometry, Rayleigh channels and target RCS."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .config import ScenarioConfig
from .errors import ConfigurationError

MAX_PLACEMENT_ATTEMPTS = 10_000

# stream identifiers mixed into the trial seed so each random component has
# its own independent generator
STREAM_SCENARIO = 0
STREAM_FRAME = 1
STREAM_USER_NOISE = 2
STREAM_ECHO_NOISE = 3
STREAM_PRECODER_INIT = 4
STREAM_ATTACK = 5
STREAM_BASELINE = 6


def rng_for(seed: int, stream: int, *extra: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(stream), *map(int, extra)]))


def crandn(rng: np.random.Generator, shape, var: float = 1.0) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples CN(0, var)."""
    scale = np.sqrt(np.asarray(var, dtype=float) / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def path_gain(distance, ple: float):
    """Power-law large-scale gain with a 1 m reference distance."""
    d = np.maximum(np.asarray(distance, dtype=float), 1.0)
    out = d ** (-float(ple))
    return float(out) if out.ndim == 0 else out


def array_response(theta, m: int) -> np.ndarray:
    """ULA steering vector a(theta) with half-wavelength spacing.

    Element ``p`` is ``exp(j*p*pi*cos(theta))``. A scalar angle gives shape
    ``(m,)``; an array of angles gives ``(len(theta), m)``.
    """
    theta = np.asarray(theta, dtype=float)
    p = np.arange(int(m))
    return np.exp(1j * np.pi * np.cos(theta)[..., None] * p)


def _wrap_angle(theta):
    theta = np.asarray(theta, dtype=float)
    return np.where(theta <= -np.pi, theta + 2 * np.pi, theta)


@dataclass(frozen=True)
class ApConfiguration:
    """Split of the APs into ISAC transmitters and sensing receivers.

    ``bootstrap`` marks the provisional configuration used on the first
    framework iteration, where every AP transmits and the receivers only
    define the sensing objective; overlap is allowed only then.
    """

    n_ap: int
    receivers: tuple
    transmitters: tuple = None
    bootstrap: bool = False

    def __post_init__(self):
        rx = tuple(sorted(int(r) for r in self.receivers))
        tx = self.transmitters
        if tx is None:
            tx = tuple(j for j in range(self.n_ap) if j not in rx)
        tx = tuple(sorted(int(j) for j in tx))
        object.__setattr__(self, "receivers", rx)
        object.__setattr__(self, "transmitters", tx)
        if len(set(rx)) != len(rx) or len(set(tx)) != len(tx):
            raise ConfigurationError("duplicate AP index in configuration")
        if any(not 0 <= j < self.n_ap for j in rx + tx):
            raise ConfigurationError("AP index out of range")
        if not rx or not tx:
            raise ConfigurationError("need at least one transmitter and one receiver")
        if not self.bootstrap:
            if set(rx) & set(tx) or len(rx) + len(tx) != self.n_ap:
                raise ConfigurationError("receivers and transmitters must partition the APs")

    @classmethod
    def from_receivers(cls, receivers, n_ap: int) -> "ApConfiguration":
        return cls(n_ap=n_ap, receivers=tuple(receivers))

    @property
    def n_tx(self) -> int:
        return len(self.transmitters)

    @property
    def n_rx(self) -> int:
        return len(self.receivers)

    def to_dict(self) -> dict:
        return {"receivers": list(self.receivers), "transmitters": list(self.transmitters),
                "bootstrap": self.bootstrap}


@dataclass(frozen=True, eq=False)
class Scenario:
    """One realized world.

    ``h`` has shape ``(n_ap, n_ue, k_antennas, m)``: an independent Rayleigh
    draw for every user antenna. Antenna 0 is the channel the central unit
    designs against (``channels``); the others are the extra independent
    observations. ``alpha[j, r]`` is the Swerling-I RCS of the path from AP
    ``j`` via the target to AP ``r``, drawn for every ordered AP pair.
    """

    config: ScenarioConfig
    seed: int
    ap_positions: np.ndarray
    ue_positions: np.ndarray
    target_position: np.ndarray
    h: np.ndarray
    beta_ue: np.ndarray
    alpha: np.ndarray
    clutter: np.ndarray | None = None

    @property
    def channels(self) -> np.ndarray:
        """Design channels h_{j,i}, shape ``(n_ap, n_ue, m)``."""
        return self.h[:, :, 0, :]

    @property
    def theta_ap(self) -> np.ndarray:
        """Angle from every AP towards the target."""
        d = self.target_position - self.ap_positions
        return _wrap_angle(np.arctan2(d[:, 1], d[:, 0]))

    @property
    def theta_echo(self) -> np.ndarray:
        """Angle from the target towards every AP (echo direction)."""
        d = self.ap_positions - self.target_position
        return _wrap_angle(np.arctan2(d[:, 1], d[:, 0]))

    @property
    def target_distances(self) -> np.ndarray:
        return np.linalg.norm(self.ap_positions - self.target_position, axis=1)

    @property
    def beta_tr(self) -> np.ndarray:
        """Two-hop sensing gain for every (transmitter, receiver) AP pair."""
        g = path_gain(self.target_distances, self.config.path_loss_exp)
        return np.outer(g, g)

    def stacked_channels(self, transmitters) -> np.ndarray:
        """Concatenated design channels h_i over ``transmitters``: ``(n_ue, m*n_tx)``."""
        h = self.channels[list(transmitters)]  # (n_tx, n_ue, m)
        return np.transpose(h, (1, 0, 2)).reshape(self.config.n_ue, -1)


class SensingGeometry(NamedTuple):
    theta_tx: np.ndarray
    theta_rx: np.ndarray
    beta_tr: np.ndarray
    alpha: np.ndarray


def sensing_geometry(scenario: Scenario, ap_config: ApConfiguration) -> SensingGeometry:
    """Angles and two-hop gains restricted to ``ap_config``.

    ``beta_tr`` and ``alpha`` have shape ``(n_tx, n_rx)``.
    """
    tx = list(ap_config.transmitters)
    rx = list(ap_config.receivers)
    return SensingGeometry(
        theta_tx=scenario.theta_ap[tx],
        theta_rx=scenario.theta_echo[rx],
        beta_tr=scenario.beta_tr[np.ix_(tx, rx)],
        alpha=scenario.alpha[np.ix_(tx, rx)],
    )


def _place_points(rng, n: int, side: float, min_sep: float) -> np.ndarray:
    pts = np.empty((0, 2))
    for _ in range(n):
        for _attempt in range(MAX_PLACEMENT_ATTEMPTS):
            p = rng.uniform(0.0, side, size=2)
            if pts.shape[0] == 0 or np.min(np.linalg.norm(pts - p, axis=1)) >= min_sep:
                pts = np.vstack([pts, p])
                break
        else:
            raise ConfigurationError(
                f"could not place {n} points with separation {min_sep} m on a {side} m grid")
    return pts


def generate_scenario(config: ScenarioConfig, seed: int | None = None) -> Scenario:
    """Draw a scenario; a pure function of ``(config, seed)``.

    APs, users and the target are placed uniformly on the grid with a minimum
    pairwise separation of ``config.min_separation``.
    """
    seed = config.seed if seed is None else int(seed)
    rng = rng_for(seed, STREAM_SCENARIO)
    c = config
    pts = _place_points(rng, c.n_ap + c.n_ue + 1, c.grid_side, c.min_separation)
    ap = pts[: c.n_ap]
    ue = pts[c.n_ap: c.n_ap + c.n_ue]
    target = pts[-1]

    dist = np.linalg.norm(ap[:, None, :] - ue[None, :, :], axis=-1)
    beta_ue = path_gain(dist, c.path_loss_exp)
    h = crandn(rng, (c.n_ap, c.n_ue, c.k_antennas, c.m_antennas)) * np.sqrt(beta_ue)[:, :, None, None]
    alpha = crandn(rng, (c.n_ap, c.n_ap), c.alpha_power)
    clutter = None
    if c.clutter_var > 0:
        clutter = crandn(rng, (c.n_ap, c.n_ap, c.m_antennas, c.m_antennas), c.clutter_var)
    return Scenario(config=c, seed=seed, ap_positions=ap, ue_positions=ue, target_position=target,
                    h=h, beta_ue=beta_ue, alpha=alpha, clutter=clutter)
