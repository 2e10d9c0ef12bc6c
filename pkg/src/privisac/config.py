"""Simulation parameters and their linear-scale views."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigurationError


def db2lin(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def dbm2watt(x_dbm: float) -> float:
    return 10.0 ** ((x_dbm - 30.0) / 10.0)


def lin2db(x: float) -> float:
    return 10.0 * math.log10(x) if x > 0 else -math.inf


def watt2dbm(x: float) -> float:
    return lin2db(x) + 30.0


@dataclass(frozen=True)
class ScenarioConfig:
    """All parameters of one simulated system.

    dB-valued quantities carry a ``_db``/``_dbm`` suffix and are exposed in
    linear units (watts for powers) through the properties below.
    ``sigma_h_db`` is the adversary's channel-estimation error variance
    relative to the per-entry channel gain (a normalized MSE).
    """

    grid_side: float = 1000.0
    n_ap: int = 6
    n_rx: int = 1
    n_ue: int = 3
    k_antennas: int = 4
    m_antennas: int = 64
    n_samples: int = 16
    mod_order: int = 16
    path_loss_exp: float = 3.0
    p_max_dbm: float = 35.0
    gamma_min_db: float = 3.0
    sigma_n_dbm: float = -94.0
    sigma_h_db: float = -40.0
    alpha_var_db: float = 10.0
    eta: float = 1.0
    r_gd: float = 10.0
    nu: float = 5.0
    em_max_iter: int = 100
    em_tol: float = 1e-10
    ccp_max_iter: int = 100
    ccp_tol: float = 0.1
    gd_max_iter: int = 10_000
    gd_tol: float = 1e-6
    framework_max_iter: int = 50
    solver_tol: float = 1e-8
    angle_step_deg: float = 0.5
    min_separation: float = 1.0
    clutter_var: float = 0.0
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        counts = ("n_ap", "n_rx", "n_ue", "k_antennas", "m_antennas", "n_samples",
                  "em_max_iter", "ccp_max_iter", "gd_max_iter", "framework_max_iter")
        for name in counts:
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ConfigurationError(f"{name} must be a positive integer, got {v!r}")
        if self.n_rx >= self.n_ap:
            raise ConfigurationError(f"n_rx ({self.n_rx}) must be smaller than n_ap ({self.n_ap})")
        root = math.isqrt(int(self.mod_order))
        if self.mod_order < 4 or root * root != self.mod_order:
            raise ConfigurationError(f"mod_order must be a perfect square >= 4, got {self.mod_order}")
        for name in ("em_tol", "ccp_tol", "gd_tol", "solver_tol", "eta", "grid_side",
                     "angle_step_deg", "nu", "path_loss_exp"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be strictly positive")
        if self.r_gd < 0 or self.clutter_var < 0 or self.min_separation < 0:
            raise ConfigurationError("r_gd, clutter_var and min_separation must be non-negative")

    # linear views
    @property
    def p_max(self) -> float:
        """Per-antenna power budget in watts."""
        return dbm2watt(self.p_max_dbm)

    @property
    def gamma_min(self) -> float:
        return db2lin(self.gamma_min_db)

    @property
    def noise_power(self) -> float:
        """Noise variance sigma_n^2 in watts."""
        return dbm2watt(self.sigma_n_dbm)

    @property
    def sigma_h2(self) -> float:
        return db2lin(self.sigma_h_db)

    @property
    def alpha_power(self) -> float:
        return db2lin(self.alpha_var_db)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = {f.name: f for f in fields(cls)}
        unknown = set(data) - set(known) - {"profile"}
        if unknown:
            raise ConfigurationError(f"unknown configuration keys: {sorted(unknown)}")
        base = profile(data["profile"]) if "profile" in data else cls()
        kwargs = {}
        for k, v in data.items():
            if k == "profile":
                continue
            ftype = known[k].type
            kwargs[k] = int(v) if ftype == "int" else float(v) if ftype == "float" else v
        return dataclasses.replace(base, **kwargs)

    @classmethod
    def from_json(cls, path, default_profile: str | None = None) -> "ScenarioConfig":
        """Load a JSON object of config fields; a ``profile`` key in the file wins."""
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"invalid JSON in {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigurationError(f"{path} must hold a JSON object")
        if default_profile is not None:
            data.setdefault("profile", default_profile)
        return cls.from_dict(data)


PROFILES = {
    # Table-1 values with the array size reduced so a run fits on a desktop
    "desk": dict(m_antennas=16, n_samples=16),
    "paper": dict(),
}


def profile(name: str, **overrides) -> ScenarioConfig:
    try:
        base = PROFILES[name]
    except KeyError:
        raise ConfigurationError(f"unknown profile {name!r}; choose from {sorted(PROFILES)}") from None
    return ScenarioConfig(**{**base, **overrides})
