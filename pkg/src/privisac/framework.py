"""Alternating precoder design and receiver selection, plus the random-receiver baseline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import ScenarioConfig
from .precoder import CcpState, build_sensing_quadratic, optimize_precoder, sensing_objective
from .scenario import STREAM_BASELINE, ApConfiguration, Scenario, rng_for
from .selection import build_mi_matrix, column_scores, select_receivers
from .signals import PrecoderMatrix, SymbolFrame


@dataclass
class FrameworkResult:
    w_final: PrecoderMatrix
    r_final: ApConfiguration
    iterations: int
    converged: bool
    gamma_s: float
    history: list = field(default_factory=list)
    ccp_states: list = field(default_factory=list)
    # iterations where norm- and sum-based scoring would pick different receivers
    scoring_disagreements: int = 0

    def to_dict(self) -> dict:
        return {
            "receivers": list(self.r_final.receivers),
            "transmitters": list(self.r_final.transmitters),
            "iterations": self.iterations,
            "converged": self.converged,
            "gamma_s": self.gamma_s,
            "scoring_disagreements": self.scoring_disagreements,
            "history": self.history,
        }


def bootstrap_configuration(scenario: Scenario, n_rx: int) -> ApConfiguration:
    """Every AP transmits; the ``n_rx`` APs nearest the target act as provisional receivers."""
    order = np.argsort(scenario.target_distances, kind="stable")
    n_ap = scenario.config.n_ap
    return ApConfiguration(n_ap=n_ap, receivers=tuple(order[:n_rx]),
                           transmitters=tuple(range(n_ap)), bootstrap=True)


def _solve(scenario, ap_config, frame, cfg):
    w, state = optimize_precoder(scenario, ap_config, frame, cfg)
    quad = build_sensing_quadratic(scenario, ap_config)
    return w, state, sensing_objective(quad, w.w, frame, cfg.noise_power)


def run_framework(scenario: Scenario, frame: SymbolFrame, config: ScenarioConfig | None = None,
                  scoring: str = "norm") -> FrameworkResult:
    """Alternate precoder optimization and receiver selection until the receivers repeat.

    The first pass optimizes with every AP transmitting. Receiver APs, which
    have no column in the current precoder, are scored with the most recent
    sensing precoder they had as transmitters.
    """
    cfg = config or scenario.config
    n_ap, n_rx = cfg.n_ap, cfg.n_rx
    channels = scenario.channels
    s_s = frame.sensing_symbols

    latest: dict = {}
    evaluated: dict = {}  # receivers -> (w, gamma_s)
    history, states = [], []
    disagreements = 0
    current = bootstrap_configuration(scenario, n_rx)
    converged = False
    p = 0
    selected = None
    while True:
        p += 1
        w, state, gamma_s = _solve(scenario, current, frame, cfg)
        states.append(state)
        if not current.bootstrap:
            evaluated[current.receivers] = (w, gamma_s)
        for j in current.transmitters:
            latest[j] = w.sensing_column(j)
        mi = build_mi_matrix(latest, channels, s_s, n_ap)
        selected = select_receivers(mi, n_rx, scoring)
        other = select_receivers(mi, n_rx, "sum" if scoring == "norm" else "norm")
        disagreements += int(other.receivers != selected.receivers)
        history.append({"iteration": p, "receivers": list(current.receivers),
                        "bootstrap": current.bootstrap, "gamma_s": gamma_s,
                        "selected": list(selected.receivers),
                        "scores": column_scores(mi, scoring).tolist()})
        if not current.bootstrap and selected.receivers == current.receivers:
            converged = True
            break
        if p >= cfg.framework_max_iter:
            break
        current = selected

    if converged:
        w_final, gamma_final = evaluated[selected.receivers]
        r_final = selected
    else:
        if selected.receivers not in evaluated:
            w_x, state, g_x = _solve(scenario, selected, frame, cfg)
            states.append(state)
            evaluated[selected.receivers] = (w_x, g_x)
        best = max(evaluated, key=lambda r: evaluated[r][1])
        w_final, gamma_final = evaluated[best]
        r_final = ApConfiguration.from_receivers(best, n_ap)
    return FrameworkResult(w_final=w_final, r_final=r_final, iterations=p, converged=converged,
                           gamma_s=gamma_final, history=history, ccp_states=states,
                           scoring_disagreements=disagreements)


def run_baseline(scenario: Scenario, frame: SymbolFrame, config: ScenarioConfig | None = None,
                 seed: int | None = None) -> FrameworkResult:
    """Uniformly random receivers and a single precoder solve."""
    cfg = config or scenario.config
    seed = scenario.seed if seed is None else seed
    rng = rng_for(seed, STREAM_BASELINE)
    receivers = rng.choice(cfg.n_ap, size=cfg.n_rx, replace=False)
    ap_config = ApConfiguration.from_receivers(receivers, cfg.n_ap)
    w, state, gamma_s = _solve(scenario, ap_config, frame, cfg)
    return FrameworkResult(w_final=w, r_final=ap_config, iterations=1, converged=True,
                           gamma_s=gamma_s,
                           history=[{"iteration": 1, "receivers": list(ap_config.receivers),
                                     "bootstrap": False, "gamma_s": gamma_s}],
                           ccp_states=[state])
