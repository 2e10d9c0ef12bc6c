"""Receiver-AP selection by sensing-signal leakage to the users."""

from __future__ import annotations

import itertools
import math

import numpy as np

from .scenario import ApConfiguration

__all__ = ["ApConfiguration", "sensing_block", "mi_upper_bound", "build_mi_matrix",
           "column_scores", "select_receivers", "exhaustive_select"]


def sensing_block(w_lt: np.ndarray, s_s: np.ndarray) -> np.ndarray:
    """Precoded sensing symbols of one AP, ``w_lt s_s^H`` of shape ``(m, n)``."""
    return np.outer(w_lt, np.conj(s_s))


def mi_upper_bound(x_ls: np.ndarray, h_li: np.ndarray) -> float:
    """log2(1 + ||x^H h||^2) in bits."""
    v = np.conj(x_ls).T @ h_li
    return float(np.log2(1.0 + np.real(np.vdot(v, v))))


def build_mi_matrix(sensing_precoders: dict, channels: np.ndarray, s_s: np.ndarray,
                    n_ap: int | None = None) -> np.ndarray:
    """Leakage matrix with entry ``(i, l) = ||(x_l^s)^H h_{l,i}||^2``.

    ``sensing_precoders`` maps AP index to its sensing precoder ``w_{l,t}``;
    APs without one get a zero column. ``channels`` is ``(n_ap, n_ue, m)``.
    Uses the rank-1 identity ``||s_s||^2 |w_lt^H h_li|^2``.
    """
    n_ap = channels.shape[0] if n_ap is None else n_ap
    n_ue = channels.shape[1]
    energy = np.real(np.vdot(s_s, s_s))
    out = np.zeros((n_ue, n_ap))
    for l, w_lt in sensing_precoders.items():
        out[:, l] = energy * np.abs(channels[l].conj() @ w_lt) ** 2
    return out


def column_scores(mi: np.ndarray, scoring: str = "norm") -> np.ndarray:
    """Per-AP score: Euclidean column norm (default) or column sum."""
    if scoring == "norm":
        return np.linalg.norm(mi, axis=0)
    if scoring == "sum":
        return np.sum(mi, axis=0)
    raise ValueError(f"unknown scoring {scoring!r}")


def select_receivers(mi: np.ndarray, n_rx: int, scoring: str = "norm") -> ApConfiguration:
    """The ``n_rx`` APs with the largest scores become receivers.

    Ties go to the smallest AP index.
    """
    scores = column_scores(mi, scoring)
    n_ap = scores.size
    if not 0 < n_rx < n_ap:
        raise ValueError(f"n_rx must be in [1, {n_ap - 1}], got {n_rx}")
    # stable sort on the negated scores keeps index order inside ties
    order = np.argsort(-scores, kind="stable")
    return ApConfiguration.from_receivers(order[:n_rx], n_ap)


def exhaustive_select(mi: np.ndarray, n_rx: int, scoring: str = "norm") -> ApConfiguration:
    """Brute-force subset search; the lexicographically first maximizer wins."""
    scores = column_scores(mi, scoring)
    n_ap = scores.size
    best, best_val = None, -np.inf
    for subset in itertools.combinations(range(n_ap), n_rx):
        val = math.fsum(scores[l] for l in subset)
        if val > best_val:
            best, best_val = subset, val
    return ApConfiguration.from_receivers(best, n_ap)
