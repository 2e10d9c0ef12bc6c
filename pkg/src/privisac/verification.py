"""Fast oracle and property checks run by ``privisac verify``.

Each check compares a library routine against an independent computation
(brute force, a generic numerical solver, direct simulation) and returns a
``CheckResult``. The test suite runs the same kinds of comparisons at larger
sizes.
"""

from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np

from .adversary import (beampattern, em_e_step, em_m_step, em_objective, half_plane_grid,
                        least_squares_point, estimate_angle, triangulate)
from .config import ScenarioConfig, profile
from .errors import InfeasibleError
from .precoder import (build_sensing_quadratic, linearize_objective, optimize_precoder,
                       sensing_objective, solve_ccp_subproblem)
from .scenario import ApConfiguration, array_response, crandn, generate_scenario
from .selection import exhaustive_select, select_receivers
from .signals import (PrecoderMatrix, generate_frame, received_sensing_signal, transmit_all,
                      user_sinrs)


class CheckResult(NamedTuple):
    name: str
    passed: bool
    detail: str


def check_array_norm(rng) -> CheckResult:
    m = int(rng.integers(1, 129))
    theta = rng.uniform(-np.pi, np.pi, 50)
    norms = np.sum(np.abs(array_response(theta, m)) ** 2, axis=1)
    err = float(np.max(np.abs(norms - m)))
    return CheckResult("array response norm", err < 1e-9, f"max |norm^2 - M| = {err:.2e}")


def check_gamma_mean(rng, samples: int = 1_000_000) -> CheckResult:
    nu, K = 5.0, 4
    C = float(rng.uniform(0.1, 20.0))
    closed = (nu + 2 * K) / (nu + C)
    draws = rng.gamma(shape=(nu + 2 * K) / 2, scale=2.0 / (nu + C), size=samples)
    rel = abs(draws.mean() - closed) / closed
    return CheckResult("scale-variable posterior mean", rel < 0.01, f"relative error {rel:.2e}")


def check_m_step(rng) -> CheckResult:
    from scipy.optimize import minimize

    m, K = 6, 3
    h_hat = crandn(rng, (K, m))
    y = crandn(rng, (1, K))
    x0 = crandn(rng, (1, m))
    est = em_e_step(y, x0, h_hat, np.array([1.0]), 5.0, 0.1, 0.05)
    x_closed = em_m_step(y, est.e_h, est.omega_h, m)
    f_closed = float(em_objective(x_closed, y, est.e_h, est.omega_h, m)[0])

    def f(v):
        x = (v[:m] + 1j * v[m:])[None]
        return float(em_objective(x, y, est.e_h, est.omega_h, m)[0])

    res = minimize(f, np.zeros(2 * m), method="BFGS", options={"gtol": 1e-12})
    gap = f_closed - res.fun
    return CheckResult("M-step vs numerical minimizer", gap < 1e-8, f"objective gap {gap:.2e}")


def check_selection(rng) -> CheckResult:
    for _ in range(200):
        n_ap = int(rng.integers(2, 9))
        n_rx = int(rng.integers(1, n_ap))
        mi = rng.integers(0, 4, size=(3, n_ap)).astype(float)  # small integers force ties
        if select_receivers(mi, n_rx).receivers != exhaustive_select(mi, n_rx).receivers:
            return CheckResult("top-k vs exhaustive selection", False, f"mismatch on {mi.tolist()}")
    return CheckResult("top-k vs exhaustive selection", True, "200 random instances agree")


def check_triangulation(rng) -> CheckResult:
    n = int(rng.integers(2, 7))
    anchors = rng.uniform(0, 1000, (n, 2))
    ang = rng.uniform(-np.pi, np.pi, n)
    dirs = np.column_stack([np.cos(ang), np.sin(ang)])
    tri = triangulate(anchors, dirs, eta=1.0, max_iter=100_000, tol=1e-12)
    err = float(np.linalg.norm(tri.q - least_squares_point(anchors, dirs)))
    return CheckResult("gradient triangulation vs least squares", err < 1e-4, f"distance {err:.2e} m")


def check_subproblem_grid(rng) -> CheckResult:
    """M=2, one transmitter, one user: sampled search refined by SLSQP."""
    cfg = ScenarioConfig(n_ap=2, n_rx=1, n_ue=1, m_antennas=2, n_samples=4, grid_side=100)
    for _ in range(INSTANCE_RETRIES):
        sc = generate_scenario(cfg, int(rng.integers(2**31)))
        frame = generate_frame(1, 4, 4, 0)
        ap = ApConfiguration.from_receivers([1], 2)
        quad = build_sensing_quadratic(sc, ap)
        h = sc.stacked_channels(ap.transmitters)
        w0 = crandn(rng, (2, 2)) * np.sqrt(cfg.p_max / 4)
        lin = linearize_objective(quad, w0, frame, cfg.noise_power)
        try:
            sol = solve_ccp_subproblem(lin, h, w0, cfg.gamma_min, cfg.p_max, cfg.noise_power)
        except InfeasibleError:
            continue
        best = search_subproblem(lin, h[0], w0, cfg.gamma_min, cfg.p_max, cfg.noise_power, rng)
        if best is None:
            continue
        gap = (best - sol.objective) / max(abs(best), 1e-12)
        return CheckResult("subproblem vs grid search", gap < 1e-2, f"relative gap {gap:.2e}")
    return CheckResult("subproblem vs grid search", False, "no feasible instance found")


INSTANCE_RETRIES = 20


def search_subproblem(lin, h, w0, gamma, p_max, noise, rng, samples: int = 200_000,
                      refine: int = 10):
    """Maximize the linearized objective of a one-user subproblem without a conic solver.

    Samples precoders uniformly inside the per-row power balls, keeps the best
    feasible ones and polishes them with SLSQP on the real parametrization.
    Returns the best objective found, or None when no sample is feasible.
    """
    from scipy.optimize import minimize

    L, C = w0.shape
    b = h * np.vdot(h, w0[:, 0])
    c = abs(np.vdot(h, w0[:, 0])) ** 2

    def unpack(v):
        return (v[:L * C] + 1j * v[L * C:]).reshape(L, C)

    def cons(w):
        num = 2 * np.real(np.vdot(b, w[:, 0])) - c
        den = np.sum(np.abs(h.conj() @ w[:, 1:]) ** 2) + noise
        return np.concatenate([[num - gamma * den], p_max - np.sum(np.abs(w) ** 2, axis=1)])

    # uniform points in each row's ball (complex dim C -> real dim 2C)
    d = 2 * C
    g = rng.standard_normal((samples, L, d))
    g /= np.linalg.norm(g, axis=2, keepdims=True)
    g *= np.sqrt(p_max) * rng.uniform(size=(samples, L, 1)) ** (1 / d)
    ws = g[..., :C] + 1j * g[..., C:]
    num = 2 * np.real(np.einsum("l,sl->s", b.conj(), ws[:, :, 0])) - c
    den = np.sum(np.abs(np.einsum("l,slc->sc", h.conj(), ws[:, :, 1:])) ** 2, axis=1) + noise
    vals = np.real(np.einsum("lc,slc->s", lin.coef.conj(), ws)) + lin.const
    vals = np.where(num >= gamma * den, vals, -np.inf)
    if not np.isfinite(vals).any():
        return None
    best = float(vals.max())
    for idx in np.argsort(-vals)[:refine]:
        if not np.isfinite(vals[idx]):
            break
        v0 = np.concatenate([ws[idx].real.ravel(), ws[idx].imag.ravel()])
        res = minimize(lambda v: -lin(unpack(v)), v0, method="SLSQP",
                       constraints=[{"type": "ineq", "fun": lambda v: cons(unpack(v))}],
                       options={"ftol": 1e-12, "maxiter": 500})
        if np.all(cons(unpack(res.x)) >= -1e-9 * p_max):
            best = max(best, lin(unpack(res.x)))
    return best


def check_echo_power(rng, draws: int = 10_000) -> CheckResult:
    """Closed-form sensing SINR against the average power of simulated noisy echoes."""
    cfg = profile("desk", m_antennas=4, n_samples=4)
    sc = generate_scenario(cfg, int(rng.integers(2**31)))
    ap = ApConfiguration.from_receivers([0], cfg.n_ap)
    frame = generate_frame(cfg.n_ue, cfg.n_samples, cfg.mod_order, 0)
    w = PrecoderMatrix(w=crandn(rng, (cfg.m_antennas * ap.n_tx, cfg.n_ue + 1)),
                       transmitters=ap.transmitters, m=cfg.m_antennas)
    quad = build_sensing_quadratic(sc, ap)
    # scale to unit SINR so signal and noise carry equal weight in the average
    w = PrecoderMatrix(w=w.w / np.sqrt(sensing_objective(quad, w.w, frame, cfg.noise_power)),
                       transmitters=ap.transmitters, m=cfg.m_antennas)
    closed = sensing_objective(quad, w.w, frame, cfg.noise_power)
    x = transmit_all(w, frame)
    total = 0.0
    for _ in range(draws):
        y = received_sensing_signal(sc, ap, x, int(rng.integers(2**31)))
        total += float(np.sum(np.abs(y) ** 2))
    per_entry = total / (draws * ap.n_rx * frame.n_samples * cfg.m_antennas)
    mc = (per_entry - cfg.noise_power) / cfg.noise_power
    rel = abs(mc - closed) / closed
    return CheckResult("sensing SINR vs simulated echo", rel < 0.02, f"relative error {rel:.2e}")


def check_beampattern(rng) -> CheckResult:
    m = 16
    theta0 = float(rng.uniform(0.2, np.pi - 0.2))
    grid = half_plane_grid(theta0, 0.5)
    x_hat = np.tile(array_response(theta0, m).conj(), (4, 1))
    err = abs(estimate_angle(x_hat, grid) - theta0)
    ok = err <= np.deg2rad(0.5) + 1e-12 and beampattern(x_hat, grid).max() > 0
    return CheckResult("beampattern peak of a steering vector", ok, f"error {np.rad2deg(err):.3f} deg")


def check_ccp(rng, instances: int = 3) -> CheckResult:
    cfg = profile("desk", m_antennas=4, n_samples=8)
    worst_drop, worst_kkt, done = 0.0, 0.0, 0
    for _ in range(instances * 4):
        if done == instances:
            break
        seed = int(rng.integers(2**31))
        sc = generate_scenario(cfg, seed)
        frame = generate_frame(cfg.n_ue, cfg.n_samples, cfg.mod_order, seed)
        ap = ApConfiguration.from_receivers([int(rng.integers(cfg.n_ap))], cfg.n_ap)
        try:
            w, state = optimize_precoder(sc, ap, frame, cfg)
        except InfeasibleError:
            continue
        hist = np.asarray(state.objective_history)
        drops = (hist[:-1] - hist[1:]) / np.maximum(np.abs(hist[:-1]), 1e-300)
        worst_drop = max(worst_drop, float(drops.max(initial=0.0)))
        worst_kkt = max(worst_kkt, max(max(k.values()) for k in state.kkt_history))
        sinr = user_sinrs(w.w, sc.stacked_channels(ap.transmitters), cfg.noise_power)
        if sinr.min() < cfg.gamma_min * 10 ** (-0.001) or w.row_powers.max() > cfg.p_max * 1.0001:
            return CheckResult("CCP ascent and constraints", False, f"constraint violated (seed {seed})")
        done += 1
    ok = done == instances and worst_drop <= 1e-6 and worst_kkt < 1e-6
    return CheckResult("CCP ascent and constraints", ok,
                       f"{done} instances, worst relative drop {worst_drop:.1e}, worst KKT {worst_kkt:.1e}")


CHECKS: list[Callable] = [check_array_norm, check_gamma_mean, check_m_step, check_selection,
                          check_triangulation, check_subproblem_grid, check_echo_power,
                          check_beampattern, check_ccp]


def run_checks(seed: int = 0) -> list[CheckResult]:
    out = []
    for i, check in enumerate(CHECKS):
        rng = np.random.default_rng([seed, i])
        try:
            out.append(check(rng))
        except Exception as exc:  # a crashing check is a failed check
            out.append(CheckResult(check.__name__, False, f"{type(exc).__name__}: {exc}"))
    return out


def all_passed(results) -> bool:
    return all(r.passed for r in results)
