"""Sensing-SINR maximization under user-SINR and per-antenna power constraints.

The nonconvex objective is handled with the concave-convex procedure: at
every step the quadratic sensing objective is replaced by its first-order
expansion around the previous precoder, the user-SINR numerators likewise,
and the resulting convex program (a second-order-cone program) is solved
with an interior-point method.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np

from .config import ScenarioConfig
from .errors import InfeasibleError, MaxIterationsError
from .scenario import (STREAM_PRECODER_INIT, ApConfiguration, Scenario, array_response, crandn,
                       rng_for, sensing_geometry)
from .signals import PrecoderMatrix, SymbolFrame, user_sinrs

log = logging.getLogger(__name__)

INIT_RETRIES = 5
SOLVER_OPTIONS: dict = {"max_iter": 200}


@dataclass(frozen=True, eq=False)
class SensingQuadratic:
    """The receiver matrices A_r in factored form.

    Every A_r equals ``scale * v_r v_r^H``: block ``j`` of ``v_r`` is
    ``sqrt(beta_jr) * conj(alpha_jr) * conj(a(theta_j))`` and ``scale`` is
    ``||a(theta_r)||^2 = m``.
    """

    v: np.ndarray  # (n_rx, m * n_tx)
    m: int

    @property
    def scale(self) -> float:
        return float(self.m)

    @property
    def n_rx(self) -> int:
        return self.v.shape[0]

    @property
    def a_r(self) -> np.ndarray:
        """Dense A_r matrices, shape ``(n_rx, L, L)``."""
        return self.scale * self.v[:, :, None] * self.v[:, None, :].conj()

    def block(self, r: int, j: int, m_: int) -> np.ndarray:
        """A_{j,m} of receiver ``r`` (block indices, not AP indices)."""
        vj = self.v[r, j * self.m:(j + 1) * self.m]
        vm = self.v[r, m_ * self.m:(m_ + 1) * self.m]
        return self.scale * np.outer(vj, vm.conj())


def build_sensing_quadratic(scenario: Scenario, ap_config: ApConfiguration) -> SensingQuadratic:
    m = scenario.config.m_antennas
    geo = sensing_geometry(scenario, ap_config)
    a_tx = array_response(geo.theta_tx, m)  # (n_tx, m)
    coef = np.sqrt(geo.beta_tr) * geo.alpha.conj()  # (n_tx, n_rx)
    v = (coef.T[:, :, None] * a_tx.conj()[None, :, :]).reshape(ap_config.n_rx, -1)
    return SensingQuadratic(v=v, m=m)


def sensing_objective(quadratic: SensingQuadratic, w: np.ndarray, frame: SymbolFrame,
                      noise_power: float) -> float:
    """sum_r sum_n s[n]^H W^H A_r W s[n] / (n_rx * n * m * sigma^2)."""
    z = quadratic.v.conj() @ (w @ frame.symbols)  # v_r^H W s[n], (n_rx, n)
    total = quadratic.scale * np.sum(np.abs(z) ** 2)
    return float(total / (quadratic.n_rx * frame.n_samples * quadratic.m * noise_power))


@dataclass(frozen=True, eq=False)
class LinearizedObjective:
    """Affine minorant ``Re<coef, W> + const`` of the sensing SINR at ``anchor``."""

    coef: np.ndarray
    const: float
    anchor: np.ndarray

    def __call__(self, w: np.ndarray) -> float:
        return float(np.real(np.vdot(self.coef, w)) + self.const)


def linearize_objective(quadratic: SensingQuadratic, w_prev: np.ndarray, frame: SymbolFrame,
                        noise_power: float) -> LinearizedObjective:
    kappa = quadratic.n_rx * frame.n_samples * quadratic.m * noise_power
    s_cov = frame.covariance
    # sum_r A_r W_prev S, using the factored A_r
    g = quadratic.scale * quadratic.v.T @ (quadratic.v.conj() @ w_prev @ s_cov)
    g = g / kappa
    value = float(np.real(np.vdot(g, w_prev)))
    return LinearizedObjective(coef=2.0 * g, const=-value, anchor=w_prev)


@dataclass
class SubproblemSolution:
    w: np.ndarray
    tau_n: np.ndarray
    tau_d: np.ndarray
    objective: float
    kkt: dict
    status: str


class _Subproblem:
    """Compiled parametric SOCP for one problem size.

    Everything is expressed in normalized units: W is divided by sqrt(P_max),
    user constraint ``i`` is divided by ``||h_i||^2 P_max / sigma^2`` so its
    channel parameter has unit norm.
    """

    def __init__(self, length: int, n_ue: int):
        self.length, self.n_ue = length, n_ue
        L, U = length, n_ue
        # real and imaginary parts kept separate: cvxpy only caches the
        # compiled program for real-valued parameters
        self.Wr = cp.Variable((L, U + 1))
        self.Wi = cp.Variable((L, U + 1))
        # cvxpy rejects zero-length variables; sensing-only problems get dummies
        self.tau_n = cp.Variable(max(U, 1))
        self.tau_d = cp.Variable(max(U, 1))
        self.obj_r = cp.Parameter((L, U + 1))
        self.obj_i = cp.Parameter((L, U + 1))
        self.gamma = cp.Parameter(nonneg=True)
        self.h_r = [cp.Parameter(L) for _ in range(U)]
        self.h_i = [cp.Parameter(L) for _ in range(U)]
        self.b_r = [cp.Parameter(L) for _ in range(U)]
        self.b_i = [cp.Parameter(L) for _ in range(U)]
        self.c = cp.Parameter(max(U, 1))
        self.noise = cp.Parameter(max(U, 1), nonneg=True)

        self.num_cons, self.den_cons, self.ratio_cons = [], [], []
        for i in range(U):
            others = [k for k in range(U + 1) if k != i]
            lin_num = 2 * (self.b_r[i] @ self.Wr[:, i] + self.b_i[i] @ self.Wi[:, i]) - self.c[i]
            # h^H w split into real and imaginary parts
            re = self.h_r[i] @ self.Wr[:, others] + self.h_i[i] @ self.Wi[:, others]
            im = self.h_r[i] @ self.Wi[:, others] - self.h_i[i] @ self.Wr[:, others]
            self.num_cons.append(self.tau_n[i] <= lin_num)
            self.den_cons.append(cp.sum_squares(cp.hstack([re, im])) + self.noise[i] <= self.tau_d[i])
            self.ratio_cons.append(self.gamma * self.tau_d[i] <= self.tau_n[i])
        self.pow_cons = cp.norm(cp.hstack([self.Wr, self.Wi]), 2, axis=1) <= 1
        objective = cp.Maximize(cp.sum(cp.multiply(self.obj_r, self.Wr) + cp.multiply(self.obj_i, self.Wi)))
        self.problem = cp.Problem(objective, self.num_cons + self.den_cons + self.ratio_cons
                                  + [self.pow_cons])

    def set_values(self, obj, gamma, h, b, c, noise) -> None:
        self.obj_r.value, self.obj_i.value = obj.real, obj.imag
        self.gamma.value = float(gamma)
        for i in range(self.n_ue):
            self.h_r[i].value, self.h_i[i].value = h[i].real, h[i].imag
            self.b_r[i].value, self.b_i[i].value = b[i].real, b[i].imag
        pad = max(self.n_ue, 1) - self.n_ue
        self.c.value = np.concatenate([np.asarray(c, dtype=float), np.zeros(pad)])
        self.noise.value = np.concatenate([np.asarray(noise, dtype=float), np.zeros(pad)])

    @property
    def w(self):
        if self.Wr.value is None:
            return None
        return self.Wr.value + 1j * self.Wi.value


_CACHE: dict = {}


def _subproblem(length: int, n_ue: int) -> _Subproblem:
    key = (length, n_ue)
    if key not in _CACHE:
        sp = _Subproblem(length, n_ue)
        # The first solve canonicalizes the problem and rounds differently
        # from later solves that reuse the compiled form. A throwaway solve
        # makes results independent of what ran earlier in the process.
        e = np.zeros(length, dtype=complex)
        e[0] = 1.0
        sp.set_values(np.ones((length, n_ue + 1)), 1.0, [e] * n_ue, [e] * n_ue,
                      np.zeros(n_ue), np.ones(n_ue))
        try:
            sp.problem.solve(solver=cp.CLARABEL, **SOLVER_OPTIONS)
        except cp.error.SolverError:
            pass
        _CACHE[key] = sp
    return _CACHE[key]


def kkt_residuals(obj, h, b, c, noise, gamma, w, tau_n, tau_d, lam_num, lam_den, lam_ratio,
                  mu_row) -> dict:
    """Relative KKT residuals of the normalized subproblem.

    Multipliers follow ``L = -Re<obj, W> + sum lam * g(W)`` with constraints
    written as ``g <= 0``; ``mu_row`` multiplies ``||row||^2 - 1``.
    All gradients are with respect to conj(W), doubled.
    """
    U = len(h)
    grad = -obj.copy()
    num_g, den_g, rat_g = [], [], []
    for i in range(U):
        others = [k for k in range(U + 1) if k != i]
        gi = h[i].conj() @ w
        grad[:, i] += -2.0 * lam_num[i] * b[i]
        grad[:, others] += 2.0 * lam_den[i] * np.outer(h[i], gi[others])
        num_g.append(tau_n[i] - (2 * np.real(np.vdot(b[i], w[:, i])) - c[i]))
        den_g.append(np.sum(np.abs(gi[others]) ** 2) + noise[i] - tau_d[i])
        rat_g.append(gamma * tau_d[i] - tau_n[i])
    grad += 2.0 * mu_row[:, None] * w
    row_g = np.sum(np.abs(w) ** 2, axis=1) - 1.0
    scale = max(np.linalg.norm(obj), 1e-300)
    slack_stat = np.concatenate([lam_num - lam_ratio, -lam_den + gamma * lam_ratio])
    g_all = np.concatenate([num_g, den_g, rat_g, row_g])
    lam_all = np.concatenate([lam_num, lam_den, lam_ratio, mu_row])
    # constraint values are O(1) in normalized units; complementarity is
    # measured against the objective scale
    obj_val = abs(np.real(np.vdot(obj, w))) + 1.0
    mag = np.concatenate([np.abs(tau_n) + 1, np.abs(tau_d) + 1, np.abs(tau_n) + 1, np.ones_like(row_g)])
    return {
        "stationarity": float(max(np.linalg.norm(grad), np.linalg.norm(slack_stat)) / scale),
        "primal": float(max(0.0, np.max(g_all / mag))),
        "dual": float(max(0.0, -np.min(lam_all)) / scale),
        "complementarity": float(np.max(np.abs(lam_all * g_all)) / obj_val),
    }


def _polish(obj, h, b, c, noise, gamma, mu0, lam0, active_tol: float = 1e-9,
            max_newton: int = 20):
    """Newton refinement of an interior-point solution on its active set.

    Interior-point iterates are accurate to roughly the square root of the
    duality gap along the curved power constraints. Given multipliers, the
    stationarity equations are linear in the precoder: column ``c`` solves
    ``(diag(mu) + gamma sum_{i != c} lam_i h_i h_i^H) w_c = obj_c / 2 + lam_c b_c``.
    Eliminating the precoder this way leaves the active power and user
    constraints as a small square system in ``(mu, lam)``, solved by Newton's
    method from the solver's multipliers. Rows and users whose multiplier is
    below ``active_tol`` (relative) are held at zero. Returns
    ``(w, mu, lam)`` or None when the refinement does not converge.
    """
    U, L = len(h), mu0.size
    H = np.reshape(np.array(h, dtype=complex), (U, L))
    B = np.reshape(np.array(b, dtype=complex), (U, L))
    rows_on = np.flatnonzero(mu0 > active_tol * max(mu0.max(initial=0.0), 1.0))
    on = np.flatnonzero(lam0 > active_tol * max(lam0.max(initial=0.0), 1.0))
    mu = np.zeros(L)
    mu[rows_on] = mu0[rows_on]
    lam = np.zeros(U)
    lam[on] = lam0[on]
    n_r = rows_on.size

    for _ in range(max_newton):
        w = np.empty((L, U + 1), dtype=complex)
        inv = []
        try:
            for col in range(U + 1):
                weights = gamma * np.where(np.arange(U) == col, 0.0, lam)
                a_inv = np.linalg.inv(np.diag(mu).astype(complex) + (H.T * weights) @ H.conj())
                rhs = obj[:, col] / 2 + (lam[col] * B[col] if col < U else 0.0)
                w[:, col] = a_inv @ rhs
                inv.append(a_inv)
        except np.linalg.LinAlgError:
            return None
        g = H.conj() @ w  # g[i, k] = h_i^H w_k
        rows = np.sum(np.abs(w) ** 2, axis=1) - 1.0
        users = np.array([2 * np.real(np.vdot(B[i], w[:, i])) - c[i]
                          - gamma * (np.sum(np.abs(g[i]) ** 2) - abs(g[i, i]) ** 2 + noise[i])
                          for i in on])
        f = np.concatenate([rows[rows_on], users])
        if np.max(np.abs(f), initial=0.0) < 1e-13:
            # inactive rows and users must still be feasible
            if np.all(rows <= 1e-12) and np.all(
                    [2 * np.real(np.vdot(B[i], w[:, i])) - c[i]
                     >= gamma * (np.sum(np.abs(g[i]) ** 2) - abs(g[i, i]) ** 2 + noise[i]) - 1e-12
                     for i in range(U)]):
                return w, mu, lam
            return None
        # derivatives of every column with respect to the active mu_j and lam_i
        d_mu = [-inv[col][:, rows_on] * w[rows_on, col][None, :] for col in range(U + 1)]
        d_lam = np.zeros((U + 1, L, on.size), dtype=complex)
        for col in range(U + 1):
            for t, i in enumerate(on):
                v = B[col] if i == col else -gamma * H[i] * g[i, col]
                d_lam[col, :, t] = inv[col] @ v
        jac = np.zeros((n_r + on.size, n_r + on.size))
        for col in range(U + 1):
            wc = w[rows_on, col].conj()[:, None]
            jac[:n_r, :n_r] += 2 * np.real(wc * d_mu[col][rows_on])
            jac[:n_r, n_r:] += 2 * np.real(wc * d_lam[col][rows_on])
        for r, i in enumerate(on):
            for col in range(U + 1):
                if col == i:
                    coef_mu, coef_lam = 2 * B[i].conj() @ d_mu[col], 2 * B[i].conj() @ d_lam[col]
                else:
                    s_ = -2 * gamma * np.conj(g[i, col])
                    coef_mu = s_ * (H[i].conj() @ d_mu[col])
                    coef_lam = s_ * (H[i].conj() @ d_lam[col])
                jac[n_r + r, :n_r] += np.real(coef_mu)
                jac[n_r + r, n_r:] += np.real(coef_lam)
        try:
            step = np.linalg.solve(jac, f)
        except np.linalg.LinAlgError:
            return None
        mu[rows_on] -= step[:n_r]
        lam[on] -= step[n_r:]
        if not (np.all(np.isfinite(mu)) and np.all(mu[rows_on] > 0) and np.all(lam >= 0)):
            return None
    return None


def solve_ccp_subproblem(lin: LinearizedObjective, h: np.ndarray, w_prev: np.ndarray,
                         gamma_min: float, p_max: float, noise_power: float,
                         tol: float = 1e-10) -> SubproblemSolution:
    """One convex step: maximize the linearized sensing SINR.

    Constraints per user ``i``: the linearized received power
    ``|h_i^H w_i|^2`` around ``w_prev`` is at least ``tau_n``, interference
    plus noise is at most ``tau_d``, and ``tau_n >= gamma_min * tau_d``;
    every row of W has squared norm at most ``p_max``.

    ``h`` holds the concatenated channels ``(n_ue, L)``. Raises
    InfeasibleError when no precoder satisfies the constraints.
    """
    n_ue, L = h.shape
    sp = _subproblem(L, n_ue)
    sqrt_p = np.sqrt(p_max)
    # normalized quantities
    obj = lin.coef * sqrt_p
    obj_scale = np.max(np.abs(obj))
    if obj_scale == 0:
        obj_scale = 1.0
    obj = obj / obj_scale
    wn_prev = w_prev / sqrt_p
    hn, bn, cn, noise = [], [], [], np.empty(n_ue)
    rho = np.empty(n_ue)
    for i in range(n_ue):
        hs = h[i] * sqrt_p / np.sqrt(noise_power)  # SNR-normalized channel
        rho[i] = np.vdot(hs, hs).real
        hu = hs / np.sqrt(rho[i])
        ci = np.vdot(hu, wn_prev[:, i])
        hn.append(hu)
        bn.append(hu * ci)
        cn.append(abs(ci) ** 2)
        noise[i] = 1.0 / rho[i]
    sp.set_values(obj, gamma_min, hn, bn, cn, noise)
    try:
        sp.problem.solve(solver=cp.CLARABEL, tol_gap_abs=tol, tol_gap_rel=tol, tol_feas=tol,
                         **SOLVER_OPTIONS)
    except cp.error.SolverError as exc:
        raise MaxIterationsError(f"subproblem solver failed: {exc}") from exc
    status = sp.problem.status
    if status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
        raise InfeasibleError("user-SINR targets cannot be met at this power budget")
    if status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or sp.w is None:
        raise MaxIterationsError(f"subproblem solver stopped with status {status}")

    wn = sp.w
    if n_ue:
        tau_n, tau_d = sp.tau_n.value, sp.tau_d.value
    else:
        tau_n = tau_d = np.zeros(0)
    lam_num = np.array([c.dual_value for c in sp.num_cons], dtype=float).ravel()
    lam_den = np.array([c.dual_value for c in sp.den_cons], dtype=float).ravel()
    lam_ratio = np.array([c.dual_value for c in sp.ratio_cons], dtype=float).ravel()
    # the norm constraint's multiplier maps to the squared-norm form by 1/(2||row||)
    mu_norm = np.asarray(sp.pow_cons.dual_value, dtype=float).ravel()
    row_norm = np.linalg.norm(wn, axis=1)
    mu_row = np.where(row_norm > 0, mu_norm / (2 * np.maximum(row_norm, 1e-300)), 0.0)
    cn = np.array(cn)
    kkt = kkt_residuals(obj, hn, bn, cn, noise, gamma_min, wn, tau_n, tau_d,
                        lam_num, lam_den, lam_ratio, mu_row)
    # a nearly inactive user constraint may belong to either active set
    for active_tol in (1e-9, 1e-5):
        polished = _polish(obj, hn, bn, cn, noise, gamma_min, mu_row, lam_ratio, active_tol)
        if polished is None:
            continue
        wp, mu_p, lam_p = polished
        g = np.reshape(np.array(hn, dtype=complex), (n_ue, L)).conj() @ wp
        tau_dp = np.sum(np.abs(g) ** 2, axis=1) - np.abs(np.diag(g[:, :n_ue])) ** 2 + noise
        tau_np = np.array([2 * np.real(np.vdot(bn[i], wp[:, i])) - cn[i] for i in range(n_ue)])
        kkt_p = kkt_residuals(obj, hn, bn, cn, noise, gamma_min, wp, tau_np, tau_dp,
                              lam_p, gamma_min * lam_p, lam_p, mu_p)
        if max(kkt_p.values()) < max(kkt.values()):
            wn, tau_n, tau_d, kkt = wp, tau_np, tau_dp, kkt_p
            row_norm = np.linalg.norm(wn, axis=1)
            break

    # clip solver round-off above the power bound
    wn = wn / np.maximum(row_norm, 1.0)[:, None]
    w = wn * sqrt_p
    return SubproblemSolution(w=w, tau_n=tau_n * rho, tau_d=tau_d * rho,
                              objective=lin(w), kkt=kkt, status=status)


@dataclass
class CcpState:
    w_prev: PrecoderMatrix | None = None
    iteration: int = 0
    objective_history: list = field(default_factory=list)
    kkt_history: list = field(default_factory=list)
    status: str = "running"
    restarts: int = 0

    def to_dict(self) -> dict:
        return {"iteration": self.iteration, "status": self.status, "restarts": self.restarts,
                "objective_history": list(map(float, self.objective_history)),
                "kkt_history": self.kkt_history}


def random_precoder(rng, length: int, n_cols: int, p_max: float) -> np.ndarray:
    """Gaussian start scaled so the strongest row sits 3 dB under the budget."""
    w = crandn(rng, (length, n_cols))
    peak = np.max(np.sum(np.abs(w) ** 2, axis=1))
    return w * np.sqrt(0.5 * p_max / peak)


def optimize_precoder(scenario: Scenario, ap_config: ApConfiguration, frame: SymbolFrame,
                      config: ScenarioConfig | None = None, seed: int | None = None,
                      w_init: np.ndarray | None = None) -> tuple[PrecoderMatrix, CcpState]:
    """Run the concave-convex procedure for a fixed AP configuration.

    Stops when consecutive sensing SINRs differ by less than ``ccp_tol`` or
    after ``ccp_max_iter`` convex steps. Raises InfeasibleError when the
    first step is infeasible from ``INIT_RETRIES`` random starts.
    """
    cfg = config or scenario.config
    seed = scenario.seed if seed is None else seed
    quad = build_sensing_quadratic(scenario, ap_config)
    h = scenario.stacked_channels(ap_config.transmitters)
    L = cfg.m_antennas * ap_config.n_tx
    sigma2 = cfg.noise_power
    state = CcpState()
    rng = rng_for(seed, STREAM_PRECODER_INIT, *ap_config.receivers, ap_config.n_tx)

    w_prev = w_init
    for attempt in range(INIT_RETRIES):
        if w_prev is None:
            w_prev = random_precoder(rng, L, cfg.n_ue + 1, cfg.p_max)
        lin = linearize_objective(quad, w_prev, frame, sigma2)
        try:
            sol = solve_ccp_subproblem(lin, h, w_prev, cfg.gamma_min, cfg.p_max, sigma2,
                                       cfg.solver_tol)
            break
        except (InfeasibleError, MaxIterationsError) as exc:
            log.debug("CCP start %d failed: %s", attempt, exc)
            state.restarts += 1
            w_prev = None
    else:
        state.status = "infeasible"
        raise InfeasibleError(f"no feasible precoder after {INIT_RETRIES} random starts")

    w = sol.w
    state.iteration = 1
    state.objective_history.append(sensing_objective(quad, w, frame, sigma2))
    state.kkt_history.append(sol.kkt)
    state.status = "iter_cap"
    while state.iteration < cfg.ccp_max_iter:
        lin = linearize_objective(quad, w, frame, sigma2)
        try:
            sol = solve_ccp_subproblem(lin, h, w, cfg.gamma_min, cfg.p_max, sigma2, cfg.solver_tol)
        except (InfeasibleError, MaxIterationsError) as exc:
            # the previous iterate stays feasible, so keep it
            log.warning("CCP step %d failed (%s); keeping previous iterate", state.iteration, exc)
            state.status = "solver_stall"
            break
        state.iteration += 1
        gamma_s = sensing_objective(quad, sol.w, frame, sigma2)
        state.kkt_history.append(sol.kkt)
        w = sol.w
        state.objective_history.append(gamma_s)
        if abs(gamma_s - state.objective_history[-2]) < cfg.ccp_tol:
            state.status = "converged"
            break
    result = PrecoderMatrix(w=w, transmitters=ap_config.transmitters, m=cfg.m_antennas)
    state.w_prev = result
    return result, state


def constraint_report(w: PrecoderMatrix, scenario: Scenario) -> dict:
    """Minimum user SINR and peak per-antenna power of a precoder."""
    cfg = scenario.config
    h = scenario.stacked_channels(w.transmitters)
    sinr = user_sinrs(w.w, h, cfg.noise_power)
    return {"min_user_sinr": float(np.min(sinr)), "max_row_power": float(np.max(w.row_powers)),
            "user_sinr": sinr.tolist()}
