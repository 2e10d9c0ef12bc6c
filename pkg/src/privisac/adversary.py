"""A malicious user locating the sensing target from the downlink.

For every transmitting AP the adversary estimates the transmitted vectors
with an EM algorithm that treats its own channel (and a Student-t scale
variable) as latent, builds the beampattern of the estimates, takes the peak
as the sensing direction, and intersects the resulting lines by gradient
descent on the mean squared point-to-line distance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .config import ScenarioConfig
from .scenario import STREAM_ATTACK, Scenario, array_response, crandn, rng_for
from .signals import PrecoderMatrix, SymbolFrame, transmit_all

ADVERSARY = 0


def observe_per_ap(scenario: Scenario, x_j: np.ndarray, ap: int, adversary: int = ADVERSARY,
                   rng: np.random.Generator | None = None, noise: bool = True) -> np.ndarray:
    """Samples ``h_{j,a,k}^H x_j[n] + noise`` at every adversary antenna, shape ``(K, n)``."""
    h = scenario.h[ap, adversary]  # (K, m)
    y = h.conj() @ x_j
    if noise:
        y = y + crandn(rng, y.shape, scenario.config.noise_power)
    return y


def noisy_channel_estimate(h: np.ndarray, sigma_h2: float, rng: np.random.Generator) -> np.ndarray:
    """``h`` plus CN(0, sigma_h2 I) estimation error."""
    if sigma_h2 == 0:
        return np.array(h, copy=True)
    return h + crandn(rng, np.shape(h), sigma_h2)


class EStep(NamedTuple):
    e_h: np.ndarray
    omega_h: np.ndarray
    e_u: np.ndarray


def em_e_step(y, x_hat, h_hat, e_u_prev, nu: float, sigma_n2: float, sigma_h2: float) -> EStep:
    """Variational posterior of the channels and of the scale variable.

    Works on a batch of samples: ``y`` is ``(n, K)``, ``x_hat`` ``(n, m)``,
    ``h_hat`` ``(K, m)`` and ``e_u_prev`` ``(n,)``. Each antenna has its own
    Gaussian channel posterior; they share the covariance
    ``(I/sigma_h2 + x x^H e_u/sigma_n2)^-1``. The scale variable has a
    Gamma((nu + 2K)/2, (nu + C)/2) posterior (shape, rate).
    """
    y = np.atleast_2d(y)
    x = np.atleast_2d(x_hat)
    e_u_prev = np.atleast_1d(np.asarray(e_u_prev, dtype=float))
    n, m = x.shape
    K = h_hat.shape[0]
    c = e_u_prev / sigma_n2
    xx = np.real(np.einsum("nm,nm->n", x.conj(), x))
    # Sherman-Morrison form of the posterior covariance
    t = sigma_h2 * c / (1.0 + sigma_h2 * c * xx)  # (n,)
    outer = x[:, :, None] * x[:, None, :].conj()
    omega = sigma_h2 * (np.eye(m)[None] - t[:, None, None] * outer)
    # e_h,k = h_hat_k + t x conj(y_k - h_hat_k^H x)
    pred = np.einsum("km,nm->nk", h_hat.conj(), x)  # h_hat_k^H x
    e_h = h_hat[None] + t[:, None, None] * np.conj(y - pred)[:, :, None] * x[:, None, :]
    resid = y - np.einsum("nkm,nm->nk", e_h.conj(), x)
    quad = np.real(np.einsum("nm,nml,nl->n", x.conj(), omega, x))
    C = (np.sum(np.abs(resid) ** 2, axis=1) + K * m * quad) / sigma_n2
    e_u = (nu + 2 * K) / (nu + C)
    return EStep(e_h, omega, e_u)


def em_objective(x, y, e_h, omega, m: int) -> np.ndarray:
    """sum_k |y_k - e_k^H x|^2 + K m x^H Omega x for a batch of samples."""
    x = np.atleast_2d(x)
    K = e_h.shape[1]
    resid = np.atleast_2d(y) - np.einsum("nkm,nm->nk", e_h.conj(), x)
    quad = np.real(np.einsum("nm,nml,nl->n", x.conj(), omega, x))
    return np.sum(np.abs(resid) ** 2, axis=1) + K * m * quad


def em_m_step(y, e_h, omega, m: int) -> np.ndarray:
    """Minimizer of :func:`em_objective`, from its normal equations.

    ``(sum_k e_k e_k^H + K m Omega) x = sum_k e_k y_k``; the minimum-norm
    solution is returned when the system is singular (zero channel-error
    variance with fewer antennas than ``m``).
    """
    y = np.atleast_2d(y)
    K = e_h.shape[1]
    gram = np.einsum("nkm,nkl->nml", e_h, e_h.conj()) + K * m * omega
    rhs = np.einsum("nkm,nk->nm", e_h, y)
    try:
        cond_ok = np.all(np.linalg.cond(gram) < 1e14)
    except np.linalg.LinAlgError:
        cond_ok = False
    if cond_ok:
        return np.linalg.solve(gram, rhs[..., None])[..., 0]
    return np.stack([np.linalg.lstsq(g, r, rcond=None)[0] for g, r in zip(gram, rhs)])


@dataclass
class EmResult:
    x_hat: np.ndarray  # (n, m)
    iterations: np.ndarray  # per sample
    converged: np.ndarray
    e_u: np.ndarray
    objective_history: list = field(default_factory=list)


def em_estimate_signal(y: np.ndarray, h_hat: np.ndarray, sigma_n2: float, sigma_h2: float,
                       nu: float, max_iter: int = 100, tol: float = 1e-10,
                       rng: np.random.Generator | None = None,
                       e_u_init: np.ndarray | None = None) -> EmResult:
    """Run EM independently for every sample.

    ``y`` is ``(K, n)``. Each sample stops once the squared change of its
    estimate drops below ``tol``; the rest keep iterating up to ``max_iter``.
    """
    y = np.asarray(y).T  # (n, K)
    n = y.shape[0]
    m = h_hat.shape[1]
    if e_u_init is None:
        rng = rng or np.random.default_rng()
        e_u_init = rng.uniform(0.5, 1.5, size=n)
    e_u = np.array(e_u_init, dtype=float)
    x = np.zeros((n, m), dtype=complex)
    active = np.ones(n, dtype=bool)
    iters = np.zeros(n, dtype=int)
    history = []
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        est = em_e_step(y[idx], x[idx], h_hat, e_u[idx], nu, sigma_n2, sigma_h2)
        x_new = em_m_step(y[idx], est.e_h, est.omega_h, m)
        history.append(em_objective(x_new, y[idx], est.e_h, est.omega_h, m))
        change = np.sum(np.abs(x_new - x[idx]) ** 2, axis=1)
        x[idx] = x_new
        e_u[idx] = est.e_u
        iters[idx] += 1
        active[idx[change < tol]] = False
    return EmResult(x_hat=x, iterations=iters, converged=~active, e_u=e_u,
                    objective_history=history)


def half_plane_grid(theta_true: float, step_deg: float = 0.5) -> np.ndarray:
    """Search angles over the half-plane (upper or lower) holding ``theta_true``.

    A linear array along the x-axis cannot tell theta from -theta, so the
    adversary's knowledge of the half-plane is what makes the sweep unique.
    """
    grid = np.deg2rad(np.arange(0.0, 180.0 + step_deg / 2, step_deg))
    return grid if np.sin(theta_true) >= 0 else -grid[::-1]


def beampattern(x_hat: np.ndarray, theta_grid: np.ndarray) -> np.ndarray:
    """Radiated power ``a(theta)^T R a(theta)^*`` of the sample covariance of ``x_hat``."""
    x_hat = np.atleast_2d(x_hat)
    a = array_response(theta_grid, x_hat.shape[1])  # (g, m)
    # a^T x for every grid angle and sample
    proj = a @ x_hat.T
    return np.mean(np.abs(proj) ** 2, axis=1)


def estimate_angle(x_hat: np.ndarray, theta_grid: np.ndarray) -> float:
    """Grid angle of the beampattern peak; near-ties go to the lowest angle."""
    pattern = beampattern(x_hat, theta_grid)
    peak = pattern.max()
    idx = int(np.flatnonzero(pattern >= peak * (1 - 1e-12))[0])
    return float(theta_grid[idx])


@dataclass
class Triangulation:
    q: np.ndarray
    iterations: int
    converged: bool
    mse_history: list
    path_length: float

    @property
    def mse_monotone(self) -> bool:
        h = np.asarray(self.mse_history)
        return bool(np.all(np.diff(h) <= 1e-12 * np.maximum(h[:-1], 1.0)))


def line_mse(q, anchors, directions) -> float:
    d = q - anchors
    along = np.sum(d * directions, axis=1)
    resid = d - along[:, None] * directions
    return float(np.mean(np.sum(resid ** 2, axis=1)))


def triangulate(anchors, directions, eta: float = 1.0, max_iter: int = 10_000,
                tol: float = 1e-6, q0=None) -> Triangulation:
    """Gradient descent on the mean squared distance from ``q`` to a set of lines.

    The closest point of line ``i`` to ``q`` is its orthogonal projection, so
    the gradient is ``(2/N_l) sum_i (q - y_i)``. Starts at the anchor centroid.
    """
    anchors = np.asarray(anchors, dtype=float)
    directions = np.asarray(directions, dtype=float)
    directions = directions / np.linalg.norm(directions, axis=1, keepdims=True)
    if anchors.shape[0] < 2:
        raise ValueError("triangulation needs at least two lines")
    q = anchors.mean(axis=0) if q0 is None else np.asarray(q0, dtype=float)
    n_l = anchors.shape[0]
    history = [line_mse(q, anchors, directions)]
    path = 0.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        d = q - anchors
        resid = d - np.sum(d * directions, axis=1)[:, None] * directions  # q - y_i
        grad = 2.0 / n_l * resid.sum(axis=0)
        if np.linalg.norm(grad) < tol:
            converged = True
            it -= 1
            break
        step = eta * grad
        q = q - step
        path += float(np.linalg.norm(step))
        history.append(line_mse(q, anchors, directions))
    return Triangulation(q=q, iterations=it, converged=converged, mse_history=history,
                         path_length=path)


def least_squares_point(anchors, directions) -> np.ndarray:
    """Closed-form minimizer of the summed squared point-to-line distances."""
    anchors = np.asarray(anchors, dtype=float)
    directions = np.asarray(directions, dtype=float)
    directions = directions / np.linalg.norm(directions, axis=1, keepdims=True)
    proj = np.eye(2)[None] - directions[:, :, None] * directions[:, None, :]
    return np.linalg.solve(proj.sum(axis=0), np.einsum("nij,nj->i", proj, anchors))


@dataclass
class AttackResult:
    aps: tuple
    angle_estimates: np.ndarray
    true_angles: np.ndarray
    anchors: np.ndarray
    directions: np.ndarray
    q_hat: np.ndarray
    target: np.ndarray
    detected: bool
    gd_iterations: int
    mse_monotone: bool
    final_mse: float
    path_length: float
    em_iterations: list = field(default_factory=list)

    @property
    def error(self) -> float:
        return float(np.linalg.norm(self.q_hat - self.target))

    def to_dict(self) -> dict:
        err = np.angle(np.exp(1j * (self.angle_estimates - self.true_angles)))
        return {
            "aps": list(self.aps),
            "angle_error_deg": np.rad2deg(err).tolist(),
            "q_hat": self.q_hat.tolist(),
            "error_m": self.error,
            "detected": self.detected,
            "gd_iterations": self.gd_iterations,
            "gd_path_length": self.path_length,
            "final_mse": self.final_mse,
        }


def run_attack(scenario: Scenario, w: PrecoderMatrix, frame: SymbolFrame,
               config: ScenarioConfig | None = None, seed: int | None = None,
               adversary: int = ADVERSARY, oracle: bool = False) -> AttackResult:
    """End-to-end attack against the transmitters of ``w``.

    Random draws are keyed by AP index, so two precoders sharing an AP see
    the same channel-estimation error, noise and EM initialization there.
    ``oracle=True`` skips the EM stage and sweeps the true transmit signals.
    """
    cfg = config or scenario.config
    seed = scenario.seed if seed is None else seed
    x_all = transmit_all(w, frame)
    theta_true = scenario.theta_ap
    angles, em_iters = [], []
    for b, j in enumerate(w.transmitters):
        if oracle:
            x_hat = x_all[b].T
        else:
            y = observe_per_ap(scenario, x_all[b], j, adversary, rng_for(seed, STREAM_ATTACK, j, 0))
            err_var = cfg.sigma_h2 * scenario.beta_ue[j, adversary]
            h_hat = noisy_channel_estimate(scenario.h[j, adversary], err_var,
                                           rng_for(seed, STREAM_ATTACK, j, 1))
            em = em_estimate_signal(y, h_hat, cfg.noise_power, err_var, cfg.nu, cfg.em_max_iter,
                                    cfg.em_tol, rng_for(seed, STREAM_ATTACK, j, 2))
            x_hat = em.x_hat
            em_iters.append(int(em.iterations.max()))
        grid = half_plane_grid(theta_true[j], cfg.angle_step_deg)
        angles.append(estimate_angle(x_hat, grid))
    angles = np.array(angles)
    anchors = scenario.ap_positions[list(w.transmitters)]
    directions = np.column_stack([np.cos(angles), np.sin(angles)])
    target = scenario.target_position
    if len(angles) >= 2:
        tri = triangulate(anchors, directions, cfg.eta, cfg.gd_max_iter, cfg.gd_tol)
        q_hat, gd_it, mono = tri.q, tri.iterations, tri.mse_monotone
        final_mse, path = tri.mse_history[-1], tri.path_length
    else:
        q_hat, gd_it, mono, final_mse, path = np.full(2, np.nan), 0, True, np.nan, 0.0
    detected = bool(np.linalg.norm(q_hat - target) <= cfg.r_gd)
    return AttackResult(aps=tuple(w.transmitters), angle_estimates=angles,
                        true_angles=theta_true[list(w.transmitters)], anchors=anchors,
                        directions=directions, q_hat=q_hat, target=target, detected=detected,
                        gd_iterations=gd_it, mse_monotone=mono, final_mse=final_mse,
                        path_length=path, em_iterations=em_iters)
