import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import echo_loop, sensing_sinr_dense, transmit_loop, user_sample_loop, user_sinr_loop
from privisac.config import ScenarioConfig, profile
from privisac.errors import ConfigurationError
from privisac.scenario import ApConfiguration, crandn, generate_scenario, sensing_geometry
from privisac.signals import (PrecoderMatrix, SymbolFrame, generate_frame, qam_constellation,
                              received_sensing_signal, received_user_signal, sensing_sinr,
                              transmit_all, transmit_signal, user_sinr)


def test_qpsk_points():
    pts = qam_constellation(4)
    expected = np.array([-1 - 1j, -1 + 1j, 1 - 1j, 1 + 1j]) / np.sqrt(2)
    assert np.allclose(np.sort_complex(pts), np.sort_complex(expected))


def test_16qam_unit_power_and_distinct():
    pts = qam_constellation(16)
    assert len(np.unique(np.round(pts, 12))) == 16
    # levels {+-1, +-3}: mean |.|^2 = 10 before normalization
    assert np.mean(np.abs(pts) ** 2) == pytest.approx(1.0, abs=1e-15)
    assert np.max(np.abs(pts)) == pytest.approx(np.sqrt(18 / 10))


def test_bad_modulation_order():
    with pytest.raises(ConfigurationError):
        qam_constellation(8)


def test_frame_layout_and_probe():
    f = generate_frame(3, 64, 16, 1)
    assert f.symbols.shape == (4, 64)
    assert np.allclose(np.abs(f.sensing_symbols), 1)
    assert np.array_equal(f.s_vec(5), f.symbols[:, 5])
    assert np.array_equal(f.symbols, generate_frame(3, 64, 16, 1).symbols)
    big = generate_frame(2, 20_000, 16, 2)
    assert np.mean(np.abs(big.user_symbols) ** 2) == pytest.approx(1.0, abs=0.03)


def test_transmit_signal_cases():
    assert np.array_equal(transmit_signal(np.zeros((3, 2)), np.ones(2)), np.zeros(3))
    w = np.zeros((3, 2), complex)
    w[0, 0] = 1
    assert np.array_equal(transmit_signal(w, np.array([1, 1j])), [1, 0, 0])
    with pytest.raises(ValueError):
        transmit_signal(np.zeros((3, 2)), np.ones(3))


@given(st.integers(0, 10_000))
def test_transmit_signal_matches_term_sum(seed):
    rng = np.random.default_rng(seed)
    w = crandn(rng, (5, 4))
    s = crandn(rng, 4)
    assert np.allclose(transmit_signal(w, s), transmit_loop(w, s), atol=1e-12)


def _random_precoder(rng, cfg, ap):
    return PrecoderMatrix(crandn(rng, (cfg.m_antennas * ap.n_tx, cfg.n_ue + 1)),
                          ap.transmitters, cfg.m_antennas)


def test_user_signal_decomposition_and_oracle():
    cfg = profile("desk", m_antennas=4)
    sc = generate_scenario(cfg, 4)
    frame = generate_frame(cfg.n_ue, 6, 16, 4)
    ap = ApConfiguration.from_receivers([2], cfg.n_ap)
    w = _random_precoder(np.random.default_rng(0), cfg, ap)
    for i in range(cfg.n_ue):
        sig = received_user_signal(sc, w, frame, i, noise_seed=9)
        parts = sig.desired + sig.comm_interference + sig.sensing_interference + sig.noise
        assert np.array_equal(sig.total, parts)
        for k in range(cfg.k_antennas):
            h_blocks = [sc.h[j, i, k] for j in ap.transmitters]
            w_blocks = [w.block(j) for j in ap.transmitters]
            for n in range(frame.n_samples):
                d, c, s = user_sample_loop(h_blocks, w_blocks, frame.s_vec(n), i)
                assert sig.desired[k, n] == pytest.approx(d, abs=1e-12 * abs(d) + 1e-30)
                assert sig.comm_interference[k, n] == pytest.approx(c, rel=1e-9, abs=1e-30)
                assert sig.sensing_interference[k, n] == pytest.approx(s, rel=1e-9, abs=1e-30)


def test_user_signal_single_user_collapses_to_desired():
    cfg = ScenarioConfig(n_ue=1, m_antennas=3, k_antennas=1)
    sc = generate_scenario(cfg, 0)
    ap = ApConfiguration.from_receivers([0], cfg.n_ap)
    w = _random_precoder(np.random.default_rng(1), cfg, ap).with_sensing_zeroed()
    frame = generate_frame(1, 5, 4, 0)
    sig = received_user_signal(sc, w, frame, 0, 0, noise=False)
    gain = sum(np.vdot(sc.h[j, 0, 0], w.block(j)[:, 0]) for j in ap.transmitters)
    assert np.allclose(sig.total[0], gain * frame.user_symbols[0], rtol=1e-12)


def test_sensing_signal_zero_input_is_noise_and_rank_one_image():
    cfg = profile("desk", m_antennas=6)
    sc = generate_scenario(cfg, 2)
    ap = ApConfiguration.from_receivers([0, 1], cfg.n_ap)
    x0 = np.zeros((ap.n_tx, cfg.m_antennas, 4000), complex)
    y = received_sensing_signal(sc, ap, x0, 1)
    assert np.mean(np.abs(y) ** 2) == pytest.approx(cfg.noise_power, rel=0.05)
    # one transmitter, no noise: every sample is a multiple of a(theta_r)
    ap1 = ApConfiguration(n_ap=cfg.n_ap, receivers=(0,), transmitters=(3,), bootstrap=True)
    x = crandn(np.random.default_rng(0), (1, cfg.m_antennas, 3))
    y = received_sensing_signal(sc, ap1, x, 0, noise=False)
    geo = sensing_geometry(sc, ap1)
    a_r = np.exp(1j * np.pi * np.arange(cfg.m_antennas) * np.cos(geo.theta_rx[0]))
    for n in range(3):
        coef = y[0, 0, n]
        assert np.allclose(y[0, :, n], coef * a_r)


def test_sensing_signal_matches_direct_sum():
    cfg = profile("desk", m_antennas=5)
    sc = generate_scenario(cfg, 8)
    ap = ApConfiguration.from_receivers([1, 4], cfg.n_ap)
    x = crandn(np.random.default_rng(3), (ap.n_tx, cfg.m_antennas, 2))
    y = received_sensing_signal(sc, ap, x, 0, noise=False)
    geo = sensing_geometry(sc, ap)
    for r in range(ap.n_rx):
        for n in range(2):
            ref = echo_loop(geo.alpha[:, r], geo.beta_tr[:, r], geo.theta_tx, geo.theta_rx[r],
                            [x[j, :, n] for j in range(ap.n_tx)], cfg.m_antennas)
            assert np.allclose(y[r, :, n], ref, rtol=1e-10, atol=0)


def test_user_sinr_cases():
    h = np.array([[1.0 + 0j, 0.0]])
    w = np.array([[1.0 + 0j, 0.0], [0.0, 0.0]])
    assert user_sinr(w, h, 0, 1.0) == pytest.approx(1.0)
    w2 = w.copy()
    w2[:, 0] *= 3
    assert user_sinr(w2, h, 0, 1.0) == pytest.approx(9.0)
    # doubling the noise halves an interference-free SINR
    assert user_sinr(w, h, 0, 2.0) == pytest.approx(0.5)


@given(st.integers(0, 10_000))
def test_user_sinr_matches_loop(seed):
    rng = np.random.default_rng(seed)
    h = crandn(rng, (3, 8))
    w = crandn(rng, (8, 4))
    for i in range(3):
        assert user_sinr(w, h, i, 0.3) == pytest.approx(user_sinr_loop(h, w, i, 0.3), rel=1e-12)


def test_sensing_sinr_zero_and_scalar_case():
    cfg = ScenarioConfig(n_ap=2, n_ue=1, m_antennas=1, n_samples=1)
    sc = generate_scenario(cfg, 5)
    ap = ApConfiguration.from_receivers([1], 2)
    frame = generate_frame(1, 1, 4, 0)
    assert sensing_sinr(PrecoderMatrix(np.zeros((1, 2), complex), (0,), 1), sc, ap, frame, 1.0) == 0
    w = np.array([[0.3 + 0.1j, 0.7 - 0.2j]])
    x = (w @ frame.symbols)[0, 0]
    geo = sensing_geometry(sc, ap)
    closed = abs(geo.alpha[0, 0]) ** 2 * geo.beta_tr[0, 0] * abs(x) ** 2 / cfg.noise_power
    got = sensing_sinr(PrecoderMatrix(w, (0,), 1), sc, ap, frame, cfg.noise_power)
    assert got == pytest.approx(closed, rel=1e-12)


def test_sensing_sinr_matches_dense_blocks_and_is_phase_invariant():
    cfg = profile("desk", m_antennas=3, n_samples=5)
    sc = generate_scenario(cfg, 6)
    ap = ApConfiguration.from_receivers([0, 3], cfg.n_ap)
    frame = generate_frame(cfg.n_ue, 5, 16, 6)
    rng = np.random.default_rng(0)
    w = _random_precoder(rng, cfg, ap)
    geo = sensing_geometry(sc, ap)
    ref = sensing_sinr_dense(geo.alpha, geo.beta_tr, geo.theta_tx, geo.theta_rx, w.w,
                             frame.symbols, cfg.m_antennas, cfg.noise_power)
    got = sensing_sinr(w, sc, ap, frame, cfg.noise_power)
    assert got == pytest.approx(ref, rel=1e-10)
    rotated = PrecoderMatrix(w.w * np.exp(1.1j), w.transmitters, w.m)
    assert sensing_sinr(rotated, sc, ap, frame, cfg.noise_power) == pytest.approx(got, rel=1e-12)
    assert sensing_sinr(w, sc, ap, frame, 2 * cfg.noise_power) == pytest.approx(got / 2, rel=1e-12)


def test_sensing_sinr_agrees_with_simulated_echo_power():
    cfg = profile("desk", m_antennas=4, n_samples=4)
    sc = generate_scenario(cfg, 21)
    ap = ApConfiguration.from_receivers([2], cfg.n_ap)
    frame = generate_frame(cfg.n_ue, 4, 16, 21)
    w = _random_precoder(np.random.default_rng(4), cfg, ap)
    g = sensing_sinr(w, sc, ap, frame, cfg.noise_power)
    w = PrecoderMatrix(w.w / np.sqrt(g), w.transmitters, w.m)  # unit SINR
    x = transmit_all(w, frame)
    draws = 10_000
    power = sum(np.sum(np.abs(received_sensing_signal(sc, ap, x, s)) ** 2) for s in range(draws))
    per_entry = power / (draws * ap.n_rx * frame.n_samples * cfg.m_antennas)
    mc = (per_entry - cfg.noise_power) / cfg.noise_power
    assert mc == pytest.approx(1.0, rel=0.02)


def test_precoder_matrix_blocks():
    w = np.arange(12, dtype=complex).reshape(6, 2)
    pm = PrecoderMatrix(w, (1, 4), 3)
    assert np.array_equal(pm.block(4), w[3:])
    assert np.array_equal(pm.sensing_column(1), w[:3, 1])
    full = pm.full(5)
    assert np.array_equal(full[3:6], w[:3]) and not full[:3].any() and not full[6:12].any()
    with pytest.raises(ValueError):
        PrecoderMatrix(w, (1,), 3)


def test_symbol_frame_covariance():
    f = SymbolFrame(np.array([[1, 1j], [2, 0]], dtype=complex))
    assert np.allclose(f.covariance, f.symbols @ f.symbols.conj().T)
