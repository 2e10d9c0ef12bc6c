import numpy as np
import pytest

from privisac.config import ScenarioConfig, profile
from privisac.errors import InfeasibleError
from privisac.framework import bootstrap_configuration, run_baseline, run_framework
from privisac.precoder import constraint_report
from privisac.scenario import generate_scenario
from privisac.signals import generate_frame


def _setup(cfg, seed):
    return generate_scenario(cfg, seed), generate_frame(cfg.n_ue, cfg.n_samples, cfg.mod_order, seed)


@pytest.mark.parametrize("seed", range(8))
def test_two_aps_one_receiver_converges_quickly(seed):
    # Possible receiver sequences with two APs: boot, R, R / boot, R, R', R' /
    # boot, R, R', R. The last closes because re-solving R reproduces the same
    # precoder, so every AP's latest sensing column matches the previous pass.
    cfg = ScenarioConfig(n_ap=2, n_rx=1, n_ue=1, m_antennas=4, n_samples=8)
    sc, frame = _setup(cfg, seed)
    try:
        res = run_framework(sc, frame, cfg)
    except InfeasibleError:
        pytest.skip("infeasible draw")
    assert res.converged and res.iterations <= 4
    seq = [tuple(h["receivers"]) for h in res.history[1:]]
    assert len(seq) < 2 or seq[1] != seq[0]
    assert len(seq) < 3 or seq[2] == seq[0]
    assert res.history[-1]["selected"] == list(res.r_final.receivers)


def test_bootstrap_uses_nearest_aps(small):
    sc, _ = _setup(small, 3)
    boot = bootstrap_configuration(sc, 2)
    assert boot.bootstrap and boot.transmitters == tuple(range(small.n_ap))
    nearest = set(np.argsort(sc.target_distances)[:2])
    assert set(boot.receivers) == nearest


@pytest.mark.parametrize("seed", range(3))
def test_framework_contract(small, seed):
    sc, frame = _setup(small, seed)
    res = run_framework(sc, frame, small)
    assert 1 <= res.iterations <= small.framework_max_iter
    assert len(res.r_final.receivers) == small.n_rx
    rep = constraint_report(res.w_final, sc)
    assert rep["min_user_sinr"] >= small.gamma_min * (1 - 1e-3)
    assert rep["max_row_power"] <= small.p_max * (1 + 1e-6)
    assert res.w_final.transmitters == res.r_final.transmitters
    configs = [tuple(h["receivers"]) for h in res.history]
    # no immediate repeat except the converging pair
    for a, b in zip(configs[1:-1], configs[2:]):
        assert a != b
    if res.converged:
        assert res.history[-1]["selected"] == res.history[-1]["receivers"]
    assert res.history[0]["bootstrap"]
    assert np.isfinite(res.gamma_s) and res.gamma_s > 0


def test_iteration_cap_returns_best_seen(small):
    cfg = small.replace(framework_max_iter=1)
    sc, frame = _setup(cfg, 4)
    res = run_framework(sc, frame, cfg)
    assert res.iterations == 1 and not res.converged
    # the bootstrap pass has no real receivers, so one extra solve aligns W with the selection
    assert res.r_final.receivers == tuple(res.history[0]["selected"])
    assert len(res.ccp_states) == 2


def test_baseline_deterministic_and_random(small):
    sc, frame = _setup(small, 6)
    a, b = run_baseline(sc, frame, small, seed=10), run_baseline(sc, frame, small, seed=10)
    assert a.r_final.receivers == b.r_final.receivers
    assert np.array_equal(a.w_final.w, b.w_final.w)
    picks = {run_baseline(sc, frame, small.replace(ccp_max_iter=1), seed=s).r_final.receivers
             for s in range(12)}
    assert len(picks) > 1


def test_framework_result_serializes(small):
    sc, frame = _setup(small, 0)
    d = run_framework(sc, frame, small).to_dict()
    assert set(d) >= {"receivers", "iterations", "converged", "gamma_s", "history"}
