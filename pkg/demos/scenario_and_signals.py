"""Draw one scenario and look at the quantities the rest of the simulator uses."""

import numpy as np

from privisac import ApConfiguration, generate_frame, generate_scenario, profile
from privisac.scenario import sensing_geometry

cfg = profile("desk")
sc = generate_scenario(cfg, seed=1)
print(f"{cfg.n_ap} APs with {cfg.m_antennas} antennas, {cfg.n_ue} users, target at {sc.target_position}")
print("AP -> target distances [m]:", np.round(sc.target_distances, 1))

ap = ApConfiguration.from_receivers([0], cfg.n_ap)
geo = sensing_geometry(sc, ap)
print("departure angles [deg]:", np.round(np.rad2deg(geo.theta_tx), 1))
print("two-hop gains towards receiver 0:", geo.beta_tr[:, 0])

frame = generate_frame(cfg.n_ue, cfg.n_samples, cfg.mod_order, seed=1)
print("per-stream average power:", np.round(np.mean(np.abs(frame.symbols) ** 2, axis=1), 3))
