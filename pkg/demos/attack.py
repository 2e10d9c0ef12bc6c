"""Run the eavesdropping attack against both receiver strategies."""

import numpy as np

from privisac import generate_frame, generate_scenario, profile
from privisac.adversary import run_attack
from privisac.framework import run_baseline, run_framework

cfg = profile("desk")
sc = generate_scenario(cfg, seed=21)
frame = generate_frame(cfg.n_ue, cfg.n_samples, cfg.mod_order, seed=21)

for name, result in [("random", run_baseline(sc, frame, cfg)), ("selected", run_framework(sc, frame, cfg))]:
    att = run_attack(sc, result.w_final, frame, cfg)
    errs = np.rad2deg(np.angle(np.exp(1j * (att.angle_estimates - att.true_angles))))
    print(f"{name:8s}: angle errors {np.round(errs, 1)} deg, "
          f"position error {att.error:.1f} m, detected={att.detected}")

oracle = run_attack(sc, run_framework(sc, frame, cfg).w_final, frame, cfg, oracle=True)
print(f"with the true transmit signals the error would be {oracle.error:.1f} m")
