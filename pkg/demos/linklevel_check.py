"""Compare the closed-form fused SINR with a Monte Carlo link simulation."""

import numpy as np

from simcellfree import SystemConfig, empirical_sinr, fuse, realize
from simcellfree.harness import channels, trial_rng

cfg = SystemConfig.desk(eps_ue=1 - 1e-2, eps_ap=1 - 1e-4)
real = realize(cfg, trial_rng(0, "demo-linklevel", 0))
Q = channels(real.props, real.state)
rep = fuse(Q, 1 - 1e-2, 1 - 1e-4, cfg.transmit_power, cfg.noise_power)
emp = empirical_sinr(Q, rep.weights, cfg.transmit_power, 1 - 1e-2, 1 - 1e-4, cfg.noise_power,
                     trials=100_000, seed=0)
for k, (a, e) in enumerate(zip(rep.sinr, emp.sinr)):
    print(f"UE {k}: analytic {10 * np.log10(a):7.3f} dB  simulated {10 * np.log10(e):7.3f} dB")
