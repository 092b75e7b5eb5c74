"""Average per-UE rate against transmit power, with and without impairments.

Ideal transceivers keep gaining about log2(10) bits per decade of power;
impaired ones flatten towards the saturation limit.
"""

import numpy as np

from simcellfree import SystemConfig, evaluate, realize
from simcellfree.harness import trial_rng
from simcellfree.scenario import dbm_to_watts

powers = np.arange(0, 70, 10)
trials = 10
for eps in (1.0, 1 - 1e-2, 1 - 1e-4):
    cfg = SystemConfig.desk(eps_ue=eps, eps_ap=eps)
    nets = [realize(cfg, trial_rng(0, "demo-power", t)) for t in range(trials)]
    row = [np.mean([evaluate(n, cfg.replace(transmit_power=float(dbm_to_watts(p)))).mean_rate for n in nets])
           for p in powers]
    print(f"eps={eps:<8g}", "  ".join(f"{p:>2d}dBm:{r:6.2f}" for p, r in zip(powers, row)))
