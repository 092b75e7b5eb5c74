"""Stack depth and phase resolution.

Splitting a fixed element budget over more layers helps, and 4-bit phases
are almost as good as continuous ones.
"""

from simcellfree import ExperimentSpec, run_experiment

for exp in ("layers_sweep", "quantization_sweep"):
    res = run_experiment(ExperimentSpec(exp, trials=20))
    for p in res.points:
        print(f"{exp:20s} {p.param_value!s:>12s}  mean {p.mean_rate:6.3f}  sum {p.sum_rate:7.3f}")
