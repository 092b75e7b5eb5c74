"""Acceptance criteria 1-10 at their stated tolerances and time budgets.

Each test prints one ``criterion N: PASS|FAIL`` line; the lines are also
repeated in the pytest terminal summary. Run alone with::

    pytest tests/test_acceptance.py -v
"""

import time

import numpy as np

from simcellfree.complexity import ap_cost, cpu_cost, instrumented_count
from simcellfree.fusion import build_z_vectors, fuse, hwi_saturation_limit, rates
from simcellfree.harness import ExperimentSpec, channels, evaluate, realize, run_experiment, trial_rng
from simcellfree.linklevel import empirical_sinr
from simcellfree.local_opt import layer_update, local_sinr
from simcellfree.scenario import SystemConfig, build_layout, dbm_to_watts
from simcellfree.channel import build_propagation
from simcellfree.sim_stack import SurfaceState, compose_G

RESULTS = {}
LEVELS = np.array([1.0, 1 - 1e-2, 1 - 1e-4])


def report(n, ok, detail):
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[n] = line
    print(line)
    assert ok, line


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_criterion_01_analytic_vs_empirical_sinr():
    worst, slowest = 0.0, 0.0
    for inst in range(10):
        start = time.perf_counter()
        rng = trial_rng(inst, "acceptance-1", 0)
        cfg = SystemConfig.desk()
        real = realize(cfg, rng)
        eu, ea = rng.choice(LEVELS, cfg.num_ues), rng.choice(LEVELS, cfg.num_aps)
        Q = channels(real.props, real.state)
        rep = fuse(Q, eu, ea, cfg.transmit_power, cfg.noise_power)
        emp = empirical_sinr(Q, rep.weights, cfg.transmit_power, eu, ea, cfg.noise_power,
                             trials=100_000, seed=inst)
        slowest = max(slowest, time.perf_counter() - start)
        worst = max(worst, float(np.max(np.abs(emp.sinr / rep.sinr - 1))))
    report(1, worst <= 0.05 and slowest <= 120,
           f"max rel err {worst:.4f} (<= 0.05); slowest instance {slowest:.1f}s (<= 120s)")


def test_criterion_02_monotone_and_converged_traces():
    start = time.perf_counter()
    cfg = SystemConfig.desk(iterations=50)
    worst_drop, gaps, r10, r50 = 0.0, [], [], []
    for seed in range(100):
        real = realize(cfg, trial_rng(seed, "acceptance-2", 0), keep_history=True)
        state = real.state.copy()
        for l, res in enumerate(real.local):
            t = res.trace
            worst_drop = max(worst_drop, float(np.max((t[:-1] - t[1:]) / t[1:])))
            gaps.append((t[50] - t[10]) / t[50])
            state.set_phases(l, res.history[10])
        r10.append(evaluate(real, state=state).mean_rate)
        r50.append(evaluate(real).mean_rate)
    elapsed = time.perf_counter() - start
    gaps = np.array(gaps)
    monotone = worst_drop <= 1e-12
    converged = bool(np.all(gaps <= 1e-3))
    report(2, monotone and converged and elapsed <= 60,
           f"non-decreasing={monotone} (worst relative step down {worst_drop:.1e}); "
           f"gain(10) within 0.1% of gain(50) in {np.mean(gaps <= 1e-3):.0%} of {gaps.size} AP runs "
           f"(median gap {np.median(gaps):.3%}, worst {gaps.max():.1%}); "
           f"mean rate at 10 vs 50 iterations differs by {1 - np.mean(r10) / np.mean(r50):.3%}; "
           f"{elapsed:.1f}s (<= 60s)")


def test_criterion_03_layer_update_vs_exhaustive_grid():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    grid = np.exp(1j * np.arange(1024) * 2 * np.pi / 1024)
    worst = np.inf
    for _ in range(20):
        bbar, hbar = crandn(rng, 2), crandn(rng, 2)
        t = np.conj(bbar) * hbar
        best = np.max(np.real(t[0] * grid[:, None] + t[1] * grid[None, :]))
        got = np.real(np.sum(t * np.exp(1j * layer_update(bbar, hbar))))
        worst = min(worst, (got - best) / best)
    elapsed = time.perf_counter() - start
    report(3, worst >= -1e-4 and elapsed <= 60,
           f"min (closed form - grid best)/grid best = {worst:.2e} (>= -1e-4); {elapsed:.1f}s (<= 60s)")


def test_criterion_04_rayleigh_quotient_optimality():
    start = time.perf_counter()
    worst = -np.inf
    for inst in range(20):
        rng = trial_rng(inst, "acceptance-4", 0)
        cfg = SystemConfig.desk()
        real = realize(cfg, rng)
        eu, ea = rng.choice(LEVELS, cfg.num_ues), rng.choice(LEVELS, cfg.num_aps)
        rep = fuse(channels(real.props, real.state), eu, ea, cfg.transmit_power, cfg.noise_power)
        for k in range(cfg.num_ues):
            cand = crandn(rng, 10_000, cfg.num_aps)
            cand /= np.linalg.norm(cand, axis=1, keepdims=True)
            R, z = rep.covariances[k], rep.zs.z[k, k]
            num = cfg.transmit_power * np.abs(cand.conj() @ z) ** 2
            den = np.real(np.einsum("nl,lm,nm->n", cand.conj(), R, cand))
            worst = max(worst, float(np.max(num / den) / rep.sinr[k] - 1))
    elapsed = time.perf_counter() - start
    report(4, worst <= 1e-10 and elapsed <= 30,
           f"max random-search excess {worst:.2e} (<= 1e-10); {elapsed:.1f}s (<= 30s)")


def _mean_rates(eps, powers_dbm, trials=50):
    """R-bar per power, plus the saturation-limit R-bar, on shared networks."""
    base = SystemConfig.desk(eps_ue=eps, eps_ap=eps)
    out = {p: [] for p in powers_dbm}
    limit = []
    for t in range(trials):
        real = realize(base, trial_rng(0, "acceptance-5", t))
        for p in powers_dbm:
            out[p].append(evaluate(real, base.replace(transmit_power=float(dbm_to_watts(p)))).mean_rate)
        if eps < 1:
            zs = build_z_vectors(channels(real.props, real.state), base.per_ue("eps_ue"), base.per_ap("eps_ap"))
            limit.append(rates([hwi_saturation_limit(zs, k)[0] for k in range(base.num_ues)])[1])
    return {p: float(np.mean(v)) for p, v in out.items()}, (float(np.mean(limit)) if limit else None)


def test_criterion_05_impairments_saturate_the_rate():
    start = time.perf_counter()
    imp, lim = _mean_rates(1 - 1e-2, (40, 60))
    ideal, _ = _mean_rates(1.0, (40, 60))
    elapsed = time.perf_counter() - start
    flat = abs(imp[60] / imp[40] - 1)
    match = max(abs(imp[40] / lim - 1), abs(imp[60] / lim - 1))
    growth = ideal[60] - ideal[40]
    report(5, flat <= 0.01 and match <= 0.02 and growth >= 5 and elapsed <= 120,
           f"eps=1-1e-2: R(40dBm)={imp[40]:.4f}, R(60dBm)={imp[60]:.4f} differ {flat:.3%} (<= 1%), "
           f"limit {lim:.4f} within {match:.3%} (<= 2%); eps=1: R(60)-R(40)={growth:.2f} (>= 5); "
           f"{elapsed:.1f}s (<= 120s)")


def test_criterion_06_quantization():
    start = time.perf_counter()
    res = run_experiment(ExperimentSpec("quantization_sweep", grid=(1, 2, 3, 4, 5, 6, "continuous"), trials=50))
    elapsed = time.perf_counter() - start
    sums = [p.sum_rate for p in res.points]
    ratio = sums[3] / sums[-1]
    monotone = bool(np.all(np.diff(sums) >= 0))
    report(6, ratio >= 0.95 and monotone and elapsed <= 120,
           f"R_sum(4 bits)/R_sum(continuous) = {ratio:.4f} (>= 0.95); non-decreasing in bits: {monotone} "
           f"({', '.join(f'{s:.2f}' for s in sums)}); {elapsed:.1f}s (<= 120s)")


def test_criterion_07_monotone_trends():
    start = time.perf_counter()
    cases = [("L 4->8", "aps_sweep", (4, 8)), ("M 4->16", "antennas_sweep", (2, 4)),
             ("T 1->2", "layers_count_sweep", (1, 2))]
    ok, parts = True, []
    for label, exp, grid in cases:
        a, b = run_experiment(ExperimentSpec(exp, grid=grid, trials=50)).points
        se_a, se_b = a.std_rate / np.sqrt(a.trials), b.std_rate / np.sqrt(b.trials)
        separated = b.mean_rate - se_b > a.mean_rate + se_a
        ok &= separated
        trial_bands = b.mean_rate - b.std_rate > a.mean_rate + a.std_rate
        parts.append(f"{label}: {a.mean_rate:.3f}+-{se_a:.3f} -> {b.mean_rate:.3f}+-{se_b:.3f} "
                     f"{'separated' if separated else 'OVERLAP'} (trial-spread bands separated: {trial_bands})")
    elapsed = time.perf_counter() - start
    report(7, ok, "; ".join(parts) + f"; {elapsed:.1f}s")


def test_criterion_08_complexity_counts():
    start = time.perf_counter()
    rng = np.random.default_rng(8)
    N, M, T, K = 4, 2, 2, 2
    A = [crandn(rng, M, N), crandn(rng, N, N)]
    counts = instrumented_count(A, rng.uniform(0.5, 1, (T, N)), rng.uniform(0, 6, (T, N)),
                                crandn(rng, N), 0.5, crandn(rng, M, K))
    ap = ap_cost(N, M, K, T)
    ap_ok = (counts["line3"] == ap.c1 and counts["line4"] == ap.c2
             and tuple(counts["line6"]) == ap.forward and tuple(counts["line7"]) == ap.backward)
    small, big = cpu_cost(1, 1, 1), cpu_cost(16, 8, 16)
    cpu_ok = ((small.c1, small.c2, small.c3) == (6, 1, 1)
              and (big.c1, big.c2, big.c3) == (2688, 1616, 16))
    elapsed = time.perf_counter() - start
    report(8, ap_ok and cpu_ok and elapsed <= 5,
           f"measured line3={counts['line3']} (c1'={ap.c1}), line4={counts['line4']} (c2'={ap.c2}), "
           f"per-layer {counts['line6']}/{counts['line7']} vs {list(ap.forward)}/{list(ap.backward)}; "
           f"cpu (1,1,1)={small.c1, small.c2, small.c3}, (16,8,16)={big.c1, big.c2, big.c3}; {elapsed:.2f}s (<= 5s)")


def test_criterion_09_cross_module_consistency():
    start = time.perf_counter()
    cfg = SystemConfig.desk(num_aps=1, num_ues=1)
    real = realize(cfg, trial_rng(0, "acceptance-9", 0))
    Q = channels(real.props, real.state)
    fused = fuse(Q, 1.0, 1.0, cfg.transmit_power, cfg.noise_power).sinr[0]
    b = Q[0, :, 0] / np.linalg.norm(Q[0, :, 0])
    local = local_sinr(Q[0], b, 0, [1.0], 1.0, [cfg.transmit_power], cfg.noise_power).sinr
    rel = abs(fused / local - 1)
    one = cfg.replace(num_layers=1)
    lay = build_layout(one, trial_rng(0, "acceptance-9", 1))
    props = build_propagation(one, lay, trial_rng(0, "acceptance-9", 1))
    exact = np.array_equal(compose_G(props, SurfaceState.zeros([1], one.num_elements), 0), props.transfer[0][0])
    elapsed = time.perf_counter() - start
    report(9, rel <= 1e-10 and exact and elapsed <= 5,
           f"fused vs local SINR rel diff {rel:.1e} (<= 1e-10); single-layer G bit-exact: {exact}; "
           f"{elapsed:.2f}s (<= 5s)")


def test_criterion_10_thread_count_determinism():
    start = time.perf_counter()
    outputs = {}
    for exp, grid in (("rate_vs_power", (0, 20, 40)), ("antennas_sweep", (1, 2))):
        spec = ExperimentSpec(exp, grid=grid, trials=16, seed=10)
        outputs[exp] = {w: run_experiment(spec, workers=w).to_csv().encode("utf-8") for w in (1, 2, 8)}
    same = all(len(set(v.values())) == 1 for v in outputs.values())
    elapsed = time.perf_counter() - start
    report(10, same and elapsed <= 60,
           f"byte-identical CSV for 1/2/8 workers: {same}; {elapsed:.1f}s (<= 60s)")
