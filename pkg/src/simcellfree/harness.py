"""End-to-end pipeline and parameter sweeps.

A *trial* is one random network: UE drop, channels, random initial SIM
phases. Its random stream depends only on ``(master seed, experiment,
trial)``, so every grid point of a sweep sees the same trial networks
(common random numbers) and adding points or workers never changes
existing results.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import logging
import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .channel import PropagationSet, build_propagation
from .errors import ConfigError, ExperimentError, SimCellFreeError
from .fusion import FusionReport, fuse
from .local_opt import LocalBeamformer, assign_targets, optimize_ap
from .scenario import NetworkLayout, SystemConfig, build_layout, dbm_to_watts
from .sim_stack import SurfaceState, equivalent_channels, quantize_phases

log = logging.getLogger(__name__)

CSV_HEADER = ("experiment", "point", "param_name", "param_value", "trials",
              "mean_rate", "std_rate", "sum_rate")

# fields that only enter the evaluation, never the optimised network
_EVAL_ONLY = {"transmit_power": 0.1, "eps_ue": 1.0, "eps_ap": 1.0, "noise_power": 1e-11,
              "phase_bits": None, "ignore_hwi": False}


def trial_rng(seed: int, experiment: str, trial: int) -> np.random.Generator:
    tag = zlib.crc32(experiment.encode("utf-8"))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, tag, trial])))


@dataclass
class Realization:
    config: SystemConfig
    layout: NetworkLayout
    props: PropagationSet
    state: SurfaceState
    targets: np.ndarray
    local: list[LocalBeamformer]


def realize(config: SystemConfig, rng, keep_history=False) -> Realization:
    """Drop UEs, synthesize channels and run the per-AP optimiser at every AP."""
    layout = build_layout(config, rng)
    props = build_propagation(config, layout, rng)
    state = SurfaceState.random(layout.layers_per_ap, config.num_elements, rng,
                                config.radiation_coefficient)
    targets, _ = assign_targets(layout)
    local = [optimize_ap(props, state, l, targets[l], config.iterations, keep_history=keep_history)
             for l in range(layout.num_aps)]
    return Realization(config, layout, props, state, targets, local)


def channels(props: PropagationSet, state: SurfaceState) -> np.ndarray:
    """Stack the equivalent channels of every AP into ``(L, M, K)``."""
    return np.stack([equivalent_channels(props, state, l) for l in range(props.num_aps)])


def evaluate(real: Realization, config: SystemConfig | None = None,
             state: SurfaceState | None = None) -> FusionReport:
    """Fused SINRs and rates of a realisation under ``config``'s powers and hardware.

    Quantisation (``config.phase_bits``) is applied to the optimised
    phases here; combiners are then re-matched to the quantised channels.
    """
    config = config or real.config
    state = state or real.state
    if config.phase_bits is not None:
        state = quantize_phases(state, config.phase_bits)
    Q = channels(real.props, state)
    return fuse(Q, config.per_ue("eps_ue"), config.per_ap("eps_ap"), config.per_ue("transmit_power"),
                config.per_ap("noise_power"), ignore_hwi=config.ignore_hwi)


def run_point(config: SystemConfig, rng) -> np.ndarray:
    """Per-UE achievable rates of one random trial."""
    return evaluate(realize(config, rng)).rate


# ---------------------------------------------------------------------------
# experiments

@dataclass(frozen=True)
class Sweep:
    param_name: str
    apply: Callable[[SystemConfig, Any], SystemConfig]
    desk_grid: tuple
    paper_grid: tuple
    fmt: Callable[[Any], str] = str


def _bits(cfg, v):
    return cfg.replace(phase_bits=None if v in (None, "continuous") else int(v))


def _layers_elements(cfg, v):
    t, n = v
    return cfg.replace(num_layers=int(t), element_grid=(int(n), int(n)))


SWEEPS = {
    "rate_vs_power": Sweep("transmit_power_dbm",
                           lambda c, v: c.replace(transmit_power=float(dbm_to_watts(v))),
                           (0, 10, 20, 30, 40), (-10, 0, 10, 20, 30, 40, 50)),
    "aps_sweep": Sweep("num_aps", lambda c, v: c.replace(num_aps=int(v)), (4, 8), (16, 64)),
    "layers_sweep": Sweep("layers_x_elements", _layers_elements,
                          ((1, 16), (2, 8), (4, 4)), ((1, 16), (2, 8), (4, 4)),
                          lambda v: f"{v[0]}/{v[1]}x{v[1]}"),
    "antennas_sweep": Sweep("antenna_grid", lambda c, v: c.replace(antenna_grid=(int(v), int(v))),
                            (1, 2, 3, 4), (1, 2, 3, 4, 5, 6), lambda v: f"{v}x{v}"),
    "interlayer_distance_sweep": Sweep(
        "inter_layer_distance_lambda",
        lambda c, v: c.replace(inter_layer_distance=float(v) * c.wavelength),
        (0.25, 0.5, 1, 2, 4), (0.25, 0.5, 1, 2, 4, 8, 16)),
    "layers_count_sweep": Sweep("num_layers", lambda c, v: c.replace(num_layers=int(v)),
                                (1, 2, 3, 4), (1, 2, 3, 4, 5, 6, 7, 8)),
    "convergence_trace": Sweep("iterations", lambda c, v: c.replace(iterations=int(v)),
                               (0, 1, 2, 3, 5, 10, 15, 20), (0, 1, 2, 3, 5, 10, 15, 20, 30)),
    "quantization_sweep": Sweep("phase_bits", _bits, (1, 2, 3, 4, 5, 6, "continuous"),
                                (1, 2, 3, 4, 5, 6, "continuous")),
}
EXPERIMENTS = tuple(SWEEPS) + ("cost_table",)


@dataclass
class ExperimentSpec:
    experiment: str
    grid: Sequence | None = None
    trials: int = 50
    config: SystemConfig | None = None
    seed: int = 0
    scale: str = "desk"
    output: str | None = None

    def __post_init__(self):
        if self.experiment not in SWEEPS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {', '.join(SWEEPS)}")
        if self.scale not in ("desk", "paper"):
            raise ConfigError("scale must be 'desk' or 'paper'")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        sweep = SWEEPS[self.experiment]
        if self.grid is None:
            self.grid = sweep.desk_grid if self.scale == "desk" else sweep.paper_grid
        self.grid = tuple(self.grid)
        if not self.grid:
            raise ConfigError("empty sweep grid")
        if self.config is None:
            self.config = SystemConfig.desk() if self.scale == "desk" else SystemConfig()


@dataclass
class PointResult:
    point: int
    param_value: str
    trials: int
    mean_rate: float
    std_rate: float
    sum_rate: float
    per_trial: np.ndarray = field(repr=False, default=None)


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    points: list[PointResult]
    failures: list[tuple[int, int, str]]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        name = SWEEPS[self.spec.experiment].param_name
        for p in self.points:
            w.writerow([self.spec.experiment, p.point, name, p.param_value, p.trials,
                        repr(p.mean_rate), repr(p.std_rate), repr(p.sum_rate)])
        return buf.getvalue()

    def write(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(self.to_csv())


def _realization_key(cfg: SystemConfig):
    return dataclasses.replace(cfg, **_EVAL_ONLY)


def _run_trial(spec: ExperimentSpec, trial: int):
    """Rates of every grid point for one trial network; failures as strings."""
    sweep = SWEEPS[spec.experiment]
    cache = {}
    out = []
    if spec.experiment == "convergence_trace":
        try:
            top = spec.config.replace(iterations=max(int(v) for v in spec.grid))
            real = realize(top, trial_rng(spec.seed, spec.experiment, trial), keep_history=True)
        except (SimCellFreeError, np.linalg.LinAlgError) as exc:
            return [f"trial {trial}: {exc}"] * len(spec.grid)
        for v in spec.grid:
            state = real.state.copy()
            for l, res in enumerate(real.local):
                state.set_phases(l, res.history[min(int(v), len(res.history) - 1)])
            rep = evaluate(real, spec.config, state)
            out.append((rep.mean_rate, rep.sum_rate))
        return out
    for v in spec.grid:
        try:
            cfg = sweep.apply(spec.config, v)
            key = _realization_key(cfg)
            if key not in cache:
                cache[key] = realize(cfg, trial_rng(spec.seed, spec.experiment, trial))
            rep = evaluate(cache[key], cfg)
            out.append((rep.mean_rate, rep.sum_rate))
        except (SimCellFreeError, np.linalg.LinAlgError) as exc:
            out.append(f"trial {trial}: {type(exc).__name__}: {exc}")
    return out


def run_experiment(spec: ExperimentSpec, workers: int = 1) -> ExperimentResult:
    """Average mean and sum rates over ``spec.trials`` trials at every grid point.

    Trials may run on ``workers`` threads; aggregation always proceeds in
    trial order with compensated summation, so the CSV bytes are
    independent of the worker count. A failed trial voids its point (NaN
    row) and is listed in ``failures``.
    """
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            per_trial = list(pool.map(lambda t: _run_trial(spec, t), range(spec.trials)))
    else:
        per_trial = [_run_trial(spec, t) for t in range(spec.trials)]

    sweep = SWEEPS[spec.experiment]
    points, failures = [], []
    for i, v in enumerate(spec.grid):
        cells = [row[i] for row in per_trial]
        bad = [(t, c) for t, c in enumerate(cells) if isinstance(c, str)]
        if bad:
            failures.extend((i, t, c) for t, c in bad)
            for t, c in bad:
                log.error("%s point %d: %s", spec.experiment, i, c)
            nan = float("nan")
            points.append(PointResult(i, sweep.fmt(v), spec.trials, nan, nan, nan))
            continue
        means = np.array([c[0] for c in cells])
        sums = np.array([c[1] for c in cells])
        mu = math.fsum(means) / len(means)
        std = math.sqrt(math.fsum((means - mu) ** 2) / (len(means) - 1)) if len(means) > 1 else 0.0
        points.append(PointResult(i, sweep.fmt(v), spec.trials, mu, std,
                                  math.fsum(sums) / len(sums), means))
    result = ExperimentResult(spec, points, failures)
    if spec.output:
        result.write(spec.output)
    return result


def check_failures(result: ExperimentResult) -> None:
    if result.failures:
        point, trial, reason = result.failures[0]
        raise ExperimentError(f"{result.spec.experiment}: point {point}, {reason}")


# ---------------------------------------------------------------------------
# invariant suite

@dataclass
class Check:
    name: str
    passed: bool
    detail: str


def validate(config: SystemConfig | None = None, seed: int = 0) -> list[Check]:
    """Quick self-checks of the invariants the pipeline relies on."""
    from .complexity import ap_cost, instrumented_count
    from .fusion import build_R, build_z_vectors, rayleigh_quotient
    from .local_opt import layer_update
    from .sim_stack import compose_G

    config = config or SystemConfig.desk()
    rho = config.per_ue("transmit_power")
    rng = trial_rng(seed, "validate", 0)
    real = realize(config, rng)
    checks = []

    worst = min(float(np.min(np.diff(res.trace) / res.trace[1:])) for res in real.local)
    checks.append(Check("gain trace non-decreasing", worst >= -1e-12, f"worst step {worst:.3e}"))

    one = config.replace(num_layers=1)
    lay = build_layout(one, trial_rng(seed, "validate", 1))
    props = build_propagation(one, lay, trial_rng(seed, "validate", 1))
    G = compose_G(props, SurfaceState.zeros(lay.layers_per_ap, one.num_elements), 0)
    checks.append(Check("single layer at zero phase equals first hop",
                        bool(np.array_equal(G, props.transfer[0][0])), ""))

    b, h = rng.standard_normal((2, 8, 2)) @ np.array([1, 1j])
    theta = layer_update(b, h)
    best = np.abs(b.conj() * h).sum()
    got = np.real(np.vdot(b, np.exp(1j * theta) * h))
    checks.append(Check("layer update attains the aligned gain", bool(np.isclose(got, best, rtol=1e-12)),
                        f"{got:.6g} vs {best:.6g}"))

    rep = evaluate(real)
    rq = np.array([rayleigh_quotient(rep.weights[k], rep.covariances[k], rep.zs.z[k, k], rho[k])
                   for k in range(config.num_ues)])
    checks.append(Check("fused SINR equals the quotient of its weights",
                        bool(np.allclose(rq, rep.sinr, rtol=1e-9)), ""))

    zs = build_z_vectors(channels(real.props, real.state), config.per_ue("eps_ue"), config.per_ap("eps_ap"))
    lam = min(float(np.linalg.eigvalsh(build_R(zs, rho, config.per_ap("noise_power"), k)).min())
              for k in range(config.num_ues))
    checks.append(Check("fusion covariances positive definite", lam > 0, f"min eigenvalue {lam:.3e}"))

    N, M, K, T = 4, 2, 2, 2
    A = [rng.standard_normal((M, N)) + 1j * rng.standard_normal((M, N)),
         rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))]
    counts = instrumented_count(A, np.ones((T, N)), rng.uniform(0, 2 * np.pi, (T, N)),
                                rng.standard_normal(N) + 0j, 1.0,
                                rng.standard_normal((M, K)) + 1j * rng.standard_normal((M, K)))
    cost = ap_cost(N, M, K, T)
    ok = (counts["line4"] == cost.c2 and tuple(counts["line6"]) == cost.forward
          and tuple(counts["line7"]) == cost.backward)
    checks.append(Check("instrumented multiply counts match formulas", ok, str(counts["line6"])))
    return checks
