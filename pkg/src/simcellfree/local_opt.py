"""Per-AP alternating optimisation of MRC combiners and SIM phases."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .channel import PropagationSet
from .errors import DegenerateChannelError
from .scenario import NetworkLayout
from .sim_stack import SurfaceState, equivalent_channels


def mrc_combiners(Q, ap=None) -> np.ndarray:
    """Unit-norm maximum-ratio combiners, one column per UE of ``Q`` (M, K)."""
    Q = np.asarray(Q)
    norms = np.linalg.norm(Q, axis=0)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise DegenerateChannelError(ap, int(zero[0]))
    return Q / norms


def layer_update(bbar, hbar) -> np.ndarray:
    """Phases maximising ``Re(bbar^H diag(exp(j theta)) hbar)``.

    The optimum aligns every term: ``theta = angle(bbar) - angle(hbar)``,
    giving the gain ``sum |bbar_n| |hbar_n|``. Entries where either factor
    vanishes get phase 0.
    """
    bbar = np.asarray(bbar)
    hbar = np.asarray(hbar)
    theta = np.angle(bbar) - np.angle(hbar)
    return np.where((bbar == 0) | (hbar == 0), 0.0, theta)


def assign_targets(layout: NetworkLayout):
    """The UE each AP focuses its SIM on.

    An AP that is the nearest AP of one or more UEs serves the closest of
    them (ties by UE index). An AP that is nobody's nearest AP focuses on
    its own nearest UE. Returns ``(targets, fallback)`` where ``fallback``
    flags the second case.
    """
    D = layout.distances
    targets = np.empty(layout.num_aps, dtype=int)
    fallback = np.zeros(layout.num_aps, dtype=bool)
    for l in range(layout.num_aps):
        cands = [k for k, members in enumerate(layout.nearest_ap_sets) if l in members]
        if not cands:
            cands = list(range(layout.num_ues))
            fallback[l] = True
        targets[l] = min(cands, key=lambda k: (D[k, l], k))
    return targets, fallback


@dataclass
class LocalBeamformer:
    """Outcome of :func:`optimize_ap` for one AP.

    ``combiners`` is ``(M, K)`` with unit-norm columns, matched to the
    final SIM phases. ``trace[i]`` is ``||q_target||`` after ``i``
    iterations (``trace[0]`` is the random start).
    """

    ap: int
    target_ue: int
    combiners: np.ndarray
    channels: np.ndarray
    trace: np.ndarray
    iterations: int
    history: list = field(default_factory=list, repr=False)


def optimize_ap(props: PropagationSet, state: SurfaceState, l: int, target: int,
                iterations: int = 10, rng=None, tol: float | None = None,
                keep_history: bool = False) -> LocalBeamformer:
    """Layer-by-layer iterative hybrid beamforming at AP ``l``.

    Each iteration recomputes the equivalent channels, sets MRC combiners
    for all UEs, then sweeps layers in order, aligning each layer's
    phases to the target UE given the combiner and the other layers.
    Layers before ``t`` already carry this sweep's new phases.

    ``state`` is updated in place (and randomly re-initialised first if
    ``rng`` is given). With ``tol`` set the loop stops early once the
    relative gain change drops below it. ``keep_history`` stores the
    phase array after every iteration.
    """
    if rng is not None:
        state.set_phases(l, rng.uniform(0.0, 2 * np.pi, state.phases[l].shape))
    mats = props.transfer[l]
    T = len(mats)
    root_ups = np.sqrt(state.upsilon[l])
    h = props.h[l, target]

    Q = equivalent_channels(props, state, l)
    trace = [np.linalg.norm(Q[:, target])]
    history = [state.phases[l].copy()] if keep_history else []
    done = 0
    for _ in range(iterations):
        B = mrc_combiners(Q, ap=l)
        xi = state.xi(l)
        suffix = [None] * T
        v = h
        for t in range(T - 1, -1, -1):
            suffix[t] = v
            v = mats[t] @ (xi[t] * v)
        row = B[:, target].conj() @ mats[0]
        for t in range(T):
            row_t = row * root_ups[t]
            theta = layer_update(row_t.conj(), suffix[t])
            state.set_layer(l, t, theta)
            if t + 1 < T:
                row = (row_t * np.exp(1j * theta)) @ mats[t + 1]
        Q = equivalent_channels(props, state, l)
        trace.append(np.linalg.norm(Q[:, target]))
        done += 1
        if keep_history:
            history.append(state.phases[l].copy())
        if tol is not None and trace[-1] - trace[-2] <= tol * trace[-1]:
            break
    return LocalBeamformer(l, int(target), mrc_combiners(Q, ap=l), Q, np.asarray(trace), done, history)


@dataclass
class LocalSinrReport:
    sinr: float
    distortion: np.ndarray
    interference: np.ndarray


def local_sinr(Q, b, k, eps_ue, eps_ap, rho, noise_power) -> LocalSinrReport:
    """SINR of UE ``k`` after combining the AP's received signal with ``b``.

    ``Q`` is ``(M, K)``; ``eps_ue`` and ``rho`` are per-UE arrays;
    ``eps_ap`` and ``noise_power`` are scalars for this AP.
    ``distortion[k']`` is the hardware-distortion power leaking from UE
    ``k'`` into the estimate of ``k``.
    """
    Q = np.asarray(Q)
    eps_ue = np.asarray(eps_ue, dtype=float)
    rho = np.asarray(rho, dtype=float)
    proj = np.abs(np.conj(b) @ Q) ** 2
    diag = (np.abs(b) ** 2) @ (np.abs(Q) ** 2)
    distortion = rho * (1 - eps_ue) * eps_ap * proj + rho * (1 - eps_ap) * diag
    leak = rho * eps_ue * eps_ap * proj
    signal = leak[k]
    interference = leak.copy()
    interference[k] = 0.0
    denom = distortion.sum() + interference.sum() + noise_power
    return LocalSinrReport(float(signal / denom), distortion, interference)


def write_trace_csv(path, results) -> None:
    """CSV of ``ap,iteration,gain`` rows for a collection of :class:`LocalBeamformer`."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ap", "iteration", "gain"])
        for res in results:
            for i, g in enumerate(res.trace):
                w.writerow([res.ap, i, repr(float(g))])
