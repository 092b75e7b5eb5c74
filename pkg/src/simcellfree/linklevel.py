"""Signal-level Monte Carlo check of the analytic SINR expressions.

Everything is conditioned on one set of equivalent channels. Trials are
split into fixed-size chunks, each drawing from its own counter-based
stream, so results do not depend on how many worker threads run them.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .channel import complex_gaussian

CHUNK = 10_000
TERMS = ("desired", "ue_distortion", "ap_distortion", "interference", "noise")


def chunk_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


@dataclass
class SignalRealization:
    """One batch of trials. ``y`` has shape ``(trials, L, M)``."""

    s: np.ndarray
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    y: np.ndarray


def _params(Q, rho, eps_ue, eps_ap, noise_power):
    L, _, K = Q.shape
    return (np.broadcast_to(np.asarray(rho, dtype=float), (K,)),
            np.broadcast_to(np.asarray(eps_ue, dtype=float), (K,)),
            np.broadcast_to(np.asarray(eps_ap, dtype=float), (L,)),
            np.broadcast_to(np.asarray(noise_power, dtype=float), (L,)))


def simulate_received(Q, rho, eps_ue, eps_ap, noise_power, rng, trials) -> SignalRealization:
    """Draw symbols, distortions and noise and form the AP received signals.

    Symbols are CN(0, 1). ``Q`` is ``(L, M, K)``.
    """
    Q = np.asarray(Q)
    L, M, K = Q.shape
    rho, eps_ue, eps_ap, noise = _params(Q, rho, eps_ue, eps_ap, noise_power)
    s = complex_gaussian(rng, (trials, K))
    u = complex_gaussian(rng, (trials, K))
    v = complex_gaussian(rng, (trials, L, M, K))
    w = complex_gaussian(rng, (trials, L, M)) * np.sqrt(noise)[None, :, None]
    a_s = np.sqrt(np.outer(eps_ap, rho * eps_ue))            # (L, K)
    a_u = np.sqrt(np.outer(eps_ap, rho * (1 - eps_ue)))
    a_v = np.sqrt(np.outer(1 - eps_ap, rho))
    y = (np.einsum("lmk,lk,tk->tlm", Q, a_s, s)
         + np.einsum("lmk,lk,tk->tlm", Q, a_u, u)
         + np.einsum("lmk,lk,tlmk->tlm", Q, a_v, v)
         + w)
    return SignalRealization(s, u, v, w, y)


def _chunk_powers(Q, B, eta, rho, eps_ue, eps_ap, noise, seed, index, trials):
    """Per-UE sums of |term|^2 over one chunk, plus the power of the fused output."""
    rng = chunk_rng(seed, index)
    sig = simulate_received(Q, rho, eps_ue, eps_ap, noise, rng, trials)
    L, _, K = Q.shape
    Bc = B.conj()
    c = np.einsum("lmk,lmi->lki", Bc, Q)                         # b_k^H q_i
    d = np.einsum("lmk,lmi,tlmi->tlki", Bc, Q, sig.v)            # b_k^H (q_i . v_i)
    nw = np.einsum("lmk,tlm->tlk", Bc, sig.w)                    # b_k^H w
    local = np.einsum("lmk,tlm->tlk", Bc, sig.y)                 # b_k^H y
    a_s = np.sqrt(np.outer(eps_ap, rho * eps_ue))                # (L, i)
    a_u = np.sqrt(np.outer(eps_ap, rho * (1 - eps_ue)))
    a_v = np.sqrt(np.outer(1 - eps_ap, rho))
    out = np.zeros((K, len(TERMS) + 1))
    for k in range(K):
        e = eta[k].conj()                                        # weights applied as eta^H
        per_i_s = np.einsum("l,li,li,ti->ti", e, c[:, k, :], a_s, sig.s)
        per_i_u = np.einsum("l,li,li,ti->ti", e, c[:, k, :], a_u, sig.u)
        per_i_v = np.einsum("l,li,tli->ti", e, a_v, d[:, :, k, :])
        others = np.arange(K) != k
        terms = (
            per_i_s[:, k],
            per_i_u[:, k],
            per_i_v[:, k],
            (per_i_s[:, others] + per_i_u[:, others] + per_i_v[:, others]).sum(axis=1),
            nw[:, :, k] @ e,
        )
        out[k, :-1] = [np.sum(np.abs(t) ** 2) for t in terms]
        out[k, -1] = np.sum(np.abs(local[:, :, k] @ e) ** 2)
    return out


@dataclass
class EmpiricalSinr:
    """Measured powers per UE: ``term_power[k]`` follows :data:`TERMS`."""

    sinr: np.ndarray
    term_power: np.ndarray
    total_power: np.ndarray
    trials: int


def empirical_sinr(Q, eta, rho, eps_ue, eps_ap, noise_power, trials=100_000, seed=0,
                   combiners=None, workers=1) -> EmpiricalSinr:
    """Estimate the fused SINR of every UE by simulation.

    ``eta`` is ``(K, L)`` (row ``k`` are UE ``k``'s fusion weights);
    ``combiners`` defaults to per-AP MRC, shape ``(L, M, K)``. The fused
    output of UE ``k`` is split into desired signal, UE distortion, AP
    distortion, inter-user interference and noise, all driven by the same
    draws; the SINR is the desired power over the sum of the rest.
    """
    Q = np.asarray(Q)
    rho, eps_ue, eps_ap, noise = _params(Q, rho, eps_ue, eps_ap, noise_power)
    B = Q / np.linalg.norm(Q, axis=1, keepdims=True) if combiners is None else np.asarray(combiners)
    eta = np.asarray(eta)
    sizes = [min(CHUNK, trials - lo) for lo in range(0, trials, CHUNK)]
    job = lambda i: _chunk_powers(Q, B, eta, rho, eps_ue, eps_ap, noise, seed, i, sizes[i])  # noqa: E731
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(job, range(len(sizes))))
    else:
        parts = [job(i) for i in range(len(sizes))]
    stacked = np.stack(parts)
    sums = np.array([[math.fsum(stacked[:, k, j]) for j in range(stacked.shape[2])]
                     for k in range(stacked.shape[1])]) / trials
    terms, total = sums[:, :-1], sums[:, -1]
    sinr = terms[:, 0] / terms[:, 1:].sum(axis=1)
    return EmpiricalSinr(sinr, terms, total, trials)
