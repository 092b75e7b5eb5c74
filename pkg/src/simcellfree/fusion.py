"""Central fusion of the per-AP local estimates with MMSE weights."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConditioningError, DegenerateChannelError
from .local_opt import local_sinr


@dataclass
class ZVectors:
    """Fusion statistics, each indexed ``[k, i, l]``.

    ``z`` carries the undistorted leakage of UE ``i`` into the estimate of
    UE ``k`` at AP ``l``; ``zu`` the UE-side distortion part; ``zv`` the
    (real, non-negative) AP-side distortion part.
    """

    z: np.ndarray
    zu: np.ndarray
    zv: np.ndarray


def build_z_vectors(Q, eps_ue, eps_ap) -> ZVectors:
    """``Q`` has shape ``(L, M, K)``: column ``k`` of ``Q[l]`` is ``q_k`` at AP ``l``.

    Assumes AP ``l`` combines UE ``k`` with ``q_k / ||q_k||``.
    """
    Q = np.asarray(Q)
    eps_ue = np.asarray(eps_ue, dtype=float)
    eps_ap = np.asarray(eps_ap, dtype=float)
    norms = np.linalg.norm(Q, axis=1)  # (L, K)
    if np.any(norms == 0):
        l, k = np.argwhere(norms == 0)[0]
        raise DegenerateChannelError(int(l), int(k))
    cross = np.einsum("lmk,lmi->kil", Q.conj(), Q) / norms.T[:, None, :]
    p2 = np.abs(Q) ** 2
    had = np.sqrt(np.einsum("lmk,lmi->kil", p2, p2)) / norms.T[:, None, :]
    z = np.sqrt(np.outer(eps_ue, eps_ap))[:, None, :] * cross
    zu = np.sqrt(np.outer(1 - eps_ue, eps_ap))[:, None, :] * cross
    zv = np.sqrt(1 - eps_ap)[None, None, :] * had
    return ZVectors(z, zu, zv)


def _outer(v):
    return np.outer(v, v.conj())


def build_R(zs: ZVectors, rho, noise_power, k, include_noise=True) -> np.ndarray:
    """Interference-plus-distortion-plus-noise covariance for UE ``k``, shape ``(L, L)``."""
    rho = np.asarray(rho, dtype=float)
    K, _, L = zs.z.shape
    R = rho[k] * (_outer(zs.zu[k, k]) + np.diag(zs.zv[k, k] ** 2))
    for j in range(K):
        if j == k:
            continue
        R = R + rho[j] * (_outer(zs.z[k, j]) + _outer(zs.zu[k, j]) + np.diag(zs.zv[k, j] ** 2))
    if include_noise:
        R = R + np.diag(np.broadcast_to(np.asarray(noise_power, dtype=float), (L,)))
    return R


def _cholesky(R):
    try:
        return scipy.linalg.cho_factor(R, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
        lam_min = float(np.linalg.eigvalsh((R + R.conj().T) / 2).min())
        raise ConditioningError(f"covariance is not positive definite (min eigenvalue {lam_min:.3e})",
                                lam_min) from None


def optimal_weights(R, z, rho_k):
    """MMSE fusion weights and the SINR they attain.

    Returns ``(eta, gamma)`` with ``eta = R^-1 z`` scaled to unit norm and
    ``gamma = rho_k z^H R^-1 z``. Solved through a Cholesky factor.
    """
    eta = scipy.linalg.cho_solve(_cholesky(R), z)
    gamma = float(rho_k * np.real(np.vdot(z, eta)))
    return eta / np.linalg.norm(eta), gamma


def rayleigh_quotient(eta, R, z, rho_k) -> float:
    """SINR ``rho_k |eta^H z|^2 / (eta^H R eta)`` of arbitrary weights."""
    return float(rho_k * abs(np.vdot(eta, z)) ** 2 / np.real(np.vdot(eta, R @ eta)))


def rates(gammas):
    """Per-UE ``log2(1 + gamma)``, their mean and their sum."""
    r = np.log2(1.0 + np.asarray(gammas, dtype=float))
    return r, float(r.mean()), float(r.sum())


def hwi_saturation_limit(zs: ZVectors, k, rho_profile=None, rtol=1e-12):
    """High-power limit of the fused SINR of UE ``k``.

    With every UE power scaled by a common ``rho -> inf`` (relative shares
    ``rho_profile``, default equal), the noise drops out and the SINR tends
    to ``z^H S^-1 z`` with ``S`` the power-proportional part of the
    covariance. Returns ``(gamma_inf, bounded)``; an unbounded limit is
    reported as ``(inf, False)``.
    """
    K = zs.z.shape[0]
    profile = np.ones(K) if rho_profile is None else np.asarray(rho_profile, dtype=float)
    S = build_R(zs, profile, 0.0, k, include_noise=False) / profile[k]
    z = zs.z[k, k]
    w, V = np.linalg.eigh((S + S.conj().T) / 2)
    scale = max(abs(w).max(), np.finfo(float).tiny)
    if w.min() > rtol * scale:
        return float(np.real(np.vdot(z, np.linalg.solve(S, z)))), True
    # z outside range(S): the SINR keeps growing with rho
    null = V[:, w <= rtol * scale]
    if np.linalg.norm(null.conj().T @ z) > 1e-9 * np.linalg.norm(z):
        return float("inf"), False
    warnings.warn(f"singular distortion covariance for UE {k}; using pseudo-inverse", RuntimeWarning)
    return float(np.real(np.vdot(z, np.linalg.pinv(S, rcond=rtol, hermitian=True) @ z))), True


@dataclass
class FusionReport:
    zs: ZVectors
    covariances: np.ndarray
    weights: np.ndarray
    sinr: np.ndarray
    rate: np.ndarray
    mean_rate: float
    sum_rate: float
    local_sinr: np.ndarray

    @property
    def local_sinr_max(self):
        return self.local_sinr.max(axis=1)

    def to_csv(self, path, with_weights=False) -> None:
        K, L = self.weights.shape
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            head = ["ue", "gamma", "rate", "gamma_local_max"]
            if with_weights:
                head += [f"eta_{p}{l}" for l in range(L) for p in ("re", "im")]
            w.writerow(head)
            for k in range(K):
                row = [k, repr(float(self.sinr[k])), repr(float(self.rate[k])),
                       repr(float(self.local_sinr_max[k]))]
                if with_weights:
                    for e in self.weights[k]:
                        row += [repr(float(e.real)), repr(float(e.imag))]
                w.writerow(row)


def fuse(Q, eps_ue, eps_ap, rho, noise_power, ignore_hwi=False) -> FusionReport:
    """Fuse local MRC estimates of every UE across all APs.

    ``Q`` is ``(L, M, K)``; ``eps_ue`` and ``rho`` per UE; ``eps_ap`` and
    ``noise_power`` per AP. With ``ignore_hwi`` the weights are designed
    as if the hardware were ideal, then scored against the true statistics.
    """
    Q = np.asarray(Q)
    L, _, K = Q.shape
    eps_ue = np.broadcast_to(np.asarray(eps_ue, dtype=float), (K,))
    eps_ap = np.broadcast_to(np.asarray(eps_ap, dtype=float), (L,))
    rho = np.broadcast_to(np.asarray(rho, dtype=float), (K,))
    noise = np.broadcast_to(np.asarray(noise_power, dtype=float), (L,))
    zs = build_z_vectors(Q, eps_ue, eps_ap)
    design = build_z_vectors(Q, np.ones(K), np.ones(L)) if ignore_hwi else zs
    Rs = np.empty((K, L, L), dtype=complex)
    etas = np.empty((K, L), dtype=complex)
    gam = np.empty(K)
    for k in range(K):
        Rs[k] = build_R(zs, rho, noise, k)
        if ignore_hwi:
            eta, _ = optimal_weights(build_R(design, rho, noise, k), design.z[k, k], rho[k])
            gam[k] = rayleigh_quotient(eta, Rs[k], zs.z[k, k], rho[k])
        else:
            eta, gam[k] = optimal_weights(Rs[k], zs.z[k, k], rho[k])
        etas[k] = eta
    B = Q / np.linalg.norm(Q, axis=1, keepdims=True)
    local = np.array([[local_sinr(Q[l], B[l][:, k], k, eps_ue, eps_ap[l], rho, noise[l]).sinr
                       for l in range(L)] for k in range(K)])
    r, mean, total = rates(gam)
    return FusionReport(zs, Rs, etas, gam, r, mean, total, local)
