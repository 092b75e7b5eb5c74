"""Reference implementations shared by the test modules."""

import numpy as np

from simcellfree.channel import PropagationSet


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_props(rng, M=2, N=4, T=2, K=3, L=1):
    """Propagation set with i.i.d. complex Gaussian matrices (no geometry)."""
    transfer = [[crandn(rng, M, N)] + [crandn(rng, N, N) for _ in range(T - 1)] for _ in range(L)]
    empty = np.zeros((L, K, 0, 0))
    return PropagationSet(transfer, crandn(rng, L, K, N), rng.uniform(0.1, 1, (K, L)),
                          empty.astype(complex), empty, empty, np.zeros((K, 0, 2)))


def dense_oracle(mats, theta, upsilon):
    """A1 D1 A2 D2 ... with explicit dense diagonal matrices."""
    G = np.eye(mats[0].shape[0], dtype=complex)
    for A, th, up in zip(mats, theta, upsilon):
        G = G @ A @ np.diag(np.sqrt(up) * np.exp(1j * th))
    return G


def fused_sinr_oracle(Q, eps_ue, eps_ap, rho, noise, k):
    """Fused SINR of UE k built term by term from the received-signal model.

    Independent of the z-vector bookkeeping: every covariance entry is the
    expectation of (b_k^H y^(l)) (b_k^H y^(l'))^* split into its sources.
    """
    L, M, K = Q.shape
    B = Q / np.linalg.norm(Q, axis=1, keepdims=True)
    c = np.einsum("lmk,lmi->lki", B.conj(), Q)[:, k, :]          # (L, K): b_k^H q_i at AP l
    sig = np.sqrt(eps_ue[k] * eps_ap) * c[:, k]
    R = np.zeros((L, L), dtype=complex)
    for i in range(K):
        lin = np.sqrt(eps_ap) * c[:, i]
        if i != k:
            R += rho[i] * eps_ue[i] * np.outer(lin, lin.conj())
        R += rho[i] * (1 - eps_ue[i]) * np.outer(lin, lin.conj())
        dist = (1 - eps_ap) * np.einsum("lm,lm->l", np.abs(B[:, :, k]) ** 2, np.abs(Q[:, :, i]) ** 2)
        R += rho[i] * np.diag(dist)
    R += np.diag(noise)
    return rho[k] * np.real(sig.conj() @ np.linalg.solve(R, sig)), R, sig
