"""Multiplication counts of the per-AP optimiser and the CPU fusion.

One complex multiplication (or division) counts as one floating-point
multiplication; additions are free. Formulas use Python integers, so
they cannot overflow.
"""

from __future__ import annotations

import cmath
import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np


def _check(**values):
    for name, v in values.items():
        if int(v) != v or v < 1:
            raise ValueError(f"{name} must be a positive integer, got {v!r}")


def c3_forward(t, N, M):
    """Multiplications for the combiner-side product of layer ``t`` (1-based)."""
    return (t - 1) * (N * N + 2 * N) + (M + 1) * N


def c3_backward(t, N, T):
    """Multiplications for the channel-side product of layer ``t`` (1-based)."""
    return (T - t) * (N * N + 2 * N)


@dataclass(frozen=True)
class APCost:
    c1: int
    c2: int
    c3: int
    forward: tuple[int, ...]
    backward: tuple[int, ...]

    @property
    def total(self) -> int:
        return self.c1 + self.c2 + self.c3


def ap_cost(N, M, K, T) -> APCost:
    """Per-iteration cost at one AP: equivalent channel, combiners, layer sweep."""
    _check(N=N, M=M, K=K, T=T)
    c1 = (T - 1) * (N * N + 2 * N) + M * N + 2 * N + M
    c2 = 2 * K * M
    c3 = (T * T - T) * (N * N + 2 * N) + T * (M + 1) * N
    fwd = tuple(c3_forward(t, N, M) for t in range(1, T + 1))
    bwd = tuple(c3_backward(t, N, T) for t in range(1, T + 1))
    assert c3 == sum(fwd) + sum(bwd)
    return APCost(c1, c2, c3, fwd, bwd)


@dataclass(frozen=True)
class CPUCost:
    c1: int
    c2: int
    c3: int
    asymptotic: dict = field(default_factory=dict)

    @property
    def total(self) -> int:
        return self.c1 + self.c2 + self.c3


def cpu_cost(L, K, M) -> CPUCost:
    """Cost of recovering one UE at the CPU: covariance, Cholesky solve, combining.

    ``asymptotic`` holds the leading terms ``K L^3``, ``K^2 L^2`` and
    ``K^2 M`` of recovering all ``K`` UEs.
    """
    _check(L=L, K=K, M=M)
    c1 = (L * L + 2 * L + 3 * M) * K
    c2 = (L ** 3 - L) // 3 + L * L
    c3 = L
    return CPUCost(c1, c2, c3, {"KL^3": K * L ** 3, "K^2L^2": K * K * L * L, "K^2M": K * K * M})


def cost_table_csv(grid) -> str:
    """CSV text with one row per ``(N, M, K, L, T)`` tuple in ``grid``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["N", "M", "K", "L", "T", "c1_ap", "c2_ap", "c3_ap", "c_ap",
                "c1_cpu", "c2_cpu", "c3_cpu", "c_cpu"])
    for N, M, K, L, T in grid:
        a, c = ap_cost(N, M, K, T), cpu_cost(L, K, M)
        w.writerow([N, M, K, L, T, a.c1, a.c2, a.c3, a.total, c.c1, c.c2, c.c3, c.total])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# instrumented reference run

class Tally:
    def __init__(self):
        self.count = 0


class Counted:
    """Complex scalar that bumps a shared tally on every multiply or divide."""

    __slots__ = ("value", "tally")

    def __init__(self, value, tally):
        self.value = complex(value)
        self.tally = tally

    @staticmethod
    def _raw(x):
        return x.value if isinstance(x, Counted) else x

    def __mul__(self, other):
        self.tally.count += 1
        return Counted(self.value * self._raw(other), self.tally)

    __rmul__ = __mul__

    def __truediv__(self, other):
        self.tally.count += 1
        return Counted(self.value / self._raw(other), self.tally)

    def __add__(self, other):
        return Counted(self.value + self._raw(other), self.tally)

    __radd__ = __add__

    def conjugate(self):
        return Counted(self.value.conjugate(), self.tally)


def _matvec(A, x, tally):
    return [sum((Counted(a, tally) * xj for a, xj in zip(row, x)), Counted(0, tally)) for row in A]


def _vecmat(x, A, tally):
    cols = len(A[0])
    return [sum((xi * A[i][j] for i, xi in enumerate(x)), Counted(0, tally)) for j in range(cols)]


def _scale(x, d):
    return [xi * di for xi, di in zip(x, d)]


def instrumented_count(A, upsilon, theta, h, large_scale, Q_all, target=0):
    """Run lines 3, 4 and the layer sweep of one iteration, counting multiplies.

    ``A`` lists the ``T`` transfer matrices (first ``M x N``, then
    ``N x N``); ``upsilon`` and ``theta`` are ``(T, N)``; ``h`` is the
    target UE's channel; ``Q_all`` is ``(M, K)`` and feeds the combiner
    step. Returns per-line counts: ``line3``, ``line4`` and lists
    ``line6`` / ``line7`` indexed by layer.
    """
    A = [np.asarray(a).tolist() for a in A]
    T = len(A)
    root_u = np.sqrt(np.asarray(upsilon, dtype=float)).tolist()
    theta = np.array(theta, dtype=float)
    counts = {}

    def diag(t):
        return [cmath.exp(1j * th) for th in theta[t]]

    tally = Tally()
    v = [Counted(x, tally) for x in np.asarray(h)]
    for t in range(T - 1, -1, -1):
        v = _matvec(A[t], _scale(_scale(v, diag(t)), root_u[t]), tally)
    q = [x * math.sqrt(large_scale) for x in v]
    counts["line3"] = tally.count
    counts["q"] = np.array([x.value for x in q])

    tally = Tally()
    Q_all = np.asarray(Q_all)
    combiners = []
    for k in range(Q_all.shape[1]):
        q = [Counted(x, tally) for x in Q_all[:, k]]
        norm = math.sqrt(sum((x * x.conjugate() for x in q), Counted(0, tally)).value.real)
        combiners.append([x / norm for x in q])
    counts["line4"] = tally.count

    b = [x.value for x in combiners[target]]
    counts["line6"], counts["line7"] = [], []
    for t in range(T):
        tally = Tally()
        row = _vecmat([Counted(np.conj(x), tally) for x in b], A[0], tally)
        row = _scale(row, root_u[0])
        for j in range(1, t + 1):
            row = _scale(row, diag(j - 1))
            row = _scale(_vecmat(row, A[j], tally), root_u[j])
        counts["line6"].append(tally.count)

        tally = Tally()
        hb = [Counted(x, tally) for x in np.asarray(h)]
        for j in range(T - 1, t, -1):
            hb = _matvec(A[j], _scale(_scale(hb, diag(j)), root_u[j]), tally)
        counts["line7"].append(tally.count)

        theta[t] = [-cmath.phase(r.value) - cmath.phase(x.value) for r, x in zip(row, hb)]
    return counts
