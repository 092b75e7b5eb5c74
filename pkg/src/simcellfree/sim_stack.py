"""Per-AP stacked-metasurface state and the composed wave-domain beamformer."""

from __future__ import annotations

import csv
import math

import numpy as np

from .channel import PropagationSet

TWO_PI = 2.0 * math.pi


def canonical_phase(theta):
    """Wrap angles into ``[0, 2pi)``."""
    out = np.mod(np.asarray(theta, dtype=float), TWO_PI)
    return np.where(out >= TWO_PI, 0.0, out)


def quantize_angles(theta, bits: int):
    """Snap to the nearest of ``2**bits`` uniform levels on ``[0, 2pi)``.

    Exact ties go to the lower level; the top level wraps to 0.
    """
    if bits < 1:
        raise ValueError("bits must be >= 1")
    levels = 2 ** bits
    step = TWO_PI / levels
    r = canonical_phase(theta) / step
    idx = np.floor(r)
    # tolerance absorbs the rounding of level values such as 3*pi/4
    idx = idx + ((r - idx) > 0.5 + 1e-9)
    return (np.mod(idx, levels) * step).astype(float)


class StaleSurfaceError(RuntimeError):
    pass


class SurfaceState:
    """Phases and radiation coefficients of every SIM layer of every AP.

    ``phases[l]`` and ``upsilon[l]`` have shape ``(T_l, N)``; layer 0 is
    the one facing the antennas. The composed beamformer ``G`` is cached
    per AP; any phase write invalidates it and :meth:`compose` must be
    called again before :meth:`G` is read.
    """

    def __init__(self, phases, upsilon):
        self.phases = [canonical_phase(p) for p in phases]
        self.upsilon = [np.broadcast_to(np.asarray(u, dtype=float), p.shape).copy()
                        for u, p in zip(upsilon, self.phases)]
        for u in self.upsilon:
            if np.any(u < 0) or np.any(u > 1):
                raise ValueError("radiation coefficients must lie in [0, 1]")
        self._G = [None] * len(self.phases)

    @classmethod
    def random(cls, layers_per_ap, num_elements, rng, radiation_coefficient=1.0):
        phases = [rng.uniform(0.0, TWO_PI, (t, num_elements)) for t in layers_per_ap]
        return cls(phases, [radiation_coefficient] * len(phases))

    @classmethod
    def zeros(cls, layers_per_ap, num_elements, radiation_coefficient=1.0):
        phases = [np.zeros((t, num_elements)) for t in layers_per_ap]
        return cls(phases, [radiation_coefficient] * len(phases))

    @property
    def num_aps(self):
        return len(self.phases)

    def copy(self) -> "SurfaceState":
        new = SurfaceState([p.copy() for p in self.phases], [u.copy() for u in self.upsilon])
        new._G = list(self._G)
        return new

    def xi(self, l) -> np.ndarray:
        """Diagonals of every layer response ``sqrt(upsilon) * exp(j theta)``, shape ``(T_l, N)``."""
        return np.sqrt(self.upsilon[l]) * np.exp(1j * self.phases[l])

    def set_layer(self, l, t, theta) -> None:
        self.phases[l][t] = canonical_phase(theta)
        self._G[l] = None

    def set_phases(self, l, phases) -> None:
        self.phases[l] = canonical_phase(np.asarray(phases, dtype=float).reshape(self.phases[l].shape))
        self._G[l] = None

    def compose(self, props: PropagationSet, l) -> np.ndarray:
        self._G[l] = compose_G(props, self, l)
        return self._G[l]

    def G(self, l) -> np.ndarray:
        if self._G[l] is None:
            raise StaleSurfaceError(f"beamformer of AP {l} is stale; call compose() first")
        return self._G[l]

    def quantized(self, bits) -> "SurfaceState":
        return quantize_phases(self, bits)

    # CSV persistence: ap, layer, element, theta, upsilon

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["ap", "layer", "element", "theta", "upsilon"])
            for l, (ph, up) in enumerate(zip(self.phases, self.upsilon)):
                for t in range(ph.shape[0]):
                    for n in range(ph.shape[1]):
                        w.writerow([l, t, n, repr(float(ph[t, n])), repr(float(up[t, n]))])

    @classmethod
    def from_csv(cls, path) -> "SurfaceState":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [(int(r["ap"]), int(r["layer"]), int(r["element"]), float(r["theta"]), float(r["upsilon"]))
                    for r in csv.DictReader(fh)]
        L = max(r[0] for r in rows) + 1
        phases, upsilon = [], []
        for l in range(L):
            mine = [r for r in rows if r[0] == l]
            T = max(r[1] for r in mine) + 1
            N = max(r[2] for r in mine) + 1
            ph, up = np.zeros((T, N)), np.zeros((T, N))
            for _, t, n, th, u in mine:
                ph[t, n], up[t, n] = th, u
            phases.append(ph)
            upsilon.append(up)
        return cls(phases, upsilon)


def compose_G(props: PropagationSet, state: SurfaceState, l) -> np.ndarray:
    """``A1 Xi1 A2 Xi2 ... AT XiT`` for AP ``l`` using column scaling for the diagonals."""
    mats = props.transfer[l]
    xi = state.xi(l)
    if len(mats) != xi.shape[0]:
        raise ValueError(f"AP {l}: {len(mats)} transfer matrices but {xi.shape[0]} layers")
    G = mats[0] * xi[0]
    for A, d in zip(mats[1:], xi[1:]):
        if A.shape[0] != G.shape[1]:
            raise ValueError(f"AP {l}: dimension mismatch {G.shape} x {A.shape}")
        G = (G @ A) * d
    return G


def equivalent_channel(G, h, large_scale) -> np.ndarray:
    """``sqrt(large_scale) * G @ h``."""
    return math.sqrt(large_scale) * (G @ h)


def equivalent_channels(props: PropagationSet, state: SurfaceState, l) -> np.ndarray:
    """(M, K) matrix whose column ``k`` is the equivalent channel of UE ``k`` at AP ``l``."""
    G = state.compose(props, l)
    return (G @ props.h[l].T) * np.sqrt(props.large_scale[:, l])


def quantize_phases(state: SurfaceState, bits) -> SurfaceState:
    """Copy of ``state`` with every phase snapped to a ``bits``-bit grid."""
    return SurfaceState([quantize_angles(p, bits) for p in state.phases],
                        [u.copy() for u in state.upsilon])
