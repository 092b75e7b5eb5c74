"""Propagation quantities: near-field SIM transfer matrices, clustered mmWave
UE channels and large-scale path loss."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import GeometryError
from .scenario import NetworkLayout, SystemConfig


# ---------------------------------------------------------------------------
# radiated power of a rectangular element

def _rule(order: int, rule: str):
    """Nodes on [-1/2, 1/2] and weights summing to 1."""
    if rule == "gauss":
        x, w = np.polynomial.legendre.leggauss(order)
        return x / 2, w / 2
    if rule == "midpoint":
        return (np.arange(order) + 0.5) / order - 0.5, np.full(order, 1.0 / order)
    raise ValueError(f"unknown quadrature rule {rule!r}")


def radiated_power_matrix(src_centers, dst_points, src_size, kappa, order=8, rule="gauss"):
    """Power radiated from each source element to each destination point.

    Integrates ``kappa * cos(theta)**(kappa/2) / (4 pi d**2)`` over the
    ``src_size`` rectangle centred on every source element, where ``d`` is
    the distance from the integration point to the destination and
    ``cos(theta) = dz / d``. Uses a tensor Gauss-Legendre rule by default
    (``rule="midpoint"`` gives the plain midpoint rule).

    Returns an array of shape ``(len(dst_points), len(src_centers))``.
    """
    src = np.atleast_2d(np.asarray(src_centers, dtype=float))
    dst = np.atleast_2d(np.asarray(dst_points, dtype=float))
    dz = np.abs(dst[:, None, 2] - src[None, :, 2])
    if np.any(dz <= 0):
        raise GeometryError("source and destination share a plane (zero z-gap)")
    u, w = _rule(order, rule)
    qx = (u * src_size[0])[:, None]
    qy = (u * src_size[1])[None, :]
    weight = np.outer(w, w) * (src_size[0] * src_size[1])
    out = np.empty((dst.shape[0], src.shape[0]))
    # chunk over destinations to bound the (D, S, q, q) temporary
    step = max(1, 2_000_000 // max(1, src.shape[0] * order * order))
    for lo in range(0, dst.shape[0], step):
        hi = min(lo + step, dst.shape[0])
        ex = (src[None, :, 0] - dst[lo:hi, None, 0])[..., None, None] + qx
        ey = (src[None, :, 1] - dst[lo:hi, None, 1])[..., None, None] + qy
        z2 = (dz[lo:hi] ** 2)[..., None, None]
        r2 = ex * ex + ey * ey + z2
        cos_half = (z2 / r2) ** (kappa / 4)  # (dz/d)**(kappa/2)
        out[lo:hi] = np.einsum("dsij,ij->ds", kappa * cos_half / (4 * np.pi * r2), weight)
    return out


def radiated_power(src_element_center, src_size, dst_point, kappa, order=8, rule="gauss") -> float:
    return float(radiated_power_matrix(src_element_center, dst_point, src_size, kappa, order, rule)[0, 0])


def _transfer(src, dst, lam, src_size, kappa, order):
    gamma = radiated_power_matrix(src, dst, src_size, kappa, order)
    dist = np.sqrt(np.sum((dst[:, None, :] - src[None, :, :]) ** 2, axis=-1))
    return np.sqrt(gamma) * np.exp(-2j * np.pi / lam * dist)


def first_hop_matrix(layout: NetworkLayout, l: int, config: SystemConfig) -> np.ndarray:
    """(M, N) response from SIM layer 1 elements to the AP antennas."""
    return _transfer(layout.local_elements[l][0], layout.local_antennas, config.wavelength,
                     config.element_size, config.radiation_gain, config.quadrature_order)


def inter_layer_matrix(layout: NetworkLayout, l: int, t: int, config: SystemConfig) -> np.ndarray:
    """(N, N) response from layer ``t`` to layer ``t - 1`` (1-based, ``t >= 2``).

    Entry ``[n2, n1]`` couples element ``n1`` of layer ``t`` into element
    ``n2`` of layer ``t - 1``.
    """
    layers = layout.local_elements[l]
    if not 2 <= t <= layers.shape[0]:
        raise GeometryError(f"layer index {t} outside [2, {layers.shape[0]}]")
    return _transfer(layers[t - 1], layers[t - 2], config.wavelength,
                     config.element_size, config.radiation_gain, config.quadrature_order)


# ---------------------------------------------------------------------------
# UE -> SIM channel

def steering_vector(psi, phi, grid, delta, lam) -> np.ndarray:
    """Planar-array response, conjugated. Broadcasts over angle arrays.

    Element ``(n_x, n_y)`` sits at linear index ``n_y * N_x + n_x``; the
    entry is ``exp(-j 2pi/lam (dx n_x sin(psi) cos(phi) + dy n_y sin(psi) sin(phi)))``.
    """
    psi = np.asarray(psi, dtype=float)[..., None]
    phi = np.asarray(phi, dtype=float)[..., None]
    nx, ny = grid
    ix = np.tile(np.arange(nx), ny)
    iy = np.repeat(np.arange(ny), nx)
    phase = delta[0] * ix * np.sin(psi) * np.cos(phi) + delta[1] * iy * np.sin(psi) * np.sin(phi)
    return np.exp(-2j * np.pi / lam * phase)


def draw_cluster_means(config: SystemConfig, rng, size=()) -> np.ndarray:
    """Cluster mean angles, shape ``size + (num_clusters, 2)`` as (elevation, azimuth)."""
    shape = tuple(size) + (config.num_clusters,)
    lo_e, hi_e = config.elevation_mean_range
    lo_a, hi_a = config.azimuth_mean_range
    return np.stack([rng.uniform(lo_e, hi_e, shape), rng.uniform(lo_a, hi_a, shape)], axis=-1)


def _spread(rng, shape, sigma, law):
    if law == "uniform":
        return math.sqrt(3.0) * sigma * rng.uniform(-1.0, 1.0, shape)
    return sigma * rng.standard_normal(shape)


def complex_gaussian(rng, shape) -> np.ndarray:
    """Circularly-symmetric CN(0, 1) samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


@dataclass
class UEChannel:
    h: np.ndarray
    gains: np.ndarray
    elevation: np.ndarray
    azimuth: np.ndarray


def ue_channel(config: SystemConfig, rng, cluster_means=None, gains=None, angles=None) -> UEChannel:
    """Small-scale channel from one UE to one SIM.

    Sums ``num_clusters * paths_per_cluster`` planar paths with CN(0, 1)
    gains, normalised by ``1/sqrt(paths)``. Per-path angles scatter around
    the cluster means with standard deviation equal to the configured
    spreads. ``gains`` / ``angles`` override the random draws (angles as a
    ``(elevation, azimuth)`` pair of ``(C, P)`` arrays).
    """
    C, P = config.num_clusters, config.paths_per_cluster
    if angles is None:
        if cluster_means is None:
            cluster_means = draw_cluster_means(config, rng)
        cluster_means = np.asarray(cluster_means)
        elev = cluster_means[:, 0, None] + _spread(rng, (C, P), config.elevation_spread, config.angle_law)
        azim = cluster_means[:, 1, None] + _spread(rng, (C, P), config.azimuth_spread, config.angle_law)
    else:
        elev, azim = (np.broadcast_to(np.asarray(a, dtype=float), (C, P)) for a in angles)
    if gains is None:
        gains = complex_gaussian(rng, (C, P))
    gains = np.broadcast_to(np.asarray(gains, dtype=complex), (C, P))
    f = steering_vector(elev, azim, config.element_grid, config.element_size, config.wavelength)
    h = np.einsum("cp,cpn->n", gains, f) / math.sqrt(C * P)
    return UEChannel(h, gains, elev, azim)


def path_loss(d, reference_path_loss=1e-3, exponent=3.5):
    """``min(C0, C0 * d**-beta)``; distances below 1 m saturate at ``C0``."""
    d = np.asarray(d, dtype=float)
    # same as the min() form for exponent >= 0, without overflow near d = 0
    out = reference_path_loss * np.maximum(d, 1.0) ** (-exponent)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# full propagation set

@dataclass
class PropagationSet:
    """Everything the optimiser needs about the physical channels.

    ``transfer[l]`` lists ``A^(l,1), ..., A^(l,T_l)``: the first is
    ``(M, N)``, the rest ``(N, N)``. ``h`` has shape ``(L, K, N)`` and
    ``large_scale`` shape ``(K, L)``.
    """

    transfer: list[list[np.ndarray]]
    h: np.ndarray
    large_scale: np.ndarray
    gains: np.ndarray
    elevation: np.ndarray
    azimuth: np.ndarray
    cluster_means: np.ndarray

    @property
    def num_aps(self):
        return len(self.transfer)

    @property
    def num_ues(self):
        return self.h.shape[1]

    def layers(self, l) -> int:
        return len(self.transfer[l])


def build_propagation(config: SystemConfig, layout: NetworkLayout, rng) -> PropagationSet:
    """Synthesize transfer matrices, UE channels and path losses.

    Every AP carries the same local SIM geometry, so the transfer matrices
    are computed once per distinct layer count and shared.
    """
    L, K = layout.num_aps, layout.num_ues
    C, P, N = config.num_clusters, config.paths_per_cluster, config.num_elements
    cache = {}
    transfer = []
    for l, t_count in enumerate(layout.layers_per_ap):
        if t_count not in cache:
            mats = [first_hop_matrix(layout, l, config)]
            if t_count >= 2:
                inter = inter_layer_matrix(layout, l, 2, config)
                mats.extend([inter] * (t_count - 1))
            cache[t_count] = mats
        transfer.append(list(cache[t_count]))

    means = draw_cluster_means(config, rng, size=(K,))
    h = np.empty((L, K, N), dtype=complex)
    gains = np.empty((L, K, C, P), dtype=complex)
    elev = np.empty((L, K, C, P))
    azim = np.empty((L, K, C, P))
    for l in range(L):
        for k in range(K):
            ch = ue_channel(config, rng, cluster_means=means[k])
            h[l, k], gains[l, k], elev[l, k], azim[l, k] = ch.h, ch.gains, ch.elevation, ch.azimuth
    rho = path_loss(layout.distances, config.reference_path_loss, config.path_loss_exponent)
    return PropagationSet(transfer, h, np.asarray(rho), gains, elev, azim, means)


# ---------------------------------------------------------------------------
# textual dump (CSV of interleaved re, im)

def _write_complex_rows(path, rows, prefix_header=(), prefixes=None):
    rows = np.atleast_2d(rows)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(prefix_header) + [f"{p}{j}" for j in range(rows.shape[1]) for p in ("re", "im")])
        for i, row in enumerate(rows):
            inter = np.empty(2 * row.size)
            inter[0::2], inter[1::2] = row.real, row.imag
            lead = list(prefixes[i]) if prefixes is not None else []
            w.writerow(lead + [repr(float(v)) for v in inter])


def _read_complex_rows(path, n_prefix=0):
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        next(r)
        data = [[float(v) for v in row] for row in r]
    arr = np.asarray(data, dtype=float)
    return arr[:, :n_prefix], arr[:, n_prefix::2] + 1j * arr[:, n_prefix + 1::2]


def dump_propagation(props: PropagationSet, directory) -> list[Path]:
    """Write every matrix of ``props`` as CSV files under ``directory``.

    ``A_ap{l}_layer{t}.csv`` hold one matrix row per line; ``h.csv`` has
    ``ap,ue`` followed by the channel; ``large_scale.csv`` has
    ``ue,ap,gain``.
    """
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for l, mats in enumerate(props.transfer):
        for t, A in enumerate(mats, start=1):
            p = out / f"A_ap{l}_layer{t}.csv"
            _write_complex_rows(p, A)
            written.append(p)
    L, K, _ = props.h.shape
    p = out / "h.csv"
    _write_complex_rows(p, props.h.reshape(L * K, -1), ("ap", "ue"),
                        [(l, k) for l in range(L) for k in range(K)])
    written.append(p)
    p = out / "large_scale.csv"
    with open(p, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ue", "ap", "gain"])
        for k in range(K):
            for l in range(L):
                w.writerow([k, l, repr(float(props.large_scale[k, l]))])
    written.append(p)
    return written


def load_propagation(directory) -> PropagationSet:
    """Inverse of :func:`dump_propagation` (path-level metadata is not stored)."""
    d = Path(directory)
    ids, flat = _read_complex_rows(d / "h.csv", n_prefix=2)
    L, K = int(ids[:, 0].max()) + 1, int(ids[:, 1].max()) + 1
    h = flat.reshape(L, K, -1)
    transfer = []
    for l in range(L):
        mats, t = [], 1
        while (d / f"A_ap{l}_layer{t}.csv").exists():
            mats.append(_read_complex_rows(d / f"A_ap{l}_layer{t}.csv")[1])
            t += 1
        transfer.append(mats)
    large = np.zeros((K, L))
    with open(d / "large_scale.csv", newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            large[int(row["ue"]), int(row["ap"])] = float(row["gain"])
    empty = np.zeros((L, K, 0, 0))
    return PropagationSet(transfer, h, large, empty.astype(complex), empty, empty, np.zeros((K, 0, 2)))
