"""System configuration, unit handling and network geometry."""

from __future__ import annotations

import configparser
import csv
import dataclasses
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, GeometryError

SPEED_OF_LIGHT = 299_792_458.0


def dbm_to_watts(x):
    return 10.0 ** ((np.asarray(x, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float)) + 30.0


def db_to_linear(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def wavelength(carrier_frequency: float) -> float:
    return SPEED_OF_LIGHT / carrier_frequency


def _as_tuple(value):
    if value is None:
        return None
    if np.isscalar(value):
        return value
    return tuple(float(v) for v in np.ravel(value))


@dataclass(frozen=True)
class SystemConfig:
    """All scalar parameters of the system plus experiment knobs.

    Defaults reproduce the paper-scale simulation table (30 GHz, 16 APs,
    8 UEs, 4x4 antennas, 16x16 elements, 4 layers spaced one wavelength).
    Lengths left as ``None`` resolve from the wavelength: layer gap
    ``lambda``, antenna spacing ``lambda/2``, element size ``lambda/4``.
    Powers are in watts, gains linear, angles in radians.

    Per-UE and per-AP quantities (``eps_ue``, ``transmit_power``,
    ``eps_ap``, ``noise_power``, ``num_layers``) accept a scalar or a
    sequence of the right length.
    """

    carrier_frequency: float = 30e9
    num_aps: int = 16
    num_ues: int = 8
    antenna_grid: tuple[int, int] = (4, 4)
    element_grid: tuple[int, int] = (16, 16)
    num_layers: int | tuple[int, ...] = 4
    inter_layer_distance: float | None = None
    radiation_gain: float = 10.0
    antenna_spacing: tuple[float, float] | None = None
    element_size: tuple[float, float] | None = None
    noise_power: float | tuple[float, ...] = 1e-11
    eps_ue: float | tuple[float, ...] = 1.0
    eps_ap: float | tuple[float, ...] = 1.0
    transmit_power: float | tuple[float, ...] = 0.1
    path_loss_exponent: float = 3.5
    reference_path_loss: float = 1e-3
    num_clusters: int = 4
    paths_per_cluster: int = 8
    elevation_mean_range: tuple[float, float] = (0.0, math.pi)
    azimuth_mean_range: tuple[float, float] = (0.0, 2.0 * math.pi)
    elevation_spread: float = math.radians(7.5)
    azimuth_spread: float = math.radians(7.5)
    angle_law: str = "uniform"
    radiation_coefficient: float = 1.0
    area_half_width: float = 100.0
    rng_seed: int = 0
    phase_bits: int | None = None
    iterations: int = 10
    ignore_hwi: bool = False
    quadrature_order: int = 8
    ap_positions: tuple[tuple[float, float], ...] | None = field(default=None, repr=False)
    ue_positions: tuple[tuple[float, float], ...] | None = field(default=None, repr=False)

    def __post_init__(self):
        self._check_positive("carrier_frequency")
        lam = wavelength(self.carrier_frequency)
        if self.inter_layer_distance is None:
            object.__setattr__(self, "inter_layer_distance", lam)
        if self.antenna_spacing is None:
            object.__setattr__(self, "antenna_spacing", (lam / 2, lam / 2))
        if self.element_size is None:
            object.__setattr__(self, "element_size", (lam / 4, lam / 4))
        for name in ("antenna_grid", "element_grid", "antenna_spacing", "element_size",
                     "elevation_mean_range", "azimuth_mean_range"):
            value = getattr(self, name)
            if np.isscalar(value):
                value = (value, value)
            object.__setattr__(self, name, tuple(value))
        for name in ("noise_power", "eps_ue", "eps_ap", "transmit_power", "num_layers"):
            object.__setattr__(self, name, _as_tuple(getattr(self, name)))
        if not np.isscalar(self.num_layers):
            object.__setattr__(self, "num_layers", tuple(int(t) for t in self.num_layers))
        for name in ("ap_positions", "ue_positions"):
            pos = getattr(self, name)
            if pos is not None:
                arr = np.asarray(pos, dtype=float).reshape(-1, 2)
                object.__setattr__(self, name, tuple(map(tuple, arr.tolist())))
        self._validate()

    def _check_positive(self, name):
        value = np.asarray(getattr(self, name), dtype=float)
        if not np.all(np.isfinite(value)) or np.any(value <= 0):
            raise ConfigError(f"{name} must be positive, got {getattr(self, name)!r}")

    def _validate(self):
        if self.num_aps < 1 or self.num_ues < 1:
            raise ConfigError("num_aps and num_ues must be at least 1")
        if min(self.antenna_grid) < 1 or min(self.element_grid) < 1:
            raise ConfigError("antenna_grid and element_grid entries must be at least 1")
        if min(self.layers_per_ap) < 1:
            raise ConfigError("every AP needs at least one SIM layer")
        for name in ("inter_layer_distance", "antenna_spacing", "element_size",
                     "noise_power", "transmit_power", "reference_path_loss"):
            self._check_positive(name)
        if self.radiation_gain < 1:
            raise ConfigError("radiation_gain is linear and must be >= 1")
        for name in ("eps_ue", "eps_ap", "radiation_coefficient"):
            value = np.asarray(getattr(self, name), dtype=float)
            if np.any(value < 0) or np.any(value > 1):
                raise ConfigError(f"{name} must lie in [0, 1]")
        if self.num_clusters < 1 or self.paths_per_cluster < 1:
            raise ConfigError("num_clusters and paths_per_cluster must be at least 1")
        if self.angle_law not in ("uniform", "gaussian"):
            raise ConfigError(f"unknown angle_law {self.angle_law!r}")
        if self.phase_bits is not None and self.phase_bits < 1:
            raise ConfigError("phase_bits must be >= 1 or None for continuous phases")
        if self.iterations < 0:
            raise ConfigError("iterations must be >= 0")
        if self.area_half_width <= 0:
            raise ConfigError("area_half_width must be positive")
        self.per_ap("noise_power")
        self.per_ap("eps_ap")
        self.per_ue("eps_ue")
        self.per_ue("transmit_power")
        for name, count in (("ap_positions", self.num_aps), ("ue_positions", self.num_ues)):
            pos = getattr(self, name)
            if pos is not None:
                if len(pos) != count:
                    raise ConfigError(f"{name} has {len(pos)} rows, expected {count}")
                if np.any(np.abs(np.asarray(pos)) > self.area_half_width):
                    raise ConfigError(f"{name} outside the square area")

    # derived quantities

    @property
    def wavelength(self) -> float:
        return wavelength(self.carrier_frequency)

    @property
    def num_antennas(self) -> int:
        return self.antenna_grid[0] * self.antenna_grid[1]

    @property
    def num_elements(self) -> int:
        return self.element_grid[0] * self.element_grid[1]

    @property
    def layers_per_ap(self) -> tuple[int, ...]:
        if np.isscalar(self.num_layers):
            return (int(self.num_layers),) * self.num_aps
        if len(self.num_layers) != self.num_aps:
            raise ConfigError(f"num_layers has {len(self.num_layers)} entries, expected {self.num_aps}")
        return self.num_layers

    def _broadcast(self, name, n, what):
        value = np.asarray(getattr(self, name), dtype=float)
        if value.ndim == 0:
            return np.full(n, float(value))
        if value.shape != (n,):
            raise ConfigError(f"{name} needs one value per {what} ({n}), got {value.shape[0]}")
        return value.copy()

    def per_ue(self, name) -> np.ndarray:
        return self._broadcast(name, self.num_ues, "UE")

    def per_ap(self, name) -> np.ndarray:
        return self._broadcast(name, self.num_aps, "AP")

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def desk(cls, **overrides) -> "SystemConfig":
        """Reduced configuration that keeps full test runs in the minutes range."""
        base = dict(num_aps=4, num_ues=3, antenna_grid=(2, 2), element_grid=(8, 8), num_layers=2)
        base.update(overrides)
        return cls(**base)


# ---------------------------------------------------------------------------
# textual configuration

_NUMBER = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_QUANTITY = re.compile(rf"^\s*({_NUMBER})\s*([A-Za-z%/]*)\s*$")

_SCALE = {
    "": 1.0, "w": 1.0, "mw": 1e-3, "hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9,
    "m": 1.0, "cm": 1e-2, "mm": 1e-3, "rad": 1.0, "deg": math.pi / 180,
}

_INT_FIELDS = {"num_aps", "num_ues", "num_clusters", "paths_per_cluster", "rng_seed",
               "iterations", "quadrature_order"}
_GRID_FIELDS = {"antenna_grid", "element_grid"}
_LENGTH_FIELDS = {"inter_layer_distance", "antenna_spacing", "element_size", "area_half_width"}
_BOOL_FIELDS = {"ignore_hwi"}
_STRING_FIELDS = {"angle_law"}
CONFIG_KEYS = tuple(f.name for f in dataclasses.fields(SystemConfig))


def parse_quantity(text: str, lam: float | None = None) -> float:
    """Parse ``"<number> [unit]"`` into SI / linear units.

    >>> parse_quantity("-80 dBm")
    1e-11
    """
    m = _QUANTITY.match(str(text))
    if m is None:
        raise ConfigError(f"malformed numeral {text!r}")
    value = float(m.group(1))
    unit = m.group(2).lower()
    if unit == "dbm":
        return float(dbm_to_watts(value))
    if unit == "db":
        return float(db_to_linear(value))
    if unit in ("lambda", "lam", "wl"):
        if lam is None:
            raise ConfigError(f"{text!r} needs a carrier frequency")
        return value * lam
    if unit not in _SCALE:
        raise ConfigError(f"unknown unit {m.group(2)!r} in {text!r}")
    return value * _SCALE[unit]


def _parse_int(key, text):
    try:
        return int(str(text).strip())
    except ValueError:
        raise ConfigError(f"{key}: malformed integer {text!r}") from None


def _parse_grid(key, text):
    parts = re.split(r"\s*[x×,*]\s*", str(text).strip().lower())
    if len(parts) == 1:
        parts = parts * 2
    if len(parts) != 2:
        raise ConfigError(f"{key}: expected a grid like '4x4', got {text!r}")
    return tuple(_parse_int(key, p) for p in parts)


def convert_units(raw: Mapping[str, str], base: SystemConfig | None = None) -> SystemConfig:
    """Build a :class:`SystemConfig` from textual ``key -> value`` pairs.

    Values may carry units (``dBm``, ``dB``, ``W``, ``GHz``, ``m``, ``mm``,
    ``lambda``, ``deg``). Lists are comma separated; grids are written
    ``4x4``. ``phase_bits = continuous`` selects unquantised phases.
    The special keys ``ap_positions_file`` / ``ue_positions_file`` point
    at CSV sidecars (columns ``id,x,y``).
    """
    base = base or SystemConfig()
    raw = {str(k).strip().replace("-", "_"): v for k, v in raw.items()}
    changes = {}
    freq = base.carrier_frequency
    if "carrier_frequency" in raw:
        freq = parse_quantity(raw["carrier_frequency"])
        changes["carrier_frequency"] = freq
    lam = wavelength(freq) if freq > 0 else None
    for key, text in raw.items():
        if key == "carrier_frequency":
            continue
        if key in ("ap_positions_file", "ue_positions_file"):
            changes[key[:-5]] = read_positions_csv(text)
            continue
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown configuration key {key!r}")
        text = str(text).strip()
        if key in _INT_FIELDS:
            changes[key] = _parse_int(key, text)
        elif key in _GRID_FIELDS:
            changes[key] = _parse_grid(key, text)
        elif key in _BOOL_FIELDS:
            if text.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ConfigError(f"{key}: expected a boolean, got {text!r}")
            changes[key] = text.lower() in ("true", "1", "yes")
        elif key in _STRING_FIELDS:
            changes[key] = text
        elif key == "phase_bits":
            changes[key] = None if text.lower() in ("continuous", "none", "inf") else _parse_int(key, text)
        elif key == "num_layers":
            vals = [_parse_int(key, p) for p in text.split(",")]
            changes[key] = vals[0] if len(vals) == 1 else tuple(vals)
        else:
            vals = [parse_quantity(p, lam) for p in text.split(",")]
            changes[key] = vals[0] if len(vals) == 1 else tuple(vals)
    # stale derived lengths must re-resolve from the new wavelength
    if "carrier_frequency" in changes:
        for name in ("inter_layer_distance", "antenna_spacing", "element_size"):
            if name not in changes:
                changes[name] = None
    return dataclasses.replace(base, **changes)


def read_config_file(path, base: SystemConfig | None = None, overrides: Mapping[str, str] | None = None):
    """Read a flat ``key = value`` file (``#`` comments) into a config."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    text = Path(path).read_text(encoding="utf-8")
    try:
        parser.read_string("[config]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    raw = dict(parser["config"])
    raw.update(overrides or {})
    return convert_units(raw, base)


def read_positions_csv(path) -> tuple[tuple[float, float], ...]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    try:
        rows.sort(key=lambda r: int(r["id"]))
        return tuple((float(r["x"]), float(r["y"])) for r in rows)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"{path}: expected columns id,x,y ({exc})") from None


def write_positions_csv(path, positions) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "x", "y"])
        for i, (x, y) in enumerate(np.asarray(positions, dtype=float)):
            w.writerow([i, repr(float(x)), repr(float(y))])


# ---------------------------------------------------------------------------
# geometry

def planar_grid(shape: Sequence[int], pitch: Sequence[float]) -> np.ndarray:
    """(n_x * n_y, 2) offsets of a grid centred on the origin, x index fastest."""
    nx, ny = shape
    xs = (np.arange(nx) - (nx - 1) / 2) * pitch[0]
    ys = (np.arange(ny) - (ny - 1) / 2) * pitch[1]
    gx, gy = np.meshgrid(xs, ys)  # rows follow y, so ravel() is x-fastest
    return np.column_stack([gx.ravel(), gy.ravel()])


def grid_deployment(count: int, half_width: float) -> np.ndarray:
    """Cell centres of a regular partition of the square, filled row-major."""
    cols = math.isqrt(count)
    if cols * cols != count:
        cols = math.ceil(math.sqrt(count))
    rows = math.ceil(count / cols)
    xs = -half_width + (np.arange(cols) + 0.5) * (2 * half_width / cols)
    ys = -half_width + (np.arange(rows) + 0.5) * (2 * half_width / rows)
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])[:count]


@dataclass(frozen=True, eq=False)
class NetworkLayout:
    """Positions of APs, UEs, antennas and SIM elements.

    Each AP has a local frame: antennas on the plane ``z = 0`` centred on the
    AP axis and SIM layer ``t`` on ``z = t * gap``. Global coordinates add
    the AP's ground position. UEs sit on ``z = 0``.
    """

    ap_positions: np.ndarray
    ue_positions: np.ndarray
    local_antennas: np.ndarray
    local_elements: tuple[np.ndarray, ...]
    distances: np.ndarray
    nearest_ap_sets: tuple[tuple[int, ...], ...]
    layers_per_ap: tuple[int, ...]

    @property
    def num_aps(self):
        return self.ap_positions.shape[0]

    @property
    def num_ues(self):
        return self.ue_positions.shape[0]

    def _origin(self, l):
        return np.array([self.ap_positions[l, 0], self.ap_positions[l, 1], 0.0])

    def antenna_coords(self, l) -> np.ndarray:
        return self.local_antennas + self._origin(l)

    def element_coords(self, l) -> np.ndarray:
        """(T_l, N, 3) global element coordinates of AP ``l``."""
        return self.local_elements[l] + self._origin(l)

    def reference_point(self, l) -> np.ndarray:
        """Centre of the outermost SIM layer, the anchor for UE distances."""
        return self._origin(l) + np.array([0.0, 0.0, self.local_elements[l][-1, 0, 2]])


def ue_ap_distances(ue_positions, reference_points) -> np.ndarray:
    ue = np.column_stack([ue_positions, np.zeros(len(ue_positions))])
    diff = ue[:, None, :] - np.asarray(reference_points)[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def nearest_sets(distances) -> tuple[tuple[int, ...], ...]:
    """Per UE, every AP index attaining the minimum distance (ties kept)."""
    return tuple(tuple(int(i) for i in np.flatnonzero(row <= row.min())) for row in distances)


def build_layout(config: SystemConfig, rng: np.random.Generator | None = None) -> NetworkLayout:
    """Place APs on a regular grid and UEs uniformly in the square area.

    Explicit ``ap_positions`` / ``ue_positions`` in the config take
    precedence. ``rng`` defaults to one seeded from ``config.rng_seed``.
    """
    if config.num_aps < 1 or config.num_ues < 1:
        raise GeometryError("need at least one AP and one UE")
    if min(config.antenna_spacing) <= 0 or min(config.element_size) <= 0 or config.inter_layer_distance <= 0:
        raise GeometryError("spacings must be positive")
    rng = np.random.default_rng(config.rng_seed) if rng is None else rng
    half = config.area_half_width
    if config.ap_positions is not None:
        aps = np.asarray(config.ap_positions, dtype=float)
    else:
        aps = grid_deployment(config.num_aps, half)
    if config.ue_positions is not None:
        ues = np.asarray(config.ue_positions, dtype=float)
    else:
        ues = rng.uniform(-half, half, size=(config.num_ues, 2))

    gap = config.inter_layer_distance
    ant = planar_grid(config.antenna_grid, config.antenna_spacing)
    local_antennas = np.column_stack([ant, np.zeros(len(ant))])
    elem = planar_grid(config.element_grid, config.element_size)
    layer_cache = {}
    local_elements = []
    for t_count in config.layers_per_ap:
        if t_count not in layer_cache:
            layers = np.empty((t_count, len(elem), 3))
            layers[:, :, :2] = elem
            layers[:, :, 2] = (np.arange(1, t_count + 1) * gap)[:, None]
            layer_cache[t_count] = layers
        local_elements.append(layer_cache[t_count])

    refs = np.column_stack([aps, np.array([le[-1, 0, 2] for le in local_elements])])
    dist = ue_ap_distances(ues, refs)
    return NetworkLayout(
        ap_positions=aps,
        ue_positions=ues,
        local_antennas=local_antennas,
        local_elements=tuple(local_elements),
        distances=dist,
        nearest_ap_sets=nearest_sets(dist),
        layers_per_ap=tuple(config.layers_per_ap),
    )
