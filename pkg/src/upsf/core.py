"""Core domain types: simulation configuration, sample grids, and patches.

All physical quantities are SI internally (meters, seconds, Hz, m/s).
The textual config format and the CLI accept MHz/mm at the boundary and
convert on load; see :func:`load_config`.

Conventions used throughout the package:

* the axial (depth, z) index is the first array dimension, the lateral
  (x) index the second, matching B-mode display orientation;
* the "center pixel" of an ``nz x nx`` grid is ``(nz // 2, nx // 2)``,
  which is also the DC bin of centered Fourier transforms;
* decibel images are stored shifted to ``[0, dynamic_range]`` where 0 is
  the clipping floor and ``dynamic_range`` the peak.
"""

from __future__ import annotations

import enum
import math
import os
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "ConfigError",
    "SimulationError",
    "GridMismatchError",
    "SimConfig",
    "Grid",
    "PatchKind",
    "ComplexKind",
    "RealPatch",
    "ComplexPatch",
    "wavelength",
    "grid_from_config",
    "default_config",
    "load_config",
    "parse_config_text",
    "config_to_text",
    "ENV_PREFIX",
]

# Accepted-without-warning ranges (wider values only warn, they do not fail).
_FC_QUIET_RANGE = (3e6, 7.5e6)  # Hz
_MAX_PHASE_QUIET = math.pi / 2  # rad


class ConfigError(ValueError):
    """Invalid configuration value.

    Carries a machine-readable ``code`` of the form ``"<field>.<check>"``
    so each out-of-range field is distinguishable.
    """

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


class SimulationError(RuntimeError):
    """Raised when a simulation cannot proceed (e.g. empty active aperture)."""


class GridMismatchError(ValueError):
    """Raised when an operation receives patches on incompatible grids."""


@dataclass(frozen=True)
class SimConfig:
    """Array and medium parameters for PSF/speckle synthesis.

    Parameters
    ----------
    n_elements : int
        Number of transducer elements (>= 2).
    pitch : float
        Element pitch in meters.
    fc : float
        Transmit center frequency in Hz. 3-7.5 MHz is accepted silently;
        values outside that band trigger a warning but are usable.
    fractional_bandwidth : float
        Pulse FWHM bandwidth divided by ``fc``; must be in (0, 1).
    c : float
        Speed of sound in m/s.
    f_number : float
        Receive/transmit f-number (depth / active aperture width).
    depth : float
        Target depth in meters.
    max_phase_error : float
        Peak phase error of the aberration screen, radians at ``fc``.
        Values above pi/2 warn; negative values are rejected.
    corr_length : float
        Aberration correlation length in meters.
    dynamic_range : float
        Display dynamic range in dB for log compression.
    """

    n_elements: int = 128
    pitch: float = 0.3e-3
    fc: float = 5e6
    fractional_bandwidth: float = 0.6
    c: float = 1540.0
    f_number: float = 2.0
    depth: float = 25e-3
    max_phase_error: float = math.pi / 4
    corr_length: float = 5e-3
    dynamic_range: float = 60.0

    def __post_init__(self):
        if not isinstance(self.n_elements, (int, np.integer)) or self.n_elements < 2:
            raise ConfigError("n_elements.range", f"n_elements must be an integer >= 2, got {self.n_elements}")
        if not self.pitch > 0:
            raise ConfigError("pitch.range", f"pitch must be positive, got {self.pitch}")
        if not self.fc > 0:
            raise ConfigError("fc.range", f"fc must be positive, got {self.fc}")
        if not 0 < self.fractional_bandwidth < 1:
            raise ConfigError(
                "fractional_bandwidth.range",
                f"fractional_bandwidth must be in (0, 1), got {self.fractional_bandwidth}",
            )
        if not self.c > 0:
            raise ConfigError("c.range", f"c must be positive, got {self.c}")
        if not self.f_number > 0:
            raise ConfigError("f_number.range", f"f_number must be positive, got {self.f_number}")
        if not self.depth > 0:
            raise ConfigError("depth.range", f"depth must be positive, got {self.depth}")
        if self.max_phase_error < 0:
            raise ConfigError(
                "max_phase_error.range",
                f"max_phase_error must be >= 0, got {self.max_phase_error}",
            )
        if not self.corr_length > 0:
            raise ConfigError("corr_length.range", f"corr_length must be positive, got {self.corr_length}")
        if not self.dynamic_range > 0:
            raise ConfigError("dynamic_range.range", f"dynamic_range must be positive, got {self.dynamic_range}")

        lo, hi = _FC_QUIET_RANGE
        if not lo <= self.fc <= hi:
            warnings.warn(
                f"fc = {self.fc / 1e6:g} MHz is outside the usual {lo / 1e6:g}-{hi / 1e6:g} MHz band",
                stacklevel=2,
            )
        if self.max_phase_error > _MAX_PHASE_QUIET:
            warnings.warn(
                f"max_phase_error = {self.max_phase_error:g} rad exceeds pi/2",
                stacklevel=2,
            )

    @property
    def wavelength(self) -> float:
        """Wavelength c/fc in meters."""
        return self.c / self.fc

    def with_max_phase_error(self, level: float) -> "SimConfig":
        """Copy of this config at a different aberration level (radians)."""
        return replace(self, max_phase_error=level)

    def element_positions(self) -> np.ndarray:
        """Lateral element center positions in meters, centered on x = 0."""
        n = self.n_elements
        return (np.arange(n) - (n - 1) / 2.0) * self.pitch


def wavelength(c: float, fc: float) -> float:
    """Wavelength in meters for sound speed ``c`` (m/s) and frequency ``fc`` (Hz)."""
    if not c > 0:
        raise ValueError(f"c must be positive, got {c}")
    if not fc > 0:
        raise ValueError(f"fc must be positive, got {fc}")
    return c / fc


@dataclass(frozen=True)
class Grid:
    """Uniform 2D sample grid.

    ``origin`` holds the physical (x, z) coordinates of pixel ``(0, 0)``
    (row 0 = shallowest axial sample). Row index is axial, column index
    lateral.
    """

    nx: int
    nz: int
    dx: float  # lateral sample interval [m]
    dz: float  # axial sample interval [m]
    origin: tuple[float, float]  # (x0, z0) of pixel (0, 0) [m]
    wavelength: float  # [m]

    def __post_init__(self):
        if self.nx < 1 or self.nz < 1:
            raise ConfigError("grid.size", f"grid must have positive extent, got {self.nz}x{self.nx}")
        if not (self.dx > 0 and self.dz > 0):
            raise ConfigError("grid.spacing", f"grid spacing must be positive, got dx={self.dx}, dz={self.dz}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nz, self.nx)

    @property
    def width(self) -> float:
        """Patch width nx*dx in meters."""
        return self.nx * self.dx

    @property
    def height(self) -> float:
        """Patch height nz*dz in meters."""
        return self.nz * self.dz

    @property
    def center_index(self) -> tuple[int, int]:
        """(row, col) of the center pixel; DC bin of centered transforms."""
        return (self.nz // 2, self.nx // 2)

    def x_coords(self) -> np.ndarray:
        """Lateral coordinates of all columns [m]."""
        return self.origin[0] + self.dx * np.arange(self.nx)

    def z_coords(self) -> np.ndarray:
        """Axial coordinates of all rows [m]."""
        return self.origin[1] + self.dz * np.arange(self.nz)

    def physical(self, iz: int, ix: int) -> tuple[float, float]:
        """Physical (x, z) of pixel (iz, ix)."""
        return (self.origin[0] + ix * self.dx, self.origin[1] + iz * self.dz)

    def index(self, x: float, z: float) -> tuple[int, int]:
        """Nearest pixel (iz, ix) for physical (x, z)."""
        ix = int(round((x - self.origin[0]) / self.dx))
        iz = int(round((z - self.origin[1]) / self.dz))
        return (iz, ix)

    def compatible(self, other: "Grid") -> bool:
        """Same shape and spacing (origin may differ)."""
        return (
            self.shape == other.shape
            and math.isclose(self.dx, other.dx, rel_tol=1e-12)
            and math.isclose(self.dz, other.dz, rel_tol=1e-12)
        )


def grid_from_config(cfg: SimConfig, nx: int = 256, nz: int = 256) -> Grid:
    """Build the standard grid for ``cfg``: dx = lambda/32, dz = lambda/16.

    The grid is centered on the point target at (0, cfg.depth): the center
    pixel ``(nz//2, nx//2)`` lands exactly on the target.
    """
    lam = cfg.wavelength
    dx = lam / 32.0
    dz = lam / 16.0
    x0 = -dx * (nx // 2)
    z0 = cfg.depth - dz * (nz // 2)
    return Grid(nx=nx, nz=nz, dx=dx, dz=dz, origin=(x0, z0), wavelength=lam)


class PatchKind(enum.Enum):
    RF = "rf"
    ENVELOPE = "envelope"
    DECIBEL = "decibel"
    SCATTERER = "scatterer"


class ComplexKind(enum.Enum):
    BASEBAND = "baseband"  # spatial-domain complex samples
    KSPACE = "kspace"  # DC-centered 2D spectrum


@dataclass(frozen=True)
class RealPatch:
    """2D real-valued sample patch (RF, envelope, dB, or scatterer map)."""

    grid: Grid
    kind: PatchKind
    data: np.ndarray  # (nz, nx), axial index first

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        object.__setattr__(self, "data", data)
        if data.shape != self.grid.shape:
            raise ValueError(f"data shape {data.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("patch contains non-finite samples")

    def with_data(self, data: np.ndarray, kind: PatchKind | None = None) -> "RealPatch":
        return RealPatch(grid=self.grid, kind=self.kind if kind is None else kind, data=data)


@dataclass(frozen=True)
class ComplexPatch:
    """2D complex-valued sample patch (baseband or DC-centered k-space)."""

    grid: Grid
    kind: ComplexKind
    data: np.ndarray  # (nz, nx) complex

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.complex128)
        object.__setattr__(self, "data", data)
        if data.shape != self.grid.shape:
            raise ValueError(f"data shape {data.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(data.real)) or not np.all(np.isfinite(data.imag)):
            raise ValueError("patch contains non-finite samples")


# ---------------------------------------------------------------------------
# Textual configuration: `key = value` lines, MHz/mm at the boundary.
# ---------------------------------------------------------------------------

ENV_PREFIX = "UPSF_"

# key -> (SimConfig field, scale to SI, parser)
_CONFIG_KEYS = {
    "n_elements": ("n_elements", 1, int),
    "pitch_mm": ("pitch", 1e-3, float),
    "fc_mhz": ("fc", 1e6, float),
    "fractional_bandwidth": ("fractional_bandwidth", 1, float),
    "c": ("c", 1, float),
    "f_number": ("f_number", 1, float),
    "depth_mm": ("depth", 1e-3, float),
    "max_phase_error": ("max_phase_error", 1, float),
    "corr_length_mm": ("corr_length", 1e-3, float),
    "dynamic_range_db": ("dynamic_range", 1, float),
}


def default_config() -> SimConfig:
    """Documented defaults: fc = 5 MHz, fractional_bandwidth = 0.6, depth = 25 mm."""
    return SimConfig()


def parse_config_text(text: str, base: SimConfig | None = None) -> SimConfig:
    """Parse `key = value` lines into a :class:`SimConfig`.

    Blank lines and lines starting with ``#`` are ignored. Unknown keys are
    rejected. Values use CLI units: MHz for fc, mm for pitch/depth/corr
    length, radians for max_phase_error, m/s for c, dB for dynamic range.
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("config.syntax", f"line {lineno}: expected `key = value`, got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError("config.key", f"line {lineno}: unknown config key {key!r}")
        field_name, scale, parser = _CONFIG_KEYS[key]
        try:
            parsed = parser(val)
        except ValueError as exc:
            raise ConfigError("config.value", f"line {lineno}: cannot parse {val!r} for {key}: {exc}") from exc
        values[field_name] = parsed * scale if scale != 1 else parsed
    cfg = base if base is not None else default_config()
    return replace(cfg, **values) if values else cfg


def _apply_env_overrides(cfg: SimConfig, environ) -> SimConfig:
    values = {}
    for key, (field_name, scale, parser) in _CONFIG_KEYS.items():
        env_key = ENV_PREFIX + key.upper()
        if env_key in environ:
            parsed = parser(environ[env_key])
            values[field_name] = parsed * scale if scale != 1 else parsed
    return replace(cfg, **values) if values else cfg


def load_config(path: str | None = None, environ=None) -> SimConfig:
    """Load a config file (or defaults) and apply ``UPSF_*`` env overrides.

    Environment variables named ``UPSF_<KEY>`` (key upper-cased, e.g.
    ``UPSF_FC_MHZ=3``) override both defaults and file values.
    """
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = parse_config_text(fh.read())
    else:
        cfg = default_config()
    return _apply_env_overrides(cfg, os.environ if environ is None else environ)


def config_to_text(cfg: SimConfig) -> str:
    """Serialize ``cfg`` to the textual `key = value` format (CLI units)."""
    lines = []
    for key, (field_name, scale, parser) in _CONFIG_KEYS.items():
        value = getattr(cfg, field_name)
        if scale != 1:
            value = value / scale
        lines.append(f"{key} = {value!r}")
    return "\n".join(lines) + "\n"
