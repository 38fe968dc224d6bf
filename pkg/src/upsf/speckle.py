"""Scatterer fields, linear convolution, and training-pair production.

Observed speckle is the convolution of a scatterer reflectivity map with
the system PSF. Scatterer amplitudes are i.i.d. standard Gaussian at every
pixel: spatially uniform, and giving exactly Rayleigh-distributed envelopes
(fully developed speckle) so the envelope SNR mean/std is sqrt(pi/(4-pi))
~= 1.913.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy.fft import next_fast_len, rfft2, irfft2

from .aberration import ABERRATION_LEVELS, generate_phase_screen, simulate_psf
from .core import Grid, GridMismatchError, PatchKind, RealPatch, SimConfig
from .tensorfile import file_crc32, write_tensor

__all__ = [
    "TrainingPair",
    "Manifest",
    "generate_scatterers",
    "convolve",
    "convolve_arrays",
    "make_pair",
    "make_dataset",
    "load_manifest",
]

MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1


@dataclass(frozen=True)
class TrainingPair:
    """A speckle patch, its underlying PSF, and the generation metadata."""

    speckle: RealPatch
    psf: RealPatch
    cfg: SimConfig
    profile_seed: int
    scatterer_seed: int
    aberration_level: float  # radians at fc


def generate_scatterers(grid: Grid, seed: int, margin: int = 0) -> RealPatch:
    """I.i.d. standard Gaussian scatterer amplitudes at every grid pixel.

    A positive ``margin`` zeroes that many border pixels, confining the
    scatterers to the interior; the non-blind recovery oracle needs this so
    the observed patch captures the scatterers' entire response.
    """
    if margin < 0 or 2 * margin >= min(grid.shape):
        raise ValueError(f"margin {margin} incompatible with grid {grid.shape}")
    rng = np.random.Generator(np.random.PCG64(seed))
    data = rng.standard_normal(grid.shape)
    if margin:
        interior = np.zeros(grid.shape)
        interior[margin:-margin, margin:-margin] = data[margin:-margin, margin:-margin]
        data = interior
    return RealPatch(grid=grid, kind=PatchKind.SCATTERER, data=data)


def convolve_arrays(f: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Zero-padded linear convolution of two same-shape arrays, center crop.

    The crop is aligned so that an impulse at the grid center pixel
    ``(nz//2, nx//2)`` reproduces ``h`` exactly.
    """
    if f.shape != h.shape:
        raise ValueError(f"shape mismatch: {f.shape} vs {h.shape}")
    nz, nx = f.shape
    mz = next_fast_len(2 * nz - 1)
    mx = next_fast_len(2 * nx - 1)
    full = irfft2(rfft2(f, (mz, mx)) * rfft2(h, (mz, mx)), (mz, mx))
    cz, cx = nz // 2, nx // 2
    return full[cz : cz + nz, cx : cx + nx].copy()


def convolve(f: RealPatch, h: RealPatch, normalize: bool = False) -> RealPatch:
    """Linear convolution of two patches on compatible grids.

    Computed in the frequency domain with zero padding; the central
    same-size crop is returned on ``f``'s grid. Peak normalization is
    applied only when requested.
    """
    if not f.grid.compatible(h.grid):
        raise GridMismatchError(
            f"incompatible grids: {f.grid.shape}@({f.grid.dx:g},{f.grid.dz:g}) vs "
            f"{h.grid.shape}@({h.grid.dx:g},{h.grid.dz:g})"
        )
    g = convolve_arrays(f.data, h.data)
    if normalize:
        peak = np.max(np.abs(g))
        if peak > 0:
            g = g / peak
    return RealPatch(grid=f.grid, kind=h.kind, data=g)


def make_pair(
    cfg: SimConfig,
    grid: Grid,
    profile_seed: int,
    scatterer_seed: int,
    delta_scatterers: bool = False,
) -> TrainingPair:
    """Assemble one training pair: screen -> PSF -> scatterers -> speckle.

    With ``delta_scatterers`` the scatterer map is a unit impulse at the
    grid center, so the speckle member equals the PSF.
    """
    profile = generate_phase_screen(cfg, profile_seed)
    psf = simulate_psf(cfg, profile, grid)
    if delta_scatterers:
        scat_data = np.zeros(grid.shape)
        scat_data[grid.center_index] = 1.0
        scatterers = RealPatch(grid=grid, kind=PatchKind.SCATTERER, data=scat_data)
    else:
        scatterers = generate_scatterers(grid, scatterer_seed)
    speckle = convolve(scatterers, psf)
    return TrainingPair(
        speckle=speckle,
        psf=psf,
        cfg=cfg,
        profile_seed=profile_seed,
        scatterer_seed=scatterer_seed,
        aberration_level=cfg.max_phase_error,
    )


def pair_seeds(base_seed: int, index: int) -> tuple[int, int]:
    """Deterministic per-pair seeds: (base + 2i, base + 2i + 1)."""
    return base_seed + 2 * index, base_seed + 2 * index + 1


def pair_level(base_seed: int, index: int) -> float:
    """Aberration level for pair ``index``: seeded uniform choice over the
    four standard levels {0, pi/4, 3pi/8, pi/2}."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([base_seed, index])))
    return ABERRATION_LEVELS[rng.integers(len(ABERRATION_LEVELS))]


@dataclass
class Manifest:
    """Dataset inventory with per-file checksums."""

    version: int
    n_pairs: int
    base_seed: int
    complete: bool
    config: dict
    grid: dict
    entries: list
    error: str | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Manifest":
        return cls(**json.loads(text))


def _grid_dict(grid: Grid) -> dict:
    return {
        "nx": grid.nx,
        "nz": grid.nz,
        "dx": grid.dx,
        "dz": grid.dz,
        "origin": list(grid.origin),
        "wavelength": grid.wavelength,
    }


def _config_dict(cfg: SimConfig) -> dict:
    return asdict(cfg)


def _write_pair(args) -> dict:
    cfg, grid, base_seed, index, out_dir = args
    profile_seed, scatterer_seed = pair_seeds(base_seed, index)
    level = pair_level(base_seed, index)
    pair = make_pair(cfg.with_max_phase_error(level), grid, profile_seed, scatterer_seed)
    stem = f"{index:06d}"
    speckle_path = os.path.join("pairs", f"{stem}.speckle.ut")
    psf_path = os.path.join("pairs", f"{stem}.psf.ut")
    for rel, patch in ((speckle_path, pair.speckle), (psf_path, pair.psf)):
        full = os.path.join(out_dir, rel)
        try:
            write_tensor(full, patch.data)
        except OSError as exc:
            raise OSError(f"failed writing {full}: {exc}") from exc
    return {
        "index": index,
        "profile_seed": profile_seed,
        "scatterer_seed": scatterer_seed,
        "aberration_level": level,
        "speckle": {"path": speckle_path, "crc32": file_crc32(os.path.join(out_dir, speckle_path))},
        "psf": {"path": psf_path, "crc32": file_crc32(os.path.join(out_dir, psf_path))},
    }


def make_dataset(
    cfg: SimConfig,
    grid: Grid,
    n_pairs: int,
    base_seed: int,
    workers: int = 1,
    out_dir: str = ".",
) -> Manifest:
    """Generate ``n_pairs`` training pairs on disk and write a manifest.

    Pair ``i`` uses profile seed ``base_seed + 2i`` and scatterer seed
    ``base_seed + 2i + 1``; its aberration level is a seeded uniform choice
    over {0, pi/4, 3pi/8, pi/2}. Output bytes are identical for any worker
    count. If generation fails partway, the manifest is still written with
    ``complete = false`` before the error propagates.
    """
    if n_pairs < 0:
        raise ValueError(f"n_pairs must be >= 0, got {n_pairs}")
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")

    os.makedirs(os.path.join(out_dir, "pairs"), exist_ok=True)
    jobs = [(cfg, grid, base_seed, i, out_dir) for i in range(n_pairs)]

    entries = []
    error: Exception | None = None
    try:
        if workers == 1:
            for job in jobs:
                entries.append(_write_pair(job))
        else:
            # Threads, not processes: the synthesis kernel is internally
            # parallel and releases the GIL, and pair content is fixed by
            # seeds, so the on-disk bytes never depend on scheduling.
            with ThreadPoolExecutor(max_workers=workers) as pool:
                for entry in pool.map(_write_pair, jobs):
                    entries.append(entry)
    except Exception as exc:
        error = exc

    entries.sort(key=lambda e: e["index"])
    manifest = Manifest(
        version=MANIFEST_VERSION,
        n_pairs=n_pairs,
        base_seed=base_seed,
        complete=error is None and len(entries) == n_pairs,
        config=_config_dict(cfg),
        grid=_grid_dict(grid),
        entries=entries,
        error=None if error is None else str(error),
    )
    with open(os.path.join(out_dir, MANIFEST_NAME), "w", encoding="utf-8") as fh:
        fh.write(manifest.to_json())
    if error is not None:
        raise error
    return manifest


def load_manifest(dataset_dir: str) -> Manifest:
    with open(os.path.join(dataset_dir, MANIFEST_NAME), "r", encoding="utf-8") as fh:
        return Manifest.from_json(fh.read())
