"""upsf: ultrasound PSF simulation and estimation under phase aberration.

A numpy/scipy laboratory that synthesizes aberrated point spread functions
and speckle from first principles, trains small real and complex
image-to-image networks to invert the speckle-formation convolution, and
scores predictions with SSIM, lateral-beam-pattern distance, and banded
IoU metrics.
"""

from .aberration import ABERRATION_LEVELS, AberrationProfile, Pulse, generate_phase_screen, simulate_psf
from .core import (
    ComplexKind,
    ComplexPatch,
    ConfigError,
    Grid,
    GridMismatchError,
    PatchKind,
    RealPatch,
    SimConfig,
    SimulationError,
    default_config,
    grid_from_config,
    load_config,
    parse_config_text,
    wavelength,
)
from .metrics import MetricsReport, iou_bands, lbpd, report_for, sidelobe_energy_ratio, ssim_db
from .oracle import wiener_recover_psf
from .sigproc import (
    baseband_demodulate,
    bmode,
    envelope,
    fft2_centered,
    fft2c_array,
    ifft2_centered,
    ifft2c_array,
    log_compress,
)
from .speckle import Manifest, TrainingPair, convolve, convolve_arrays, generate_scatterers, make_dataset, make_pair
from .tensorfile import TensorFileError, read_tensor, write_pgm, write_tensor

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "ABERRATION_LEVELS",
    "AberrationProfile",
    "Pulse",
    "generate_phase_screen",
    "simulate_psf",
    "ComplexKind",
    "ComplexPatch",
    "ConfigError",
    "Grid",
    "GridMismatchError",
    "PatchKind",
    "RealPatch",
    "SimConfig",
    "SimulationError",
    "default_config",
    "grid_from_config",
    "load_config",
    "parse_config_text",
    "wavelength",
    "MetricsReport",
    "iou_bands",
    "lbpd",
    "report_for",
    "sidelobe_energy_ratio",
    "ssim_db",
    "wiener_recover_psf",
    "baseband_demodulate",
    "bmode",
    "envelope",
    "fft2_centered",
    "fft2c_array",
    "ifft2_centered",
    "ifft2c_array",
    "log_compress",
    "Manifest",
    "TrainingPair",
    "convolve",
    "convolve_arrays",
    "generate_scatterers",
    "make_dataset",
    "make_pair",
    "TensorFileError",
    "read_tensor",
    "write_pgm",
    "write_tensor",
]
