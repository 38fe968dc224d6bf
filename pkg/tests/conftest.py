import numpy as np
import pytest

import upsf


@pytest.fixture(scope="session")
def cfg():
    return upsf.default_config()


@pytest.fixture(scope="session")
def cfg0(cfg):
    """Default config with the aberration switched off."""
    return cfg.with_max_phase_error(0.0)


@pytest.fixture(scope="session")
def grid64(cfg):
    return upsf.grid_from_config(cfg, 64, 64)


@pytest.fixture(scope="session")
def psf0_64(cfg0, grid64):
    """Unaberrated 64x64 PSF, shared across tests (synthesis is the slow part)."""
    profile = upsf.generate_phase_screen(cfg0, seed=1)
    return upsf.simulate_psf(cfg0, profile, grid64)


@pytest.fixture()
def rng():
    return np.random.Generator(np.random.PCG64(1234))
