"""Shared fixtures: calibrated configs and session-scoped synthetic maps."""

import numpy as np
import pytest

import magkerr as mk
from magkerr import presets


@pytest.fixture(scope="session")
def cfg():
    return presets.system()


@pytest.fixture(scope="session")
def fig2_drive():
    """25 dBm Kittel drive at 9.8 GHz, calibrated to a -60 MHz apex shift."""
    return presets.kittel_drive()


@pytest.fixture(scope="session")
def fig3_drive():
    """25 dBm HMS drive at 10.1 GHz, calibrated to a -30 MHz apex shift."""
    return presets.hms_drive()


@pytest.fixture(scope="session")
def fig2_map(cfg, fig2_drive):
    currents, probe = presets.driven_sweep_grids(fig2_drive)
    return mk.synthesize_map(cfg, currents, probe, fig2_drive, workers=4)


@pytest.fixture(scope="session")
def fig3_map(cfg, fig3_drive):
    currents, probe = presets.driven_sweep_grids(
        fig3_drive, detuning_span=(-100.0, 60.0))
    return mk.synthesize_map(cfg, currents, probe, fig3_drive, workers=4)


@pytest.fixture(scope="session")
def undriven_map(cfg):
    """Coarse undriven map spanning both cavity crossings."""
    f_lo, f_hi = 9700.0, 10150.0
    currents = mk.current_for_frequency(
        cfg.calibration, np.arange(f_lo, f_hi, 1.0))
    probe = np.arange(9550.0, 10550.0, 0.5)
    return mk.synthesize_map(cfg, currents, probe, drive=None, workers=4)
