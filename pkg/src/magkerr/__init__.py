"""magkerr: steady-state simulation and analysis of Kerr-nonlinear cavity magnonics.

A numpy/scipy toolkit for a microwave cavity coupled to two magnon modes (the
uniform Kittel mode and a higher-order magnetostatic mode) that interact
through self- and cross-Kerr nonlinearities. It solves the mean-field cubic
shift equation with branch following and hysteresis, synthesizes |S21|^2
transmission maps, extracts mode frequency shifts from maps the way one would
from swept vector-network-analyzer data, and fits the drive-efficiency and
Kerr-coefficient ratios back out.
"""

from .model import (
    HBAR,
    MU0,
    CouplingSet,
    CrossKerrResult,
    DispersiveReport,
    DriveConfig,
    FieldCalibration,
    KerrSet,
    MaterialParams,
    Mode,
    ModeParams,
    SweepDirection,
    SystemConfig,
    config_from_dict,
    config_to_dict,
    cross_kerr_from_overlap,
    current_for_frequency,
    dbm_to_mw,
    dispersive_check,
    drive_from_dict,
    kerr_self_from_material,
    load_config_dict,
    load_system_config,
    mode_frequencies_at_current,
)
from .steady_state import (
    ShiftSolution,
    SweepPoint,
    SweepResult,
    bistability_threshold,
    classify_stability,
    cross_shift,
    cubic_residual,
    drive_term_for_peak_shift,
    excitation_number,
    hysteresis_sweep,
    solve_shift_cubic,
    sweep_to_csv,
)
from .spectrum import (
    ProbeTrace,
    SpectrumMap,
    load_map_binary,
    load_map_csv,
    s21_linear,
    save_map_binary,
    save_map_csv,
    synthesize_map,
)
from .extract import (
    Dip,
    DipSet,
    ShiftCurve,
    assign_modes,
    extract_shift_curves,
    find_branch_crossings,
    find_dips,
    load_curve_csv,
    load_vna_csv_dir,
    save_curve_csv,
    subtract_linear_background,
    to_detuning_axis,
)
from .fit import (
    FitResult,
    RatioReport,
    derived_self_kerr_ratio,
    fit_driven_curve,
    fit_ratio,
    ratio_stability_report,
)
from . import presets

__version__ = "0.1.0"
