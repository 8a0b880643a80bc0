"""Parameter model for a driven cavity coupled to two Kerr-nonlinear magnon modes.

Holds the full system parameterization (mode frequencies, linewidths, couplings,
Kerr coefficients, drive and field calibration), the closed-form material
formulas for the anisotropy-induced self-Kerr and overlap-induced cross-Kerr
coefficients, and the magnet-current to mode-frequency calibration.

Unit convention: every frequency-like quantity (mode frequencies, linewidths,
detunings, couplings, Kerr coefficients per excitation) is a *linear* frequency
in MHz; angular 2*pi factors are absorbed here, at construction. Powers are in
dBm externally and mW internally, currents in A, fields in T.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

TWO_PI = 2.0 * math.pi

# CODATA reduced Planck constant, J s
HBAR = 1.054571817e-34
# vacuum permeability, T m / A
MU0 = 4.0e-7 * math.pi


class Mode(str, Enum):
    """The three modes of the system."""

    CAVITY = "cavity"
    KITTEL = "kittel"
    HMS = "hms"


class SweepDirection(str, Enum):
    """Direction of a control-parameter sweep."""

    UP = "up"
    DOWN = "down"


def dbm_to_mw(power_dbm: float) -> float:
    """Convert a power level from dBm to mW."""
    return 10.0 ** (power_dbm / 10.0)


@dataclass(frozen=True)
class ModeParams:
    """One mode of the coupled system.

    bare_frequency : linear frequency in MHz
    linewidth      : FWHM linear frequency in MHz
    """

    label: Mode
    bare_frequency: float
    linewidth: float

    def __post_init__(self):
        if self.bare_frequency <= 0:
            raise ValueError(f"{self.label.value}: bare_frequency must be > 0")
        if self.linewidth <= 0:
            raise ValueError(f"{self.label.value}: linewidth must be > 0")


@dataclass(frozen=True)
class CouplingSet:
    """Coherent coupling strengths in MHz (magnitudes).

    g_k  : Kittel mode to cavity
    g_h  : HMS mode to cavity
    g_kh : Kittel mode to HMS mode
    """

    g_k: float
    g_h: float
    g_kh: float

    def __post_init__(self):
        if min(self.g_k, self.g_h, self.g_kh) < 0:
            raise ValueError("coupling strengths must be >= 0")


@dataclass(frozen=True)
class KerrSet:
    """Kerr coefficients in MHz per excitation, signed.

    For a single-crystal sample all three derive from the same anisotropy
    and mode-overlap sign, so they must share one sign.
    """

    k_self_kittel: float
    k_self_hms: float
    k_cross: float

    def __post_init__(self):
        signs = {np.sign(k) for k in
                 (self.k_self_kittel, self.k_self_hms, self.k_cross)}
        signs.discard(0.0)
        if len(signs) > 1:
            raise ValueError("Kerr coefficients must share a single sign")


@dataclass(frozen=True)
class MaterialParams:
    """Crystal and geometry parameters feeding the coefficient formulas.

    anisotropy_constant      : first-order magnetocrystalline constant, J/m^3
    gyromagnetic_ratio       : electron gyromagnetic ratio, rad s^-1 T^-1
    saturation_magnetization : A/m
    sphere_volume            : m^3
    overlap_coefficient      : dimensionless mode-overlap measure (signed)
    total_spin_kittel        : total spin quanta participating in the Kittel mode
    total_spin_hms           : total spin quanta participating in the HMS mode
    """

    anisotropy_constant: float
    gyromagnetic_ratio: float
    saturation_magnetization: float
    sphere_volume: float
    overlap_coefficient: float
    total_spin_kittel: float
    total_spin_hms: float
    vacuum_permeability: float = MU0
    hbar: float = HBAR

    def __post_init__(self):
        if self.sphere_volume <= 0:
            raise ValueError("sphere_volume must be > 0")
        if self.saturation_magnetization <= 0:
            raise ValueError("saturation_magnetization must be > 0")
        if not (self.total_spin_kittel > self.total_spin_hms > 0):
            raise ValueError(
                "expected total_spin_kittel > total_spin_hms > 0 "
                "(the uniform mode carries more spin moments)")


@dataclass(frozen=True)
class DriveConfig:
    """A single-tone drive applied to exactly one magnon mode.

    drive_frequency   : MHz
    drive_power_dbm   : dBm
    efficiency_kittel : drive-efficiency coefficient c_k, MHz^3/mW, signed
    efficiency_hms    : drive-efficiency coefficient c_h, MHz^3/mW, signed
    target            : which mode the drive addresses

    The efficiency coefficients lump antenna coupling, drive detuning response
    and the Kerr coefficient into a single constant, so they carry the Kerr
    sign: a negative (red-shifting) Kerr mode has negative efficiency.
    """

    drive_frequency: float
    drive_power_dbm: float
    efficiency_kittel: float
    efficiency_hms: float
    target: Mode

    def __post_init__(self):
        if self.target not in (Mode.KITTEL, Mode.HMS):
            raise ValueError("drive target must be the Kittel or the HMS mode")
        if self.drive_frequency <= 0:
            raise ValueError("drive_frequency must be > 0")

    @property
    def power_mw(self) -> float:
        return dbm_to_mw(self.drive_power_dbm)

    def efficiency(self) -> float:
        """Efficiency coefficient of the targeted mode, MHz^3/mW."""
        if self.target is Mode.KITTEL:
            return self.efficiency_kittel
        return self.efficiency_hms

    def drive_term(self) -> float:
        """Cubic forcing term c * P_d in MHz^3."""
        return self.efficiency() * self.power_mw


@dataclass(frozen=True)
class FieldCalibration:
    """Linear magnet-current to mode-frequency calibration.

    current_to_field_slope  : T/A
    field_offset            : T at zero current
    kittel_slope            : MHz/T (gyromagnetic ratio over 2*pi)
    hms_offset_from_kittel  : fixed HMS-Kittel detuning at the operating
                              point, MHz
    """

    current_to_field_slope: float
    field_offset: float
    kittel_slope: float
    hms_offset_from_kittel: float

    def __post_init__(self):
        if self.kittel_slope <= 0:
            raise ValueError("kittel_slope must be > 0")


@dataclass(frozen=True)
class SystemConfig:
    """Full parameterization of the three-mode driven system.

    kappa_ext is the total external (measurement-port) coupling of the cavity
    in MHz; None selects the default kappa_tot / 3 (two coupling ports plus
    internal loss, equal split).
    """

    modes: tuple[ModeParams, ModeParams, ModeParams]
    couplings: CouplingSet
    kerr: KerrSet
    calibration: FieldCalibration
    material: MaterialParams | None = None
    kappa_ext: float | None = None
    dispersive_threshold: float = 10.0

    def __post_init__(self):
        labels = [m.label for m in self.modes]
        if sorted(labels, key=lambda x: x.value) != sorted(
                [Mode.CAVITY, Mode.KITTEL, Mode.HMS], key=lambda x: x.value):
            raise ValueError("modes must carry the labels cavity, kittel, hms "
                             "exactly once each")
        if self.kappa_ext is not None:
            if not (0.0 <= self.kappa_ext <= self.mode(Mode.CAVITY).linewidth):
                raise ValueError("kappa_ext must satisfy 0 <= kappa_ext <= kappa_tot")

    def mode(self, label: Mode) -> ModeParams:
        for m in self.modes:
            if m.label is label:
                return m
        raise KeyError(label)

    @property
    def cavity(self) -> ModeParams:
        return self.mode(Mode.CAVITY)

    @property
    def kittel(self) -> ModeParams:
        return self.mode(Mode.KITTEL)

    @property
    def hms(self) -> ModeParams:
        return self.mode(Mode.HMS)

    def external_coupling(self) -> float:
        """Cavity external coupling in MHz (defaulted if not configured)."""
        if self.kappa_ext is None:
            return self.cavity.linewidth / 3.0
        return self.kappa_ext

    def kerr_ratio(self, target: Mode) -> float:
        """Cross-to-self Kerr ratio for a drive on ``target``."""
        k_self = (self.kerr.k_self_kittel if target is Mode.KITTEL
                  else self.kerr.k_self_hms)
        if k_self == 0.0:
            return 0.0
        return self.kerr.k_cross / k_self


# ---------------------------------------------------------------------------
# coefficient formulas


def kerr_self_from_material(m: MaterialParams) -> float:
    """Self-Kerr coefficient of the uniform-precession mode, MHz per excitation.

    Evaluates the closed-form anisotropy result for a sphere biased along the
    [110] crystal axis,

        K_self = 13 * hbar * K_an * gamma_e^2 / (16 * M^2 * V),

    converted from angular (rad/s) to linear MHz. The sign follows the sign of
    the anisotropy constant; for the [110] bias of YIG it is negative.
    """
    if m.sphere_volume <= 0 or m.saturation_magnetization <= 0:
        raise ValueError("volume and magnetization must be positive")
    k_angular = (13.0 * m.hbar * m.anisotropy_constant
                 * m.gyromagnetic_ratio ** 2
                 / (16.0 * m.saturation_magnetization ** 2 * m.sphere_volume))
    return k_angular / TWO_PI / 1e6


@dataclass(frozen=True)
class CrossKerrResult:
    """Cross-Kerr coefficient and its companions, all in MHz.

    k_cross            : MHz per excitation, signed
    g_kh               : magnon-magnon coherent coupling, signed as the formula
                         gives it (sign of the overlap coefficient)
    delta_omega_kittel : frequency renormalization of the Kittel mode
    delta_omega_hms    : frequency renormalization of the HMS mode
    """

    k_cross: float
    g_kh: float
    delta_omega_kittel: float
    delta_omega_hms: float


def cross_kerr_from_overlap(m: MaterialParams) -> CrossKerrResult:
    """Cross-Kerr coefficient and derived quantities from the mode overlap.

    The overlap exchange term yields

        K_cross = beta * hbar * gamma_e^2 / V             (per excitation)
        g_kh    = K_cross * sqrt(S_K * S_H)               (coherent coupling)
        d_omega_k = -K_cross * S_H,  d_omega_h = -K_cross * S_K

    where S_K, S_H are the total spin quanta of the two modes. All outputs in
    linear MHz.
    """
    if m.sphere_volume <= 0:
        raise ValueError("volume must be positive")
    if m.total_spin_kittel < 0 or m.total_spin_hms < 0:
        raise ValueError("total spin numbers must be non-negative")
    k_cross = (m.overlap_coefficient * m.hbar * m.gyromagnetic_ratio ** 2
               / m.sphere_volume) / TWO_PI / 1e6
    g_kh = k_cross * math.sqrt(m.total_spin_kittel * m.total_spin_hms)
    return CrossKerrResult(
        k_cross=k_cross,
        g_kh=g_kh,
        delta_omega_kittel=-k_cross * m.total_spin_hms,
        delta_omega_hms=-k_cross * m.total_spin_kittel,
    )


@dataclass(frozen=True)
class DispersiveReport:
    """Detuning-to-coupling diagnostics for the two coupled pairs.

    lam_ck / lam_hk     : cavity-Kittel and HMS-Kittel detunings, MHz
    ratio_ck / ratio_hk : |detuning| / coupling (inf when uncoupled)
    shift_ck / shift_hk : dispersive pulls g^2 / detuning, MHz
    dispersive_ck/_hk   : True when the ratio clears the configured threshold
    infinite_shift      : True when a detuning is exactly zero (shift is inf)
    """

    lam_ck: float
    lam_hk: float
    ratio_ck: float
    ratio_hk: float
    shift_ck: float
    shift_hk: float
    dispersive_ck: bool
    dispersive_hk: bool
    infinite_shift: bool


def dispersive_check(cfg: SystemConfig) -> DispersiveReport:
    """Check how deep in the dispersive regime the configured system sits.

    Uses the static mode frequencies of ``cfg``. A pair with zero detuning is
    reported with an infinite-shift flag instead of raising.
    """
    lam_ck = cfg.cavity.bare_frequency - cfg.kittel.bare_frequency
    lam_hk = cfg.hms.bare_frequency - cfg.kittel.bare_frequency
    thr = cfg.dispersive_threshold

    def pair(lam: float, g: float) -> tuple[float, float, bool]:
        if g == 0.0:
            return math.inf, 0.0, True
        if lam == 0.0:
            return 0.0, math.inf, False
        ratio = abs(lam) / g
        return ratio, g * g / lam, ratio >= thr

    ratio_ck, shift_ck, disp_ck = pair(lam_ck, cfg.couplings.g_k)
    ratio_hk, shift_hk, disp_hk = pair(lam_hk, cfg.couplings.g_kh)
    return DispersiveReport(
        lam_ck=lam_ck, lam_hk=lam_hk,
        ratio_ck=ratio_ck, ratio_hk=ratio_hk,
        shift_ck=shift_ck, shift_hk=shift_hk,
        dispersive_ck=disp_ck, dispersive_hk=disp_hk,
        infinite_shift=math.isinf(shift_ck) or math.isinf(shift_hk),
    )


# ---------------------------------------------------------------------------
# current <-> frequency calibration


def mode_frequencies_at_current(cal: FieldCalibration, current):
    """Bare magnon branch frequencies at a magnet current.

    Linear Zeeman mapping: f_kittel = kittel_slope * (slope * I + offset) and
    f_hms = f_kittel + hms_offset_from_kittel. Accepts scalars or arrays.

    Returns
    -------
    (f_kittel, f_hms) in MHz.
    """
    current = np.asarray(current, dtype=float)
    f_k = cal.kittel_slope * (
        cal.current_to_field_slope * current + cal.field_offset)
    f_h = f_k + cal.hms_offset_from_kittel
    if f_k.ndim == 0:
        return float(f_k), float(f_h)
    return f_k, f_h


def current_for_frequency(cal: FieldCalibration, f_kittel):
    """Magnet current at which the Kittel branch sits at ``f_kittel`` MHz."""
    if cal.current_to_field_slope == 0.0:
        raise ValueError("current_to_field_slope is zero; branch is constant")
    f_kittel = np.asarray(f_kittel, dtype=float)
    current = ((f_kittel / cal.kittel_slope) - cal.field_offset) \
        / cal.current_to_field_slope
    if current.ndim == 0:
        return float(current)
    return current


# ---------------------------------------------------------------------------
# config file I/O (TOML)


def _mode_from_dict(label: Mode, d: dict) -> ModeParams:
    return ModeParams(label=label,
                      bare_frequency=float(d["bare_frequency"]),
                      linewidth=float(d["linewidth"]))


def config_from_dict(data: dict) -> SystemConfig:
    """Build a SystemConfig from a parsed config mapping.

    The layout mirrors the dataclass fields; see ``demos/`` or the README for
    a complete example. Raises KeyError/ValueError on missing or invalid keys.
    """
    modes = tuple(_mode_from_dict(label, data["modes"][label.value])
                  for label in (Mode.CAVITY, Mode.KITTEL, Mode.HMS))
    couplings = CouplingSet(**{k: float(v)
                               for k, v in data["couplings"].items()})
    kerr = KerrSet(**{k: float(v) for k, v in data["kerr"].items()})
    calibration = FieldCalibration(**{k: float(v)
                                      for k, v in data["calibration"].items()})
    material = None
    if "material" in data:
        material = MaterialParams(**{k: float(v)
                                     for k, v in data["material"].items()})
    kappa_ext = data.get("kappa_ext")
    return SystemConfig(
        modes=modes, couplings=couplings, kerr=kerr, calibration=calibration,
        material=material,
        kappa_ext=None if kappa_ext is None else float(kappa_ext),
        dispersive_threshold=float(data.get("dispersive_threshold", 10.0)),
    )


def drive_from_dict(data: dict) -> DriveConfig:
    """Build a DriveConfig from the ``[drive]`` table of a config mapping."""
    return DriveConfig(
        drive_frequency=float(data["drive_frequency"]),
        drive_power_dbm=float(data["drive_power_dbm"]),
        efficiency_kittel=float(data["efficiency_kittel"]),
        efficiency_hms=float(data["efficiency_hms"]),
        target=Mode(str(data["target"]).lower()),
    )


def load_config_dict(path: str | Path) -> dict:
    """Read a TOML config file into a plain dict."""
    with open(path, "rb") as f:
        return tomllib.load(f)


def load_system_config(path: str | Path) -> SystemConfig:
    """Read a TOML config file into a SystemConfig."""
    return config_from_dict(load_config_dict(path))


def config_to_dict(cfg: SystemConfig, drive: DriveConfig | None = None) -> dict:
    """Serialize a SystemConfig (and optional drive) back to a plain mapping."""
    data: dict = {
        "modes": {m.label.value: {"bare_frequency": m.bare_frequency,
                                  "linewidth": m.linewidth}
                  for m in cfg.modes},
        "couplings": {"g_k": cfg.couplings.g_k, "g_h": cfg.couplings.g_h,
                      "g_kh": cfg.couplings.g_kh},
        "kerr": {"k_self_kittel": cfg.kerr.k_self_kittel,
                 "k_self_hms": cfg.kerr.k_self_hms,
                 "k_cross": cfg.kerr.k_cross},
        "calibration": {
            "current_to_field_slope": cfg.calibration.current_to_field_slope,
            "field_offset": cfg.calibration.field_offset,
            "kittel_slope": cfg.calibration.kittel_slope,
            "hms_offset_from_kittel": cfg.calibration.hms_offset_from_kittel,
        },
        "dispersive_threshold": cfg.dispersive_threshold,
    }
    if cfg.kappa_ext is not None:
        data["kappa_ext"] = cfg.kappa_ext
    if cfg.material is not None:
        m = cfg.material
        data["material"] = {
            "anisotropy_constant": m.anisotropy_constant,
            "gyromagnetic_ratio": m.gyromagnetic_ratio,
            "saturation_magnetization": m.saturation_magnetization,
            "sphere_volume": m.sphere_volume,
            "overlap_coefficient": m.overlap_coefficient,
            "total_spin_kittel": m.total_spin_kittel,
            "total_spin_hms": m.total_spin_hms,
            "vacuum_permeability": m.vacuum_permeability,
            "hbar": m.hbar,
        }
    if drive is not None:
        data["drive"] = {
            "drive_frequency": drive.drive_frequency,
            "drive_power_dbm": drive.drive_power_dbm,
            "efficiency_kittel": drive.efficiency_kittel,
            "efficiency_hms": drive.efficiency_hms,
            "target": drive.target.value,
        }
    return data
