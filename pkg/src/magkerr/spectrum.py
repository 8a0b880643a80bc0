"""Transmission-map synthesis for the driven three-mode system.

Combines the steady-state Kerr shifts with the linear two-port input-output
response of a cavity dressed by two magnon modes. The drive enters only
through the steady-state shifts of the mode frequencies (the probe is assumed
much weaker than the drive); the dispersive pulls stay inside the pole
structure of the linear response.
"""

from __future__ import annotations

import csv
import io
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .model import DriveConfig, Mode, SystemConfig, mode_frequencies_at_current
from .steady_state import hysteresis_sweep
from .model import SweepDirection

BINARY_MAGIC = b"MKS21MAP"
BINARY_HEADER = struct.Struct("<8sII4f")  # magic, dims, grid bounds: 32 bytes
assert BINARY_HEADER.size == 32


@dataclass(frozen=True)
class ProbeTrace:
    """|S21|^2 over the probe grid at one magnet current."""

    probe_frequencies: np.ndarray
    s21_sq: np.ndarray
    control: float

    def __post_init__(self):
        if self.probe_frequencies.size == 0:
            raise ValueError("empty probe grid")
        if np.any(np.diff(self.probe_frequencies) <= 0):
            raise ValueError("probe grid must be strictly increasing")
        if self.s21_sq.shape != self.probe_frequencies.shape:
            raise ValueError("trace and grid shapes differ")


@dataclass(frozen=True)
class SpectrumMap:
    """|S21|^2 on a (control current x probe frequency) grid.

    All traces share the probe grid. When the map was synthesized with a
    drive, kittel_eff/hms_eff hold the shifted mode frequencies that generated
    each trace (in-memory ground truth only; not serialized).
    """

    controls: np.ndarray
    probe_frequencies: np.ndarray
    s21_sq: np.ndarray  # shape (n_controls, n_probe)
    drive: DriveConfig | None = None
    kittel_eff: np.ndarray | None = None
    hms_eff: np.ndarray | None = None

    def __post_init__(self):
        if self.controls.size == 0 or self.probe_frequencies.size == 0:
            raise ValueError("empty grid")
        if np.any(np.diff(self.probe_frequencies) <= 0):
            raise ValueError("probe grid must be strictly increasing")
        if self.s21_sq.shape != (self.controls.size,
                                 self.probe_frequencies.size):
            raise ValueError("map shape does not match grids")

    def trace(self, i: int) -> ProbeTrace:
        return ProbeTrace(probe_frequencies=self.probe_frequencies,
                          s21_sq=self.s21_sq[i],
                          control=float(self.controls[i]))

    def traces(self):
        for i in range(self.controls.size):
            yield self.trace(i)


def s21_linear(probe_frequency, cfg: SystemConfig,
               f_kittel_eff: float, f_hms_eff: float) -> np.ndarray:
    """Complex two-port transmission of the dressed cavity.

    S21(f) = (kappa_ext/2) / [ i(f_c - f) + kappa_tot/2
                               + g_k^2 / (i(f_k - f) + gamma_k/2)
                               + g_h^2 / (i(f_h - f) + gamma_h/2) ]

    with the external coupling split equally over the two measurement ports,
    so the resonant uncoupled peak is |S21| = kappa_ext/kappa_tot <= 1.
    Accepts a scalar or array probe frequency (MHz).
    """
    f = np.asarray(probe_frequency, dtype=float)
    cav = cfg.cavity
    kappa_ext = cfg.external_coupling()
    den = (1j * (cav.bare_frequency - f) + cav.linewidth / 2.0
           + cfg.couplings.g_k ** 2
           / (1j * (f_kittel_eff - f) + cfg.kittel.linewidth / 2.0)
           + cfg.couplings.g_h ** 2
           / (1j * (f_hms_eff - f) + cfg.hms.linewidth / 2.0))
    return (kappa_ext / 2.0) / den


def effective_branches(cfg: SystemConfig, currents,
                       drive: DriveConfig | None):
    """Bare and Kerr-shifted branch frequencies over a current grid.

    Returns (f_kittel, f_hms, f_kittel_eff, f_hms_eff) arrays. With a drive,
    the targeted mode carries the swept-branch self-Kerr shift (branch
    selection follows the acquisition order of ``currents``) and the other
    mode the cross-Kerr shift. Zero self-Kerr on the target disables the
    drive entirely: shifts come only from Kerr terms.
    """
    currents = np.asarray(currents, dtype=float)
    f_k, f_h = mode_frequencies_at_current(cfg.calibration, currents)
    f_k = np.atleast_1d(np.asarray(f_k, dtype=float))
    f_h = np.atleast_1d(np.asarray(f_h, dtype=float))
    if drive is None:
        return f_k, f_h, f_k.copy(), f_h.copy()

    k_self = (cfg.kerr.k_self_kittel if drive.target is Mode.KITTEL
              else cfg.kerr.k_self_hms)
    if k_self == 0.0:
        return f_k, f_h, f_k.copy(), f_h.copy()
    term = drive.drive_term()
    if term != 0.0 and np.sign(drive.efficiency()) != np.sign(k_self):
        raise ValueError(
            "drive efficiency must carry the Kerr sign "
            f"(efficiency {drive.efficiency()}, self-Kerr {k_self})")

    target_bare = f_k if drive.target is Mode.KITTEL else f_h
    gamma = (cfg.kittel.linewidth if drive.target is Mode.KITTEL
             else cfg.hms.linewidth)
    detuning = target_bare - drive.drive_frequency
    direction = (SweepDirection.UP if detuning.size < 2
                 or detuning[1] > detuning[0] else SweepDirection.DOWN)
    sweep = hysteresis_sweep(gamma, term, detuning, direction,
                             cross_ratio=cfg.kerr_ratio(drive.target),
                             kerr=k_self)
    shift_self = sweep.selected_shifts()
    shift_cross = cfg.kerr_ratio(drive.target) * shift_self
    if drive.target is Mode.KITTEL:
        return f_k, f_h, f_k + shift_self, f_h + shift_cross
    return f_k, f_h, f_k + shift_cross, f_h + shift_self


def synthesize_map(cfg: SystemConfig, currents, probe_frequencies,
                   drive: DriveConfig | None = None,
                   workers: int | None = None) -> SpectrumMap:
    """Synthesize a transmission map over a current sweep.

    For each current the bare branch frequencies come from the calibration;
    with a drive, the steady-state shift of the targeted branch is solved on
    the sweep-selected branch and the cross shift applied to the other
    branch, and the linear response is evaluated over the probe grid.

    Per-current traces are pure; with ``workers`` > 1 they are computed on a
    thread pool, assembled in grid order so the result is identical for any
    worker count.
    """
    currents = np.atleast_1d(np.asarray(currents, dtype=float))
    probe = np.asarray(probe_frequencies, dtype=float)
    if currents.size == 0 or probe.size == 0:
        raise ValueError("current and probe grids must be non-empty")

    f_k, f_h, f_k_eff, f_h_eff = effective_branches(cfg, currents, drive)

    def one_trace(i: int) -> np.ndarray:
        try:
            amp = s21_linear(probe, cfg, float(f_k_eff[i]), float(f_h_eff[i]))
        except Exception as exc:
            raise RuntimeError(
                f"trace synthesis failed at current {currents[i]} A") from exc
        return np.abs(amp) ** 2

    if workers is not None and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one_trace, range(currents.size)))
    else:
        rows = [one_trace(i) for i in range(currents.size)]

    return SpectrumMap(controls=currents, probe_frequencies=probe,
                       s21_sq=np.vstack(rows), drive=drive,
                       kittel_eff=f_k_eff, hms_eff=f_h_eff)


# ---------------------------------------------------------------------------
# serialization

MAP_CSV_COLUMNS = ["current", "probe_MHz", "s21_sq"]


def save_map_csv(m: SpectrumMap, path: str | Path,
                 header_lines: Sequence[str] = ()) -> None:
    """Write a map in long form: one row per (current, probe) point."""
    with open(path, "w", newline="") as f:
        for line in header_lines:
            f.write(f"# {line}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(MAP_CSV_COLUMNS)
        for i, c in enumerate(m.controls):
            for j, p in enumerate(m.probe_frequencies):
                writer.writerow([repr(float(c)), repr(float(p)),
                                 repr(float(m.s21_sq[i, j]))])


def load_map_csv(path: str | Path) -> SpectrumMap:
    """Read a long-form map CSV back into a SpectrumMap."""
    controls, probes, values = [], [], []
    with open(path, newline="") as f:
        rows = (r for r in f if not r.startswith("#"))
        reader = csv.reader(rows)
        header = next(reader)
        if [h.strip() for h in header] != MAP_CSV_COLUMNS:
            raise ValueError(f"unexpected map CSV header: {header}")
        for row in reader:
            controls.append(float(row[0]))
            probes.append(float(row[1]))
            values.append(float(row[2]))
    c_grid = np.unique(controls)
    p_grid = np.unique(probes)
    if c_grid.size * p_grid.size != len(values):
        raise ValueError("map CSV is not a complete grid")
    data = np.full((c_grid.size, p_grid.size), np.nan)
    ci = np.searchsorted(c_grid, controls)
    pi = np.searchsorted(p_grid, probes)
    data[ci, pi] = values
    return SpectrumMap(controls=c_grid, probe_frequencies=p_grid,
                       s21_sq=data)


def save_map_binary(m: SpectrumMap, path: str | Path) -> None:
    """Write the compact binary grid format.

    Layout: a 32-byte header (magic ``MKS21MAP``, uint32 control and probe
    dims, float32 grid bounds), then little-endian float64 payload: the
    control grid, the probe grid, and the |S21|^2 matrix row-major (one row
    per control). The float32 bounds are informative; exact grids live in
    the payload.
    """
    header = BINARY_HEADER.pack(
        BINARY_MAGIC, m.controls.size, m.probe_frequencies.size,
        float(m.controls[0]), float(m.controls[-1]),
        float(m.probe_frequencies[0]), float(m.probe_frequencies[-1]))
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(m.controls, dtype="<f8").tobytes())
        f.write(np.ascontiguousarray(m.probe_frequencies,
                                     dtype="<f8").tobytes())
        f.write(np.ascontiguousarray(m.s21_sq, dtype="<f8").tobytes())


def load_map_binary(path: str | Path) -> SpectrumMap:
    """Read the compact binary grid format."""
    raw = Path(path).read_bytes()
    if len(raw) < BINARY_HEADER.size:
        raise ValueError("truncated map file")
    magic, n_c, n_p, *_bounds = BINARY_HEADER.unpack_from(raw, 0)
    if magic != BINARY_MAGIC:
        raise ValueError(f"not a map grid file (magic {magic!r})")
    expected = BINARY_HEADER.size + 8 * (n_c + n_p + n_c * n_p)
    if len(raw) != expected:
        raise ValueError(f"map file size {len(raw)} != expected {expected}")
    off = BINARY_HEADER.size
    controls = np.frombuffer(raw, dtype="<f8", count=n_c, offset=off).copy()
    off += 8 * n_c
    probe = np.frombuffer(raw, dtype="<f8", count=n_p, offset=off).copy()
    off += 8 * n_p
    data = np.frombuffer(raw, dtype="<f8", count=n_c * n_p,
                         offset=off).reshape(n_c, n_p).copy()
    return SpectrumMap(controls=controls, probe_frequencies=probe,
                       s21_sq=data)
